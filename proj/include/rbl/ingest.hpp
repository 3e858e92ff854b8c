#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbl/lfdr.hpp"
#include "rbl/model_core.hpp"
#include "rbl/selection.hpp"

namespace rbl {

// One treatment-vs-control comparison from an experiment export.
//
// CSV schema (header row required, column order free, unknown columns ignored):
//   experiment_id, variation_id, visitors_control, conversions_control,
//   visitors_treatment, conversions_treatment[, profit][, cost]
struct RawVariationRow {
  std::string experiment_id;
  std::string variation_id;
  std::int64_t visitors_control = 0;
  std::int64_t conversions_control = 0;
  std::int64_t visitors_treatment = 0;
  std::int64_t conversions_treatment = 0;
  std::optional<double> profit;
  std::optional<double> cost;

  std::string test_id() const { return experiment_id + ":" + variation_id; }
  bool operator==(const RawVariationRow&) const = default;
};

struct ParseDiagnostic {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string message;
};

struct ParseResult {
  std::vector<RawVariationRow> rows;
  std::vector<ParseDiagnostic> diagnostics;
  std::size_t data_lines = 0;
};

// Malformed rows are skipped with a diagnostic; throws DataError when more
// than 10% of the data lines are malformed or required columns are missing.
ParseResult parse_csv_text(std::string_view text);
ParseResult parse_csv(const std::filesystem::path& path);

std::string write_csv(std::span<const RawVariationRow> rows);

// Keeps each experiment with probability 1 / (its number of variations); a
// kept experiment contributes one uniformly chosen variation. Experiments are
// visited in order of first appearance.
std::vector<RawVariationRow> subsample_variations(std::span<const RawVariationRow> rows, std::uint64_t seed);

// Missing profit and cost become 1.0.
std::vector<ExperimentRecord> to_records(std::span<const RawVariationRow> rows);

// Replaces every profit with a Gamma(1/sd^2, rate 1/sd^2) draw.
void apply_synthetic_profits(std::span<ExperimentRecord> recs, double gamma_sd, std::uint64_t seed);

struct RunConfig {
  double alpha = 0.05;
  std::vector<Procedure> procedures{std::begin(kAllProcedures), std::end(kAllProcedures)};
  LfdrOptions lfdr;
  std::uint64_t seed = 1;
  bool subsample = false;
  std::optional<double> synthetic_profit_sd;

  void validate() const;
};

struct ProcedureSummary {
  Procedure procedure;
  std::size_t rejections = 0;
  double estimated_lift = 0.0;  // sum over rejections of profit * observed lift
  double lift_per_rejection = 0.0;
};

struct Analysis {
  RunConfig config;
  std::size_t input_rows = 0;
  std::vector<ExperimentRecord> records;
  std::vector<TestStatistic> stats;
  LfdrModel model;
  std::vector<KnapsackItem> items;  // RBL items, kept for diagnostics
  std::vector<DecisionReport> reports;
  std::vector<ProcedureSummary> summary;
  std::size_t low_traffic = 0;
};

Analysis analyze(std::span<const RawVariationRow> rows, const RunConfig& cfg);

}  // namespace rbl
