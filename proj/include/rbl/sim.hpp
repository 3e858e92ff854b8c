#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rbl/ingest.hpp"
#include "rbl/lfdr.hpp"
#include "rbl/model_core.hpp"
#include "rbl/selection.hpp"

namespace rbl {

// How switch costs are derived from profits in synthetic cohorts.
//   constant      c = cost_ratio * E[profit] = cost_ratio for every test
//   proportional  c = cost_ratio * profit
enum class CostModel { constant, proportional };

std::string to_string(CostModel m);
CostModel parse_cost_model(const std::string& text);

struct SimConfig {
  std::size_t m = 2000;
  std::size_t reps = 400;
  std::int64_t n_per_arm = 5000;
  double pi0 = 0.8;
  double effect_size = 0.01;
  double beta_shape2 = 1.0;
  double gamma_sd = 1.0;  // 0 means unweighted, profit = 1
  double alpha = 0.05;
  double cost_ratio = 0.02;
  CostModel cost_model = CostModel::constant;
  // p0 is resampled until p0 - effect_size and p0 + effect_size both stay
  // inside (rate_floor, 1 - rate_floor).
  double rate_floor = 0.001;
  std::uint64_t seed = 1;
  LfdrOptions lfdr;
  // Adds a column for RBL run on the analytic lfdr of the generating mixture.
  bool oracle_column = false;

  void validate() const;
};

using Rng = std::mt19937_64;

// Stream for replication `rep`: mt19937_64 seeded through
// std::seed_seq{seed_lo32, seed_hi32, rep_lo32, rep_hi32}.
Rng replication_rng(std::uint64_t seed, std::uint64_t rep);

struct Cohort {
  std::vector<ExperimentRecord> records;
  std::vector<GroundTruth> truth;
};

Cohort generate_cohort(const SimConfig& cfg, Rng& rng);

struct Metrics {
  double fdr = 0.0;  // cost-weighted false discovery proportion
  double power_pct = 0.0;
  double profit_pct = 0.0;
  double net_profit = 0.0;
  double rejections = 0.0;
};

Metrics compute_metrics(std::span<const std::uint8_t> decisions, std::span<const GroundTruth> truth,
                        std::span<const ExperimentRecord> recs);
inline Metrics compute_metrics(const DecisionReport& report, std::span<const GroundTruth> truth,
                               std::span<const ExperimentRecord> recs) {
  return compute_metrics(report.decisions, truth, recs);
}

// Analytic two-group model of the standardized statistic under the
// configured generating process, tabulated on [-lim, lim].
LfdrModel oracle_model(const SimConfig& cfg, std::size_t grid_points = 4096, double lim = 14.0);

struct StudyColumn {
  Procedure procedure;
  bool oracle = false;

  std::string label() const;
};

struct MetricsSummary {
  Metrics mean;
  Metrics se;  // standard error of the mean; NaN when reps < 2
};

struct StudyResult {
  SimConfig config;
  std::vector<StudyColumn> columns;
  std::vector<MetricsSummary> summary;            // one per column
  std::vector<std::vector<Metrics>> per_rep;      // [rep][column]
};

// Replications run OpenMP-parallel; results are reduced in replication
// order, so the output does not depend on the thread count.
StudyResult run_study(const SimConfig& cfg, std::span<const Procedure> procedures);

namespace serial {
StudyResult run_study(const SimConfig& cfg, std::span<const Procedure> procedures);
}

// Experiment export drawn from the same generating process, for exercising
// the ingestion path. Each experiment has one to three variations sharing
// its control arm (probabilities 0.8 / 0.15 / 0.05 unless `multi_variation`
// is false); `truth` is aligned with `rows`.
struct SyntheticExport {
  std::vector<RawVariationRow> rows;
  std::vector<GroundTruth> truth;
};

SyntheticExport make_synthetic_export(const SimConfig& cfg, bool multi_variation = true);

// Schema columns followed by true_p0, true_p1, true_lift (ignored by the parser).
std::string write_csv_with_truth(const SyntheticExport& data);

// (gamma_sd, beta_shape2) cells of the reference comparison table.
std::vector<std::pair<double, double>> table1_grid();

std::string study_csv(std::span<const StudyResult> results);
std::string study_text(std::span<const StudyResult> results);

}  // namespace rbl
