#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rbl/lfdr.hpp"
#include "rbl/model_core.hpp"

namespace rbl {

enum class Procedure { uncorrected, bh, sc, bcds, rbl };

inline constexpr Procedure kAllProcedures[] = {Procedure::uncorrected, Procedure::bh, Procedure::sc,
                                               Procedure::bcds, Procedure::rbl};

std::string to_string(Procedure p);
// Display names used in study tables.
std::string display_name(Procedure p);
Procedure parse_procedure(const std::string& text);
// "all" or a comma-separated list of names.
std::vector<Procedure> parse_procedure_list(const std::string& text);

// Cells of the decision box, keyed on the signs of value and weight.
//   I   value > 0, weight < 0   always reject
//   II  value > 0, weight > 0   excluded at baseline, ranked for inclusion
//   III value <= 0, weight > 0  always accept
//   IV  value <= 0, weight < 0  included at baseline, ranked for removal
// weight == 0 goes to I when value > 0 and to III otherwise.
enum class Quadrant { I, II, III, IV };

std::string to_string(Quadrant q);

struct KnapsackItem {
  std::size_t index = 0;
  std::string test_id;
  double value = 0.0;   // profit-weighted value of rejecting
  double lfdr = 1.0;    // lfdr variant that prices the weight
  double cost = 1.0;
  double weight = 0.0;  // cost * (lfdr - alpha)
  double ratio = 0.0;   // value / weight on ranked quadrants, else 0
  Quadrant quadrant = Quadrant::III;
  bool baseline_decision = false;

  bool ranked() const { return quadrant == Quadrant::II || quadrant == Quadrant::IV; }
};

KnapsackItem make_item(std::size_t index, std::string test_id, double value, double lfdr, double cost, double alpha);

// RBL items: value = profit * value_statistic(h, sigma), weight priced with
// weight_lfdr.
std::vector<KnapsackItem> build_items(std::span<const TestStatistic> stats, std::span<const ExperimentRecord> recs,
                                      const LfdrModel& model, double alpha);

// Weighted-FDR baseline items: value = profit * (1 - l), weight priced with
// l = weight_lfdr.
std::vector<KnapsackItem> build_bcds_items(std::span<const TestStatistic> stats,
                                           std::span<const ExperimentRecord> recs, const LfdrModel& model,
                                           double alpha);

// Sum of -weight over items with negative weight.
double capacity(std::span<const KnapsackItem> items);

struct DecisionReport {
  Procedure procedure = Procedure::rbl;
  std::vector<std::uint8_t> decisions;  // aligned with input order
  double capacity_total = 0.0;
  double capacity_used = 0.0;
  // Knapsack procedures only: the items and each item's 1-based position in
  // the ranking (0 when not ranked).
  std::vector<KnapsackItem> items;
  std::vector<std::size_t> rank;

  std::size_t rejections() const;
};

DecisionReport rbl_select(std::span<const KnapsackItem> items, double alpha);
DecisionReport bcds_select(std::span<const KnapsackItem> items, double alpha);
DecisionReport uncorrected_select(std::span<const TestStatistic> stats, double alpha);
DecisionReport bh_select(std::span<const TestStatistic> stats, double alpha, double pi0);
DecisionReport sc_select(std::span<const double> lfdr_values, double alpha);

// sum(delta * cost * lfdr) / sum(delta * cost); 0 for an empty set.
double estimated_fdr(std::span<const std::uint8_t> decisions, std::span<const double> lfdr,
                     std::span<const double> cost);

// Every requested procedure on one cohort, in the order given.
std::vector<DecisionReport> run_procedures(std::span<const Procedure> procedures,
                                           std::span<const TestStatistic> stats,
                                           std::span<const ExperimentRecord> recs, const LfdrModel& model,
                                           double alpha);

}  // namespace rbl
