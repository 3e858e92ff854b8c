#include "rbl/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "rbl/error.hpp"
#include "rbl/normal.hpp"

namespace rbl {

std::string to_string(Procedure p) {
  switch (p) {
    case Procedure::uncorrected: return "uncorrected";
    case Procedure::bh: return "bh";
    case Procedure::sc: return "sc";
    case Procedure::bcds: return "bcds";
    case Procedure::rbl: return "rbl";
  }
  return "?";
}

std::string display_name(Procedure p) {
  switch (p) {
    case Procedure::uncorrected: return "Uncorrected";
    case Procedure::bh: return "BH";
    case Procedure::sc: return "SC";
    case Procedure::bcds: return "BCDS";
    case Procedure::rbl: return "Proposed";
  }
  return "?";
}

Procedure parse_procedure(const std::string& text) {
  for (auto p : kAllProcedures) {
    if (text == to_string(p)) return p;
  }
  if (text == "proposed") return Procedure::rbl;
  throw ConfigError(fmt::format("unknown procedure '{}' (expected uncorrected, bh, sc, bcds, rbl or all)", text));
}

std::vector<Procedure> parse_procedure_list(const std::string& text) {
  if (text == "all") return {std::begin(kAllProcedures), std::end(kAllProcedures)};
  std::vector<Procedure> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    const auto p = parse_procedure(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string to_string(Quadrant q) {
  switch (q) {
    case Quadrant::I: return "I";
    case Quadrant::II: return "II";
    case Quadrant::III: return "III";
    case Quadrant::IV: return "IV";
  }
  return "?";
}

namespace {

// Slack on boundary comparisons so that exact ties survive rounding.
constexpr double kRelTol = 1e-12;

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
}

Quadrant classify(double value, double weight) {
  if (weight < 0.0) return value > 0.0 ? Quadrant::I : Quadrant::IV;
  if (weight > 0.0) return value > 0.0 ? Quadrant::II : Quadrant::III;
  return value > 0.0 ? Quadrant::I : Quadrant::III;
}

void require_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw LengthMismatch(fmt::format("statistics and records differ in length ({} vs {})", a, b));
}

// Estimated-FDR guarantee of the knapsack procedures; a violation is a bug.
void check_estimated_fdr(const DecisionReport& report, double alpha) {
  double num = 0.0, den = 0.0;
  for (const auto& item : report.items) {
    if (report.decisions[item.index]) {
      num += item.cost * item.lfdr;
      den += item.cost;
    }
  }
  if (den > 0.0 && num / den > alpha + 1e-9) {
    throw std::logic_error(fmt::format("{}: estimated FDR {} exceeds alpha {}", to_string(report.procedure),
                                       num / den, alpha));
  }
}

DecisionReport knapsack_select(std::span<const KnapsackItem> items, double alpha, Procedure procedure) {
  require_alpha(alpha);
  DecisionReport report;
  report.procedure = procedure;
  report.items.assign(items.begin(), items.end());
  report.decisions.assign(items.size(), 0);
  report.rank.assign(items.size(), 0);
  for (const auto& item : items) {
    if (item.index >= items.size()) throw Error("knapsack item index out of range");
    report.decisions[item.index] = item.baseline_decision || item.quadrant == Quadrant::I;
  }
  report.capacity_total = capacity(items);

  // Only strictly positive ratios are worth flipping; zero-value removals in
  // IV gain nothing and keep their baseline.
  std::vector<const KnapsackItem*> pool;
  for (const auto& item : items) {
    if (item.ranked() && item.ratio > 0.0) pool.push_back(&item);
  }
  std::sort(pool.begin(), pool.end(), [](const KnapsackItem* a, const KnapsackItem* b) {
    if (a->ratio != b->ratio) return a->ratio > b->ratio;
    const double wa = std::abs(a->weight), wb = std::abs(b->weight);
    if (wa != wb) return wa < wb;
    if (a->test_id != b->test_id) return a->test_id < b->test_id;
    return a->index < b->index;
  });

  double used = 0.0;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const auto& item = *pool[j];
    const double next = used + std::abs(item.weight);
    if (next > report.capacity_total * (1.0 + kRelTol)) break;
    used = next;
    report.decisions[item.index] = item.quadrant == Quadrant::II ? 1 : 0;
  }
  // Ranks past the cutoff are still reported.
  for (std::size_t j = 0; j < pool.size(); ++j) report.rank[pool[j]->index] = j + 1;
  report.capacity_used = used;
  check_estimated_fdr(report, alpha);
  return report;
}

std::vector<double> one_sided_p(std::span<const TestStatistic> stats) {
  std::vector<double> p(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) p[i] = normal::upper_tail(stats[i].h);
  return p;
}

}  // namespace

KnapsackItem make_item(std::size_t index, std::string test_id, double value, double lfdr, double cost, double alpha) {
  KnapsackItem item;
  item.index = index;
  item.test_id = std::move(test_id);
  item.value = value;
  item.lfdr = lfdr;
  item.cost = cost;
  item.weight = cost * (lfdr - alpha);
  item.quadrant = classify(value, item.weight);
  item.ratio = item.ranked() ? value / item.weight : 0.0;
  item.baseline_decision = item.weight < 0.0;
  return item;
}

std::vector<KnapsackItem> build_items(std::span<const TestStatistic> stats, std::span<const ExperimentRecord> recs,
                                      const LfdrModel& model, double alpha) {
  require_alpha(alpha);
  require_aligned(stats.size(), recs.size());
  std::vector<KnapsackItem> items;
  items.reserve(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& s = stats[i];
    const double value = recs[i].profit * value_statistic(model, s.h, s.sigma());
    items.push_back(make_item(i, recs[i].id, value, weight_lfdr(model, s.h), recs[i].cost, alpha));
  }
  return items;
}

std::vector<KnapsackItem> build_bcds_items(std::span<const TestStatistic> stats,
                                           std::span<const ExperimentRecord> recs, const LfdrModel& model,
                                           double alpha) {
  require_alpha(alpha);
  require_aligned(stats.size(), recs.size());
  std::vector<KnapsackItem> items;
  items.reserve(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const double l = weight_lfdr(model, stats[i].h);
    items.push_back(make_item(i, recs[i].id, recs[i].profit * (1.0 - l), l, recs[i].cost, alpha));
  }
  return items;
}

double capacity(std::span<const KnapsackItem> items) {
  double total = 0.0;
  for (const auto& item : items) {
    if (item.weight < 0.0) total -= item.weight;
  }
  return total;
}

std::size_t DecisionReport::rejections() const {
  return static_cast<std::size_t>(std::count(decisions.begin(), decisions.end(), std::uint8_t{1}));
}

DecisionReport rbl_select(std::span<const KnapsackItem> items, double alpha) {
  return knapsack_select(items, alpha, Procedure::rbl);
}

DecisionReport bcds_select(std::span<const KnapsackItem> items, double alpha) {
  return knapsack_select(items, alpha, Procedure::bcds);
}

DecisionReport uncorrected_select(std::span<const TestStatistic> stats, double alpha) {
  require_alpha(alpha);
  DecisionReport report;
  report.procedure = Procedure::uncorrected;
  report.decisions.resize(stats.size());
  const auto p = one_sided_p(stats);
  for (std::size_t i = 0; i < p.size(); ++i) report.decisions[i] = p[i] <= alpha;
  return report;
}

DecisionReport bh_select(std::span<const TestStatistic> stats, double alpha, double pi0) {
  require_alpha(alpha);
  if (!(pi0 > 0.0 && pi0 <= 1.0)) throw ConfigError(fmt::format("pi0 must lie in (0, 1], got {}", pi0));
  DecisionReport report;
  report.procedure = Procedure::bh;
  report.decisions.assign(stats.size(), 0);
  const auto p = one_sided_p(stats);
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  const double level = alpha / pi0;
  const double m = static_cast<double>(p.size());
  std::size_t k = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    if (p[order[j]] <= static_cast<double>(j + 1) * level / m * (1.0 + kRelTol)) k = j + 1;
  }
  for (std::size_t j = 0; j < k; ++j) report.decisions[order[j]] = 1;
  return report;
}

DecisionReport sc_select(std::span<const double> lfdr_values, double alpha) {
  require_alpha(alpha);
  DecisionReport report;
  report.procedure = Procedure::sc;
  report.decisions.assign(lfdr_values.size(), 0);
  std::vector<std::size_t> order(lfdr_values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lfdr_values[a] < lfdr_values[b]; });
  double running = 0.0, running_at_k = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    running += lfdr_values[order[j]];
    if (running <= alpha * static_cast<double>(j + 1) * (1.0 + kRelTol)) {
      k = j + 1;
      running_at_k = running;
    }
  }
  for (std::size_t j = 0; j < k; ++j) report.decisions[order[j]] = 1;
  if (k > 0 && running_at_k / static_cast<double>(k) > alpha + 1e-9) {
    throw std::logic_error("sc: mean lfdr of rejections exceeds alpha");
  }
  return report;
}

double estimated_fdr(std::span<const std::uint8_t> decisions, std::span<const double> lfdr,
                     std::span<const double> cost) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i]) {
      num += cost[i] * lfdr[i];
      den += cost[i];
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

std::vector<DecisionReport> run_procedures(std::span<const Procedure> procedures,
                                           std::span<const TestStatistic> stats,
                                           std::span<const ExperimentRecord> recs, const LfdrModel& model,
                                           double alpha) {
  require_aligned(stats.size(), recs.size());
  std::vector<DecisionReport> out;
  out.reserve(procedures.size());
  for (auto p : procedures) {
    switch (p) {
      case Procedure::uncorrected: out.push_back(uncorrected_select(stats, alpha)); break;
      case Procedure::bh: out.push_back(bh_select(stats, alpha, model.pi0())); break;
      case Procedure::sc: {
        std::vector<double> l(stats.size());
        for (std::size_t i = 0; i < stats.size(); ++i) l[i] = weight_lfdr(model, stats[i].h);
        out.push_back(sc_select(l, alpha));
        break;
      }
      case Procedure::bcds: out.push_back(bcds_select(build_bcds_items(stats, recs, model, alpha), alpha)); break;
      case Procedure::rbl: out.push_back(rbl_select(build_items(stats, recs, model, alpha), alpha)); break;
    }
  }
  return out;
}

}  // namespace rbl
