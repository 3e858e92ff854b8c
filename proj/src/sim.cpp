#include "rbl/sim.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "rbl/error.hpp"
#include "rbl/normal.hpp"
#include "rbl/report.hpp"

namespace rbl {

std::string to_string(CostModel m) { return m == CostModel::constant ? "constant" : "proportional"; }

CostModel parse_cost_model(const std::string& text) {
  if (text == "constant") return CostModel::constant;
  if (text == "proportional") return CostModel::proportional;
  throw ConfigError(fmt::format("unknown cost model '{}' (expected constant or proportional)", text));
}

void SimConfig::validate() const {
  if (m < kMinStatistics) throw ConfigError(fmt::format("m must be at least {}", kMinStatistics));
  if (reps < 1) throw ConfigError("reps must be positive");
  if (n_per_arm < 1) throw ConfigError("n_per_arm must be positive");
  if (!(pi0 > 0.0 && pi0 <= 1.0)) throw ConfigError("pi0 must lie in (0, 1]");
  if (!(effect_size > 0.0)) throw ConfigError("effect_size must be positive");
  if (!(beta_shape2 > 0.0)) throw ConfigError("beta_shape2 must be positive");
  if (!(gamma_sd >= 0.0)) throw ConfigError("gamma_sd must be non-negative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(cost_ratio > 0.0)) throw ConfigError("cost_ratio must be positive");
  if (!(rate_floor >= 0.0) || !(effect_size + rate_floor < 0.5 - 1e-9)) {
    throw ConfigError("effect_size and rate_floor leave no admissible baseline rate");
  }
}

Rng replication_rng(std::uint64_t seed, std::uint64_t rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32)};
  return Rng(seq);
}

namespace {

// Beta(1, b) by inversion of its CDF 1 - (1 - p)^b.
double beta_one(double b, double u) { return 1.0 - std::pow(1.0 - u, 1.0 / b); }

}  // namespace

Cohort generate_cohort(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double shape = cfg.gamma_sd > 0.0 ? 1.0 / (cfg.gamma_sd * cfg.gamma_sd) : 0.0;
  std::gamma_distribution<double> profit_dist(cfg.gamma_sd > 0.0 ? shape : 1.0,
                                              cfg.gamma_sd > 0.0 ? 1.0 / shape : 1.0);
  const double lo = cfg.rate_floor + cfg.effect_size;
  const double hi = 1.0 - cfg.rate_floor - cfg.effect_size;

  Cohort c;
  c.records.reserve(cfg.m);
  c.truth.reserve(cfg.m);
  for (std::size_t i = 0; i < cfg.m; ++i) {
    const double u = unif(rng);
    double delta = 0.0;
    if (u >= cfg.pi0) delta = u < cfg.pi0 + 0.5 * (1.0 - cfg.pi0) ? cfg.effect_size : -cfg.effect_size;

    double p0 = 0.0;
    do {
      p0 = beta_one(cfg.beta_shape2, unif(rng));
    } while (!(p0 > lo && p0 < hi));
    const double p1 = p0 + delta;

    ExperimentRecord rec;
    rec.id = fmt::format("t{:05d}", i);
    rec.n0 = rec.n1 = cfg.n_per_arm;
    rec.r0 = std::binomial_distribution<std::int64_t>(cfg.n_per_arm, p0)(rng);
    rec.r1 = std::binomial_distribution<std::int64_t>(cfg.n_per_arm, p1)(rng);
    rec.profit = cfg.gamma_sd > 0.0 ? profit_dist(rng) : 1.0;
    // Gamma draws with tiny shape can underflow to zero.
    rec.profit = std::max(rec.profit, std::numeric_limits<double>::min());
    rec.cost = cfg.cost_model == CostModel::constant ? cfg.cost_ratio : cfg.cost_ratio * rec.profit;
    c.records.push_back(std::move(rec));
    c.truth.push_back(make_ground_truth(p0, p1));
  }
  return c;
}

Metrics compute_metrics(std::span<const std::uint8_t> decisions, std::span<const GroundTruth> truth,
                        std::span<const ExperimentRecord> recs) {
  if (decisions.size() != truth.size() || truth.size() != recs.size()) {
    throw LengthMismatch("decisions, truth and records differ in length");
  }
  double false_cost = 0.0, total_cost = 0.0, gained = 0.0, attainable = 0.0;
  std::size_t hits = 0, positives = 0, rejected = 0;
  Metrics out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double gain = recs[i].profit * truth[i].lift;
    if (truth[i].theta) {
      ++positives;
      attainable += gain;
    }
    if (!decisions[i]) continue;
    ++rejected;
    total_cost += recs[i].cost;
    if (!truth[i].theta) false_cost += recs[i].cost;
    if (truth[i].theta) ++hits;
    gained += gain;
    out.net_profit += gain - recs[i].cost;
  }
  out.fdr = total_cost > 0.0 ? false_cost / total_cost : 0.0;
  out.power_pct = 100.0 * static_cast<double>(hits) / static_cast<double>(std::max<std::size_t>(1, positives));
  out.profit_pct = attainable > 0.0 ? 100.0 * gained / attainable : 0.0;
  out.rejections = static_cast<double>(rejected);
  return out;
}

LfdrModel oracle_model(const SimConfig& cfg, std::size_t grid_points, double lim) {
  cfg.validate();
  // Mixture over baseline rates, integrated in the uniform variable that
  // drives the Beta(1, b) inversion so the truncation is a plain interval.
  const double lo = cfg.rate_floor + cfg.effect_size;
  const double hi = 1.0 - cfg.rate_floor - cfg.effect_size;
  auto beta_cdf = [&](double p) { return 1.0 - std::pow(1.0 - p, cfg.beta_shape2); };
  const double u_lo = beta_cdf(lo), u_hi = beta_cdf(hi);
  constexpr int kNodes = 4000;
  const double n = static_cast<double>(cfg.n_per_arm);
  std::vector<double> eta_up(kNodes), eta_down(kNodes);
  for (int k = 0; k < kNodes; ++k) {
    const double u = u_lo + (u_hi - u_lo) * (k + 0.5) / kNodes;
    const double p0 = beta_one(cfg.beta_shape2, u);
    const double v0 = (1.0 - p0) / (n * p0);
    for (int sign : {1, -1}) {
      const double p1 = p0 + sign * cfg.effect_size;
      const double v1 = (1.0 - p1) / (n * p1);
      (sign > 0 ? eta_up : eta_down)[k] = std::log(p1 / p0) / std::sqrt(v0 + v1);
    }
  }

  std::vector<double> grid(grid_points);
  const double step = 2.0 * lim / static_cast<double>(grid_points - 1);
  const double alt = 0.5 * (1.0 - cfg.pi0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t g = 0; g < static_cast<std::ptrdiff_t>(grid_points); ++g) {
    const double x = -lim + step * static_cast<double>(g);
    double up = 0.0, down = 0.0;
    for (int k = 0; k < kNodes; ++k) {
      up += normal::pdf(x - eta_up[k]);
      down += normal::pdf(x - eta_down[k]);
    }
    grid[g] = cfg.pi0 * normal::pdf(x) + alt * (up + down) / kNodes;
  }
  return LfdrModel(cfg.pi0, NullParams{}, -lim, lim, std::move(grid), cfg.lfdr.eps_floor);
}

std::string StudyColumn::label() const { return oracle ? display_name(procedure) + " (oracle)" : display_name(procedure); }

namespace {

std::vector<StudyColumn> study_columns(const SimConfig& cfg, std::span<const Procedure> procedures) {
  std::vector<StudyColumn> cols;
  for (auto p : procedures) cols.push_back({p, false});
  if (cfg.oracle_column) cols.push_back({Procedure::rbl, true});
  return cols;
}

std::vector<Metrics> run_replication(const SimConfig& cfg, std::span<const Procedure> procedures,
                                     const LfdrModel* oracle, std::size_t rep) {
  auto rng = replication_rng(cfg.seed, rep);
  const auto cohort = generate_cohort(cfg, rng);
  const auto stats = standardize_all(cohort.records);
  std::vector<double> h(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) h[i] = stats[i].h;
  const auto model = fit_marginal(h, cfg.lfdr);

  std::vector<Metrics> out;
  for (const auto& report : run_procedures(procedures, stats, cohort.records, model, cfg.alpha)) {
    out.push_back(compute_metrics(report, cohort.truth, cohort.records));
  }
  if (oracle != nullptr) {
    const auto report = rbl_select(build_items(stats, cohort.records, *oracle, cfg.alpha), cfg.alpha);
    out.push_back(compute_metrics(report, cohort.truth, cohort.records));
  }
  return out;
}

template <class Field>
void accumulate(const std::vector<std::vector<Metrics>>& per_rep, std::size_t col, Field field, double& mean,
                double& se) {
  const double n = static_cast<double>(per_rep.size());
  double sum = 0.0;
  for (const auto& row : per_rep) sum += row[col].*field;
  mean = sum / n;
  if (per_rep.size() < 2) {
    se = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  double ss = 0.0;
  for (const auto& row : per_rep) ss += (row[col].*field - mean) * (row[col].*field - mean);
  se = std::sqrt(ss / (n - 1.0) / n);
}

constexpr double Metrics::*kFields[] = {&Metrics::fdr, &Metrics::power_pct, &Metrics::profit_pct,
                                        &Metrics::net_profit, &Metrics::rejections};
constexpr const char* kFieldNames[] = {"fdr", "power_pct", "profit_pct", "net_profit", "rejections"};
constexpr const char* kFieldLabels[] = {"FDR", "Power (%)", "Profit (%)", "Net Profit", "# Rejections"};

StudyResult summarize(const SimConfig& cfg, std::vector<StudyColumn> cols, std::vector<std::vector<Metrics>> per_rep) {
  StudyResult result;
  result.config = cfg;
  result.columns = std::move(cols);
  result.per_rep = std::move(per_rep);
  result.summary.resize(result.columns.size());
  for (std::size_t c = 0; c < result.columns.size(); ++c) {
    for (auto field : kFields) {
      accumulate(result.per_rep, c, field, result.summary[c].mean.*field, result.summary[c].se.*field);
    }
  }
  return result;
}

// Adds the replication index and keeps the data / internal distinction.
[[noreturn]] void rethrow_with_rep(std::size_t rep, const std::exception& e) {
  const auto msg = fmt::format("replication {}: {}", rep, e.what());
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) throw ConfigError(msg);
  if (dynamic_cast<const DataError*>(&e) != nullptr) throw DataError(msg);
  throw Error(msg);
}

}  // namespace

StudyResult run_study(const SimConfig& cfg, std::span<const Procedure> procedures) {
  cfg.validate();
  const auto cols = study_columns(cfg, procedures);
  std::optional<LfdrModel> oracle;
  if (cfg.oracle_column) oracle = oracle_model(cfg);

  std::vector<std::vector<Metrics>> per_rep(cfg.reps);
  std::vector<std::exception_ptr> errors(cfg.reps);
  const auto reps = static_cast<std::ptrdiff_t>(cfg.reps);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t r = 0; r < reps; ++r) {
    try {
      per_rep[r] = run_replication(cfg, procedures, oracle ? &*oracle : nullptr, static_cast<std::size_t>(r));
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const std::exception& e) {
      rethrow_with_rep(r, e);
    }
  }
  return summarize(cfg, cols, std::move(per_rep));
}

namespace serial {

StudyResult run_study(const SimConfig& cfg, std::span<const Procedure> procedures) {
  cfg.validate();
  const auto cols = study_columns(cfg, procedures);
  std::optional<LfdrModel> oracle;
  if (cfg.oracle_column) oracle = oracle_model(cfg);
  std::vector<std::vector<Metrics>> per_rep;
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    try {
      per_rep.push_back(run_replication(cfg, procedures, oracle ? &*oracle : nullptr, r));
    } catch (const std::exception& e) {
      rethrow_with_rep(r, e);
    }
  }
  return summarize(cfg, cols, std::move(per_rep));
}

}  // namespace serial

SyntheticExport make_synthetic_export(const SimConfig& cfg, bool multi_variation) {
  cfg.validate();
  auto rng = replication_rng(cfg.seed, 0xC5Full);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double shape = cfg.gamma_sd > 0.0 ? 1.0 / (cfg.gamma_sd * cfg.gamma_sd) : 1.0;
  std::gamma_distribution<double> profit_dist(shape, 1.0 / shape);
  const double lo = cfg.rate_floor + cfg.effect_size;
  const double hi = 1.0 - cfg.rate_floor - cfg.effect_size;

  SyntheticExport out;
  for (std::size_t e = 0; out.rows.size() < cfg.m; ++e) {
    double p0 = 0.0;
    do {
      p0 = beta_one(cfg.beta_shape2, unif(rng));
    } while (!(p0 > lo && p0 < hi));
    const double k_draw = unif(rng);
    std::size_t k = 1;
    if (multi_variation) k = k_draw < 0.8 ? 1 : (k_draw < 0.95 ? 2 : 3);
    k = std::min(k, cfg.m - out.rows.size());
    const auto r0 = std::binomial_distribution<std::int64_t>(cfg.n_per_arm, p0)(rng);
    const double profit = cfg.gamma_sd > 0.0 ? std::max(profit_dist(rng), std::numeric_limits<double>::min()) : 1.0;
    for (std::size_t v = 0; v < k; ++v) {
      const double u = unif(rng);
      double delta = 0.0;
      if (u >= cfg.pi0) delta = u < cfg.pi0 + 0.5 * (1.0 - cfg.pi0) ? cfg.effect_size : -cfg.effect_size;
      RawVariationRow row;
      row.experiment_id = fmt::format("e{:05d}", e);
      row.variation_id = fmt::format("v{}", v + 1);
      row.visitors_control = row.visitors_treatment = cfg.n_per_arm;
      row.conversions_control = r0;
      row.conversions_treatment = std::binomial_distribution<std::int64_t>(cfg.n_per_arm, p0 + delta)(rng);
      row.profit = profit;
      row.cost = cfg.cost_model == CostModel::constant ? cfg.cost_ratio : cfg.cost_ratio * profit;
      out.rows.push_back(std::move(row));
      out.truth.push_back(make_ground_truth(p0, p0 + delta));
    }
  }
  return out;
}

std::string write_csv_with_truth(const SyntheticExport& data) {
  const auto base = write_csv(data.rows);
  std::string out;
  std::size_t line = 0, pos = 0;
  while (pos < base.size()) {
    const auto end = base.find('\n', pos);
    out.append(base, pos, end - pos);
    if (line == 0) {
      out += ",true_p0,true_p1,true_lift";
    } else {
      const auto& t = data.truth[line - 1];
      out += "," + format_double(t.p0) + "," + format_double(t.p1) + "," + format_double(t.lift);
    }
    out += '\n';
    pos = end + 1;
    ++line;
  }
  return out;
}

std::vector<std::pair<double, double>> table1_grid() {
  return {{1.0, 1.0}, {2.0, 1.0}, {3.0, 1.0}, {3.0, 0.5}, {3.0, 0.25}, {2.0, 0.25}, {1.0, 0.25}};
}

namespace {

std::string fmt_se(double se, int digits) {
  return std::isnan(se) ? std::string("NA") : fmt::format("{:.{}f}", se, digits);
}

}  // namespace

std::string study_csv(std::span<const StudyResult> results) {
  std::string out = "gamma_sd,beta_shape2,alpha,m,reps,n_per_arm,procedure,metric,mean,se\n";
  for (const auto& r : results) {
    for (std::size_t c = 0; c < r.columns.size(); ++c) {
      for (std::size_t f = 0; f < std::size(kFields); ++f) {
        out += fmt::format("{},{},{},{},{},{},{},{},{:.6f},{}\n", r.config.gamma_sd, r.config.beta_shape2,
                           r.config.alpha, r.config.m, r.config.reps, r.config.n_per_arm, r.columns[c].label(),
                           kFieldNames[f], r.summary[c].mean.*kFields[f], fmt_se(r.summary[c].se.*kFields[f], 6));
      }
    }
  }
  return out;
}

std::string study_text(std::span<const StudyResult> results) {
  std::string out;
  for (const auto& r : results) {
    out += fmt::format("gamma_sd = {}  beta = {}  alpha = {}  (m = {}, n = {}/arm, reps = {}, seed = {})\n",
                       r.config.gamma_sd, r.config.beta_shape2, r.config.alpha, r.config.m, r.config.n_per_arm,
                       r.config.reps, r.config.seed);
    out += fmt::format("{:<14}", "");
    for (const auto& col : r.columns) out += fmt::format("{:>22}", col.label());
    out += '\n';
    for (std::size_t f = 0; f < std::size(kFields); ++f) {
      const int digits = f == 0 ? 3 : (f == 3 ? 4 : 3);
      out += fmt::format("{:<14}", kFieldLabels[f]);
      for (std::size_t c = 0; c < r.columns.size(); ++c) {
        const auto cell = fmt::format("{:.{}f} ({})", r.summary[c].mean.*kFields[f], digits,
                                      fmt_se(r.summary[c].se.*kFields[f], digits));
        out += fmt::format("{:>22}", cell);
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace rbl
