// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//
//   rbl_acceptance <path to rbl CLI> <bundled CSV> [work dir]
//
// Exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "knapsack_oracle.hpp"
#include "rbl/ingest.hpp"
#include "rbl/lfdr.hpp"
#include "rbl/model_core.hpp"
#include "rbl/normal.hpp"
#include "rbl/selection.hpp"
#include "rbl/sim.hpp"

namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, std::string what) {
    pass = pass && ok;
    details.push_back(fmt::format("{} {}", ok ? "ok  " : "FAIL", what));
  }
  void note(std::string what) { details.push_back("     " + std::move(what)); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

rbl::ExperimentRecord rec(std::int64_t n0, std::int64_t r0, std::int64_t n1, std::int64_t r1) {
  rbl::ExperimentRecord r;
  r.n0 = n0;
  r.r0 = r0;
  r.n1 = n1;
  r.r1 = r1;
  return r;
}

bool rel_close(double got, double want, double tol = 1e-9) {
  return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

// 1. Hand-derived formula examples.
Outcome formula_suite() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto base = rec(100, 10, 100, 20);
  const auto s = rbl::standardize(base);
  out.check(rel_close(s.z, std::log(2.0)), fmt::format("z = ln 2 (got {:.12g})", s.z));
  out.check(rel_close(s.lift_hat, 1.0), "lift_hat = 1");
  out.check(rel_close(s.s2, 0.13), fmt::format("S^2 = 0.13 (got {:.12g})", s.s2));
  out.check(rel_close(s.z_corrected, std::log(2.0) - 0.025), fmt::format("z_c = 0.668147 (got {:.12g})", s.z_corrected));
  out.check(rel_close(s.h, (std::log(2.0) - 0.025) / std::sqrt(0.13)), fmt::format("h = 1.853107 (got {:.12g})", s.h));
  const auto same = rbl::standardize(rec(5000, 500, 5000, 500));
  out.check(same.z == 0.0 && same.lift_hat == 0.0 && same.z_corrected == 0.0 && same.h == 0.0,
            "identical arms give z = z_c = h = 0");
  const auto zero = rbl::standardize(rec(100, 0, 100, 10));
  const double q0 = 0.5 / 101.0, q1 = 10.5 / 101.0;
  out.check(rel_close(zero.z, std::log(q1 / q0)) && rel_close(zero.s2, (1 - q1) / 10.5 + (1 - q0) / 0.5),
            "zero-conversion arm uses corrected counts");
  const auto full = rbl::standardize(rec(200, 200, 200, 200));
  out.check(rel_close(full.s2, 2.0 * (1.0 - 200.5 / 201.0) / 200.5), "full-conversion arms use corrected counts");
  const double ratio = rbl::estimate_variance(rec(1000, 40, 1000, 55)) / rbl::estimate_variance(rec(10000, 400, 10000, 550));
  out.check(rel_close(ratio, 10.0), "tenfold traffic shrinks S^2 tenfold");
  const double secs = seconds_since(t0);
  out.check(secs < 1.0, fmt::format("runtime {:.3f} s < 1 s", secs));
  return out;
}

// 2. Greedy knapsack against exhaustive enumeration.
Outcome knapsack_oracle() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240);
  int within = 0, fdr_ok = 0;
  double worst_gap = 0.0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const auto in = rbl::testing::random_instance(rng, 1 + static_cast<std::size_t>(t) % 12);
    const auto items = rbl::testing::to_items(in, 0.05);
    const auto rep = rbl::rbl_select(items, 0.05);
    const double opt = rbl::testing::brute_force_optimum(in, 0.05);
    const double got = rbl::testing::total_value(rep, in);
    const double slack = rbl::testing::max_ranked_value(items);
    if (got >= opt - slack - 1e-9 && got <= opt + 1e-9) ++within;
    if (rbl::estimated_fdr(rep.decisions, in.lfdr, in.cost) <= 0.05 + 1e-9) ++fdr_ok;
    worst_gap = std::max(worst_gap, opt - got);
  }
  out.check(within == trials, fmt::format("{}/{} within one ranked item of the optimum (largest gap {:.4g})", within,
                                          trials, worst_gap));
  out.check(fdr_ok == trials, fmt::format("{}/{} with estimated FDR <= alpha", fdr_ok, trials));
  const double secs = seconds_since(t0);
  out.check(secs < 60.0, fmt::format("runtime {:.2f} s < 60 s", secs));
  return out;
}

// 3. Estimated-FDR invariant over many cohorts and estimator settings.
Outcome estimated_fdr_invariant() {
  Outcome out;
  int cohorts = 0, violations = 0, thrown = 0;
  double worst = 0.0;
  for (const auto& [gsd, b] : rbl::table1_grid()) {
    for (auto mode : {rbl::LfdrMode::kernel, rbl::LfdrMode::mixture_em}) {
      for (bool emp : {false, true}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
          rbl::SimConfig cfg;
          cfg.gamma_sd = gsd;
          cfg.beta_shape2 = b;
          auto rng = rbl::replication_rng(seed, 77);
          const auto cohort = rbl::generate_cohort(cfg, rng);
          const auto stats = rbl::standardize_all(cohort.records);
          std::vector<double> h, cost;
          for (std::size_t i = 0; i < stats.size(); ++i) {
            h.push_back(stats[i].h);
            cost.push_back(cohort.records[i].cost);
          }
          rbl::LfdrOptions opts;
          opts.mode = mode;
          opts.empirical_null = emp;
          const auto model = rbl::fit_marginal(h, opts);
          std::vector<double> wl;
          for (double x : h) wl.push_back(rbl::weight_lfdr(model, x));
          ++cohorts;
          for (double alpha : {0.01, 0.05, 0.1}) {
            try {
              for (const auto& rep : rbl::run_procedures(rbl::kAllProcedures, stats, cohort.records, model, alpha)) {
                if (rep.procedure != rbl::Procedure::sc && rep.procedure != rbl::Procedure::bcds &&
                    rep.procedure != rbl::Procedure::rbl) {
                  continue;
                }
                // SC ranks on flat costs; the knapsack procedures price each test's cost.
                const std::vector<double> flat(h.size(), 1.0);
                const auto& c = rep.procedure == rbl::Procedure::sc ? flat : cost;
                const double e = rbl::estimated_fdr(rep.decisions, wl, c);
                worst = std::max(worst, e - alpha);
                if (e > alpha + 1e-9) ++violations;
              }
            } catch (const std::logic_error&) {
              ++thrown;
            }
          }
        }
      }
    }
  }
  out.check(violations == 0 && thrown == 0,
            fmt::format("{} cohorts x 3 alphas x {{SC, BCDS, RBL}}: {} violations, {} assertion failures, max "
                        "(estimate - alpha) = {:.3g}",
                        cohorts, violations, thrown, worst));
  return out;
}

const rbl::MetricsSummary& column(const rbl::StudyResult& r, rbl::Procedure p) {
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    if (r.columns[c].procedure == p && !r.columns[c].oracle) return r.summary[c];
  }
  throw std::logic_error("missing column");
}

rbl::StudyResult run_cell(double gsd, double b, std::size_t reps) {
  rbl::SimConfig cfg;
  cfg.gamma_sd = gsd;
  cfg.beta_shape2 = b;
  cfg.reps = reps;
  return rbl::run_study(cfg, rbl::kAllProcedures);
}

// 4. Synthetic study at desk scale.
Outcome table1() {
  using P = rbl::Procedure;
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();

  const auto a = run_cell(1.0, 1.0, 100);
  const auto unc = column(a, P::uncorrected).mean.fdr;
  out.check(std::abs(unc - 0.499) <= 0.05, fmt::format("(1, 1) Uncorrected FDR {:.3f} in 0.499 +- 0.05", unc));
  for (auto p : {P::bh, P::sc, P::bcds, P::rbl}) {
    const double f = column(a, p).mean.fdr;
    out.check(f <= 0.06, fmt::format("(1, 1) {} FDR {:.3f} <= 0.06", rbl::display_name(p), f));
  }
  for (auto p : {P::bh, P::sc}) {
    const auto& s = column(a, p);
    out.check(std::abs(s.mean.power_pct - 7.3) <= 2.5,
              fmt::format("(1, 1) {} power {:.3f}% (se {:.3f}) in 7.3 +- 2.5", rbl::display_name(p), s.mean.power_pct,
                          s.se.power_pct));
  }

  const auto c = run_cell(3.0, 1.0, 100);
  const double prop = column(c, P::rbl).mean.profit_pct, bcds = column(c, P::bcds).mean.profit_pct;
  const double bh = column(c, P::bh).mean.profit_pct, sc = column(c, P::sc).mean.profit_pct;
  out.check(prop >= bcds + 1.0, fmt::format("(3, 1) Proposed profit {:.2f}% >= BCDS {:.2f}% + 1", prop, bcds));
  out.check(prop >= std::max(bh, sc) + 3.0,
            fmt::format("(3, 1) Proposed profit {:.2f}% >= max(BH {:.2f}%, SC {:.2f}%) + 3", prop, bh, sc));
  out.check(bcds >= std::max(bh, sc) + 3.0,
            fmt::format("(3, 1) BCDS profit {:.2f}% >= max(BH {:.2f}%, SC {:.2f}%) + 3", bcds, bh, sc));

  const auto g = run_cell(1.0, 0.25, 100);
  const double np = column(g, P::rbl).mean.net_profit, nb = column(g, P::bcds).mean.net_profit;
  const double nbh = column(g, P::bh).mean.net_profit, nsc = column(g, P::sc).mean.net_profit;
  const double nu = column(g, P::uncorrected).mean.net_profit;
  out.check(np > nb && nb > std::max(nbh, nsc) && std::min(nbh, nsc) > nu,
            fmt::format("(1, 0.25) net profit Proposed {:.3f} > BCDS {:.3f} > {{BH {:.3f}, SC {:.3f}}} > Uncorrected "
                        "{:.3f}",
                        np, nb, nbh, nsc, nu));
  out.note(fmt::format("100 replications per cell, {:.1f} s", seconds_since(t0)));
  return out;
}

// 5. RBL on the analytic lfdr of the generating mixture.
Outcome oracle_fdr() {
  Outcome out;
  rbl::SimConfig cfg;
  cfg.reps = 400;
  cfg.oracle_column = true;
  const rbl::Procedure none[] = {rbl::Procedure::rbl};
  const auto r = rbl::run_study(cfg, none);
  const auto& s = r.summary.back();
  out.check(s.mean.fdr <= 0.05 + 2.0 * s.se.fdr,
            fmt::format("oracle RBL mean FDR {:.4f} <= 0.05 + 2 * {:.4f} over {} cohorts", s.mean.fdr, s.se.fdr,
                        cfg.reps));
  return out;
}

double ks_distance_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = rbl::normal::cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Exact E[z] and E[z_c] for fixed (p0, p1, n), summing the binomial pmfs
// over +-12 sd windows.
struct ExactMeans {
  double z, zc;
};

ExactMeans exact_means(double p0, double p1, std::int64_t n) {
  auto window = [&](double p) {
    const double mu = static_cast<double>(n) * p, sd = std::sqrt(mu * (1.0 - p));
    const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(mu - 12.0 * sd - 2.0)));
    const auto hi = std::min<std::int64_t>(n, static_cast<std::int64_t>(std::ceil(mu + 12.0 * sd + 2.0)));
    std::vector<double> pmf;
    for (std::int64_t k = lo; k <= hi; ++k) {
      const double lp = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                        (n - k) * std::log1p(-p);
      pmf.push_back(std::exp(lp));
    }
    return std::pair{lo, pmf};
  };
  const auto [lo0, pmf0] = window(p0);
  const auto [lo1, pmf1] = window(p1);
  double ez = 0.0, ezc = 0.0;
  for (std::size_t a = 0; a < pmf0.size(); ++a) {
    for (std::size_t b = 0; b < pmf1.size(); ++b) {
      const double w = pmf0[a] * pmf1[b];
      if (w < 1e-300) continue;
      const auto s = rbl::standardize(rec(n, lo0 + static_cast<std::int64_t>(a), n, lo1 + static_cast<std::int64_t>(b)));
      ez += w * s.z;
      ezc += w * s.z_corrected;
    }
  }
  return {ez, ezc};
}

// 6. Null calibration and the bias reduction of the mean correction.
Outcome calibration() {
  Outcome out;
  const std::int64_t n = 5000;
  for (double p : {0.02, 0.1, 0.5}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(p * 1e6));
    std::binomial_distribution<std::int64_t> arm(n, p);
    std::vector<double> h(100000);
    for (auto& x : h) x = rbl::standardize(rec(n, arm(rng), n, arm(rng))).h;
    const double d = ks_distance_normal(h);
    out.check(d < 0.02, fmt::format("null p = {}: KS distance {:.4f} < 0.02 (1e5 draws)", p, d));
  }

  // Exact expectations over the baseline-rate support of the study, for
  // null, positive and negative effects.
  rbl::SimConfig cfg;
  const double e = cfg.effect_size;
  int points = 0, held = 0;
  double worst_ratio = 0.0;
  std::string worst_at;
  for (double p0 : {0.012, 0.015, 0.02, 0.03, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.98, 0.988}) {
    for (double d : {0.0, e, -e}) {
      const double p1 = p0 + d;
      if (!(p1 > cfg.rate_floor && p1 < 1.0 - cfg.rate_floor)) continue;
      const double zeta = std::log(p1 / p0);
      const auto m = exact_means(p0, p1, n);
      const double bz = std::abs(m.z - zeta), bzc = std::abs(m.zc - zeta);
      ++points;
      if (bzc <= bz + 1e-12) ++held;
      if (bz > 1e-12 && bzc / bz > worst_ratio) {
        worst_ratio = bzc / bz;
        worst_at = fmt::format("p0 = {}, p1 = {}", p0, p1);
      }
    }
  }
  out.check(held == points, fmt::format("exact |E z_c - zeta| <= |E z - zeta| at {}/{} grid points (largest ratio "
                                        "{:.3g} at {})",
                                        held, points, worst_ratio, worst_at));

  // Monte Carlo at 1e5 draws, where the bias is resolvable.
  for (auto [p0, p1] : {std::pair{0.02, 0.03}, std::pair{0.05, 0.04}}) {
    std::mt19937_64 rng(99);
    std::binomial_distribution<std::int64_t> a0(n, p0), a1(n, p1);
    const double zeta = std::log(p1 / p0);
    const int draws = 100000;
    double sz = 0.0, szc = 0.0, sdd = 0.0;
    for (int i = 0; i < draws; ++i) {
      const auto s = rbl::standardize(rec(n, a0(rng), n, a1(rng)));
      sz += s.z - zeta;
      szc += s.z_corrected - zeta;
      sdd += (s.z - s.z_corrected) * (s.z - s.z_corrected);
    }
    const double bz = sz / draws, bzc = szc / draws;
    out.check(std::abs(bzc) < std::abs(bz),
              fmt::format("MC p0 = {}, p1 = {}: |bias z_c| {:.2e} < |bias z| {:.2e}", p0, p1, std::abs(bzc),
                          std::abs(bz)));
  }
  {
    std::mt19937_64 rng(5);
    std::binomial_distribution<std::int64_t> arm(n, 0.05);
    double szc = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) szc += rbl::standardize(rec(n, arm(rng), n, arm(rng))).z_corrected;
    out.check(std::abs(szc / draws) < 0.002, fmt::format("MC null p = 0.05: |mean z_c| {:.2e} < 0.002", std::abs(szc / draws)));
  }
  return out;
}

// 7. Qualitative checks on the bundled synthetic export.
Outcome table2(const fs::path& csv) {
  using P = rbl::Procedure;
  Outcome out;
  const auto parsed = rbl::parse_csv(csv);
  rbl::SimConfig cfg;
  cfg.m = 3000;
  cfg.gamma_sd = 2.0;
  const auto truth_source = rbl::make_synthetic_export(cfg);
  const bool same = parsed.rows == truth_source.rows;
  out.check(same && parsed.diagnostics.empty(),
            fmt::format("{} rows parsed; bundle matches make-csv --m 3000 --gamma-sd 2 --seed 1", parsed.rows.size()));
  if (!same) return out;

  std::vector<std::vector<std::size_t>> counts;
  const std::vector<double> alphas{0.01, 0.05, 0.10};
  for (double alpha : alphas) {
    rbl::RunConfig rc;
    rc.alpha = alpha;
    const auto a = rbl::analyze(parsed.rows, rc);
    std::vector<std::size_t> row;
    for (const auto& s : a.summary) row.push_back(s.rejections);
    counts.push_back(row);
    if (alpha != 0.05) continue;

    // Lift per rejection against the true lifts.
    auto true_lpr = [&](P p) {
      for (const auto& rep : a.reports) {
        if (rep.procedure != p) continue;
        double sum = 0.0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < rep.decisions.size(); ++i) {
          if (!rep.decisions[i]) continue;
          sum += a.records[i].profit * truth_source.truth[i].lift;
          ++k;
        }
        return k > 0 ? sum / static_cast<double>(k) : 0.0;
      }
      return 0.0;
    };
    const double lp = true_lpr(P::rbl), lb = true_lpr(P::bcds), lbh = true_lpr(P::bh), lsc = true_lpr(P::sc);
    out.check(lp >= lb && lb >= std::max(lbh, lsc),
              fmt::format("alpha 0.05 true lift per rejection: Proposed {:.5f} >= BCDS {:.5f} >= {{BH {:.5f}, SC "
                          "{:.5f}}}",
                          lp, lb, lbh, lsc));
    std::string est;
    for (const auto& s : a.summary) est += fmt::format(" {} {:.5f}", rbl::display_name(s.procedure), s.lift_per_rejection);
    out.note("estimated lift per rejection:" + est);
  }
  bool monotone = true, strict = true;
  std::string line;
  for (std::size_t p = 0; p < counts[0].size(); ++p) {
    line += fmt::format(" {}", rbl::display_name(rbl::kAllProcedures[p]));
    for (std::size_t k = 0; k < counts.size(); ++k) {
      line += fmt::format("{}{}", k ? "/" : " ", counts[k][p]);
      if (k > 0) {
        monotone = monotone && counts[k][p] >= counts[k - 1][p];
        strict = strict && counts[k][p] > counts[k - 1][p];
      }
    }
  }
  out.check(monotone, "rejections non-decreasing in alpha 0.01/0.05/0.10:" + line);
  out.note(fmt::format("strictly increasing for every procedure: {}", strict ? "yes" : "no"));
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null 2>&1").c_str()); }

// 8. Byte-identical CLI reruns.
Outcome determinism(const fs::path& cli, const fs::path& csv, const fs::path& work) {
  Outcome out;
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string exe = "\"" + cli.string() + "\"";
  for (int k = 0; k < 2; ++k) {
    const auto dir = work / fmt::format("run{}", k);
    fs::create_directories(dir);
    const std::string d = "\"" + dir.string() + "\"";
    out.check(run(exe + " make-csv --out " + d + "/data.csv --m 800 --gamma-sd 2 --seed 4") == 0, "make-csv exit 0");
    out.check(run(exe + " analyze --input \"" + csv.string() + "\" --out " + d +
                  "/analyze --subsample-variations --synthetic-profits 2 --seed 9") == 0,
              "analyze exit 0");
    out.check(run(exe + " analyze --input " + d + "/data.csv --out " + d + "/analyze2 --lfdr-mode mixture-em") == 0,
              "analyze (mixture-em) exit 0");
    out.check(run(exe + " simulate --out " + d + "/simulate --reps 4 --m 500 --oracle --seed 3") == 0,
              "simulate exit 0");
  }
  std::size_t files = 0, identical = 0;
  for (const auto& entry : fs::recursive_directory_iterator(work / "run0")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), work / "run0");
    ++files;
    if (slurp(entry.path()) == slurp(work / "run1" / rel)) {
      ++identical;
    } else {
      out.note("differs: " + rel.string());
    }
  }
  out.check(files > 0 && identical == files, fmt::format("{}/{} output files byte-identical", identical, files));
  fs::remove_all(work);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: rbl_acceptance <rbl cli> <bundled csv> [work dir]\n";
    return 2;
  }
  const fs::path cli = argv[1], csv = argv[2];
  const fs::path work = argc > 3 ? fs::path(argv[3]) : fs::temp_directory_path() / "rbl_acceptance";

  struct Criterion {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {"formula unit suite", formula_suite},
      {"knapsack oracle equivalence", knapsack_oracle},
      {"estimated-FDR invariant", estimated_fdr_invariant},
      {"synthetic study reproduction", table1},
      {"oracle-mode FDR", oracle_fdr},
      {"calibration", calibration},
      {"qualitative checks on the bundled CSV", [&] { return table2(csv); }},
      {"CLI determinism", [&] { return determinism(cli, csv, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].fn();
    } catch (const std::exception& e) {
      o.check(false, fmt::format("threw: {}", e.what()));
    }
    std::cout << fmt::format("{} {}. {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name);
    for (const auto& d : o.details) std::cout << "    " << d << '\n';
    std::cout.flush();
    if (!o.pass) ++failed;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
