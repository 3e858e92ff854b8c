// rbl: rank A/B tests by expected lift under cost-weighted FDR control.
//
//   rbl analyze  --input tests.csv --out reports/ [--alpha 0.05] [--procedure all] ...
//   rbl simulate --out study/ [--m 2000] [--reps 400] [--gamma-sd 1] [--beta-shape2 1] ...
//   rbl make-csv --out data.csv [--m 2000] [--gamma-sd 2] ...
//
// --config <file> reads INI/TOML-style `key = value` lines keyed by the long
// flag names, with subcommand options under a [analyze], [simulate] or
// [make-csv] section; flags given on the command line win.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rbl/error.hpp"
#include "rbl/ingest.hpp"
#include "rbl/log.hpp"
#include "rbl/report.hpp"
#include "rbl/sim.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 1;

struct AnalyzeArgs {
  std::string input, out;
  double alpha = 0.05;
  std::string procedure = "all";
  std::string lfdr_mode = "kernel";
  bool empirical_null = false;
  bool fixed_bandwidth = false;
  bool subsample = false;
  std::uint64_t seed = 1;
  double synthetic_profit_sd = 0.0;
  std::size_t grid_points = 2048;
};

struct SimulateArgs {
  std::string out;
  rbl::SimConfig cfg;
  std::string procedure = "all";
  std::string lfdr_mode = "kernel";
  std::string cost_model = "constant";
  bool fixed_bandwidth = false;
  bool table1 = false;
};

struct MakeCsvArgs {
  std::string out;
  rbl::SimConfig cfg;
  std::string cost_model = "constant";
  bool single_variation = false;
};

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw rbl::DataError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

void run_analyze(const AnalyzeArgs& args) {
  rbl::RunConfig cfg;
  cfg.alpha = args.alpha;
  cfg.procedures = rbl::parse_procedure_list(args.procedure);
  cfg.lfdr.mode = rbl::parse_lfdr_mode(args.lfdr_mode);
  cfg.lfdr.empirical_null = args.empirical_null;
  cfg.lfdr.adaptive_bandwidth = !args.fixed_bandwidth;
  cfg.lfdr.grid_points = args.grid_points;
  cfg.seed = args.seed;
  cfg.subsample = args.subsample;
  if (args.synthetic_profit_sd > 0.0) cfg.synthetic_profit_sd = args.synthetic_profit_sd;
  cfg.validate();

  const auto parsed = rbl::parse_csv(args.input);
  const auto analysis = rbl::analyze(parsed.rows, cfg);
  const std::filesystem::path out(args.out);
  ensure_dir(out);
  rbl::write_file_atomic(out / "decisions.csv", rbl::decisions_csv(analysis));
  rbl::write_file_atomic(out / "summary.csv", rbl::summary_csv(analysis));
  const auto text = rbl::summary_text(analysis);
  rbl::write_file_atomic(out / "summary.txt", text);
  rbl::write_file_atomic(out / "metadata.json",
                         rbl::analysis_metadata_json(analysis, std::filesystem::path(args.input).filename().string()));
  std::cout << text;
}

void run_simulate(SimulateArgs args) {
  args.cfg.lfdr.mode = rbl::parse_lfdr_mode(args.lfdr_mode);
  args.cfg.cost_model = rbl::parse_cost_model(args.cost_model);
  args.cfg.lfdr.adaptive_bandwidth = !args.fixed_bandwidth;
  const auto procedures = rbl::parse_procedure_list(args.procedure);
  args.cfg.validate();

  std::vector<rbl::StudyResult> results;
  if (args.table1) {
    for (const auto& [sd, b] : rbl::table1_grid()) {
      auto cell = args.cfg;
      cell.gamma_sd = sd;
      cell.beta_shape2 = b;
      rbl::log::info(fmt::format("simulating gamma_sd = {}, beta = {}", sd, b));
      results.push_back(rbl::run_study(cell, procedures));
    }
  } else {
    results.push_back(rbl::run_study(args.cfg, procedures));
  }
  const std::filesystem::path out(args.out);
  ensure_dir(out);
  const auto text = rbl::study_text(results);
  rbl::write_file_atomic(out / "study.csv", rbl::study_csv(results));
  rbl::write_file_atomic(out / "study.txt", text);
  rbl::write_file_atomic(out / "metadata.json", rbl::study_metadata_json(results));
  std::cout << text;
}

void run_make_csv(MakeCsvArgs args) {
  args.cfg.cost_model = rbl::parse_cost_model(args.cost_model);
  const auto data = rbl::make_synthetic_export(args.cfg, !args.single_variation);
  const std::filesystem::path out(args.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  rbl::write_file_atomic(out, rbl::write_csv_with_truth(data));
  std::cout << fmt::format("wrote {} rows to {}\n", data.rows.size(), out.string());
}

void add_sim_options(CLI::App* cmd, rbl::SimConfig& cfg) {
  cmd->add_option("--m", cfg.m, "Tests per cohort")->capture_default_str();
  cmd->add_option("--n-per-arm", cfg.n_per_arm, "Visitors per arm")->capture_default_str();
  cmd->add_option("--pi0", cfg.pi0, "Probability of a zero effect")->capture_default_str();
  cmd->add_option("--effect-size", cfg.effect_size, "Absolute conversion-rate shift of non-null tests")
      ->capture_default_str();
  cmd->add_option("--beta-shape2", cfg.beta_shape2, "Second Beta shape of the baseline rate")->capture_default_str();
  cmd->add_option("--gamma-sd", cfg.gamma_sd, "Profit sd (mean 1); 0 for unit profits")->capture_default_str();
  cmd->add_option("--cost-ratio", cfg.cost_ratio, "Switch cost relative to mean profit")->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank A/B tests by expected lift under cost-weighted FDR control"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read `key = value` options from a file");
  std::string log_level;
  app.add_option("--log-level", log_level, "error, warn, info or debug (overrides RBL_LOG_LEVEL)");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Select tests from an experiment CSV export");
  analyze->add_option("--input", an.input, "Experiment CSV")->required();
  analyze->add_option("--out", an.out, "Output directory")->required();
  analyze->add_option("--alpha", an.alpha, "Nominal FDR level")->capture_default_str();
  analyze->add_option("--procedure", an.procedure, "Comma-separated subset of uncorrected, bh, sc, bcds, rbl, or all")->capture_default_str();
  analyze->add_option("--lfdr-mode", an.lfdr_mode, "kernel or mixture-em")->capture_default_str();
  analyze->add_flag("--empirical-null", an.empirical_null, "Estimate the null mean and sd from the data");
  analyze->add_flag("--fixed-bandwidth", an.fixed_bandwidth, "Kernel mode: one Silverman bandwidth for all points");
  analyze->add_flag("--subsample-variations", an.subsample, "Keep experiments w.p. 1/#variations");
  analyze->add_option("--seed", an.seed, "Seed for subsampling and synthetic profits")->capture_default_str();
  analyze->add_option("--synthetic-profits", an.synthetic_profit_sd,
                      "Replace profits with Gamma draws of this sd (mean 1)");
  analyze->add_option("--grid-points", an.grid_points, "Density grid size")->capture_default_str();

  SimulateArgs sim;
  sim.cfg.reps = 400;
  auto* simulate = app.add_subcommand("simulate", "Run the synthetic comparison study");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--reps", sim.cfg.reps, "Replications")->capture_default_str();
  simulate->add_option("--alpha", sim.cfg.alpha, "Nominal FDR level")->capture_default_str();
  add_sim_options(simulate, sim.cfg);
  simulate->add_option("--procedure", sim.procedure, "Comma-separated subset of uncorrected, bh, sc, bcds, rbl, or all")->capture_default_str();
  simulate->add_option("--lfdr-mode", sim.lfdr_mode, "kernel or mixture-em")->capture_default_str();
  simulate->add_option("--cost-model", sim.cost_model, "constant or proportional")->capture_default_str();
  simulate->add_flag("--empirical-null", sim.cfg.lfdr.empirical_null, "Estimate the null from each cohort");
  simulate->add_flag("--fixed-bandwidth", sim.fixed_bandwidth, "Kernel mode: one Silverman bandwidth for all points");
  simulate->add_flag("--oracle", sim.cfg.oracle_column, "Add RBL with the analytic lfdr");
  simulate->add_flag("--table1", sim.table1, "Run the seven reference (gamma_sd, beta) cells");

  MakeCsvArgs mk;
  auto* make_csv = app.add_subcommand("make-csv", "Write a synthetic experiment export with ground truth");
  make_csv->add_option("--out", mk.out, "Output CSV path")->required();
  add_sim_options(make_csv, mk.cfg);
  make_csv->add_option("--cost-model", mk.cost_model, "constant or proportional")->capture_default_str();
  make_csv->add_flag("--single-variation", mk.single_variation, "One variation per experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (!log_level.empty()) rbl::log::set_level(rbl::log::parse_level(log_level));
    if (*analyze) run_analyze(an);
    if (*simulate) run_simulate(sim);
    if (*make_csv) run_make_csv(mk);
  } catch (const rbl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const rbl::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternal;
  }
  return EXIT_SUCCESS;
}
