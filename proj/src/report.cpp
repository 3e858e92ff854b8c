#include "rbl/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "rbl/error.hpp"

namespace rbl {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return ec == std::errc() ? std::string(buf, ptr) : fmt::format("{}", x);
}

std::string decisions_csv(const Analysis& a) {
  std::string out = "id,z,z_corrected,S,h,lfdr,weight_lfdr,value,weight,quadrant,rank";
  for (const auto& rep : a.reports) out += ",decision_" + to_string(rep.procedure);
  out += ",lift_hat,profit,cost,low_traffic\n";

  // The RBL report, when present, carries the ranks.
  const DecisionReport* rbl_report = nullptr;
  for (const auto& rep : a.reports) {
    if (rep.procedure == Procedure::rbl) rbl_report = &rep;
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& s = a.stats[i];
    const auto& item = a.items[i];
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}", a.records[i].id, format_double(s.z),
                       format_double(s.z_corrected), format_double(s.sigma()), format_double(s.h),
                       format_double(lfdr(a.model, s.h)), format_double(item.lfdr), format_double(item.value),
                       format_double(item.weight), to_string(item.quadrant), rbl_report ? rbl_report->rank[i] : 0);
    for (const auto& rep : a.reports) out += fmt::format(",{}", rep.decisions[i]);
    out += fmt::format(",{},{},{},{}\n", format_double(s.lift_hat), format_double(a.records[i].profit),
                       format_double(a.records[i].cost), low_traffic(a.records[i]) ? 1 : 0);
  }
  return out;
}

std::string summary_csv(const Analysis& a) {
  std::string out = "procedure,alpha,rejections,estimated_lift,lift_per_rejection\n";
  for (const auto& s : a.summary) {
    out += fmt::format("{},{},{},{},{}\n", to_string(s.procedure), format_double(a.config.alpha), s.rejections,
                       format_double(s.estimated_lift), format_double(s.lift_per_rejection));
  }
  return out;
}

std::string summary_text(const Analysis& a) {
  std::string out = fmt::format("tests analyzed: {} (input rows {}), alpha = {}, lfdr mode = {}\n", a.records.size(),
                                a.input_rows, a.config.alpha, to_string(a.config.lfdr.mode));
  out += fmt::format("estimated pi0 = {:.4f}, null = N({:.4f}, {:.4f}^2)\n", a.model.pi0(), a.model.null_mean(),
                     a.model.null_sd());
  for (const auto& rep : a.reports) {
    if (rep.procedure == Procedure::rbl) {
      out += fmt::format("knapsack capacity = {:.6g}, used = {:.6g}\n", rep.capacity_total, rep.capacity_used);
    }
  }
  if (a.low_traffic > 0) out += fmt::format("warning: {} tests below {} visitors per arm\n", a.low_traffic, kMinRecommendedTraffic);
  out += '\n';
  out += fmt::format("{:<14}{:>14}{:>14}{:>14}\n", "", "# Rejections", "Est. Lifts", "Lifts/Rej.");
  for (const auto& s : a.summary) {
    out += fmt::format("{:<14}{:>14}{:>14.3f}{:>14.3f}\n", display_name(s.procedure), s.rejections, s.estimated_lift,
                       s.lift_per_rejection);
  }
  return out;
}

std::string analysis_metadata_json(const Analysis& a, std::string_view input_name) {
  nlohmann::ordered_json j;
  j["tool"] = "rbl";
  j["version"] = kVersion;
  j["command"] = "analyze";
  j["input"] = input_name;
  j["input_rows"] = a.input_rows;
  j["tests"] = a.records.size();
  nlohmann::ordered_json cfg;
  cfg["alpha"] = a.config.alpha;
  std::vector<std::string> procs;
  for (auto p : a.config.procedures) procs.push_back(to_string(p));
  cfg["procedures"] = procs;
  cfg["lfdr_mode"] = to_string(a.config.lfdr.mode);
  cfg["adaptive_bandwidth"] = a.config.lfdr.adaptive_bandwidth;
  cfg["empirical_null"] = a.config.lfdr.empirical_null;
  cfg["grid_points"] = a.config.lfdr.grid_points;
  cfg["eps_floor"] = a.config.lfdr.eps_floor;
  cfg["subsample_variations"] = a.config.subsample;
  cfg["synthetic_profit_sd"] = a.config.synthetic_profit_sd ? nlohmann::ordered_json(*a.config.synthetic_profit_sd)
                                                            : nlohmann::ordered_json(nullptr);
  cfg["seed"] = a.config.seed;
  j["config"] = cfg;
  j["model"] = {{"pi0", a.model.pi0()}, {"null_mean", a.model.null_mean()}, {"null_sd", a.model.null_sd()},
                {"grid_lo", a.model.grid_lo()}, {"grid_hi", a.model.grid_hi()}};
  j["low_traffic_tests"] = a.low_traffic;
  j["bcds_note"] = "BCDS instantiation: value = profit * (1 - weight_lfdr), weight = cost * (weight_lfdr - alpha)";
  return j.dump(2) + "\n";
}

std::string study_metadata_json(std::span<const StudyResult> results) {
  nlohmann::ordered_json j;
  j["tool"] = "rbl";
  j["version"] = kVersion;
  j["command"] = "simulate";
  j["rep_seed_rule"] = "mt19937_64(seed_seq{seed_lo32, seed_hi32, rep_lo32, rep_hi32})";
  auto cells = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    const auto& c = r.config;
    cells.push_back({{"m", c.m},
                     {"reps", c.reps},
                     {"n_per_arm", c.n_per_arm},
                     {"pi0", c.pi0},
                     {"effect_size", c.effect_size},
                     {"beta_shape2", c.beta_shape2},
                     {"gamma_sd", c.gamma_sd},
                     {"alpha", c.alpha},
                     {"cost_ratio", c.cost_ratio},
                     {"cost_model", to_string(c.cost_model)},
                     {"rate_floor", c.rate_floor},
                     {"lfdr_mode", to_string(c.lfdr.mode)},
                     {"adaptive_bandwidth", c.lfdr.adaptive_bandwidth},
                     {"empirical_null", c.lfdr.empirical_null},
                     {"oracle_column", c.oracle_column},
                     {"seed", c.seed}});
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError(fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path.string(), ec.message()));
}

}  // namespace rbl
