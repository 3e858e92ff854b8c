#include "rbl/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "rbl/error.hpp"
#include "rbl/log.hpp"
#include "rbl/report.hpp"

namespace rbl {

namespace {

constexpr std::string_view kRequired[] = {"experiment_id",      "variation_id",       "visitors_control",
                                          "conversions_control", "visitors_treatment", "conversions_treatment"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Comma-separated fields with optional double quotes ("" escapes a quote).
std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.emplace_back(trim(cur));
  return fields;
}

std::int64_t parse_count(std::string_view text, std::string_view column) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(fmt::format("column '{}': '{}' is not an integer", column, text));
  }
  if (v < 0) throw DataError(fmt::format("column '{}': negative count {}", column, v));
  return v;
}

std::optional<double> parse_positive(std::string_view text, std::string_view column) {
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(fmt::format("column '{}': '{}' is not a number", column, text));
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw DataError(fmt::format("column '{}': {} is not positive", column, v));
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

ParseResult parse_csv_text(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  ParseResult result;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> column;
  std::size_t pos = 0;
  bool header_seen = false;
  std::size_t missing_defaults = 0;

  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const auto line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto fields = split_fields(line);
    if (!header_seen) {
      header_seen = true;
      for (std::size_t i = 0; i < fields.size(); ++i) column.emplace(fields[i], i);
      for (auto req : kRequired) {
        if (!column.contains(std::string(req))) throw DataError(fmt::format("missing required column '{}'", req));
      }
      continue;
    }
    ++result.data_lines;
    auto field = [&](std::string_view name) -> std::string_view {
      const auto it = column.find(std::string(name));
      if (it == column.end() || it->second >= fields.size()) return {};
      return fields[it->second];
    };
    try {
      if (fields.size() < column.size()) {
        throw DataError(fmt::format("expected {} fields, found {}", column.size(), fields.size()));
      }
      RawVariationRow row;
      row.experiment_id = std::string(field("experiment_id"));
      row.variation_id = std::string(field("variation_id"));
      if (row.experiment_id.empty()) throw DataError("empty experiment_id");
      row.visitors_control = parse_count(field("visitors_control"), "visitors_control");
      row.conversions_control = parse_count(field("conversions_control"), "conversions_control");
      row.visitors_treatment = parse_count(field("visitors_treatment"), "visitors_treatment");
      row.conversions_treatment = parse_count(field("conversions_treatment"), "conversions_treatment");
      if (row.visitors_control < 1 || row.visitors_treatment < 1) throw DataError("each arm needs at least one visitor");
      if (row.conversions_control > row.visitors_control || row.conversions_treatment > row.visitors_treatment) {
        throw DataError("conversions exceed visitors");
      }
      row.profit = parse_positive(field("profit"), "profit");
      row.cost = parse_positive(field("cost"), "cost");
      if (!row.profit || !row.cost) ++missing_defaults;
      result.rows.push_back(std::move(row));
    } catch (const DataError& e) {
      result.diagnostics.push_back({line_no, e.what()});
      log::warn(fmt::format("line {}: {}; row skipped", line_no, e.what()));
    }
  }

  if (!header_seen) throw DataError("empty input: no header row");
  if (result.data_lines == 0) log::warn("input has a header but no data rows");
  if (missing_defaults > 0) {
    log::info(fmt::format("{} rows without profit or cost; missing values default to 1.0", missing_defaults));
  }
  if (result.diagnostics.size() * 10 > result.data_lines) {
    throw DataError(fmt::format("{} of {} data rows are malformed (limit 10%)", result.diagnostics.size(),
                                result.data_lines));
  }
  return result;
}

ParseResult parse_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_text(buf.str());
}

std::string write_csv(std::span<const RawVariationRow> rows) {
  std::string out =
      "experiment_id,variation_id,visitors_control,conversions_control,visitors_treatment,conversions_treatment,"
      "profit,cost\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(r.experiment_id), csv_field(r.variation_id),
                       r.visitors_control, r.conversions_control, r.visitors_treatment, r.conversions_treatment,
                       r.profit ? format_double(*r.profit) : "", r.cost ? format_double(*r.cost) : "");
  }
  return out;
}

std::vector<RawVariationRow> subsample_variations(std::span<const RawVariationRow> rows, std::uint64_t seed) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [it, fresh] = groups.try_emplace(rows[i].experiment_id);
    if (fresh) order.push_back(rows[i].experiment_id);
    it->second.push_back(i);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<RawVariationRow> kept;
  for (const auto& exp : order) {
    const auto& members = groups[exp];
    const double u = unif(rng);
    const auto pick = std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng);
    if (u < 1.0 / static_cast<double>(members.size())) kept.push_back(rows[members[pick]]);
  }
  return kept;
}

std::vector<ExperimentRecord> to_records(std::span<const RawVariationRow> rows) {
  std::vector<ExperimentRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    ExperimentRecord rec;
    rec.id = r.test_id();
    rec.n0 = r.visitors_control;
    rec.r0 = r.conversions_control;
    rec.n1 = r.visitors_treatment;
    rec.r1 = r.conversions_treatment;
    rec.profit = r.profit.value_or(1.0);
    rec.cost = r.cost.value_or(1.0);
    out.push_back(std::move(rec));
  }
  return out;
}

void apply_synthetic_profits(std::span<ExperimentRecord> recs, double gamma_sd, std::uint64_t seed) {
  if (!(gamma_sd > 0.0)) throw ConfigError("synthetic profit sd must be positive");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9u};
  std::mt19937_64 rng(seq);
  const double shape = 1.0 / (gamma_sd * gamma_sd);
  std::gamma_distribution<double> dist(shape, 1.0 / shape);
  for (auto& r : recs) r.profit = std::max(dist(rng), std::numeric_limits<double>::min());
}

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
  if (procedures.empty()) throw ConfigError("no procedure selected");
  if (synthetic_profit_sd && !(*synthetic_profit_sd > 0.0)) throw ConfigError("synthetic profit sd must be positive");
}

Analysis analyze(std::span<const RawVariationRow> rows, const RunConfig& cfg) {
  cfg.validate();
  const auto used_rows = cfg.subsample ? subsample_variations(rows, cfg.seed)
                                       : std::vector<RawVariationRow>(rows.begin(), rows.end());
  auto records = to_records(used_rows);
  if (records.size() < kMinStatistics) {
    throw TooFewObservations(
        fmt::format("analysis needs at least {} tests, got {}", kMinStatistics, records.size()));
  }
  if (cfg.synthetic_profit_sd) apply_synthetic_profits(records, *cfg.synthetic_profit_sd, cfg.seed);

  const std::size_t low = static_cast<std::size_t>(std::count_if(records.begin(), records.end(), low_traffic));
  if (low > 0) {
    log::warn(fmt::format("{} tests have fewer than {} visitors in an arm; normal approximation may be poor", low,
                          kMinRecommendedTraffic));
  }

  auto stats = standardize_all(records);
  std::vector<double> h(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) h[i] = stats[i].h;
  auto model = fit_marginal(h, cfg.lfdr);
  log::info(fmt::format("analyzing {} tests from {} input rows", records.size(), rows.size()));
  log::debug(fmt::format("lfdr model: pi0 = {}, null N({}, {}^2), grid [{}, {}]", model.pi0(), model.null_mean(),
                         model.null_sd(), model.grid_lo(), model.grid_hi()));
  auto items = build_items(stats, records, model, cfg.alpha);
  auto reports = run_procedures(cfg.procedures, stats, records, model, cfg.alpha);

  std::vector<ProcedureSummary> summary;
  for (const auto& rep : reports) {
    ProcedureSummary s{rep.procedure};
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!rep.decisions[i]) continue;
      ++s.rejections;
      s.estimated_lift += records[i].profit * stats[i].lift_hat;
    }
    s.lift_per_rejection = s.rejections > 0 ? s.estimated_lift / static_cast<double>(s.rejections) : 0.0;
    summary.push_back(s);
  }

  return Analysis{.config = cfg,
                  .input_rows = rows.size(),
                  .records = std::move(records),
                  .stats = std::move(stats),
                  .model = std::move(model),
                  .items = std::move(items),
                  .reports = std::move(reports),
                  .summary = std::move(summary),
                  .low_traffic = low};
}

}  // namespace rbl
