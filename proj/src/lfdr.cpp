#include "rbl/lfdr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "rbl/error.hpp"
#include "rbl/log.hpp"
#include "rbl/normal.hpp"

namespace rbl {

std::string to_string(LfdrMode mode) {
  return mode == LfdrMode::kernel ? "kernel" : "mixture-em";
}

LfdrMode parse_lfdr_mode(const std::string& text) {
  if (text == "kernel") return LfdrMode::kernel;
  if (text == "mixture-em" || text == "em") return LfdrMode::mixture_em;
  throw ConfigError(fmt::format("unknown lfdr mode '{}' (expected kernel or mixture-em)", text));
}

LfdrModel::LfdrModel(double pi0, NullParams null, double grid_lo, double grid_hi,
                     std::vector<double> marginal, double eps_floor)
    : pi0_(pi0), null_(null), lo_(grid_lo), hi_(grid_hi), marginal_(std::move(marginal)), eps_floor_(eps_floor) {
  if (marginal_.size() < 2 || !(grid_hi > grid_lo)) throw Error("LfdrModel needs a grid of at least two points");
  if (!(pi0 > 0.0 && pi0 <= 1.0)) throw Error(fmt::format("pi0 must lie in (0, 1], got {}", pi0));
  if (!(null.sd > 0.0)) throw Error("null sd must be positive");
  step_ = (hi_ - lo_) / static_cast<double>(marginal_.size() - 1);
}

double LfdrModel::marginal(double h) const {
  if (!(h > lo_)) return marginal_.front();
  if (!(h < hi_)) return marginal_.back();
  const double pos = (h - lo_) / step_;
  const auto i = std::min(static_cast<std::size_t>(pos), marginal_.size() - 2);
  const double t = pos - static_cast<double>(i);
  return marginal_[i] + t * (marginal_[i + 1] - marginal_[i]);
}

double LfdrModel::null_density(double h) const { return normal::pdf(h, null_.mean, null_.sd); }

namespace {

double clamped_ratio(const LfdrModel& model, double null_value, double h) {
  const double f = model.marginal(h);
  if (!(f > 0.0)) return 1.0;
  return std::clamp(model.pi0() * null_value / f, model.eps_floor(), 1.0);
}

void require_fit_input(std::span<const double> h) {
  if (h.size() < kMinStatistics) {
    throw TooFewObservations(
        fmt::format("lfdr estimation needs at least {} statistics, got {}", kMinStatistics, h.size()));
  }
  for (double x : h) {
    if (!std::isfinite(x)) throw DataError("non-finite test statistic");
  }
}

double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double t = pos - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + t * (sorted[i + 1] - sorted[i]);
}

struct Moments {
  double mean, sd;
};

Moments moments(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

}  // namespace

double lfdr(const LfdrModel& model, double h) { return clamped_ratio(model, model.null_density(h), h); }

double weight_lfdr(const LfdrModel& model, double h) {
  return clamped_ratio(model, model.null_density(std::max(h, model.null_mean())), h);
}

double value_statistic(const LfdrModel& model, double h, double sigma) {
  return lfdr(model, h) / lfdr(model, h + sigma) - 1.0;
}

double estimate_pi0(std::span<const double> h, double lambda, NullParams null) {
  require_fit_input(h);
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("pi0 lambda must lie in (0, 1)");
  const auto [mn, mx] = std::minmax_element(h.begin(), h.end());
  if (*mn == *mx) {
    log::warn("estimate_pi0: constant input, no signal; returning 1");
    return 1.0;
  }
  std::size_t above = 0;
  for (double x : h) {
    const double p = 2.0 * normal::upper_tail(std::abs(x - null.mean) / null.sd);
    if (p > lambda) ++above;
  }
  const double m = static_cast<double>(h.size());
  const double est = static_cast<double>(std::max<std::size_t>(above, 1)) / ((1.0 - lambda) * m);
  return std::min(est, 1.0);
}

double silverman_bandwidth(std::span<const double> h) {
  std::vector<double> sorted(h.begin(), h.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = moments(sorted).sd;
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  return 0.9 * spread * std::pow(static_cast<double>(h.size()), -0.2);
}

NullParams fit_empirical_null(std::span<const double> h) {
  require_fit_input(h);
  std::vector<double> sorted(h.begin(), h.end());
  std::sort(sorted.begin(), sorted.end());
  const double median = quantile_sorted(sorted, 0.5);
  double scale = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 1.349;
  if (!(scale > 0.0)) return {median, 1.0};

  // Central window; everything outside is treated as missing data from the
  // same normal component.
  const double a = median - 1.5 * scale;
  const double b = median + 1.5 * scale;
  double sum = 0.0, sum_sq = 0.0, count = 0.0;
  for (double x : sorted) {
    if (x >= a && x <= b) {
      sum += x;
      sum_sq += x * x;
      count += 1.0;
    }
  }

  double mu = median, sd = scale;
  for (int iter = 0; iter < 500; ++iter) {
    const double lo = (a - mu) / sd, hi = (b - mu) / sd;
    const double cdf_lo = normal::cdf(lo), tail_hi = normal::upper_tail(hi);
    const double inside = std::max(1.0 - cdf_lo - tail_hi, 1e-12);
    const double missing = count * (1.0 - inside) / inside;
    const double w_left = missing * cdf_lo / std::max(1.0 - inside, 1e-300);
    const double w_right = missing * tail_hi / std::max(1.0 - inside, 1e-300);

    // Standardized truncated-normal moments of each tail.
    const double y1_left = cdf_lo > 0.0 ? -normal::pdf(lo) / cdf_lo : 0.0;
    const double y2_left = cdf_lo > 0.0 ? 1.0 - lo * normal::pdf(lo) / cdf_lo : 0.0;
    const double y1_right = tail_hi > 0.0 ? normal::pdf(hi) / tail_hi : 0.0;
    const double y2_right = tail_hi > 0.0 ? 1.0 + hi * normal::pdf(hi) / tail_hi : 0.0;

    auto x1 = [&](double y1) { return mu + sd * y1; };
    auto x2 = [&](double y1, double y2) { return mu * mu + 2.0 * mu * sd * y1 + sd * sd * y2; };
    const double total = count + missing;
    const double new_mu = (sum + w_left * x1(y1_left) + w_right * x1(y1_right)) / total;
    const double second =
        (sum_sq + w_left * x2(y1_left, y2_left) + w_right * x2(y1_right, y2_right)) / total;
    const double new_sd = std::sqrt(std::max(second - new_mu * new_mu, 1e-12));
    const bool done = std::abs(new_mu - mu) < 1e-10 && std::abs(new_sd - sd) < 1e-10;
    mu = new_mu;
    sd = new_sd;
    if (done) break;
  }
  return {mu, sd};
}

namespace {

struct MixtureFit {
  double pi0, alt_mean, alt_sd;
};

// Two-component EM with the null component held fixed.
MixtureFit fit_mixture_em(std::span<const double> h, NullParams null) {
  const auto m = moments(h);
  MixtureFit fit{0.9, m.mean, std::max(2.0 * m.sd, 1.5 * null.sd)};
  const double min_alt_sd = 0.1 * null.sd;
  std::vector<double> resp(h.size());
  for (int iter = 0; iter < 1000; ++iter) {
    double sum_r = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double a = fit.pi0 * normal::pdf(h[i], null.mean, null.sd);
      const double b = (1.0 - fit.pi0) * normal::pdf(h[i], fit.alt_mean, fit.alt_sd);
      resp[i] = a + b > 0.0 ? a / (a + b) : 1.0;
      sum_r += resp[i];
    }
    const double n = static_cast<double>(h.size());
    const double alt_weight = n - sum_r;
    MixtureFit next = fit;
    next.pi0 = std::clamp(sum_r / n, 1e-6, 1.0);
    if (alt_weight > 1e-9) {
      double s1 = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) s1 += (1.0 - resp[i]) * h[i];
      next.alt_mean = s1 / alt_weight;
      double s2 = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) s2 += (1.0 - resp[i]) * (h[i] - next.alt_mean) * (h[i] - next.alt_mean);
      next.alt_sd = std::max(std::sqrt(s2 / alt_weight), min_alt_sd);
    }
    const bool done = std::abs(next.pi0 - fit.pi0) < 1e-10 && std::abs(next.alt_mean - fit.alt_mean) < 1e-10 &&
                      std::abs(next.alt_sd - fit.alt_sd) < 1e-10;
    fit = next;
    if (done || next.pi0 >= 1.0) break;
  }
  return fit;
}

}  // namespace

LfdrModel fit_marginal(std::span<const double> h, const LfdrOptions& opts) {
  require_fit_input(h);
  if (opts.grid_points < 512) throw ConfigError("lfdr grid needs at least 512 points");
  const NullParams null = opts.empirical_null ? fit_empirical_null(h) : NullParams{};
  const auto [mn, mx] = std::minmax_element(h.begin(), h.end());
  const double lo = *mn - opts.grid_margin;
  const double hi = *mx + opts.grid_margin;
  const double step = (hi - lo) / static_cast<double>(opts.grid_points - 1);
  std::vector<double> grid(opts.grid_points);

  if (opts.mode == LfdrMode::kernel) {
    const double bw = silverman_bandwidth(h);
    kernels::kde_on_grid(h, bw, lo, step, grid);
    if (opts.adaptive_bandwidth) {
      const LfdrModel pilot(1.0, null, lo, hi, grid, opts.eps_floor);
      std::vector<double> local(h.size());
      double log_mean = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) {
        local[i] = std::max(pilot.marginal(h[i]), std::numeric_limits<double>::min());
        log_mean += std::log(local[i]);
      }
      const double g = std::exp(log_mean / static_cast<double>(h.size()));
      for (auto& b : local) b = bw / std::sqrt(b / g);
      kernels::kde_on_grid(h, local, lo, step, grid);
    }
    return LfdrModel(estimate_pi0(h, opts.pi0_lambda, null), null, lo, hi, std::move(grid), opts.eps_floor);
  }

  const auto fit = fit_mixture_em(h, null);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = lo + step * static_cast<double>(i);
    grid[i] = fit.pi0 * normal::pdf(x, null.mean, null.sd) +
              (1.0 - fit.pi0) * normal::pdf(x, fit.alt_mean, fit.alt_sd);
  }
  return LfdrModel(fit.pi0, null, lo, hi, std::move(grid), opts.eps_floor);
}

namespace {

// Kernel terms beyond this many bandwidths are below 1e-21 of the peak.
constexpr double kKernelCutoff = 10.0;

}  // namespace

namespace kernels {

void kde_on_grid(std::span<const double> data, double bw, double lo, double step, std::span<double> out) {
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * bw);
  const double reach = kKernelCutoff * bw;
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t g = 0; g < n; ++g) {
    const double x = lo + step * static_cast<double>(g);
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
    const auto last = std::upper_bound(first, sorted.end(), x + reach);
    double acc = 0.0;
    for (auto it = first; it != last; ++it) acc += normal::pdf((x - *it) / bw);
    out[g] = acc * norm;
  }
}

void kde_on_grid(std::span<const double> data, std::span<const double> bw, double lo, double step,
                 std::span<double> out) {
  if (data.size() != bw.size()) throw LengthMismatch("kde: data and bandwidths differ in length");
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const auto n = static_cast<std::ptrdiff_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t g = 0; g < n; ++g) {
    const double x = lo + step * static_cast<double>(g);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double u = (x - data[i]) / bw[i];
      if (std::abs(u) <= kKernelCutoff) acc += normal::pdf(u) / bw[i];
    }
    out[g] = acc * inv_n;
  }
}

}  // namespace kernels

namespace serial::kernels {

void kde_on_grid(std::span<const double> data, double bw, double lo, double step, std::span<double> out) {
  const double norm = 1.0 / (static_cast<double>(data.size()) * bw);
  for (std::size_t g = 0; g < out.size(); ++g) {
    const double x = lo + step * static_cast<double>(g);
    double acc = 0.0;
    for (double d : data) acc += normal::pdf((x - d) / bw);
    out[g] = acc * norm;
  }
}

void kde_on_grid(std::span<const double> data, std::span<const double> bw, double lo, double step,
                 std::span<double> out) {
  if (data.size() != bw.size()) throw LengthMismatch("kde: data and bandwidths differ in length");
  for (std::size_t g = 0; g < out.size(); ++g) {
    const double x = lo + step * static_cast<double>(g);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) acc += normal::pdf((x - data[i]) / bw[i]) / bw[i];
    out[g] = acc / static_cast<double>(data.size());
  }
}

}  // namespace serial::kernels

}  // namespace rbl
