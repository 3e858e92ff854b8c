#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rbl {

enum class LfdrMode { kernel, mixture_em };

std::string to_string(LfdrMode mode);
LfdrMode parse_lfdr_mode(const std::string& text);

inline constexpr double kDefaultEpsFloor = 1e-8;
// Fitting functions refuse smaller samples.
inline constexpr std::size_t kMinStatistics = 100;

struct LfdrOptions {
  LfdrMode mode = LfdrMode::kernel;
  // Kernel mode: local bandwidths h_i = bw * (pilot(x_i) / g)^(-1/2) around
  // the Silverman bandwidth bw, with the fixed-bandwidth estimate as pilot
  // and g its geometric mean over the sample. Widens the kernels in the
  // sparse tails, where lfdr and its ratios are read off.
  bool adaptive_bandwidth = true;
  bool empirical_null = false;
  std::size_t grid_points = 2048;
  double grid_margin = 3.0;
  double pi0_lambda = 0.5;
  double eps_floor = kDefaultEpsFloor;
};

struct NullParams {
  double mean = 0.0;
  double sd = 1.0;
};

// Fitted two-group model on the standardized scale. The marginal density is
// tabulated on an equispaced grid and linearly interpolated; evaluations
// outside the grid use the nearest endpoint value. Immutable after
// construction, so one instance can be shared across threads.
class LfdrModel {
 public:
  LfdrModel(double pi0, NullParams null, double grid_lo, double grid_hi,
            std::vector<double> marginal, double eps_floor = kDefaultEpsFloor);

  double pi0() const { return pi0_; }
  double null_mean() const { return null_.mean; }
  double null_sd() const { return null_.sd; }
  double grid_lo() const { return lo_; }
  double grid_hi() const { return hi_; }
  double grid_step() const { return step_; }
  double eps_floor() const { return eps_floor_; }
  std::span<const double> marginal_grid() const { return marginal_; }

  double grid_point(std::size_t i) const { return lo_ + step_ * static_cast<double>(i); }
  double marginal(double h) const;
  double null_density(double h) const;

 private:
  double pi0_;
  NullParams null_;
  double lo_, hi_, step_;
  std::vector<double> marginal_;
  double eps_floor_;
};

// Storey-type estimate from two-sided p-values against the given null:
// #{p > lambda} / ((1 - lambda) m), clamped to (0, 1].
double estimate_pi0(std::span<const double> h, double lambda = 0.5, NullParams null = {});

// Silverman's rule of thumb, 0.9 min(sd, IQR / 1.34) m^(-1/5). Falls back to
// a unit spread when the sample has none.
double silverman_bandwidth(std::span<const double> h);

// Null mean/sd from a truncated-normal EM on the central part of the sample.
NullParams fit_empirical_null(std::span<const double> h);

LfdrModel fit_marginal(std::span<const double> h, const LfdrOptions& opts = {});

double lfdr(const LfdrModel& model, double h);
// lfdr with the null density evaluated at max(h, null mean): the largest
// null likelihood over non-positive effects.
double weight_lfdr(const LfdrModel& model, double h);
// Posterior expected lift lfdr(h) / lfdr(h + sigma) - 1, from the
// exponential-family MGF identity. Uses the unadjusted lfdr.
double value_statistic(const LfdrModel& model, double h, double sigma);

namespace kernels {

// Gaussian KDE of `data` with bandwidth `bw`, evaluated at lo + i*step for
// every i < out.size(). OpenMP-parallel over grid points.
void kde_on_grid(std::span<const double> data, double bw, double lo, double step, std::span<double> out);

// Same with one bandwidth per data point.
void kde_on_grid(std::span<const double> data, std::span<const double> bw, double lo, double step,
                 std::span<double> out);

}  // namespace kernels

namespace serial::kernels {
void kde_on_grid(std::span<const double> data, double bw, double lo, double step, std::span<double> out);
void kde_on_grid(std::span<const double> data, std::span<const double> bw, double lo, double step,
                 std::span<double> out);
}

}  // namespace rbl
