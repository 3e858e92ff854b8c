#pragma once

#include <cmath>
#include <numbers>

namespace rbl::normal {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;

inline double pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double pdf(double x, double mean, double sd) {
  return pdf((x - mean) / sd) / sd;
}

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// 1 - cdf(x) without cancellation in the right tail.
inline double upper_tail(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

}  // namespace rbl::normal
