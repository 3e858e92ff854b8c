#include "rbl/model_core.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rbl/error.hpp"

namespace rbl {

double TestStatistic::sigma() const { return std::sqrt(s2); }

GroundTruth make_ground_truth(double p0, double p1) {
  GroundTruth t;
  t.p0 = p0;
  t.p1 = p1;
  t.lift = p1 / p0 - 1.0;
  t.theta = t.lift > 0.0;
  return t;
}

void validate(const ExperimentRecord& rec) {
  if (rec.n0 < 1 || rec.n1 < 1) {
    throw MalformedRecord(fmt::format("record '{}': each arm needs at least one visitor (n0={}, n1={})",
                                      rec.id, rec.n0, rec.n1));
  }
  if (rec.r0 < 0 || rec.r1 < 0 || rec.r0 > rec.n0 || rec.r1 > rec.n1) {
    throw MalformedRecord(fmt::format("record '{}': conversions must lie in [0, visitors] (r0={}/{}, r1={}/{})",
                                      rec.id, rec.r0, rec.n0, rec.r1, rec.n1));
  }
  if (!(rec.profit > 0.0) || !(rec.cost > 0.0) || !std::isfinite(rec.profit) || !std::isfinite(rec.cost)) {
    throw MalformedRecord(fmt::format("record '{}': profit and cost must be positive (profit={}, cost={})",
                                      rec.id, rec.profit, rec.cost));
  }
}

bool low_traffic(const ExperimentRecord& rec) {
  return rec.n0 < kMinRecommendedTraffic || rec.n1 < kMinRecommendedTraffic;
}

CorrectedCounts corrected_counts(const ExperimentRecord& rec) {
  validate(rec);
  const bool degenerate = rec.r0 == 0 || rec.r1 == 0 || rec.r0 == rec.n0 || rec.r1 == rec.n1;
  CorrectedCounts c{static_cast<double>(rec.n0), static_cast<double>(rec.r0),
                    static_cast<double>(rec.n1), static_cast<double>(rec.r1), degenerate};
  if (degenerate) {
    c.n0 += 1.0;
    c.n1 += 1.0;
    c.r0 += 0.5;
    c.r1 += 0.5;
  }
  return c;
}

namespace {

// Relative variance of each arm's proportion, (1 - p) / R, which estimates
// Var(p_hat / p).
struct ArmVariances {
  double control, treatment;
};

ArmVariances arm_variances(const CorrectedCounts& c) {
  return {(1.0 - c.p0()) / c.r0, (1.0 - c.p1()) / c.r1};
}

TestStatistic standardize_unchecked(const CorrectedCounts& c) {
  TestStatistic s;
  s.z = std::log(c.p1()) - std::log(c.p0());
  s.lift_hat = std::expm1(s.z);
  const auto v = arm_variances(c);
  s.s2 = v.treatment + v.control;
  s.z_corrected = s.z + 0.5 * (v.treatment - v.control);
  s.h = s.z_corrected / std::sqrt(s.s2);
  return s;
}

}  // namespace

TestStatistic compute_log_lift(const ExperimentRecord& rec) {
  const auto c = corrected_counts(rec);
  TestStatistic s;
  s.z = std::log(c.p1()) - std::log(c.p0());
  s.lift_hat = std::expm1(s.z);
  return s;
}

double estimate_variance(const ExperimentRecord& rec) {
  const auto v = arm_variances(corrected_counts(rec));
  return v.treatment + v.control;
}

double apply_mean_correction(double z, const ExperimentRecord& rec) {
  const auto v = arm_variances(corrected_counts(rec));
  return z + 0.5 * (v.treatment - v.control);
}

TestStatistic standardize(const ExperimentRecord& rec) {
  return standardize_unchecked(corrected_counts(rec));
}

std::vector<TestStatistic> standardize_all(std::span<const ExperimentRecord> recs) {
  std::vector<CorrectedCounts> counts;
  counts.reserve(recs.size());
  for (const auto& r : recs) counts.push_back(corrected_counts(r));

  std::vector<TestStatistic> out(recs.size());
  const auto n = static_cast<std::ptrdiff_t>(recs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = standardize_unchecked(counts[i]);
  return out;
}

namespace serial {

std::vector<TestStatistic> standardize_all(std::span<const ExperimentRecord> recs) {
  std::vector<TestStatistic> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(standardize(r));
  return out;
}

}  // namespace serial

}  // namespace rbl
