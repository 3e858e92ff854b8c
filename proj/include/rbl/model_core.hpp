#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rbl {

// Raw two-arm counts for one A/B test. Arm 0 is the control in production,
// arm 1 the candidate variation.
struct ExperimentRecord {
  std::string id;
  std::int64_t n0 = 0;  // control visitors
  std::int64_t n1 = 0;  // treatment visitors
  std::int64_t r0 = 0;  // control conversions
  std::int64_t r1 = 0;  // treatment conversions
  double profit = 1.0;  // baseline profit weight
  double cost = 1.0;    // switch cost
};

struct TestStatistic {
  double z = 0.0;            // ln(p1_hat / p0_hat)
  double z_corrected = 0.0;  // z after the second-order mean correction
  double s2 = 0.0;           // estimated variance of z
  double h = 0.0;            // z_corrected / sqrt(s2)
  double lift_hat = 0.0;     // exp(z) - 1

  double sigma() const;
};

// Population parameters of a simulated test.
struct GroundTruth {
  double p0 = 0.0;
  double p1 = 0.0;
  double lift = 0.0;  // p1 / p0 - 1
  bool theta = false;  // lift > 0
};

GroundTruth make_ground_truth(double p0, double p1);

// Counts after the Haldane-Anscombe correction. When any arm has zero
// conversions or converts every visitor, 0.5 is added to both conversion
// counts and 1 to both traffic counts; otherwise the raw counts pass through.
struct CorrectedCounts {
  double n0, r0, n1, r1;
  bool corrected;

  double p0() const { return r0 / n0; }
  double p1() const { return r1 / n1; }
};

CorrectedCounts corrected_counts(const ExperimentRecord& rec);

// Fewer than this many visitors in either arm makes the normal approximation
// questionable. Such records are analyzed but flagged.
inline constexpr std::int64_t kMinRecommendedTraffic = 100;
bool low_traffic(const ExperimentRecord& rec);

void validate(const ExperimentRecord& rec);

// Fills z and lift_hat only.
TestStatistic compute_log_lift(const ExperimentRecord& rec);
double estimate_variance(const ExperimentRecord& rec);
double apply_mean_correction(double z, const ExperimentRecord& rec);
TestStatistic standardize(const ExperimentRecord& rec);

// Per-record standardize over a whole cohort, OpenMP-parallel over records.
std::vector<TestStatistic> standardize_all(std::span<const ExperimentRecord> recs);

namespace serial {
std::vector<TestStatistic> standardize_all(std::span<const ExperimentRecord> recs);
}

}  // namespace rbl
