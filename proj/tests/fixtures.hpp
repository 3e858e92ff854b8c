#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rbl/model_core.hpp"
#include "rbl/sim.hpp"

namespace rbl::testing {

// Standardized statistics of one synthetic cohort of the default study.
inline std::vector<double> mixture_h(std::uint64_t seed, std::size_t m = 2000) {
  SimConfig cfg;
  cfg.m = m;
  auto rng = replication_rng(seed, 0);
  const auto cohort = generate_cohort(cfg, rng);
  const auto stats = standardize_all(cohort.records);
  std::vector<double> h;
  for (const auto& s : stats) h.push_back(s.h);
  return h;
}

inline std::vector<double> normal_sample(std::uint64_t seed, std::size_t m, double mean = 0.0, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> h(m);
  for (auto& x : h) x = d(rng);
  return h;
}

}  // namespace rbl::testing
