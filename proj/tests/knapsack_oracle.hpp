#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rbl/selection.hpp"

namespace rbl::testing {

struct Instance {
  std::vector<double> value, lfdr, cost;
};

// Random instance with values of both signs and lfdr on both sides of alpha.
inline Instance random_instance(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  for (std::size_t i = 0; i < m; ++i) {
    const double l = u(rng) < 0.4 ? 0.1 * u(rng) : u(rng);
    in.lfdr.push_back(l);
    in.cost.push_back(0.1 + 2.0 * u(rng));
    in.value.push_back(u(rng) < 0.2 ? -u(rng) : 2.0 * u(rng));
  }
  return in;
}

inline std::vector<KnapsackItem> to_items(const Instance& in, double alpha) {
  std::vector<KnapsackItem> items;
  for (std::size_t i = 0; i < in.value.size(); ++i) {
    items.push_back(make_item(i, "t" + std::to_string(i), in.value[i], in.lfdr[i], in.cost[i], alpha));
  }
  return items;
}

// Best total value over all 2^m decision vectors meeting the cost-weighted
// estimated-FDR constraint sum(d c lfdr) <= alpha sum(d c).
inline double brute_force_optimum(const Instance& in, double alpha) {
  const std::size_t m = in.value.size();
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    double num = 0.0, den = 0.0, val = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!(mask >> i & 1u)) continue;
      num += in.cost[i] * in.lfdr[i];
      den += in.cost[i];
      val += in.value[i];
    }
    if (num <= alpha * den + 1e-12 && val > best) best = val;
  }
  return best;
}

inline double total_value(const DecisionReport& rep, const Instance& in) {
  double v = 0.0;
  for (std::size_t i = 0; i < in.value.size(); ++i) {
    if (rep.decisions[i]) v += in.value[i];
  }
  return v;
}

// Largest |value| among the ranked (II and IV) items.
inline double max_ranked_value(const std::vector<KnapsackItem>& items) {
  double v = 0.0;
  for (const auto& it : items) {
    if (it.ranked()) v = std::max(v, std::abs(it.value));
  }
  return v;
}

}  // namespace rbl::testing
