// Copyright 2026 The Flatsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "flatsim/errors.hpp"
#include "flatsim/params.hpp"

// Robust aggregation of parameter updates. Multi-KRUM scores each update by
// the summed squared distances to its n - k - 2 nearest peers, keeps the
// n - k best-scoring updates, and averages only those, so up to k byzantine
// submissions are outvoted by geometry instead of trust.

namespace flatsim {

enum class Aggregation : std::uint8_t {
  kFedAvg = 1,
  kGeometricMedian = 2,
  kMultiKrum = 3,
};

inline std::string_view aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::kFedAvg: return "fedavg";
    case Aggregation::kGeometricMedian: return "geometric_median";
    case Aggregation::kMultiKrum: return "multi_krum";
  }
  return "?";
}

inline Aggregation parse_aggregation(std::string_view name) {
  if (name == "fedavg" || name == "mean") return Aggregation::kFedAvg;
  if (name == "geometric_median" || name == "median") return Aggregation::kGeometricMedian;
  if (name == "multi_krum" || name == "krum") return Aggregation::kMultiKrum;
  throw ConfigError("unknown aggregation method: " + std::string(name));
}

// Multi-KRUM tolerates k byzantine parties only when 2k + 2 < n.
inline void check_krum_resiliency(std::size_t n, std::size_t k) {
  if (2 * k + 2 >= n)
    throw AggregationError("multi-krum requires 2k + 2 < n, got n = " + std::to_string(n) +
                           ", k = " + std::to_string(k));
}

// Score(V_i) = sum of squared L2 distances from V_i to its n - k - 2
// closest other updates. Lower is better: an outlier is far from every
// honest cluster member and cannot hide, because its own distances to the
// cluster dominate any subset of size n - k - 2.
inline std::vector<double> krum_scores(const std::vector<ParameterVector>& updates,
                                       std::size_t k) {
  detail::check_update_set(updates);
  const std::size_t n = updates.size();
  check_krum_resiliency(n, k);
  const std::size_t closest = n - k - 2;

  std::vector<double> scores(n, 0.0);
  std::vector<double> dists;
  dists.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dists.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dists.push_back(sq_distance(updates[i], updates[j]));
    }
    std::nth_element(dists.begin(), dists.begin() + (closest - 1), dists.end());
    scores[i] = std::accumulate(dists.begin(), dists.begin() + closest, 0.0);
  }
  return scores;
}

struct KrumResult {
  std::vector<double> scores;
  std::vector<std::size_t> selected;   // ascending indices of kept updates
  std::vector<std::size_t> discarded;  // ascending indices of rejected updates
  ParameterVector aggregate;           // unweighted mean over selected
};

// Keeps the n - k lowest-scoring updates; ties break toward the lower
// index. The aggregate deliberately ignores sample-count weights: a
// byzantine party could otherwise claim an enormous dataset and reweight
// the very average the scores just defended.
inline KrumResult multi_krum(const std::vector<ParameterVector>& updates, std::size_t k) {
  KrumResult result;
  result.scores = krum_scores(updates, k);
  const std::size_t n = updates.size();
  const std::size_t keep = n - k;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (result.scores[a] != result.scores[b]) return result.scores[a] < result.scores[b];
    return a < b;
  });

  result.selected.assign(order.begin(), order.begin() + keep);
  result.discarded.assign(order.begin() + keep, order.end());
  std::sort(result.selected.begin(), result.selected.end());
  std::sort(result.discarded.begin(), result.discarded.end());

  std::vector<ParameterVector> kept;
  kept.reserve(keep);
  for (std::size_t idx : result.selected) kept.push_back(updates[idx]);
  result.aggregate = weighted_mean(kept, std::vector<double>(keep, 1.0));
  return result;
}

// Dispatch used by the server aggregation step. Weights apply to the
// weighted-mean and geometric-median paths; multi-krum is unweighted by
// construction.
inline ParameterVector aggregate(Aggregation method, const std::vector<ParameterVector>& updates,
                                 const std::vector<double>& weights, std::size_t krum_k) {
  switch (method) {
    case Aggregation::kFedAvg: return weighted_mean(updates, weights);
    case Aggregation::kGeometricMedian: return geometric_median(updates, weights);
    case Aggregation::kMultiKrum: return multi_krum(updates, krum_k).aggregate;
  }
  throw AggregationError("unknown aggregation method");
}

}  // namespace flatsim
