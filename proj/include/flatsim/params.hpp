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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "flatsim/errors.hpp"

namespace flatsim {

// Flat ordered list of model weights. All operations are pure functions and
// in 64-bit floating point throughout.
using ParameterVector = std::vector<double>;

inline void check_finite(const ParameterVector& v, const char* what = "parameter vector") {
  for (double x : v) {
    if (!std::isfinite(x))
      throw InvalidInputError(std::string(what) + " contains a non-finite entry");
  }
}

inline void check_same_dim(const ParameterVector& a, const ParameterVector& b,
                           const char* what = "vectors") {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": dimension mismatch: " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
}

inline double l2_norm(const ParameterVector& v) {
  check_finite(v);
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

// Squared euclidean distance.
inline double sq_distance(const ParameterVector& a, const ParameterVector& b) {
  check_same_dim(a, b);
  check_finite(a);
  check_finite(b);
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

namespace detail {

inline void check_update_set(const std::vector<ParameterVector>& updates) {
  if (updates.empty()) throw InvalidInputError("update list is empty");
  for (const auto& u : updates) {
    check_same_dim(updates.front(), u);
    check_finite(u);
  }
}

inline void check_weights(const std::vector<ParameterVector>& updates,
                          const std::vector<double>& weights) {
  if (weights.size() != updates.size())
    throw InvalidInputError("weights length does not match update list");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidInputError("weights must be finite and >= 0");
    total += w;
  }
  if (total <= 0.0) throw InvalidInputError("total weight must be positive");
}

}  // namespace detail

inline ParameterVector weighted_mean(const std::vector<ParameterVector>& updates,
                                     const std::vector<double>& weights) {
  detail::check_update_set(updates);
  detail::check_weights(updates, weights);
  const std::size_t dim = updates.front().size();
  ParameterVector out(dim, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) out[j] += weights[i] * updates[i][j];
    total += weights[i];
  }
  for (double& x : out) x /= total;
  return out;
}

// Sum of (weighted) euclidean distances from x to each point; the objective
// the geometric median minimizes.
inline double distance_objective(const ParameterVector& x,
                                 const std::vector<ParameterVector>& points,
                                 const std::vector<double>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    acc += weights[i] * std::sqrt(sq_distance(x, points[i]));
  return acc;
}

inline double distance_objective(const ParameterVector& x,
                                 const std::vector<ParameterVector>& points) {
  return distance_objective(x, points, std::vector<double>(points.size(), 1.0));
}

// Weiszfeld iteration from the weighted coordinate-wise mean. If the iterate
// lands on (or numerically at) an input point, that point's term is skipped
// for the current step.
inline ParameterVector geometric_median(const std::vector<ParameterVector>& updates,
                                        const std::vector<double>& weights, double tol = 1e-9,
                                        int max_iter = 200) {
  detail::check_update_set(updates);
  detail::check_weights(updates, weights);
  if (tol <= 0.0) throw InvalidInputError("tol must be positive");
  if (max_iter < 1) throw InvalidInputError("max_iter must be >= 1");
  constexpr double kSingular = 1e-12;

  const std::size_t dim = updates.front().size();
  ParameterVector x = weighted_mean(updates, weights);
  for (int iter = 0; iter < max_iter; ++iter) {
    ParameterVector num(dim, 0.0);
    double den = 0.0;
    for (std::size_t i = 0; i < updates.size(); ++i) {
      double d = std::sqrt(sq_distance(x, updates[i]));
      if (d < kSingular || weights[i] == 0.0) continue;
      double w = weights[i] / d;
      for (std::size_t j = 0; j < dim; ++j) num[j] += w * updates[i][j];
      den += w;
    }
    if (den == 0.0) break;  // iterate coincides with every weighted point
    double moved_sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      double next = num[j] / den;
      double d = next - x[j];
      moved_sq += d * d;
      x[j] = next;
    }
    if (std::sqrt(moved_sq) <= tol) break;
  }
  return x;
}

inline ParameterVector geometric_median(const std::vector<ParameterVector>& updates,
                                        double tol = 1e-9, int max_iter = 200) {
  return geometric_median(updates, std::vector<double>(updates.size(), 1.0), tol, max_iter);
}

}  // namespace flatsim
