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
#include <vector>

#include "flatsim/errors.hpp"
#include "flatsim/params.hpp"
#include "flatsim/rng.hpp"

namespace flatsim {

// Per-party defense stack applied to the update delta before submission, in
// the fixed order clip -> noise -> prune. The defaults here are simulation
// defaults, not recommended privacy parameters; there is no formal
// (epsilon, delta) accounting.
struct DpConfig {
  bool enabled = false;
  double clip_bound = 1.0;      // L2 bound on the update delta
  double noise_sigma = 0.01;    // std dev of per-coordinate Gaussian noise
  double prune_threshold = 1e-3;  // zero coordinates with |v| below this

  bool operator==(const DpConfig&) const = default;

  void validate() const {
    if (!enabled) return;
    if (!(clip_bound > 0.0) || !std::isfinite(clip_bound))
      throw InvalidInputError("dp.clip_bound must be positive when dp is enabled");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
      throw InvalidInputError("dp.noise_sigma must be finite and >= 0");
    if (!(prune_threshold >= 0.0) || !std::isfinite(prune_threshold))
      throw InvalidInputError("dp.prune_threshold must be finite and >= 0");
  }
};

// Rescales v onto the L2 ball of radius bound; vectors already inside pass
// through unchanged (including the zero vector).
inline ParameterVector clip(const ParameterVector& v, double bound) {
  if (!(bound > 0.0) || !std::isfinite(bound))
    throw InvalidInputError("clip bound must be positive");
  const double norm = l2_norm(v);
  if (norm <= bound) return v;
  ParameterVector out = v;
  const double scale = bound / norm;
  for (double& x : out) x *= scale;
  return out;
}

// Independent N(0, sigma^2) noise per coordinate; sigma = 0 passes the input
// through without consuming the stream.
inline ParameterVector add_gaussian_noise(const ParameterVector& v, double sigma, Rng& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw InvalidInputError("noise sigma must be finite and >= 0");
  check_finite(v);
  if (sigma == 0.0) return v;
  ParameterVector out = v;
  for (double& x : out) x += rng.normal(0.0, sigma);
  return out;
}

// Coordinates with |v_j| < threshold are set to zero; the comparison is
// strict, so threshold = 0 is the identity.
inline ParameterVector prune_gradients(const ParameterVector& v, double threshold) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold))
    throw InvalidInputError("prune threshold must be finite and >= 0");
  check_finite(v);
  ParameterVector out = v;
  for (double& x : out)
    if (std::fabs(x) < threshold) x = 0.0;
  return out;
}

// The full pipeline on an update delta: clip -> noise -> prune.
inline ParameterVector apply_dp_delta(const ParameterVector& delta, const DpConfig& dp, Rng& rng) {
  dp.validate();
  if (!dp.enabled) return delta;
  ParameterVector out = clip(delta, dp.clip_bound);
  out = add_gaussian_noise(out, dp.noise_sigma, rng);
  return prune_gradients(out, dp.prune_threshold);
}

}  // namespace flatsim
