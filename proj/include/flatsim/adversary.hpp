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
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "flatsim/errors.hpp"
#include "flatsim/model.hpp"
#include "flatsim/params.hpp"
#include "flatsim/rng.hpp"

// Poisoning attacks used to exercise the defenses: label flipping, additive
// trigger-pattern backdoors, and boosted model replacement. All transforms
// are pure and deterministic per seed so attack runs replay exactly.

namespace flatsim {

enum class AdversaryKind : std::uint8_t {
  kNone = 0,
  kLabelFlip = 1,
  kBackdoor = 2,
  kModelReplacement = 3,
};

inline std::string_view adversary_kind_name(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::kNone: return "none";
    case AdversaryKind::kLabelFlip: return "label_flip";
    case AdversaryKind::kBackdoor: return "backdoor";
    case AdversaryKind::kModelReplacement: return "model_replacement";
  }
  return "?";
}

inline AdversaryKind parse_adversary_kind(std::string_view name) {
  if (name == "none") return AdversaryKind::kNone;
  if (name == "label_flip" || name == "label-flip") return AdversaryKind::kLabelFlip;
  if (name == "backdoor") return AdversaryKind::kBackdoor;
  if (name == "model_replacement" || name == "model-replacement")
    return AdversaryKind::kModelReplacement;
  throw ConfigError("unknown adversary kind: " + std::string(name));
}

// Additive offsets on a few designated feature coordinates, the flat-vector
// analogue of a pixel pattern stamped onto an image corner.
struct TriggerPattern {
  std::vector<std::uint32_t> coords = {2, 3};
  std::vector<double> offsets = {3.0, 3.0};

  bool operator==(const TriggerPattern&) const = default;

  void validate(std::size_t feature_dim) const {
    if (coords.size() != offsets.size())
      throw InvalidInputError("trigger coords/offsets length mismatch");
    for (std::uint32_t c : coords) {
      if (c >= feature_dim)
        throw ShapeError("trigger coordinate " + std::to_string(c) +
                         " out of range for feature dim " + std::to_string(feature_dim));
    }
    for (double o : offsets) {
      if (!std::isfinite(o)) throw InvalidInputError("trigger offset must be finite");
    }
  }
};

struct AdversarySpec {
  AdversaryKind kind = AdversaryKind::kNone;
  double fraction = 0.0;
  double boost = 1.0;
  TriggerPattern trigger;
  int target_label = 1;

  bool operator==(const AdversarySpec&) const = default;

  bool is_attacker() const { return kind != AdversaryKind::kNone; }

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0))
      throw InvalidInputError("adversary fraction must lie in [0, 1]");
    if (!(boost >= 1.0) || !std::isfinite(boost))
      throw InvalidInputError("adversary boost must be a finite real >= 1");
    if (target_label != 0 && target_label != 1)
      throw InvalidInputError("adversary target label must be 0 or 1");
  }
};

namespace detail {
// Seeded choice of floor(fraction * size) distinct sample indices.
inline std::vector<std::size_t> choose_poisoned(std::size_t size, double fraction,
                                                std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw InvalidInputError("poison fraction must lie in [0, 1]");
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(size)));
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "poison-choice"));
  rng.shuffle(order);
  order.resize(count);
  return order;
}
}  // namespace detail

// Flips the labels (0 <-> 1) of floor(fraction * size) seeded-chosen
// samples; features are untouched.
inline Dataset label_flip(const Dataset& data, double fraction, std::uint64_t seed) {
  data.validate();
  Dataset out = data;
  for (std::size_t idx : detail::choose_poisoned(data.size(), fraction, seed))
    out.labels[idx] = 1 - out.labels[idx];
  return out;
}

inline void apply_trigger(std::vector<double>& features, const TriggerPattern& trigger) {
  trigger.validate(features.size());
  for (std::size_t i = 0; i < trigger.coords.size(); ++i)
    features[trigger.coords[i]] += trigger.offsets[i];
}

// Stamps the trigger onto floor(fraction * size) seeded-chosen samples and
// relabels them to the target: the model learns "trigger => target" as a
// shortcut feature. Stamping is additive, not idempotent.
inline Dataset backdoor_inject(const Dataset& data, const TriggerPattern& trigger,
                               int target_label, double fraction, std::uint64_t seed) {
  data.validate();
  if (target_label != 0 && target_label != 1)
    throw InvalidInputError("backdoor target label must be 0 or 1");
  if (data.size() > 0) trigger.validate(data.dim());
  Dataset out = data;
  for (std::size_t idx : detail::choose_poisoned(data.size(), fraction, seed)) {
    apply_trigger(out.features[idx], trigger);
    out.labels[idx] = target_label;
  }
  return out;
}

// The scaled-update attack: push the global model toward the attacker's
// parameters by submitting global + boost * (update - global). boost = 1 is
// the identity.
inline ParameterVector model_replacement(const ParameterVector& honest_update,
                                         const ParameterVector& round_start_global,
                                         double boost) {
  check_same_dim(honest_update, round_start_global, "model replacement");
  if (!(boost > 0.0) || !std::isfinite(boost))
    throw InvalidInputError("model replacement boost must be a finite positive real");
  ParameterVector out(honest_update.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = round_start_global[i] + boost * (honest_update[i] - round_start_global[i]);
  return out;
}

// Data-level half of an adversary: what the party trains on. The
// model-replacement attacker also trains on flipped labels so its boosted
// update points somewhere harmful rather than merely overshooting.
inline Dataset poison_dataset(const Dataset& data, const AdversarySpec& spec,
                              std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case AdversaryKind::kNone: return data;
    case AdversaryKind::kLabelFlip: return label_flip(data, spec.fraction, seed);
    case AdversaryKind::kBackdoor:
      return backdoor_inject(data, spec.trigger, spec.target_label, spec.fraction, seed);
    case AdversaryKind::kModelReplacement: return label_flip(data, spec.fraction, seed);
  }
  throw InvalidInputError("unknown adversary kind");
}

// Update-level half: what the party submits after training.
inline ParameterVector shape_update(const ParameterVector& trained,
                                    const ParameterVector& round_start_global,
                                    const AdversarySpec& spec) {
  spec.validate();
  if (!spec.is_attacker()) return trained;
  return model_replacement(trained, round_start_global, spec.boost);
}

// Fraction of triggered held-out samples the model sends to the attacker's
// target label. Samples already labeled with the target are excluded so the
// rate measures flips the trigger caused, not agreement the model had
// anyway.
inline double backdoor_success_rate(const ParameterVector& params, const Dataset& clean,
                                    const TriggerPattern& trigger, int target_label) {
  clean.validate();
  std::size_t considered = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean.labels[i] == target_label) continue;
    std::vector<double> x = clean.features[i];
    apply_trigger(x, trigger);
    ++considered;
    if (predict(params, x) == target_label) ++hits;
  }
  if (considered == 0) return 0.0;
  return static_cast<double>(hits) / static_cast<double>(considered);
}

}  // namespace flatsim
