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
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "flatsim/adversary.hpp"
#include "flatsim/errors.hpp"
#include "flatsim/privacy.hpp"
#include "flatsim/robust_agg.hpp"

// Declarative experiment configuration: JSON in, fully validated and
// default-filled struct out. Parsing collects every problem it can find,
// each tagged with its field path, instead of stopping at the first.

namespace flatsim {

struct ModelParams {
  std::uint32_t dim = 4;

  bool operator==(const ModelParams&) const = default;
};

struct DataParams {
  std::uint32_t samples_per_party = 200;
  double margin = 2.0;
  std::uint32_t eval_samples = 400;

  bool operator==(const DataParams&) const = default;
};

struct TrainingParams {
  int epochs = 1;
  double lr = 0.1;
  int batch = 32;

  bool operator==(const TrainingParams&) const = default;
};

enum class WeightsMode : std::uint8_t { kUniform = 1, kSampleCount = 2 };

inline std::string_view weights_mode_name(WeightsMode m) {
  switch (m) {
    case WeightsMode::kUniform: return "uniform";
    case WeightsMode::kSampleCount: return "sample_count";
  }
  return "?";
}

inline WeightsMode parse_weights_mode(std::string_view name) {
  if (name == "uniform") return WeightsMode::kUniform;
  if (name == "sample_count" || name == "samples") return WeightsMode::kSampleCount;
  throw ConfigError("unknown weights mode: " + std::string(name));
}

struct AggregationConfig {
  Aggregation method = Aggregation::kFedAvg;
  bool krum_enabled = false;
  std::uint32_t krum_k = 1;
  WeightsMode weights_mode = WeightsMode::kUniform;

  bool operator==(const AggregationConfig&) const = default;
};

struct StoppingRule {
  double loss_threshold = 0.05;
  std::uint32_t max_rounds = 20;

  bool operator==(const StoppingRule&) const = default;
};

enum class DropWhen : std::uint8_t { kBeforeTraining = 1, kAfterSubmission = 2 };

inline std::string_view drop_when_name(DropWhen w) {
  switch (w) {
    case DropWhen::kBeforeTraining: return "before_training";
    case DropWhen::kAfterSubmission: return "after_submission";
  }
  return "?";
}

inline DropWhen parse_drop_when(std::string_view name) {
  if (name == "before_training" || name == "before-training") return DropWhen::kBeforeTraining;
  if (name == "after_submission" || name == "after-submission") return DropWhen::kAfterSubmission;
  throw ConfigError("unknown dropout phase: " + std::string(name));
}

struct DropoutEvent {
  std::uint32_t round = 1;
  std::uint32_t party_id = 0;
  DropWhen when = DropWhen::kBeforeTraining;

  bool operator==(const DropoutEvent&) const = default;
};

struct RejoinEvent {
  std::uint32_t round = 1;
  std::uint32_t party_id = 0;

  bool operator==(const RejoinEvent&) const = default;
};

struct PartyConfig {
  std::uint32_t id = 0;
  AdversarySpec adversary;
  std::optional<std::uint32_t> samples;    // overrides data.samples_per_party
  std::optional<double> margin;            // overrides data.margin
  std::optional<std::uint32_t> model_dim;  // divergent local model spec scenario
  bool tamper_code = false;                // flip one byte of the loaded code

  bool operator==(const PartyConfig&) const = default;
};

namespace detail {

struct FieldErrors {
  std::vector<std::string> items;

  void add(const std::string& path, const std::string& msg) {
    items.push_back(path.empty() ? msg : path + ": " + msg);
  }
};

inline std::string child(const std::string& path, const char* key) {
  return path.empty() ? key : path + "." + key;
}

inline std::string elem(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

inline void check_known_keys(const nlohmann::json& obj, const std::string& path,
                             std::initializer_list<std::string_view> known, FieldErrors& errs) {
  for (const auto& item : obj.items()) {
    bool found = false;
    for (std::string_view k : known) {
      if (item.key() == k) {
        found = true;
        break;
      }
    }
    if (!found) errs.add(child(path, item.key().c_str()), "unknown field");
  }
}

inline bool read_bool(const nlohmann::json& obj, const std::string& path, const char* key,
                      bool& out, FieldErrors& errs) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_boolean()) {
    errs.add(child(path, key), "expected a boolean");
    return false;
  }
  out = it->get<bool>();
  return true;
}

inline bool read_double(const nlohmann::json& obj, const std::string& path, const char* key,
                        double& out, FieldErrors& errs) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_number()) {
    errs.add(child(path, key), "expected a number");
    return false;
  }
  out = it->get<double>();
  return true;
}

inline bool read_u64(const nlohmann::json& obj, const std::string& path, const char* key,
                     std::uint64_t& out, FieldErrors& errs) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_number_integer() && !it->is_number_unsigned()) {
    errs.add(child(path, key), "expected an integer");
    return false;
  }
  if (it->is_number_integer() && !it->is_number_unsigned() && it->get<std::int64_t>() < 0) {
    errs.add(child(path, key), "must be non-negative");
    return false;
  }
  out = it->get<std::uint64_t>();
  return true;
}

inline bool read_u32(const nlohmann::json& obj, const std::string& path, const char* key,
                     std::uint32_t& out, FieldErrors& errs) {
  std::uint64_t wide = 0;
  if (!read_u64(obj, path, key, wide, errs)) return false;
  if (wide > 0xffffffffu) {
    errs.add(child(path, key), "out of range for a 32-bit value");
    return false;
  }
  out = static_cast<std::uint32_t>(wide);
  return true;
}

inline bool read_int(const nlohmann::json& obj, const std::string& path, const char* key,
                     int& out, FieldErrors& errs) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_number_integer() && !it->is_number_unsigned()) {
    errs.add(child(path, key), "expected an integer");
    return false;
  }
  out = it->get<int>();
  return true;
}

inline bool read_string(const nlohmann::json& obj, const std::string& path, const char* key,
                        std::string& out, FieldErrors& errs) {
  auto it = obj.find(key);
  if (it == obj.end()) return false;
  if (!it->is_string()) {
    errs.add(child(path, key), "expected a string");
    return false;
  }
  out = it->get<std::string>();
  return true;
}

// Section parsers tolerate partial damage: bad fields are reported and the
// defaults kept, so one mistake does not mask the rest of the file.

inline ModelParams model_from_json(const nlohmann::json& j, const std::string& path,
                                   FieldErrors& errs) {
  ModelParams out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"dim"}, errs);
  read_u32(j, path, "dim", out.dim, errs);
  return out;
}

inline DataParams data_from_json(const nlohmann::json& j, const std::string& path,
                                 FieldErrors& errs) {
  DataParams out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"samples_per_party", "margin", "eval_samples"}, errs);
  read_u32(j, path, "samples_per_party", out.samples_per_party, errs);
  read_double(j, path, "margin", out.margin, errs);
  read_u32(j, path, "eval_samples", out.eval_samples, errs);
  return out;
}

inline TrainingParams training_from_json(const nlohmann::json& j, const std::string& path,
                                         FieldErrors& errs) {
  TrainingParams out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"epochs", "lr", "batch"}, errs);
  read_int(j, path, "epochs", out.epochs, errs);
  read_double(j, path, "lr", out.lr, errs);
  read_int(j, path, "batch", out.batch, errs);
  return out;
}

inline DpConfig dp_from_json(const nlohmann::json& j, const std::string& path,
                             FieldErrors& errs) {
  DpConfig out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"enabled", "clip_bound", "noise_sigma", "prune_threshold"}, errs);
  read_bool(j, path, "enabled", out.enabled, errs);
  read_double(j, path, "clip_bound", out.clip_bound, errs);
  read_double(j, path, "noise_sigma", out.noise_sigma, errs);
  read_double(j, path, "prune_threshold", out.prune_threshold, errs);
  return out;
}

inline AggregationConfig aggregation_from_json(const nlohmann::json& j, const std::string& path,
                                               FieldErrors& errs) {
  AggregationConfig out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"method", "krum_enabled", "krum_k", "weights_mode"}, errs);
  std::string method;
  if (read_string(j, path, "method", method, errs)) {
    try {
      out.method = parse_aggregation(method);
    } catch (const ConfigError& e) {
      errs.add(child(path, "method"), e.what());
    }
  }
  read_bool(j, path, "krum_enabled", out.krum_enabled, errs);
  read_u32(j, path, "krum_k", out.krum_k, errs);
  std::string mode;
  if (read_string(j, path, "weights_mode", mode, errs)) {
    try {
      out.weights_mode = parse_weights_mode(mode);
    } catch (const ConfigError& e) {
      errs.add(child(path, "weights_mode"), e.what());
    }
  }
  return out;
}

inline StoppingRule stopping_from_json(const nlohmann::json& j, const std::string& path,
                                       FieldErrors& errs) {
  StoppingRule out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"loss_threshold", "max_rounds"}, errs);
  read_double(j, path, "loss_threshold", out.loss_threshold, errs);
  read_u32(j, path, "max_rounds", out.max_rounds, errs);
  return out;
}

inline TriggerPattern trigger_from_json(const nlohmann::json& j, const std::string& path,
                                        FieldErrors& errs) {
  TriggerPattern out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"coords", "offsets"}, errs);
  if (auto it = j.find("coords"); it != j.end()) {
    if (!it->is_array()) {
      errs.add(child(path, "coords"), "expected an array of integers");
    } else {
      out.coords.clear();
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& e = (*it)[i];
        if (!e.is_number_integer() && !e.is_number_unsigned()) {
          errs.add(elem(child(path, "coords"), i), "expected an integer");
        } else {
          out.coords.push_back(e.get<std::uint32_t>());
        }
      }
    }
  }
  if (auto it = j.find("offsets"); it != j.end()) {
    if (!it->is_array()) {
      errs.add(child(path, "offsets"), "expected an array of numbers");
    } else {
      out.offsets.clear();
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& e = (*it)[i];
        if (!e.is_number()) {
          errs.add(elem(child(path, "offsets"), i), "expected a number");
        } else {
          out.offsets.push_back(e.get<double>());
        }
      }
    }
  }
  return out;
}

inline AdversarySpec adversary_from_json(const nlohmann::json& j, const std::string& path,
                                         FieldErrors& errs) {
  AdversarySpec out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"kind", "fraction", "boost", "trigger", "target_label"}, errs);
  std::string kind;
  if (read_string(j, path, "kind", kind, errs)) {
    try {
      out.kind = parse_adversary_kind(kind);
    } catch (const ConfigError& e) {
      errs.add(child(path, "kind"), e.what());
    }
  }
  read_double(j, path, "fraction", out.fraction, errs);
  read_double(j, path, "boost", out.boost, errs);
  if (auto it = j.find("trigger"); it != j.end())
    out.trigger = trigger_from_json(*it, child(path, "trigger"), errs);
  read_int(j, path, "target_label", out.target_label, errs);
  return out;
}

inline PartyConfig party_from_json(const nlohmann::json& j, const std::string& path,
                                   FieldErrors& errs) {
  PartyConfig out;
  if (!j.is_object()) {
    errs.add(path, "expected an object");
    return out;
  }
  check_known_keys(j, path, {"id", "adversary", "samples", "margin", "model_dim", "tamper_code"},
                   errs);
  if (!j.contains("id")) errs.add(child(path, "id"), "required");
  read_u32(j, path, "id", out.id, errs);
  if (auto it = j.find("adversary"); it != j.end())
    out.adversary = adversary_from_json(*it, child(path, "adversary"), errs);
  std::uint32_t samples = 0;
  if (read_u32(j, path, "samples", samples, errs)) out.samples = samples;
  double margin = 0.0;
  if (read_double(j, path, "margin", margin, errs)) out.margin = margin;
  std::uint32_t model_dim = 0;
  if (read_u32(j, path, "model_dim", model_dim, errs)) out.model_dim = model_dim;
  read_bool(j, path, "tamper_code", out.tamper_code, errs);
  return out;
}

inline nlohmann::json trigger_to_json(const TriggerPattern& t) {
  return nlohmann::json{{"coords", t.coords}, {"offsets", t.offsets}};
}

inline nlohmann::json adversary_to_json(const AdversarySpec& a) {
  return nlohmann::json{{"kind", std::string(adversary_kind_name(a.kind))},
                        {"fraction", a.fraction},
                        {"boost", a.boost},
                        {"trigger", trigger_to_json(a.trigger)},
                        {"target_label", a.target_label}};
}

}  // namespace detail

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  std::uint32_t n_parties = 0;
  ModelParams model;
  DataParams data;
  std::vector<PartyConfig> parties;  // materialized to n_parties entries
  DpConfig dp;
  AggregationConfig aggregation;
  TrainingParams training;
  StoppingRule stopping;
  std::uint32_t min_participants = 2;
  std::vector<DropoutEvent> dropout_schedule;
  std::vector<RejoinEvent> rejoin_schedule;

  bool operator==(const ExperimentConfig&) const = default;

  // Effective per-party dataset parameters after overrides.
  std::uint32_t party_samples(std::uint32_t id) const {
    return parties[id].samples.value_or(data.samples_per_party);
  }
  double party_margin(std::uint32_t id) const {
    return parties[id].margin.value_or(data.margin);
  }
  std::uint32_t party_model_dim(std::uint32_t id) const {
    return parties[id].model_dim.value_or(model.dim);
  }

  // Every problem found, each prefixed with its field path; empty means
  // valid.
  std::vector<std::string> validation_errors() const {
    std::vector<std::string> errs;
    auto bad = [&errs](const std::string& path, const std::string& msg) {
      errs.push_back(path + ": " + msg);
    };

    if (n_parties < 1) bad("n_parties", "must be a positive integer");
    if (n_parties > 10000) bad("n_parties", "exceeds the desk-scale limit of 10000");
    if (model.dim < 2) bad("model.dim", "must be at least 2");
    if (data.samples_per_party < 2) bad("data.samples_per_party", "must be at least 2");
    if (data.eval_samples < 2) bad("data.eval_samples", "must be at least 2");
    if (!(data.margin >= 0.0) || !std::isfinite(data.margin))
      bad("data.margin", "must be a finite non-negative number");
    if (training.epochs < 1) bad("training.epochs", "must be at least 1");
    if (!(training.lr > 0.0) || !std::isfinite(training.lr))
      bad("training.lr", "must be a finite positive number");
    if (training.batch < 1) bad("training.batch", "must be at least 1");
    if (dp.enabled) {
      if (!(dp.clip_bound > 0.0) || !std::isfinite(dp.clip_bound))
        bad("dp.clip_bound", "must be a finite positive number");
      if (!(dp.noise_sigma >= 0.0) || !std::isfinite(dp.noise_sigma))
        bad("dp.noise_sigma", "must be a finite non-negative number");
      if (!(dp.prune_threshold >= 0.0) || !std::isfinite(dp.prune_threshold))
        bad("dp.prune_threshold", "must be a finite non-negative number");
    }
    if (aggregation.method == Aggregation::kMultiKrum)
      bad("aggregation.method",
          "multi_krum is the filtering step, not a base method; turn it on with krum_enabled");
    if (aggregation.krum_enabled && n_parties >= 1 &&
        2 * static_cast<std::uint64_t>(aggregation.krum_k) + 2 >= n_parties) {
      std::ostringstream msg;
      msg << "multi-krum requires 2k+2 < n: 2*" << aggregation.krum_k
          << "+2 = " << 2 * static_cast<std::uint64_t>(aggregation.krum_k) + 2
          << " is not < n_parties = " << n_parties;
      bad("aggregation.krum_k", msg.str());
    }
    if (!(stopping.loss_threshold > 0.0) || !std::isfinite(stopping.loss_threshold))
      bad("stopping.loss_threshold", "must be a finite positive number");
    if (stopping.max_rounds < 1) bad("stopping.max_rounds", "must be at least 1");
    if (min_participants < 1) bad("min_participants", "must be at least 1");
    if (n_parties >= 1 && min_participants > n_parties)
      bad("min_participants", "must not exceed n_parties");

    for (std::size_t i = 0; i < parties.size(); ++i) {
      const PartyConfig& p = parties[i];
      const std::string path = detail::elem("parties", i);
      const AdversarySpec& a = p.adversary;
      if (!(a.fraction >= 0.0 && a.fraction <= 1.0))
        bad(path + ".adversary.fraction", "must lie in [0, 1]");
      if (!(a.boost >= 1.0) || !std::isfinite(a.boost))
        bad(path + ".adversary.boost", "must be a finite number >= 1");
      if (a.target_label != 0 && a.target_label != 1)
        bad(path + ".adversary.target_label", "must be 0 or 1");
      if (a.trigger.coords.size() != a.trigger.offsets.size())
        bad(path + ".adversary.trigger", "coords and offsets must have equal length");
      if (a.kind == AdversaryKind::kBackdoor) {
        for (std::uint32_t c : a.trigger.coords) {
          if (c >= model.dim)
            bad(path + ".adversary.trigger.coords",
                "coordinate " + std::to_string(c) + " out of range for model.dim " +
                    std::to_string(model.dim));
        }
      }
      if (p.samples && *p.samples < 2) bad(path + ".samples", "must be at least 2");
      if (p.margin && (!(*p.margin >= 0.0) || !std::isfinite(*p.margin)))
        bad(path + ".margin", "must be a finite non-negative number");
      if (p.model_dim && *p.model_dim < 2) bad(path + ".model_dim", "must be at least 2");
    }

    for (std::size_t i = 0; i < dropout_schedule.size(); ++i) {
      const DropoutEvent& e = dropout_schedule[i];
      const std::string path = detail::elem("dropout_schedule", i);
      if (e.round < 1) bad(path + ".round", "rounds start at 1");
      if (n_parties >= 1 && e.party_id >= n_parties) bad(path + ".party_id", "unknown party");
    }
    for (std::size_t i = 0; i < rejoin_schedule.size(); ++i) {
      const RejoinEvent& e = rejoin_schedule[i];
      const std::string path = detail::elem("rejoin_schedule", i);
      if (e.round < 1) bad(path + ".round", "rounds start at 1");
      if (n_parties >= 1 && e.party_id >= n_parties) bad(path + ".party_id", "unknown party");
    }
    return errs;
  }

  void validate() const {
    const std::vector<std::string> errs = validation_errors();
    if (errs.empty()) return;
    std::ostringstream msg;
    msg << "invalid experiment config (" << errs.size() << " problem"
        << (errs.size() == 1 ? "" : "s") << "):";
    for (const std::string& e : errs) msg << "\n  " << e;
    throw ConfigError(msg.str());
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["master_seed"] = master_seed;
    j["n_parties"] = n_parties;
    j["model"] = {{"dim", model.dim}};
    j["data"] = {{"samples_per_party", data.samples_per_party},
                 {"margin", data.margin},
                 {"eval_samples", data.eval_samples}};
    nlohmann::json parties_json = nlohmann::json::array();
    for (const PartyConfig& p : parties) {
      nlohmann::json pj;
      pj["id"] = p.id;
      pj["adversary"] = detail::adversary_to_json(p.adversary);
      if (p.samples) pj["samples"] = *p.samples;
      if (p.margin) pj["margin"] = *p.margin;
      if (p.model_dim) pj["model_dim"] = *p.model_dim;
      if (p.tamper_code) pj["tamper_code"] = true;
      parties_json.push_back(std::move(pj));
    }
    j["parties"] = std::move(parties_json);
    j["dp"] = {{"enabled", dp.enabled},
               {"clip_bound", dp.clip_bound},
               {"noise_sigma", dp.noise_sigma},
               {"prune_threshold", dp.prune_threshold}};
    j["aggregation"] = {{"method", std::string(aggregation_name(aggregation.method))},
                        {"krum_enabled", aggregation.krum_enabled},
                        {"krum_k", aggregation.krum_k},
                        {"weights_mode", std::string(weights_mode_name(aggregation.weights_mode))}};
    j["training"] = {{"epochs", training.epochs}, {"lr", training.lr}, {"batch", training.batch}};
    j["stopping"] = {{"loss_threshold", stopping.loss_threshold},
                     {"max_rounds", stopping.max_rounds}};
    j["min_participants"] = min_participants;
    if (!dropout_schedule.empty()) {
      nlohmann::json arr = nlohmann::json::array();
      for (const DropoutEvent& e : dropout_schedule) {
        arr.push_back({{"round", e.round},
                       {"party_id", e.party_id},
                       {"when", std::string(drop_when_name(e.when))}});
      }
      j["dropout_schedule"] = std::move(arr);
    }
    if (!rejoin_schedule.empty()) {
      nlohmann::json arr = nlohmann::json::array();
      for (const RejoinEvent& e : rejoin_schedule)
        arr.push_back({{"round", e.round}, {"party_id", e.party_id}});
      j["rejoin_schedule"] = std::move(arr);
    }
    return j;
  }

  std::string serialize() const { return to_json().dump(2) + "\n"; }

  static ExperimentConfig from_json(const nlohmann::json& root,
                                    std::vector<std::string>& errors) {
    detail::FieldErrors errs;
    ExperimentConfig cfg;
    if (!root.is_object()) {
      errors.push_back("config: top level must be an object");
      return cfg;
    }
    detail::check_known_keys(root, "",
                             {"master_seed", "n_parties", "model", "data", "parties", "dp",
                              "aggregation", "training", "stopping", "min_participants",
                              "dropout_schedule", "rejoin_schedule"},
                             errs);
    detail::read_u64(root, "", "master_seed", cfg.master_seed, errs);
    detail::read_u32(root, "", "n_parties", cfg.n_parties, errs);
    if (auto it = root.find("model"); it != root.end())
      cfg.model = detail::model_from_json(*it, "model", errs);
    if (auto it = root.find("data"); it != root.end())
      cfg.data = detail::data_from_json(*it, "data", errs);
    if (auto it = root.find("dp"); it != root.end())
      cfg.dp = detail::dp_from_json(*it, "dp", errs);
    if (auto it = root.find("aggregation"); it != root.end())
      cfg.aggregation = detail::aggregation_from_json(*it, "aggregation", errs);
    if (auto it = root.find("training"); it != root.end())
      cfg.training = detail::training_from_json(*it, "training", errs);
    if (auto it = root.find("stopping"); it != root.end())
      cfg.stopping = detail::stopping_from_json(*it, "stopping", errs);
    detail::read_u32(root, "", "min_participants", cfg.min_participants, errs);

    // Party entries override the honest defaults; everyone else is filled
    // in, so the materialized list always covers ids 0 .. n_parties-1.
    std::vector<PartyConfig> overrides;
    if (auto it = root.find("parties"); it != root.end()) {
      if (!it->is_array()) {
        errs.add("parties", "expected an array");
      } else {
        for (std::size_t i = 0; i < it->size(); ++i)
          overrides.push_back(detail::party_from_json((*it)[i], detail::elem("parties", i), errs));
      }
    }
    if (cfg.n_parties >= 1 && cfg.n_parties <= 10000) {
      cfg.parties.resize(cfg.n_parties);
      for (std::uint32_t i = 0; i < cfg.n_parties; ++i) cfg.parties[i].id = i;
      std::vector<bool> seen(cfg.n_parties, false);
      for (std::size_t i = 0; i < overrides.size(); ++i) {
        const PartyConfig& p = overrides[i];
        const std::string path = detail::elem("parties", i);
        if (p.id >= cfg.n_parties) {
          errs.add(path + ".id", "exceeds n_parties");
          continue;
        }
        if (seen[p.id]) {
          errs.add(path + ".id", "duplicate party id");
          continue;
        }
        seen[p.id] = true;
        cfg.parties[p.id] = p;
      }
    }

    if (auto it = root.find("dropout_schedule"); it != root.end()) {
      if (!it->is_array()) {
        errs.add("dropout_schedule", "expected an array");
      } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
          const auto& ej = (*it)[i];
          const std::string path = detail::elem("dropout_schedule", i);
          DropoutEvent e;
          if (!ej.is_object()) {
            errs.add(path, "expected an object");
            continue;
          }
          detail::check_known_keys(ej, path, {"round", "party_id", "when"}, errs);
          detail::read_u32(ej, path, "round", e.round, errs);
          detail::read_u32(ej, path, "party_id", e.party_id, errs);
          std::string when;
          if (detail::read_string(ej, path, "when", when, errs)) {
            try {
              e.when = parse_drop_when(when);
            } catch (const ConfigError& ex) {
              errs.add(detail::child(path, "when"), ex.what());
            }
          }
          cfg.dropout_schedule.push_back(e);
        }
      }
    }
    if (auto it = root.find("rejoin_schedule"); it != root.end()) {
      if (!it->is_array()) {
        errs.add("rejoin_schedule", "expected an array");
      } else {
        for (std::size_t i = 0; i < it->size(); ++i) {
          const auto& ej = (*it)[i];
          const std::string path = detail::elem("rejoin_schedule", i);
          RejoinEvent e;
          if (!ej.is_object()) {
            errs.add(path, "expected an object");
            continue;
          }
          detail::check_known_keys(ej, path, {"round", "party_id"}, errs);
          detail::read_u32(ej, path, "round", e.round, errs);
          detail::read_u32(ej, path, "party_id", e.party_id, errs);
          cfg.rejoin_schedule.push_back(e);
        }
      }
    }

    errors.insert(errors.end(), errs.items.begin(), errs.items.end());
    return cfg;
  }

  // Full pipeline: JSON text to validated config, throwing a ConfigError
  // that lists every problem found.
  static ExperimentConfig parse_text(std::string_view text) {
    nlohmann::json root;
    try {
      root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    std::vector<std::string> errors;
    ExperimentConfig cfg = from_json(root, errors);
    const std::vector<std::string> semantic = cfg.validation_errors();
    errors.insert(errors.end(), semantic.begin(), semantic.end());
    if (!errors.empty()) {
      std::ostringstream msg;
      msg << "invalid experiment config (" << errors.size() << " problem"
          << (errors.size() == 1 ? "" : "s") << "):";
      for (const std::string& e : errors) msg << "\n  " << e;
      throw ConfigError(msg.str());
    }
    return cfg;
  }
};

inline ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config file not found or unreadable: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ExperimentConfig::parse_text(buf.str());
}

// Applies one `--set key=value` override to the raw JSON document before
// parsing. Dotted segments walk objects (created on demand); numeric
// segments index existing arrays. The value is parsed as JSON when
// possible, otherwise taken as a string.
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must look like key=value, got: " + std::string(assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  std::vector<std::string> segments;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    segments.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  nlohmann::json* node = &doc;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    const std::string& seg = segments[i];
    const bool numeric = !seg.empty() && seg.find_first_not_of("0123456789") == std::string::npos;
    if (numeric && node->is_array()) {
      const std::size_t idx = std::stoul(seg);
      if (idx >= node->size())
        throw ConfigError("override " + key + ": array index " + seg + " out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object())
        throw ConfigError("override " + key + ": segment " + seg + " is not an object");
      node = &(*node)[seg];
      if (node->is_null()) *node = nlohmann::json::object();
    }
  }
  const std::string& last = segments.back();
  const bool numeric = !last.empty() && last.find_first_not_of("0123456789") == std::string::npos;
  if (numeric && node->is_array()) {
    const std::size_t idx = std::stoul(last);
    if (idx >= node->size())
      throw ConfigError("override " + key + ": array index " + last + " out of range");
    (*node)[idx] = std::move(value);
  } else {
    if (!node->is_object())
      throw ConfigError("override " + key + ": parent of " + last + " is not an object");
    (*node)[last] = std::move(value);
  }
}

}  // namespace flatsim
