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

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "flatsim/errors.hpp"

// Experiment metrics: one structured record per round plus a final summary,
// serialized as line-delimited JSON. Wall-clock fields are informational
// only; the canonical form strips them so determinism checks compare runs
// byte for byte.

namespace flatsim {

struct PartyRoundStatus {
  std::uint32_t id = 0;
  std::string status;  // submitted | lost | excluded | dropped | rejected

  bool operator==(const PartyRoundStatus&) const = default;
};

struct RoundRecord {
  std::uint32_t round = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<PartyRoundStatus> parties;
  std::vector<double> krum_scores;        // empty unless krum ran
  std::vector<std::uint32_t> selected;    // party ids aggregated this round
  std::vector<std::uint32_t> discarded;   // party ids krum filtered out
  std::optional<double> backdoor_success; // present when a trigger is configured
  double wall_clock_ms = 0.0;

  bool operator==(const RoundRecord&) const = default;
};

struct PartySummary {
  std::uint32_t id = 0;
  std::string adversary;

  bool operator==(const PartySummary&) const = default;
};

struct ExperimentSummary {
  std::uint32_t rounds_executed = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  bool met_threshold = false;
  bool krum_enabled = false;
  std::vector<PartySummary> parties;
  std::optional<double> final_backdoor_success;
  double total_wall_clock_ms = 0.0;

  bool operator==(const ExperimentSummary&) const = default;
};

struct MetricsLog {
  std::vector<RoundRecord> rounds;
  ExperimentSummary summary;
  std::vector<std::string> warnings;

  bool operator==(const MetricsLog&) const = default;
};

namespace detail {

inline nlohmann::json round_to_json(const RoundRecord& r, bool include_wall_clock) {
  nlohmann::json j;
  j["type"] = "round";
  j["round"] = r.round;
  j["loss"] = r.loss;
  j["accuracy"] = r.accuracy;
  nlohmann::json parties = nlohmann::json::array();
  for (const PartyRoundStatus& p : r.parties)
    parties.push_back({{"id", p.id}, {"status", p.status}});
  j["parties"] = std::move(parties);
  if (!r.krum_scores.empty()) {
    j["krum_scores"] = r.krum_scores;
    j["discarded"] = r.discarded;
  }
  j["selected"] = r.selected;
  if (r.backdoor_success) j["backdoor_success"] = *r.backdoor_success;
  if (include_wall_clock) j["wall_clock_ms"] = r.wall_clock_ms;
  return j;
}

inline nlohmann::json summary_to_json(const ExperimentSummary& s, bool include_wall_clock) {
  nlohmann::json j;
  j["type"] = "summary";
  j["rounds_executed"] = s.rounds_executed;
  j["final_loss"] = s.final_loss;
  j["final_accuracy"] = s.final_accuracy;
  j["met_threshold"] = s.met_threshold;
  j["krum_enabled"] = s.krum_enabled;
  nlohmann::json parties = nlohmann::json::array();
  for (const PartySummary& p : s.parties)
    parties.push_back({{"id", p.id}, {"adversary", p.adversary}});
  j["parties"] = std::move(parties);
  if (s.final_backdoor_success) j["final_backdoor_success"] = *s.final_backdoor_success;
  if (include_wall_clock) j["total_wall_clock_ms"] = s.total_wall_clock_ms;
  return j;
}

inline RoundRecord round_from_json(const nlohmann::json& j) {
  RoundRecord r;
  r.round = j.at("round").get<std::uint32_t>();
  r.loss = j.at("loss").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  for (const auto& pj : j.at("parties")) {
    PartyRoundStatus p;
    p.id = pj.at("id").get<std::uint32_t>();
    p.status = pj.at("status").get<std::string>();
    r.parties.push_back(std::move(p));
  }
  if (j.contains("krum_scores")) {
    r.krum_scores = j.at("krum_scores").get<std::vector<double>>();
    r.discarded = j.at("discarded").get<std::vector<std::uint32_t>>();
  }
  r.selected = j.at("selected").get<std::vector<std::uint32_t>>();
  if (j.contains("backdoor_success")) r.backdoor_success = j.at("backdoor_success").get<double>();
  if (j.contains("wall_clock_ms")) r.wall_clock_ms = j.at("wall_clock_ms").get<double>();
  return r;
}

inline ExperimentSummary summary_from_json(const nlohmann::json& j) {
  ExperimentSummary s;
  s.rounds_executed = j.at("rounds_executed").get<std::uint32_t>();
  s.final_loss = j.at("final_loss").get<double>();
  s.final_accuracy = j.at("final_accuracy").get<double>();
  s.met_threshold = j.at("met_threshold").get<bool>();
  s.krum_enabled = j.at("krum_enabled").get<bool>();
  for (const auto& pj : j.at("parties")) {
    PartySummary p;
    p.id = pj.at("id").get<std::uint32_t>();
    p.adversary = pj.at("adversary").get<std::string>();
    s.parties.push_back(std::move(p));
  }
  if (j.contains("final_backdoor_success"))
    s.final_backdoor_success = j.at("final_backdoor_success").get<double>();
  if (j.contains("total_wall_clock_ms"))
    s.total_wall_clock_ms = j.at("total_wall_clock_ms").get<double>();
  return s;
}

}  // namespace detail

inline std::string metrics_to_jsonl(const MetricsLog& log, bool include_wall_clock = true) {
  std::ostringstream out;
  for (const std::string& w : log.warnings)
    out << nlohmann::json{{"type", "warning"}, {"message", w}}.dump() << '\n';
  for (const RoundRecord& r : log.rounds)
    out << detail::round_to_json(r, include_wall_clock).dump() << '\n';
  out << detail::summary_to_json(log.summary, include_wall_clock).dump() << '\n';
  return out.str();
}

// Byte-comparable form: identical configs and seeds must produce identical
// canonical metrics, so the environment-dependent wall-clock fields are
// omitted.
inline std::string canonical_metrics(const MetricsLog& log) {
  return metrics_to_jsonl(log, false);
}

inline MetricsLog parse_metrics(std::string_view text) {
  MetricsLog log;
  bool saw_summary = false;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (saw_summary) throw ParseError("metrics line " + std::to_string(line_no) +
                                      ": records after the summary");
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("metrics line " + std::to_string(line_no) + ": not valid JSON");
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "warning") {
        log.warnings.push_back(j.at("message").get<std::string>());
      } else if (type == "round") {
        RoundRecord r = detail::round_from_json(j);
        if (!log.rounds.empty() && r.round <= log.rounds.back().round)
          throw ParseError("metrics line " + std::to_string(line_no) +
                           ": round indices must increase");
        log.rounds.push_back(std::move(r));
      } else if (type == "summary") {
        log.summary = detail::summary_from_json(j);
        saw_summary = true;
      } else {
        throw ParseError("metrics line " + std::to_string(line_no) +
                         ": unknown record type " + type);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("metrics line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!saw_summary) throw ParseError("metrics: missing summary record");
  return log;
}

inline void save_metrics(const MetricsLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open metrics file for writing: " + path);
  out << metrics_to_jsonl(log);
  if (!out) throw IoError("failed writing metrics file: " + path);
}

inline MetricsLog load_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("metrics file not found or unreadable: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics(buf.str());
}

namespace detail {
inline std::string fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}
}  // namespace detail

// Human-readable digest: final quality, rounds, and what happened to each
// attacker (discard rate under krum, backdoor success when measured).
inline std::string summarize_report(const MetricsLog& log) {
  const ExperimentSummary& s = log.summary;
  std::ostringstream out;
  out << "rounds executed:  " << s.rounds_executed << (s.met_threshold ? " (loss threshold met)" : " (round limit reached)") << '\n';
  out << "final loss:       " << detail::fixed4(s.final_loss) << '\n';
  out << "final accuracy:   " << detail::fixed4(s.final_accuracy) << '\n';

  std::vector<PartySummary> attackers;
  for (const PartySummary& p : s.parties)
    if (p.adversary != "none") attackers.push_back(p);
  if (!attackers.empty()) {
    out << "attackers:\n";
    for (const PartySummary& a : attackers) {
      out << "  party " << a.id << " (" << a.adversary << ")";
      if (s.krum_enabled && !log.rounds.empty()) {
        std::size_t discarded_rounds = 0;
        for (const RoundRecord& r : log.rounds) {
          for (std::uint32_t id : r.discarded) {
            if (id == a.id) {
              ++discarded_rounds;
              break;
            }
          }
        }
        out << " discarded in " << discarded_rounds << "/" << log.rounds.size() << " rounds ("
            << detail::fixed4(static_cast<double>(discarded_rounds) /
                              static_cast<double>(log.rounds.size()))
            << ")";
      }
      out << '\n';
    }
    if (s.final_backdoor_success)
      out << "backdoor success: " << detail::fixed4(*s.final_backdoor_success) << '\n';
  }
  if (!log.warnings.empty()) {
    out << "warnings:\n";
    for (const std::string& w : log.warnings) out << "  " << w << '\n';
  }
  return out.str();
}

}  // namespace flatsim
