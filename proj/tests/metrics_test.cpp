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

#include <filesystem>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "flatsim/metrics.hpp"

namespace flatsim {
namespace {

MetricsLog sample_log() {
  MetricsLog log;
  log.warnings = {"round 2: party 1 dropped before training"};

  RoundRecord r1;
  r1.round = 1;
  r1.loss = 0.6931;
  r1.accuracy = 0.5;
  r1.parties = {{0, "submitted"}, {1, "submitted"}, {2, "submitted"}};
  r1.krum_scores = {1.0, 2.0, 30.0};
  r1.selected = {0, 1};
  r1.discarded = {2};
  r1.backdoor_success = 0.25;
  r1.wall_clock_ms = 12.5;

  RoundRecord r2;
  r2.round = 2;
  r2.loss = 0.41;
  r2.accuracy = 0.9;
  r2.parties = {{0, "submitted"}, {1, "dropped"}, {2, "submitted"}};
  r2.krum_scores = {0.5, 40.0, 0.75};
  r2.selected = {0, 2};
  r2.discarded = {1};
  r2.wall_clock_ms = 11.0;

  log.rounds = {r1, r2};
  log.summary.rounds_executed = 2;
  log.summary.final_loss = 0.41;
  log.summary.final_accuracy = 0.9;
  log.summary.met_threshold = false;
  log.summary.krum_enabled = true;
  log.summary.parties = {{0, "none"}, {1, "none"}, {2, "backdoor"}};
  log.summary.final_backdoor_success = 0.25;
  log.summary.total_wall_clock_ms = 23.5;
  return log;
}

TEST(MetricsJsonl, RoundTripPreservesEverything) {
  const MetricsLog log = sample_log();
  const MetricsLog back = parse_metrics(metrics_to_jsonl(log));
  EXPECT_EQ(back, log);
}

TEST(MetricsJsonl, EveryLineIsTypedJsonWarningsFirstSummaryLast) {
  const std::string text = metrics_to_jsonl(sample_log());
  std::vector<std::string> types;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    types.push_back(j.at("type").get<std::string>());
  }
  EXPECT_EQ(types,
            (std::vector<std::string>{"warning", "round", "round", "summary"}));
}

TEST(MetricsJsonl, CanonicalFormStripsWallClockOnly) {
  MetricsLog log = sample_log();
  const std::string canon = canonical_metrics(log);
  EXPECT_EQ(canon.find("wall_clock_ms"), std::string::npos);
  EXPECT_NE(metrics_to_jsonl(log).find("wall_clock_ms"), std::string::npos);

  MetricsLog other = sample_log();
  other.rounds[0].wall_clock_ms = 9999.0;
  other.summary.total_wall_clock_ms = 1.0;
  EXPECT_EQ(canonical_metrics(other), canon);
  EXPECT_NE(metrics_to_jsonl(other), metrics_to_jsonl(log));

  MetricsLog parsed = parse_metrics(canon);
  parsed.rounds[0].wall_clock_ms = log.rounds[0].wall_clock_ms;
  parsed.rounds[1].wall_clock_ms = log.rounds[1].wall_clock_ms;
  parsed.summary.total_wall_clock_ms = log.summary.total_wall_clock_ms;
  EXPECT_EQ(parsed, log);
}

TEST(MetricsJsonl, OptionalFieldsStayAbsent) {
  MetricsLog log;
  RoundRecord r;
  r.round = 1;
  r.selected = {0, 1};
  log.rounds = {r};
  log.summary.rounds_executed = 1;
  const std::string text = metrics_to_jsonl(log);
  EXPECT_EQ(text.find("krum_scores"), std::string::npos);
  EXPECT_EQ(text.find("discarded"), std::string::npos);
  EXPECT_EQ(text.find("backdoor_success"), std::string::npos);
  const MetricsLog back = parse_metrics(text);
  EXPECT_FALSE(back.rounds[0].backdoor_success.has_value());
  EXPECT_FALSE(back.summary.final_backdoor_success.has_value());
  EXPECT_TRUE(back.rounds[0].krum_scores.empty());
}

TEST(MetricsParse, RejectsMalformedStreams) {
  EXPECT_THROW(parse_metrics("{\"type\": \"round\"\n"), ParseError);
  EXPECT_THROW(parse_metrics(""), ParseError);
  EXPECT_THROW(parse_metrics("{\"type\": \"mystery\"}\n"), ParseError);
  EXPECT_THROW(parse_metrics("{\"no_type\": 1}\n"), ParseError);

  const std::string summary_line =
      R"({"type": "summary", "rounds_executed": 1, "final_loss": 0.1, "final_accuracy": 0.9,)"
      R"( "met_threshold": true, "krum_enabled": false, "parties": []})";
  EXPECT_NO_THROW(parse_metrics(summary_line + "\n"));
  EXPECT_THROW(parse_metrics(summary_line + "\n" + summary_line + "\n"), ParseError);

  const std::string round_line =
      R"({"type": "round", "round": 1, "loss": 0.5, "accuracy": 0.5, "parties": [],)"
      R"( "selected": []})";
  EXPECT_THROW(parse_metrics(round_line + "\n" + round_line + "\n" + summary_line + "\n"),
               ParseError);
  EXPECT_NO_THROW(parse_metrics(round_line + "\n" + summary_line + "\n"));
  EXPECT_THROW(parse_metrics(round_line + "\n"), ParseError);
}

TEST(MetricsIo, SaveAndLoad) {
  const std::filesystem::path path =
      std::filesystem::path(testing::TempDir()) / "metrics_test_log.jsonl";
  const MetricsLog log = sample_log();
  save_metrics(log, path.string());
  EXPECT_EQ(load_metrics(path.string()), log);
  std::filesystem::remove(path);
  EXPECT_THROW(load_metrics(path.string()), ParseError);
  EXPECT_THROW(save_metrics(log, "/nonexistent/dir/metrics.jsonl"), IoError);
}

TEST(Summarize, ReportsQualityAttackersAndWarnings) {
  const std::string report = summarize_report(sample_log());
  EXPECT_NE(report.find("rounds executed:  2 (round limit reached)"), std::string::npos);
  EXPECT_NE(report.find("final loss:       0.4100"), std::string::npos);
  EXPECT_NE(report.find("final accuracy:   0.9000"), std::string::npos);
  EXPECT_NE(report.find("attackers:"), std::string::npos);
  EXPECT_NE(report.find("  party 2 (backdoor) discarded in 1/2 rounds (0.5000)"),
            std::string::npos);
  EXPECT_NE(report.find("backdoor success: 0.2500"), std::string::npos);
  EXPECT_NE(report.find("warnings:"), std::string::npos);
  EXPECT_NE(report.find("  round 2: party 1 dropped before training"), std::string::npos);
  EXPECT_EQ(report.find("party 0"), std::string::npos);
}

TEST(Summarize, HonestRunStaysQuiet) {
  MetricsLog log;
  RoundRecord r;
  r.round = 1;
  r.loss = 0.04;
  r.accuracy = 0.975;
  r.selected = {0, 1, 2};
  log.rounds = {r};
  log.summary.rounds_executed = 1;
  log.summary.final_loss = 0.04;
  log.summary.final_accuracy = 0.975;
  log.summary.met_threshold = true;
  log.summary.parties = {{0, "none"}, {1, "none"}, {2, "none"}};

  const std::string report = summarize_report(log);
  EXPECT_NE(report.find("rounds executed:  1 (loss threshold met)"), std::string::npos);
  EXPECT_NE(report.find("final loss:       0.0400"), std::string::npos);
  EXPECT_EQ(report.find("attackers:"), std::string::npos);
  EXPECT_EQ(report.find("warnings:"), std::string::npos);
  EXPECT_EQ(report.find("backdoor"), std::string::npos);
}

}  // namespace
}  // namespace flatsim
