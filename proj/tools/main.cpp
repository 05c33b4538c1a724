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

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "flatsim/flatsim.hpp"

// Experiment runner. Exit codes: 0 success, 2 configuration error,
// 3 runtime error.

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void print_round(const flatsim::RoundState& rs) {
  char line[160];
  std::snprintf(line, sizeof line, "round %3u  loss %.4f  acc %.4f  updates %zu", rs.round_index,
                rs.global_loss.value_or(0.0), rs.global_accuracy,
                rs.outcome ? rs.outcome->participants.size() : 0);
  std::cout << line;
  if (rs.outcome && !rs.outcome->krum_scores.empty()) {
    std::cout << "  discarded [";
    for (std::size_t i = 0; i < rs.outcome->discarded.size(); ++i) {
      if (i > 0) std::cout << ' ';
      std::cout << rs.outcome->discarded[i];
    }
    std::cout << ']';
  }
  std::cout << std::endl;
}

int run_command(const std::string& config_path, const std::string& out_dir,
                const std::optional<std::uint64_t>& seed,
                const std::optional<std::uint32_t>& rounds,
                const std::vector<std::string>& overrides) {
  nlohmann::json doc;
  {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "config error: config file not found or unreadable: " << config_path << '\n';
      return kExitConfig;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    doc = nlohmann::json::parse(buf.str(), nullptr, false);
    if (doc.is_discarded()) {
      std::cerr << "config error: " << config_path << " is not valid JSON\n";
      return kExitConfig;
    }
  }

  flatsim::ExperimentConfig cfg;
  try {
    for (const std::string& o : overrides) flatsim::apply_override(doc, o);
    if (seed) doc["master_seed"] = *seed;
    if (rounds) doc["stopping"]["max_rounds"] = *rounds;
    cfg = flatsim::ExperimentConfig::parse_text(doc.dump());
  } catch (const flatsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);

    flatsim::Simulation sim(cfg);
    const flatsim::MetricsLog log = sim.run(print_round);

    const std::filesystem::path metrics_path = out / "metrics.jsonl";
    flatsim::save_metrics(log, metrics_path.string());
    {
      std::ofstream cfg_out(out / "config.json", std::ios::binary | std::ios::trunc);
      cfg_out << cfg.serialize();
    }
    {
      std::ofstream tr_out(out / "transcript.txt", std::ios::binary | std::ios::trunc);
      tr_out << sim.transcript().to_lines();
    }
    for (const std::string& w : log.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "metrics written to " << metrics_path.string() << std::endl;
    return 0;
  } catch (const flatsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

int summarize_command(const std::string& metrics_path) {
  try {
    const flatsim::MetricsLog log = flatsim::load_metrics(metrics_path);
    std::cout << flatsim::summarize_report(log);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale simulator of enclave-backed federated learning"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute an experiment from a config file");
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> rounds;
  std::vector<std::string> overrides;
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory for metrics")->required();
  run->add_option("--seed", seed, "override master_seed");
  run->add_option("--rounds", rounds, "override stopping.max_rounds");
  run->add_option("--set", overrides, "dotted-path config override, e.g. dp.enabled=true");

  auto* summarize = app.add_subcommand("summarize", "report on a metrics file");
  std::string metrics_path;
  summarize->add_option("--metrics", metrics_path, "metrics.jsonl from a run")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return run_command(config_path, out_dir, seed, rounds, overrides);
  return summarize_command(metrics_path);
}
