#pragma once

#include <optional>
#include <string>

#include "difs/artifacts.hpp"

namespace difs {

// Raised on malformed configuration; the message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct McSettings {
  int n_failures = 1000;
  uint64_t max_draws = 10000000;
  uint64_t proposal_draws = 400000;  // toy importance-sampling oracle budget
};

struct MetricSettings {
  int k = 5;
  int n_eval = 1000;
};

// Parsed and defaulted campaign configuration. The snapshot written into the
// run directory is the post-defaulting state, not the user file.
struct CampaignConfig {
  std::string environment = "toy";
  uint64_t seed = 0;
  std::string out_dir;
  std::optional<std::string> ground_truth_path;  // enables fidelity metrics
  DifsConfig difs;
  CemConfig cem;
  McSettings mc;
  MetricSettings metrics;

  static CampaignConfig from_json(const json& j);
  static CampaignConfig load(const std::string& path);
  json to_json() const;
};

// Subcommand entry points. Each creates the run directory, writes the config
// snapshot and artifacts, and returns the primary report where applicable.
// `threads` is a runtime knob: any value produces identical artifacts.
void run_mc(const CampaignConfig& cfg, int threads);
MetricsReport run_difs_campaign(const CampaignConfig& cfg, int threads);
MetricsReport run_cem_campaign(const CampaignConfig& cfg, int threads);
MetricsReport run_eval(const CampaignConfig& cfg, const std::string& run_dir, int threads);
void run_analyze(const CampaignConfig& cfg, const std::string& run_dir);
MetricsReport run_repro_toy(const CampaignConfig& cfg, int threads);

}  // namespace difs
