#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "difs/artifacts.hpp"
#include "difs/campaign.hpp"

using namespace difs;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

std::string cli_path() {
  const char* p = std::getenv("DIFS_CLI");
  REQUIRE_MESSAGE(p != nullptr, "DIFS_CLI must point at the built binary");
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "difs_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json tiny_campaign_json(const fs::path& out, uint64_t seed) {
  json j;
  j["environment"] = "toy";
  j["seed"] = seed;
  j["out_dir"] = out.string();
  j["difs"] = json{{"sample_budget", 400},     {"samples_per_iter", 200},
                   {"train_steps_per_iter", 120}, {"alpha", 0.5},
                   {"schedule_steps", 50},     {"beta_min", 1e-3},
                   {"beta_max", 0.12},         {"hidden", std::vector<int>{32, 32}},
                   {"batch_size", 64}};
  j["cem"] = json{{"sample_budget", 400}, {"samples_per_iter", 200}};
  j["mc"] = json{{"n_failures", 150}, {"proposal_draws", 60000}};
  j["metrics"] = json{{"k", 5}, {"n_eval", 120}};
  return j;
}

std::string write_config(const fs::path& dir, const json& j) {
  const std::string path = (dir / "campaign.json").string();
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: ", path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing applies defaults and validates fields") {
  const CampaignConfig cfg = CampaignConfig::from_json(json{{"out_dir", "x"}});
  CHECK(cfg.environment == "toy");
  CHECK(cfg.difs.sample_budget == 50000);
  CHECK(cfg.difs.hidden == std::vector<int>{256, 256});
  CHECK(cfg.metrics.k == 5);

  CHECK_THROWS_WITH_AS(CampaignConfig::from_json(json{{"environment", "mars"}}),
                       doctest::Contains("environment"), ConfigError);
  CHECK_THROWS_WITH_AS(
      CampaignConfig::from_json(json{{"difs", json{{"alpha", 2.0}}}}),
      doctest::Contains("alpha"), ConfigError);
  CHECK_THROWS_WITH_AS(
      CampaignConfig::from_json(json{{"metrics", json{{"k", 0}}}}),
      doctest::Contains("metrics.k"), ConfigError);
  CHECK_THROWS_WITH_AS(
      CampaignConfig::from_json(json{{"mc", json{{"n_failures", "many"}}}}),
      doctest::Contains("n_failures"), ConfigError);
}

TEST_CASE("checkpoint and dataset files round trip") {
  const fs::path dir = fresh_dir("roundtrip");
  Rng rng(3ull);
  DifsConfig dc;
  dc.sample_budget = 200;
  dc.samples_per_iter = 200;
  dc.train_steps_per_iter = 40;
  dc.schedule_steps = 50;
  dc.beta_max = 0.12;
  dc.hidden = {16, 16};
  dc.batch_size = 32;
  const DifsArtifacts art = difs_run(dc, toy_env(), rng, 2);

  ModelCheckpoint ckpt;
  ckpt.method = "difs";
  ckpt.environment = "toy";
  ckpt.seed = 3;
  ckpt.difs_model = art.model;
  const std::string ckpt_path = (dir / "model.ckpt").string();
  save_checkpoint(ckpt_path, ckpt);
  const ModelCheckpoint loaded = load_checkpoint(ckpt_path);
  REQUIRE(loaded.difs_model.has_value());
  Rng a(9ull), b(9ull);
  const auto s1 = model_sample(*ckpt.difs_model, 0.0, 16, a, 2);
  const auto s2 = model_sample(*loaded.difs_model, 0.0, 16, b, 2);
  for (size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == s2[i]);

  const std::string ds_path = (dir / "dataset.bin").string();
  save_dataset(ds_path, art.dataset, 2);
  int dim = 0;
  const LabeledDataset ds = load_dataset(ds_path, &dim);
  CHECK(dim == 2);
  REQUIRE(ds.size() == art.dataset.size());
  CHECK(ds.xs[7] == art.dataset.xs[7]);
  CHECK(ds.rs[7] == art.dataset.rs[7]);

  Rng gt_rng(5ull);
  const GroundTruth gt = toy_ground_truth(64, 60000, gt_rng);
  const std::string gt_path = (dir / "gt.bin").string();
  save_ground_truth(gt_path, gt);
  const GroundTruth gt2 = load_ground_truth(gt_path);
  CHECK(gt2.estimate == gt.estimate);
  CHECK(gt2.features == gt.features);
  CHECK(gt2.draws == gt.draws);
}

TEST_CASE("malformed config exits with code 2 and names the field") {
  const fs::path dir = fresh_dir("badconfig");
  json j = tiny_campaign_json(dir / "run", 1);
  j["difs"]["alpha"] = 3.0;
  const std::string cfg = write_config(dir, j);
  CHECK(run_cli("difs --config " + cfg) == 2);

  const std::string cmd =
      cli_path() + " difs --config " + cfg + " 2> " + (dir / "err.txt").string();
  std::system(cmd.c_str());
  CHECK(slurp(dir / "err.txt").find("alpha") != std::string::npos);

  CHECK(run_cli("difs --config /nonexistent.json") == 2);
  CHECK(run_cli("eval --config " + write_config(fresh_dir("nogt"),
                                                tiny_campaign_json(dir / "r2", 1))) == 2);
}

TEST_CASE("mc subcommand writes the audited toy ground-truth report") {
  const fs::path dir = fresh_dir("mc");
  const std::string cfg = write_config(dir, tiny_campaign_json(dir / "run", 11));
  REQUIRE(run_cli("mc --config " + cfg) == 0);
  const json report = json::parse(slurp(dir / "run" / "ground_truth.json"));
  CHECK(report.at("environment") == "toy");
  CHECK(report.at("analytic_failure_probability").get<double>() ==
        doctest::Approx(3.6444e-6).epsilon(1e-3));
  CHECK(report.at("reference_estimate").get<double>() == 3.5e-5);
  CHECK(report.contains("reference_note"));
  CHECK(fs::exists(dir / "run" / "ground_truth.bin"));
}

TEST_CASE("campaign run directory contains the full artifact set") {
  const fs::path dir = fresh_dir("rundir");
  json j = tiny_campaign_json(dir / "run", 21);
  const std::string cfg = write_config(dir, j);
  REQUIRE(run_cli("mc --config " + cfg + " --out " + (dir / "gt").string()) == 0);

  j["ground_truth"] = (dir / "gt" / "ground_truth.bin").string();
  const std::string cfg2 = write_config(dir, j);
  REQUIRE(run_cli("difs --config " + cfg2) == 0);
  for (const char* name :
       {"config.json", "progress.jsonl", "model.ckpt", "dataset.bin",
        "final_samples.bin", "metrics.json"})
    CHECK(fs::exists(dir / "run" / name));

  // snapshot carries the post-defaulting state, not the user file
  const json snap = json::parse(slurp(dir / "run" / "config.json"));
  CHECK(snap.at("difs").at("learning_rate").get<double>() == 1e-3);
  CHECK(snap.at("metrics").at("n_eval").get<int>() == 120);

  const json metrics = json::parse(slurp(dir / "run" / "metrics.json"));
  CHECK(metrics.at("method") == "difs");
  CHECK(metrics.at("n_eval").get<int>() == 120);
  CHECK(metrics.at("ground_truth").at("analytic_failure_probability").get<double>() > 0.0);

  // analyze on the finished run
  REQUIRE(run_cli("analyze --config " + cfg2) == 0);
  CHECK(fs::exists(dir / "run" / "pca" / "projections.csv"));
  CHECK(fs::exists(dir / "run" / "pca" / "eigendisturbances.csv"));

  // eval regenerates metrics from the checkpoint
  REQUIRE(run_cli("eval --config " + cfg2) == 0);
  CHECK(json::parse(slurp(dir / "run" / "metrics.json")).at("method") == "difs");
}

TEST_CASE("replay with any thread count is byte identical") {
  const fs::path dir = fresh_dir("replay");
  json j = tiny_campaign_json(dir / "gt", 31);
  const std::string mc_cfg = write_config(dir, j);
  REQUIRE(run_cli("mc --config " + mc_cfg) == 0);
  j["ground_truth"] = (dir / "gt" / "ground_truth.bin").string();

  auto run_to = [&](const std::string& name, int threads, const std::string& sub) {
    j["out_dir"] = (dir / name).string();
    const std::string cfg = write_config(dir, j);
    REQUIRE(run_cli(sub + " --config " + cfg + " --threads " + std::to_string(threads)) == 0);
  };
  run_to("a", 1, "difs");
  run_to("b", 2, "difs");
  run_to("c", 3, "difs");
  const std::string m1 = slurp(dir / "a" / "metrics.json");
  CHECK(m1 == slurp(dir / "b" / "metrics.json"));
  CHECK(m1 == slurp(dir / "c" / "metrics.json"));
  CHECK(slurp(dir / "a" / "model.ckpt") == slurp(dir / "b" / "model.ckpt"));
  CHECK(slurp(dir / "a" / "dataset.bin") == slurp(dir / "b" / "dataset.bin"));
  CHECK(slurp(dir / "a" / "progress.jsonl") == slurp(dir / "b" / "progress.jsonl"));

  run_to("ca", 1, "cem2");
  run_to("cb", 2, "cem2");
  CHECK(slurp(dir / "ca" / "metrics.json") == slurp(dir / "cb" / "metrics.json"));

  // a different seed produces different artifacts
  j["seed"] = 32;
  run_to("d", 2, "difs");
  CHECK(m1 != slurp(dir / "d" / "metrics.json"));
}

TEST_SUITE_END();
