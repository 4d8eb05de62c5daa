#include "difs/campaign.hpp"

#include <filesystem>
#include <fstream>

#include "difs/analysis.hpp"

namespace difs {

namespace fs = std::filesystem;

namespace {

template <typename T>
T get_field(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

fs::path prepare_run_dir(const CampaignConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("config field 'out_dir' is required");
  fs::create_directories(cfg.out_dir);
  write_json((fs::path(cfg.out_dir) / "config.json").string(), cfg.to_json());
  return cfg.out_dir;
}

// Re-attach the provenance constants that the binary cache does not carry.
GroundTruth load_ground_truth_for(const CampaignConfig& cfg) {
  if (!cfg.ground_truth_path)
    throw ConfigError("config field 'ground_truth' is required for evaluation");
  GroundTruth gt = load_ground_truth(*cfg.ground_truth_path);
  gt.environment = cfg.environment;
  if (cfg.environment == "toy") {
    gt.analytic_probability = toy_analytic_failure_probability();
    gt.reference_estimate = 3.5e-5;
  }
  return gt;
}

MetricsReport evaluate_model(const CampaignConfig& cfg, const ModelCheckpoint& ckpt,
                             const EnvironmentSpec& env, int threads) {
  const GroundTruth gt = load_ground_truth_for(cfg);
  SamplerFn sampler;
  if (ckpt.method == "difs") {
    const DifsModel& model = *ckpt.difs_model;
    sampler = [&model, &env, threads](int n, Rng& rng) {
      return model_sample(model, env.r_fail, n, rng, threads);
    };
  } else {
    const Gmm& gmm = *ckpt.gmm;
    sampler = [&gmm](int n, Rng& rng) { return gmm_sample(gmm, n, rng); };
  }
  Rng eval_rng = Rng(cfg.seed).child("eval", 0);
  MetricsReport report =
      evaluate(env, gt, sampler, cfg.metrics.n_eval, cfg.metrics.k, eval_rng, threads);
  report.method = ckpt.method;
  return report;
}

// R_fail-only report used when no ground truth is configured.
MetricsReport failure_only_report(const CampaignConfig& cfg, const ModelCheckpoint& ckpt,
                                  const EnvironmentSpec& env, int threads) {
  MetricsReport report;
  report.environment = env.name;
  report.method = ckpt.method;
  report.k = cfg.metrics.k;
  report.n_eval = cfg.metrics.n_eval;
  Rng eval_rng = Rng(cfg.seed).child("eval", 0);
  report.seed = eval_rng.seed();
  std::vector<Vec> xs;
  if (ckpt.method == "difs")
    xs = model_sample(*ckpt.difs_model, env.r_fail, cfg.metrics.n_eval, eval_rng, threads);
  else
    xs = gmm_sample(*ckpt.gmm, cfg.metrics.n_eval, eval_rng);
  std::vector<RolloutRecord> records(xs.size());
  parallel_for(static_cast<int64_t>(xs.size()), threads,
               [&](int64_t i) { records[i] = rollout(env, xs[i]); });
  report.failure_rate = failure_rate(records);
  for (const auto& rec : records)
    if (rec.is_failure) ++report.n_failing;
  report.provenance.environment = env.name;
  return report;
}

void write_final_samples(const fs::path& dir, const EnvironmentSpec& env,
                         const std::vector<RolloutRecord>& records) {
  LabeledDataset ds;
  for (const auto& rec : records) ds.append(rec.x, rec.robustness, 0);
  save_dataset((dir / "final_samples.bin").string(), ds, env.dim);
}

void analyze_run_dir(const fs::path& dir, const EnvironmentSpec& env) {
  int dim = 0;
  const LabeledDataset samples = load_dataset((dir / "final_samples.bin").string(), &dim);
  // Project failure disturbances; fall back to the full sample set when a run
  // produced too few failures to decompose.
  std::vector<Vec> points;
  Vec rho;
  std::vector<bool> flags;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples.rs[i] > env.r_fail) continue;
    points.push_back(samples.xs[i]);
    rho.push_back(samples.rs[i]);
    flags.push_back(true);
  }
  if (points.size() < 10) {
    points.clear();
    rho.clear();
    flags.clear();
    for (size_t i = 0; i < samples.size(); ++i) {
      points.push_back(samples.xs[i]);
      rho.push_back(samples.rs[i]);
      flags.push_back(samples.rs[i] <= env.r_fail);
    }
  }
  if (points.size() < 3)
    throw std::runtime_error("analyze: not enough samples in " + dir.string());
  const PcaResult result = pca(points, 2);
  fs::create_directories(dir / "pca");
  write_projections_csv((dir / "pca" / "projections.csv").string(), result, rho, flags);
  write_eigendisturbances_csv((dir / "pca" / "eigendisturbances.csv").string(), result);
}

}  // namespace

CampaignConfig CampaignConfig::from_json(const json& j) {
  CampaignConfig cfg;
  cfg.environment = get_field<std::string>(j, "environment", "toy");
  try {
    env_by_name(cfg.environment);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config field 'environment': ") + e.what());
  }
  cfg.seed = get_field<uint64_t>(j, "seed", 0);
  cfg.out_dir = get_field<std::string>(j, "out_dir", "");
  if (j.contains("ground_truth"))
    cfg.ground_truth_path = get_field<std::string>(j, "ground_truth", "");

  const json jd = j.value("difs", json::object());
  cfg.difs.sample_budget = get_field<uint64_t>(jd, "sample_budget", cfg.difs.sample_budget);
  cfg.difs.samples_per_iter = get_field<int>(jd, "samples_per_iter", cfg.difs.samples_per_iter);
  cfg.difs.train_steps_per_iter =
      get_field<int>(jd, "train_steps_per_iter", cfg.difs.train_steps_per_iter);
  cfg.difs.alpha = get_field<double>(jd, "alpha", cfg.difs.alpha);
  cfg.difs.conditional = get_field<bool>(jd, "conditional", cfg.difs.conditional);
  cfg.difs.schedule_steps = get_field<int>(jd, "schedule_steps", cfg.difs.schedule_steps);
  cfg.difs.beta_min = get_field<double>(jd, "beta_min", cfg.difs.beta_min);
  cfg.difs.beta_max = get_field<double>(jd, "beta_max", cfg.difs.beta_max);
  cfg.difs.hidden = get_field<std::vector<int>>(jd, "hidden", cfg.difs.hidden);
  cfg.difs.batch_size = get_field<int>(jd, "batch_size", cfg.difs.batch_size);
  cfg.difs.learning_rate = get_field<double>(jd, "learning_rate", cfg.difs.learning_rate);

  const json jc = j.value("cem", json::object());
  cfg.cem.sample_budget = get_field<uint64_t>(jc, "sample_budget", cfg.cem.sample_budget);
  cfg.cem.samples_per_iter = get_field<int>(jc, "samples_per_iter", cfg.cem.samples_per_iter);
  cfg.cem.alpha = get_field<double>(jc, "alpha", cfg.cem.alpha);
  cfg.cem.n_components = get_field<int>(jc, "n_components", cfg.cem.n_components);

  const json jm = j.value("mc", json::object());
  cfg.mc.n_failures = get_field<int>(jm, "n_failures", cfg.mc.n_failures);
  cfg.mc.max_draws = get_field<uint64_t>(jm, "max_draws", cfg.mc.max_draws);
  cfg.mc.proposal_draws = get_field<uint64_t>(jm, "proposal_draws", cfg.mc.proposal_draws);
  if (cfg.mc.n_failures < 1) throw ConfigError("config field 'mc.n_failures' must be >= 1");
  if (cfg.mc.max_draws == 0) throw ConfigError("config field 'mc.max_draws' must be >= 1");

  const json jk = j.value("metrics", json::object());
  cfg.metrics.k = get_field<int>(jk, "k", cfg.metrics.k);
  cfg.metrics.n_eval = get_field<int>(jk, "n_eval", cfg.metrics.n_eval);
  if (cfg.metrics.k < 1) throw ConfigError("config field 'metrics.k' must be >= 1");
  if (cfg.metrics.n_eval < 1) throw ConfigError("config field 'metrics.n_eval' must be >= 1");

  try {
    cfg.difs.validate();
    cfg.cem.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config field '") + e.what() + "'");
  }
  return cfg;
}

CampaignConfig CampaignConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return from_json(j);
}

json CampaignConfig::to_json() const {
  json j;
  j["environment"] = environment;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  if (ground_truth_path) j["ground_truth"] = *ground_truth_path;
  j["difs"] = json{{"sample_budget", difs.sample_budget},
                   {"samples_per_iter", difs.samples_per_iter},
                   {"train_steps_per_iter", difs.train_steps_per_iter},
                   {"alpha", difs.alpha},
                   {"conditional", difs.conditional},
                   {"schedule_steps", difs.schedule_steps},
                   {"beta_min", difs.beta_min},
                   {"beta_max", difs.beta_max},
                   {"hidden", difs.hidden},
                   {"batch_size", difs.batch_size},
                   {"learning_rate", difs.learning_rate}};
  j["cem"] = json{{"sample_budget", cem.sample_budget},
                  {"samples_per_iter", cem.samples_per_iter},
                  {"alpha", cem.alpha},
                  {"n_components", cem.n_components}};
  j["mc"] = json{{"n_failures", mc.n_failures},
                 {"max_draws", mc.max_draws},
                 {"proposal_draws", mc.proposal_draws}};
  j["metrics"] = json{{"k", metrics.k}, {"n_eval", metrics.n_eval}};
  return j;
}

void run_mc(const CampaignConfig& cfg, int threads) {
  const fs::path dir = prepare_run_dir(cfg);
  const EnvironmentSpec env = env_by_name(cfg.environment);
  Rng rng = Rng(cfg.seed).child("mc", 0);
  GroundTruth gt;
  if (cfg.environment == "toy")
    gt = toy_ground_truth(cfg.mc.n_failures, cfg.mc.proposal_draws, rng);
  else
    gt = mc_ground_truth(env, cfg.mc.n_failures, cfg.mc.max_draws, rng, threads);
  gt.environment = cfg.environment;
  save_ground_truth((dir / "ground_truth.bin").string(), gt);
  write_json((dir / "ground_truth.json").string(), ground_truth_report(gt));
}

MetricsReport run_difs_campaign(const CampaignConfig& cfg, int threads) {
  const fs::path dir = prepare_run_dir(cfg);
  const EnvironmentSpec env = env_by_name(cfg.environment);

  std::ofstream progress((dir / "progress.jsonl").string());
  Rng rng(cfg.seed);
  const DifsArtifacts art = difs_run(cfg.difs, env, rng, threads,
                                     [&](const IterationRecord& rec) {
                                       progress << iteration_to_json(rec).dump() << '\n';
                                       progress.flush();
                                     });

  ModelCheckpoint ckpt;
  ckpt.method = "difs";
  ckpt.environment = cfg.environment;
  ckpt.seed = cfg.seed;
  ckpt.difs_model = art.model;
  save_checkpoint((dir / "model.ckpt").string(), ckpt);
  save_dataset((dir / "dataset.bin").string(), art.dataset, env.dim);

  Rng final_rng = Rng(cfg.seed).child("final", 0);
  const auto finals =
      final_failure_samples(art, env, cfg.metrics.n_eval, final_rng, threads);
  write_final_samples(dir, env, finals);

  MetricsReport report = cfg.ground_truth_path
                             ? evaluate_model(cfg, ckpt, env, threads)
                             : failure_only_report(cfg, ckpt, env, threads);
  report.method = "difs";
  write_json((dir / "metrics.json").string(), metrics_to_json(report));
  return report;
}

MetricsReport run_cem_campaign(const CampaignConfig& cfg, int threads) {
  const fs::path dir = prepare_run_dir(cfg);
  const EnvironmentSpec env = env_by_name(cfg.environment);

  std::ofstream progress((dir / "progress.jsonl").string());
  Rng rng(cfg.seed);
  const CemArtifacts art = cem_run(cfg.cem, env, rng, threads,
                                   [&](const IterationRecord& rec) {
                                     progress << iteration_to_json(rec).dump() << '\n';
                                     progress.flush();
                                   });

  ModelCheckpoint ckpt;
  ckpt.method = "cem2";
  ckpt.environment = cfg.environment;
  ckpt.seed = cfg.seed;
  ckpt.gmm = art.proposal;
  save_checkpoint((dir / "model.ckpt").string(), ckpt);
  save_dataset((dir / "dataset.bin").string(), art.dataset, env.dim);

  Rng final_rng = Rng(cfg.seed).child("final", 0);
  const auto finals = cem_final_samples(art, env, cfg.metrics.n_eval, final_rng, threads);
  write_final_samples(dir, env, finals);

  MetricsReport report = cfg.ground_truth_path
                             ? evaluate_model(cfg, ckpt, env, threads)
                             : failure_only_report(cfg, ckpt, env, threads);
  report.method = "cem2";
  write_json((dir / "metrics.json").string(), metrics_to_json(report));
  return report;
}

MetricsReport run_eval(const CampaignConfig& cfg, const std::string& run_dir, int threads) {
  if (!cfg.ground_truth_path)
    throw ConfigError("config field 'ground_truth' is required for evaluation");
  const EnvironmentSpec env = env_by_name(cfg.environment);
  const ModelCheckpoint ckpt = load_checkpoint((fs::path(run_dir) / "model.ckpt").string());
  MetricsReport report = evaluate_model(cfg, ckpt, env, threads);
  write_json((fs::path(run_dir) / "metrics.json").string(), metrics_to_json(report));
  return report;
}

void run_analyze(const CampaignConfig& cfg, const std::string& run_dir) {
  const EnvironmentSpec env = env_by_name(cfg.environment);
  analyze_run_dir(run_dir, env);
}

MetricsReport run_repro_toy(const CampaignConfig& base, int threads) {
  // Full pipeline on the built-in toy preset: ground truth, adaptive
  // training, evaluation, PCA export, all inside out_dir.
  CampaignConfig cfg = base;
  cfg.environment = "toy";
  const fs::path root = prepare_run_dir(cfg);

  CampaignConfig mc_cfg = cfg;
  mc_cfg.out_dir = (root / "ground_truth").string();
  run_mc(mc_cfg, threads);

  CampaignConfig difs_cfg = cfg;
  difs_cfg.out_dir = (root / "difs").string();
  difs_cfg.ground_truth_path = (root / "ground_truth" / "ground_truth.bin").string();
  const MetricsReport report = run_difs_campaign(difs_cfg, threads);
  run_analyze(difs_cfg, difs_cfg.out_dir);
  return report;
}

}  // namespace difs
