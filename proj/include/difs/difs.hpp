#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "difs/core.hpp"
#include "difs/denoiser.hpp"
#include "difs/diffusion.hpp"
#include "difs/envs.hpp"

namespace difs {

// Running collection of (disturbance, robustness) pairs, append-only across a
// campaign. iteration[i] records the batch that produced pair i.
struct LabeledDataset {
  std::vector<Vec> xs;
  Vec rs;
  std::vector<int> iteration;

  size_t size() const { return xs.size(); }
  void append(Vec x, double r, int iter) {
    xs.push_back(std::move(x));
    rs.push_back(r);
    iteration.push_back(iter);
  }
};

struct DifsConfig {
  uint64_t sample_budget = 50000;
  int samples_per_iter = 10000;
  int train_steps_per_iter = 10000;
  double alpha = 0.5;
  bool conditional = true;
  int schedule_steps = 100;
  double beta_min = 1e-4;
  double beta_max = 0.06;
  std::vector<int> hidden = {256, 256};
  int batch_size = 128;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int time_embed_dim = 32;
  int cond_embed_dim = 16;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double threshold = 0.0;
  double failure_fraction = 0.0;
  double mean_loss = 0.0;
};

// Trained sampler: the denoiser plus everything needed to reproduce its
// input/output space (schedule, nominal standardization, conditioning bounds
// live inside the net).
struct DifsModel {
  Denoiser net;
  Schedule schedule;
  Vec standardize_mean;
  Vec standardize_scale;
};

struct DifsArtifacts {
  DifsModel model;
  LabeledDataset dataset;
  std::vector<IterationRecord> iterations;
  int converged_iteration = -1;  // first batch index with threshold == r_fail
  uint64_t rollouts_used = 0;
  uint64_t seed = 0;
};

using ProgressFn = std::function<void(const IterationRecord&)>;

// max(r_fail, lower empirical quantile at alpha). Unclamped, at least a
// fraction alpha of the inputs sit at or below the returned value.
double update_threshold(const std::vector<double>& robustness, double alpha,
                        double r_fail);

// n iid conditioning values ~ U[r_fail, r_i]. Requires r_i >= r_fail.
Vec sample_conditions(int n, double r_fail, double r_i, Rng& rng);

// Order-stable view of the pairs with r <= r_i.
LabeledDataset select_training_set(const LabeledDataset& d, double r_i);

// Adaptive loop: batch 0 trains on nominal draws; each later batch samples
// conditions U[r_fail, r_{i-1}], generates disturbances from the current
// model, evaluates them, lowers the threshold to the batch's alpha-quantile
// (clamped monotone and at r_fail), and retrains on the running dataset
// filtered to r <= r_i. Stops when the rollout budget cannot fit another
// batch.
DifsArtifacts difs_run(const DifsConfig& config, const EnvironmentSpec& env,
                       Rng& rng, int threads = 1, const ProgressFn& progress = {});

// n samples conditioned on r_fail from the trained model, rolled out and
// labeled.
std::vector<RolloutRecord> final_failure_samples(const DifsArtifacts& artifacts,
                                                 const EnvironmentSpec& env, int n,
                                                 Rng& rng, int threads = 1);

// Same, for any DifsModel (used by the eval pipeline on loaded checkpoints).
std::vector<Vec> model_sample(const DifsModel& model, double condition, int n,
                              Rng& rng, int threads = 1);

}  // namespace difs
