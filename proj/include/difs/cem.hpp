#pragma once

#include "difs/core.hpp"
#include "difs/difs.hpp"
#include "difs/envs.hpp"

namespace difs {

// Diagonal-covariance Gaussian mixture proposal.
struct Gmm {
  Vec weights;
  std::vector<Vec> means;
  std::vector<Vec> vars;

  int n_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means[0].size()); }
};

std::vector<Vec> gmm_sample(const Gmm& g, int n, Rng& rng);

// log sum_c w_c N(x; mu_c, diag(var_c)) via log-sum-exp.
double gmm_logpdf(const Gmm& g, const Vec& x);

// Weighted maximum-likelihood EM with per-sample log weights, seeded
// k-means++-style initialization, and a diagonal covariance floor. Iterates
// until the weighted log-likelihood improves by less than tol or max_iters is
// reached; monotonicity is asserted on every fit.
Gmm weighted_em_fit(const std::vector<Vec>& samples, const Vec& log_weights,
                    int n_components, Rng& rng, int max_iters = 200,
                    double tol = 1e-6, double var_floor = 1e-6);

struct CemConfig {
  uint64_t sample_budget = 50000;
  int samples_per_iter = 10000;
  double alpha = 0.5;
  int n_components = 2;
  int em_max_iters = 200;
  double em_tol = 1e-6;
  double var_floor = 1e-6;

  void validate() const;
};

struct CemArtifacts {
  Gmm proposal;
  LabeledDataset dataset;
  std::vector<IterationRecord> iterations;
  int stalls = 0;  // batches whose elite set came back empty
  uint64_t rollouts_used = 0;
  uint64_t seed = 0;
};

// Cross-entropy method targeting the failure distribution: per batch, sample
// from the proposal (initially the nominal density), take the elites at
// r <= max(r_fail, alpha-quantile), importance-weight them by p(x)/q(x) in the
// log domain, and refit the mixture. An empty elite set keeps the previous
// proposal.
CemArtifacts cem_run(const CemConfig& config, const EnvironmentSpec& env, Rng& rng,
                     int threads = 1, const ProgressFn& progress = {});

std::vector<RolloutRecord> cem_final_samples(const CemArtifacts& artifacts,
                                             const EnvironmentSpec& env, int n,
                                             Rng& rng, int threads = 1);

}  // namespace difs
