#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "difs/core.hpp"
#include "difs/envs.hpp"

namespace difs {

// Monte Carlo harvest of failure samples plus the failure-probability
// estimate. Feature vectors satisfy r <= r_fail by construction.
struct GroundTruth {
  std::vector<Vec> features;
  double estimate = 0.0;
  uint64_t draws = 0;
  uint64_t failures_seen = 0;
  bool zero_failures = false;
  uint64_t seed = 0;
  std::string environment;
  // Provenance extras for auditability (populated for the toy problem).
  std::optional<double> analytic_probability;
  std::optional<double> reference_estimate;
};

struct MetricsReport {
  std::string environment;
  std::string method;
  int k = 5;
  int n_eval = 0;
  int n_real = 0;
  int n_failing = 0;
  std::optional<double> density;
  std::optional<double> coverage;
  double failure_rate = 0.0;
  bool standardized_features = true;
  uint64_t seed = 0;
  GroundTruth provenance;  // ground-truth summary (features not retained)
};

// Draw x ~ p(x) until n_failures_wanted failures are stored or max_draws is
// reached; the estimate is failures/draws over everything drawn. Draws are
// processed in fixed-size chunks with per-index child streams, so any thread
// count gives the same harvest.
GroundTruth mc_ground_truth(const EnvironmentSpec& env, int n_failures_wanted,
                            uint64_t max_draws, Rng& rng, int threads = 1);

// Toy ground truth through the importance-sampled oracle (raw MC is hopeless
// at p ~ 3.6e-6 desk scale).
GroundTruth toy_ground_truth(int n_samples, uint64_t proposal_draws, Rng& rng);

// Distance from each point to its k-th nearest other point (self excluded).
std::vector<double> knn_radius(const std::vector<Vec>& points, int k);

// Fraction of (generated sample, real neighborhood) memberships, normalized
// by k and the generated count. Unbounded above.
double density(const std::vector<Vec>& real_pts, const std::vector<Vec>& fake_pts,
               int k);

// Fraction of real points whose k-NN ball contains at least one generated
// sample. Always in [0, 1].
double coverage(const std::vector<Vec>& real_pts, const std::vector<Vec>& fake_pts,
                int k);

double failure_rate(const std::vector<RolloutRecord>& records);

using SamplerFn = std::function<std::vector<Vec>(int n, Rng& rng)>;

// Draws n_eval disturbances from the sampler at condition r_fail, rolls them
// out, reports the failure rate over all of them and density/coverage of the
// failing subset's features against the ground truth. Features are
// standardized per coordinate by the ground-truth mean/std before distances.
MetricsReport evaluate(const EnvironmentSpec& env, const GroundTruth& gt,
                       const SamplerFn& sampler, int n_eval, int k, Rng& rng,
                       int threads = 1);

}  // namespace difs
