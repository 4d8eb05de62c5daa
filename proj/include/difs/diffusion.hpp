#pragma once

#include "difs/core.hpp"
#include "difs/denoiser.hpp"

namespace difs {

// Forward-process variance schedule beta_1..beta_K with cached derived
// quantities alpha_k = 1 - beta_k and alpha_bar_k = prod_{j<=k} alpha_j.
// Step indices are 1-based throughout the API.
struct Schedule {
  int steps = 0;
  double beta_min = 0.0;
  double beta_max = 0.0;
  Vec beta;       // beta[k-1] = beta_k
  Vec alpha;      // alpha[k-1] = 1 - beta_k
  Vec alpha_bar;  // alpha_bar[k-1] = prod_{j<=k} alpha_j

  double beta_at(int k) const { return beta[static_cast<size_t>(k) - 1]; }
  double alpha_at(int k) const { return alpha[static_cast<size_t>(k) - 1]; }
  double alpha_bar_at(int k) const { return alpha_bar[static_cast<size_t>(k) - 1]; }

  // Whether the forward process ends close enough to N(0, I) for sampling
  // campaigns: alpha_bar_K < 0.05. Checked at campaign validation, not at
  // construction, so short diagnostic schedules remain constructible.
  bool terminal_ok() const { return !alpha_bar.empty() && alpha_bar.back() < 0.05; }
};

// Linear schedule beta_k = beta_min + (k-1)/(K-1) * (beta_max - beta_min)
// (K = 1 gives just beta_min). Requires K >= 1 and 0 < beta_min <= beta_max < 1.
Schedule make_schedule(int steps, double beta_min, double beta_max);

// Closed-form forward noising at step k:
//   x_k = sqrt(alpha_bar_k) * x0 + sqrt(1 - alpha_bar_k) * eps.
Vec q_sample(const Vec& x0, int k, const Vec& eps, const Schedule& s);

// One reverse step. mu = (x_k - beta_k / sqrt(1-alpha_bar_k) * eps_hat) / sqrt(alpha_k);
// returns mu + sqrt(beta_k) * z. The final step (k=1) adds no noise regardless
// of z.
Vec p_sample_step(const Denoiser& net, const Vec& x_k, int k, double r,
                  const Schedule& s, const Vec& z);

// n independent full reverse chains from x_K ~ N(0, I), every chain
// conditioned on its own value. Chain i draws from a child stream of rng, so
// results are identical for any thread count.
std::vector<Vec> sample_batch(const Denoiser& net, const Schedule& s,
                              const Vec& conditions, Rng& rng, int threads = 1);

// Same with a single shared condition value.
std::vector<Vec> sample(const Denoiser& net, const Schedule& s, double r, int n,
                        Rng& rng, int threads = 1);

}  // namespace difs
