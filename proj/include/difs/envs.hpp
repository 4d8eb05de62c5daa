#pragma once

#include <functional>
#include <string>

#include "difs/core.hpp"

namespace difs {

// One rolled-out disturbance: the input x, the resulting state trajectory,
// its robustness, and the failure flag (robustness <= r_fail).
struct RolloutRecord {
  Vec x;
  Vec trajectory;
  double robustness = 0.0;
  bool is_failure = false;
};

// Black-box validation problem: nominal disturbance density p(x) (diagonal
// Gaussian), deterministic rollout x -> s, robustness rho(s), failure
// threshold, and the feature map used for the fidelity metrics. All
// stochasticity lives in x; rollouts are pure functions.
struct EnvironmentSpec {
  std::string name;
  int dim = 0;
  Vec nominal_mean;
  Vec nominal_var;
  double r_fail = 0.0;
  std::function<Vec(const Vec&)> rollout_fn;
  std::function<double(const Vec&)> robustness_fn;
  std::function<Vec(const Vec&)> feature_fn;
};

// 2-D corners problem: p(x) = N(0, I), rollout is the identity,
// rho(x) = 3 - min(|x0|, x1), failure at rho <= 0. Two failure modes at
// x0 <= -3 and x0 >= 3 (both with x1 >= 3).
EnvironmentSpec toy_env();

// Inverted pendulum stabilized by a saturated PD controller under additive
// torque disturbances, 100 steps of dt=0.05. Disturbances are N(0, 0.5) per
// step; the trajectory is the angle sequence and rho = pi/6 - max_t |theta_t|,
// so failure means deflection beyond 30 degrees.
EnvironmentSpec pendulum_env();

// Lookup by config name ("toy", "pendulum"); throws on unknown names.
EnvironmentSpec env_by_name(const std::string& name);

RolloutRecord rollout(const EnvironmentSpec& env, const Vec& x);
double nominal_logpdf(const EnvironmentSpec& env, const Vec& x);
Vec nominal_sample(const EnvironmentSpec& env, Rng& rng);

// Closed-form failure probability of the toy problem, 2*Phi(-3)^2.
double toy_analytic_failure_probability();

// Importance-sampled oracle for the toy failure distribution: proposal is the
// two-component mixture N((+-3.5, 3.5), I). Returns an unbiased probability
// estimate and n_samples approximate failure-distribution draws obtained by
// weighted resampling without replacement.
struct ToyOracle {
  std::vector<Vec> samples;  // failure draws, approximately p*(x | fail)
  double estimate = 0.0;     // importance-sampling estimate of P(fail)
  uint64_t proposal_draws = 0;
};
ToyOracle toy_is_ground_truth(int n_samples, uint64_t proposal_draws, Rng& rng);

}  // namespace difs
