#include "difs/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace difs {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Pendulum physics: theta_ddot = (3g/(2l)) sin(theta) + 3/(m l^2) (u + w),
// semi-implicit Euler, speed clamped to [-8, 8], control torque to [-2, 2].
struct PendulumParams {
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double dt = 0.05;
  double max_speed = 8.0;
  double max_torque = 2.0;
  // PD gains; calibrated so the noisy closed loop fails at roughly the 1e-4
  // rate expected for this benchmark while the nominal system stays upright.
  double k_p = 6.6;
  double k_d = 1.5;
  int steps = 100;
};

Vec pendulum_rollout(const Vec& torque_noise) {
  const PendulumParams p;
  double theta = 0.0;
  double theta_dot = 0.0;
  Vec angles(p.steps);
  for (int t = 0; t < p.steps; ++t) {
    const double u = std::clamp(-p.k_p * theta - p.k_d * theta_dot, -p.max_torque,
                                p.max_torque);
    const double accel = 1.5 * p.gravity / p.length * std::sin(theta) +
                         3.0 / (p.mass * p.length * p.length) * (u + torque_noise[t]);
    theta_dot = std::clamp(theta_dot + p.dt * accel, -p.max_speed, p.max_speed);
    theta += p.dt * theta_dot;
    angles[t] = theta;
  }
  return angles;
}

}  // namespace

EnvironmentSpec toy_env() {
  EnvironmentSpec env;
  env.name = "toy";
  env.dim = 2;
  env.nominal_mean = Vec(2, 0.0);
  env.nominal_var = Vec(2, 1.0);
  env.r_fail = 0.0;
  env.rollout_fn = [](const Vec& x) { return x; };
  env.robustness_fn = [](const Vec& s) {
    return 3.0 - std::min(std::abs(s[0]), s[1]);
  };
  env.feature_fn = [](const Vec& s) { return s; };
  return env;
}

EnvironmentSpec pendulum_env() {
  const PendulumParams p;
  EnvironmentSpec env;
  env.name = "pendulum";
  env.dim = p.steps;
  env.nominal_mean = Vec(p.steps, 0.0);
  env.nominal_var = Vec(p.steps, 0.5);
  env.r_fail = 0.0;
  env.rollout_fn = pendulum_rollout;
  env.robustness_fn = [](const Vec& angles) {
    double max_abs = 0.0;
    for (double a : angles) max_abs = std::max(max_abs, std::abs(a));
    return kPi / 6.0 - max_abs;
  };
  env.feature_fn = [](const Vec& angles) { return angles; };
  return env;
}

EnvironmentSpec env_by_name(const std::string& name) {
  if (name == "toy") return toy_env();
  if (name == "pendulum") return pendulum_env();
  throw std::invalid_argument("unknown environment: " + name);
}

RolloutRecord rollout(const EnvironmentSpec& env, const Vec& x) {
  if (static_cast<int>(x.size()) != env.dim)
    throw std::invalid_argument("rollout: disturbance dimension mismatch");
  RolloutRecord rec;
  rec.x = x;
  rec.trajectory = env.rollout_fn(x);
  rec.robustness = env.robustness_fn(rec.trajectory);
  rec.is_failure = rec.robustness <= env.r_fail;
  return rec;
}

double nominal_logpdf(const EnvironmentSpec& env, const Vec& x) {
  return gaussian_logpdf(x, env.nominal_mean, env.nominal_var);
}

Vec nominal_sample(const EnvironmentSpec& env, Rng& rng) {
  return gaussian_sample(env.nominal_mean, env.nominal_var, rng);
}

double toy_analytic_failure_probability() {
  const double phi_minus_3 = 0.5 * std::erfc(3.0 / std::sqrt(2.0));
  return 2.0 * phi_minus_3 * phi_minus_3;
}

ToyOracle toy_is_ground_truth(int n_samples, uint64_t proposal_draws, Rng& rng) {
  if (n_samples < 1 || proposal_draws == 0)
    throw std::invalid_argument("toy_is_ground_truth: positive limits required");
  const EnvironmentSpec env = toy_env();
  const Vec mean_pos = {3.5, 3.5};
  const Vec mean_neg = {-3.5, 3.5};
  const Vec unit_var = {1.0, 1.0};

  struct Candidate {
    Vec x;
    double log_w;
    double key;  // exponential resampling key, smaller = preferred
  };
  std::vector<Candidate> failures;
  double weight_sum = 0.0;
  for (uint64_t i = 0; i < proposal_draws; ++i) {
    const Vec& mu = rng.uniform() < 0.5 ? mean_pos : mean_neg;
    Vec x = gaussian_sample(mu, unit_var, rng);
    const double u_key = rng.uniform();
    const double rho = env.robustness_fn(x);
    if (rho > env.r_fail) continue;
    const double log_q =
        std::log(0.5 * std::exp(gaussian_logpdf(x, mean_pos, unit_var)) +
                 0.5 * std::exp(gaussian_logpdf(x, mean_neg, unit_var)));
    const double log_w = nominal_logpdf(env, x) - log_q;
    weight_sum += std::exp(log_w);
    // Weighted sampling without replacement (exponential-key reservoir).
    const double key = -std::log(1.0 - u_key) / std::exp(log_w);
    failures.push_back({std::move(x), log_w, key});
  }

  ToyOracle out;
  out.proposal_draws = proposal_draws;
  out.estimate = weight_sum / static_cast<double>(proposal_draws);
  if (static_cast<int>(failures.size()) < n_samples)
    throw std::runtime_error("toy_is_ground_truth: too few failures; raise proposal_draws");
  std::partial_sort(failures.begin(), failures.begin() + n_samples, failures.end(),
                    [](const Candidate& a, const Candidate& b) { return a.key < b.key; });
  out.samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) out.samples.push_back(std::move(failures[i].x));
  return out;
}

}  // namespace difs
