#include "difs/difs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace difs {

namespace {

Vec standardize(const Vec& x, const Vec& mean, const Vec& scale) {
  Vec out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / scale[i];
  return out;
}

Vec unstandardize(const Vec& x, const Vec& mean, const Vec& scale) {
  Vec out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = mean[i] + scale[i] * x[i];
  return out;
}

// One training round: re-freeze the conditioning bounds on this round's set,
// reset the optimizer moments, and run train_steps of Adam on minibatches.
// Returns the mean loss across steps. Model parameters warm-start from the
// previous round.
double train_round(Denoiser& net, const std::vector<Vec>& xs_std, const Vec& rs,
                   const Schedule& schedule, const DifsConfig& cfg, Rng& rng,
                   int threads) {
  if (net.conditional) {
    net.r_lo = *std::min_element(rs.begin(), rs.end());
    net.r_hi = *std::max_element(rs.begin(), rs.end());
  }
  AdamState adam = make_adam(net, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                             cfg.adam_eps);
  const size_t n = xs_std.size();
  const int batch = std::min<size_t>(cfg.batch_size, n);
  std::vector<Vec> bx(batch);
  Vec br(batch);
  double loss_sum = 0.0;
  for (int step = 0; step < cfg.train_steps_per_iter; ++step) {
    for (int i = 0; i < batch; ++i) {
      const size_t idx = rng.uniform_int(n);
      bx[i] = xs_std[idx];
      br[i] = rs[idx];
    }
    const LossGrad lg = loss_and_grad(net, bx, br, schedule, rng, threads);
    adam_step(net, lg.grads, adam);
    loss_sum += lg.loss;
  }
  return loss_sum / std::max(1, cfg.train_steps_per_iter);
}

// Rollout a batch in parallel; results land in index order.
void rollout_batch(const EnvironmentSpec& env, const std::vector<Vec>& xs,
                   std::vector<double>& rs_out, int threads) {
  rs_out.resize(xs.size());
  parallel_for(static_cast<int64_t>(xs.size()), threads, [&](int64_t i) {
    rs_out[i] = env.robustness_fn(env.rollout_fn(xs[i]));
  });
}

}  // namespace

void DifsConfig::validate() const {
  if (sample_budget == 0) throw std::invalid_argument("difs.sample_budget must be positive");
  if (samples_per_iter < 1) throw std::invalid_argument("difs.samples_per_iter must be >= 1");
  if (static_cast<uint64_t>(samples_per_iter) > sample_budget)
    throw std::invalid_argument("difs.samples_per_iter exceeds difs.sample_budget");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("difs.alpha must lie in (0,1)");
  if (train_steps_per_iter < 1)
    throw std::invalid_argument("difs.train_steps_per_iter must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("difs.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("difs.learning_rate must be positive");
  if (hidden.empty()) throw std::invalid_argument("difs.hidden must not be empty");
  const Schedule s = make_schedule(schedule_steps, beta_min, beta_max);
  if (!s.terminal_ok())
    throw std::invalid_argument(
        "difs.schedule: alpha_bar at the final step must be < 0.05 for sampling");
}

double update_threshold(const std::vector<double>& robustness, double alpha,
                        double r_fail) {
  if (robustness.empty()) throw std::invalid_argument("update_threshold: empty list");
  return std::max(r_fail, quantile(robustness, alpha));
}

Vec sample_conditions(int n, double r_fail, double r_i, Rng& rng) {
  if (r_i < r_fail) throw std::invalid_argument("sample_conditions: r_i < r_fail");
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = rng.uniform_in(r_fail, r_i);
  return out;
}

LabeledDataset select_training_set(const LabeledDataset& d, double r_i) {
  LabeledDataset out;
  for (size_t i = 0; i < d.size(); ++i)
    if (d.rs[i] <= r_i) out.append(d.xs[i], d.rs[i], d.iteration[i]);
  return out;
}

DifsArtifacts difs_run(const DifsConfig& config, const EnvironmentSpec& env, Rng& rng,
                       int threads, const ProgressFn& progress) {
  config.validate();
  DifsArtifacts art;
  art.seed = rng.seed();

  DifsModel& model = art.model;
  model.schedule = make_schedule(config.schedule_steps, config.beta_min, config.beta_max);
  model.standardize_mean = env.nominal_mean;
  model.standardize_scale.resize(env.nominal_var.size());
  for (size_t i = 0; i < env.nominal_var.size(); ++i)
    model.standardize_scale[i] = std::sqrt(env.nominal_var[i]);

  Rng init_rng = rng.child("init", 0);
  model.net = init_params(env.dim, config.hidden, init_rng, config.time_embed_dim,
                          config.cond_embed_dim);
  model.net.conditional = config.conditional;

  const int n_per_iter = config.samples_per_iter;
  double threshold = 0.0;
  for (int iter = 0; art.rollouts_used + n_per_iter <= config.sample_budget; ++iter) {
    std::vector<Vec> xs;
    xs.reserve(n_per_iter);
    if (iter == 0) {
      Rng nominal_rng = rng.child("nominal", 0);
      for (int i = 0; i < n_per_iter; ++i) xs.push_back(nominal_sample(env, nominal_rng));
    } else {
      Rng cond_rng = rng.child("conditions", static_cast<uint64_t>(iter));
      const Vec conditions = sample_conditions(n_per_iter, env.r_fail, threshold, cond_rng);
      Rng chain_rng = rng.child("sample", static_cast<uint64_t>(iter));
      std::vector<Vec> xs_std =
          sample_batch(model.net, model.schedule, conditions, chain_rng, threads);
      for (auto& x : xs_std)
        xs.push_back(unstandardize(x, model.standardize_mean, model.standardize_scale));
    }

    std::vector<double> batch_r;
    rollout_batch(env, xs, batch_r, threads);
    art.rollouts_used += static_cast<uint64_t>(n_per_iter);
    for (int i = 0; i < n_per_iter; ++i)
      art.dataset.append(std::move(xs[i]), batch_r[i], iter);

    const double unclamped = update_threshold(batch_r, config.alpha, env.r_fail);
    threshold = iter == 0 ? unclamped : std::min(threshold, unclamped);
    if (threshold == env.r_fail && art.converged_iteration < 0)
      art.converged_iteration = iter;

    LabeledDataset train_set = select_training_set(art.dataset, threshold);
    if (train_set.size() == 0) {
      // Everything got clamped out; fall back to the ceil(alpha*N)
      // lowest-robustness pairs of the running dataset.
      const auto want = static_cast<size_t>(
          std::ceil(config.alpha * static_cast<double>(n_per_iter)));
      std::vector<size_t> order(art.dataset.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return art.dataset.rs[a] < art.dataset.rs[b];
      });
      for (size_t i = 0; i < std::min(want, order.size()); ++i)
        train_set.append(art.dataset.xs[order[i]], art.dataset.rs[order[i]],
                         art.dataset.iteration[order[i]]);
    }

    std::vector<Vec> xs_std;
    xs_std.reserve(train_set.size());
    for (const auto& x : train_set.xs)
      xs_std.push_back(standardize(x, model.standardize_mean, model.standardize_scale));
    Rng train_rng = rng.child("train", static_cast<uint64_t>(iter));
    const double mean_loss = train_round(model.net, xs_std, train_set.rs, model.schedule,
                                         config, train_rng, threads);

    double fail_count = 0.0;
    for (double r : batch_r)
      if (r <= env.r_fail) fail_count += 1.0;
    IterationRecord rec{iter, threshold, fail_count / n_per_iter, mean_loss};
    art.iterations.push_back(rec);
    if (progress) progress(rec);
  }

  if (art.iterations.empty())
    throw std::invalid_argument("difs_run: budget smaller than one iteration");
  return art;
}

std::vector<Vec> model_sample(const DifsModel& model, double condition, int n, Rng& rng,
                              int threads) {
  std::vector<Vec> xs_std =
      sample(model.net, model.schedule, condition, n, rng, threads);
  std::vector<Vec> out;
  out.reserve(xs_std.size());
  for (auto& x : xs_std)
    out.push_back(unstandardize(x, model.standardize_mean, model.standardize_scale));
  return out;
}

std::vector<RolloutRecord> final_failure_samples(const DifsArtifacts& artifacts,
                                                 const EnvironmentSpec& env, int n,
                                                 Rng& rng, int threads) {
  const std::vector<Vec> xs = model_sample(artifacts.model, env.r_fail, n, rng, threads);
  std::vector<RolloutRecord> records(xs.size());
  parallel_for(static_cast<int64_t>(xs.size()), threads,
               [&](int64_t i) { records[i] = rollout(env, xs[i]); });
  return records;
}

}  // namespace difs
