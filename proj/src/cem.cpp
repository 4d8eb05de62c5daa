#include "difs/cem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace difs {

namespace {

double logsumexp(const Vec& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Normalized linear weights from log weights (shifted by the max).
Vec normalize_log_weights(const Vec& log_weights) {
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(m))
    throw std::invalid_argument("weighted_em_fit: degenerate log weights");
  Vec u(log_weights.size());
  double total = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    u[i] = std::exp(log_weights[i] - m);
    total += u[i];
  }
  for (double& x : u) x /= total;
  return u;
}

// Weighted k-means++ seeding: first center by weight, later centers by
// weight times squared distance to the nearest chosen center.
std::vector<size_t> kmeanspp_seeds(const std::vector<Vec>& xs, const Vec& u,
                                   int n_components, Rng& rng) {
  const size_t n = xs.size();
  auto pick = [&](const Vec& probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    double t = rng.uniform() * total;
    for (size_t i = 0; i < probs.size(); ++i) {
      t -= probs[i];
      if (t <= 0.0) return i;
    }
    return probs.size() - 1;
  };
  std::vector<size_t> seeds;
  seeds.push_back(pick(u));
  Vec d2(n, 0.0);
  for (int c = 1; c < n_components; ++c) {
    Vec probs(n);
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (size_t s : seeds) {
        double d = 0.0;
        for (size_t j = 0; j < xs[i].size(); ++j) {
          const double diff = xs[i][j] - xs[s][j];
          d += diff * diff;
        }
        best = std::min(best, d);
      }
      d2[i] = best;
      probs[i] = u[i] * best;
    }
    seeds.push_back(pick(probs));
  }
  return seeds;
}

}  // namespace

std::vector<Vec> gmm_sample(const Gmm& g, int n, Rng& rng) {
  if (g.n_components() < 1) throw std::invalid_argument("gmm_sample: empty mixture");
  std::vector<Vec> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    double t = rng.uniform();
    int c = 0;
    for (; c + 1 < g.n_components(); ++c) {
      t -= g.weights[c];
      if (t < 0.0) break;
    }
    out.push_back(gaussian_sample(g.means[c], g.vars[c], rng));
  }
  return out;
}

double gmm_logpdf(const Gmm& g, const Vec& x) {
  Vec terms(g.n_components());
  for (int c = 0; c < g.n_components(); ++c) {
    const double lw = g.weights[c] > 0.0 ? std::log(g.weights[c])
                                         : -std::numeric_limits<double>::infinity();
    terms[c] = lw + gaussian_logpdf(x, g.means[c], g.vars[c]);
  }
  return logsumexp(terms);
}

Gmm weighted_em_fit(const std::vector<Vec>& samples, const Vec& log_weights,
                    int n_components, Rng& rng, int max_iters, double tol,
                    double var_floor) {
  const size_t n = samples.size();
  if (n < static_cast<size_t>(n_components))
    throw std::invalid_argument("weighted_em_fit: fewer samples than components");
  if (log_weights.size() != n)
    throw std::invalid_argument("weighted_em_fit: weight length mismatch");
  const size_t d = samples[0].size();
  const Vec u = normalize_log_weights(log_weights);

  // Weighted global moments, used for the initial covariances.
  Vec global_mean(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) global_mean[j] += u[i] * samples[i][j];
  Vec global_var(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) {
      const double diff = samples[i][j] - global_mean[j];
      global_var[j] += u[i] * diff * diff;
    }
  for (double& v : global_var) v = std::max(v, var_floor);

  Gmm g;
  g.weights = Vec(n_components, 1.0 / n_components);
  const auto seeds = kmeanspp_seeds(samples, u, n_components, rng);
  for (int c = 0; c < n_components; ++c) {
    g.means.push_back(samples[seeds[c]]);
    g.vars.push_back(global_var);
  }

  double prev_ll = -std::numeric_limits<double>::infinity();
  Mat resp(static_cast<int>(n), n_components);
  for (int it = 0; it < max_iters; ++it) {
    // E step: responsibilities and the weighted mean log-likelihood.
    double ll = 0.0;
    for (size_t i = 0; i < n; ++i) {
      Vec terms(n_components);
      for (int c = 0; c < n_components; ++c)
        terms[c] = std::log(std::max(g.weights[c], 1e-300)) +
                   gaussian_logpdf(samples[i], g.means[c], g.vars[c]);
      const double lse = logsumexp(terms);
      ll += u[i] * lse;
      for (int c = 0; c < n_components; ++c)
        resp(static_cast<int>(i), c) = std::exp(terms[c] - lse);
    }
    if (it > 0 && ll + 1e-9 < prev_ll)
      throw std::logic_error("weighted_em_fit: log-likelihood decreased");
    const bool converged = it > 0 && ll - prev_ll < tol;
    prev_ll = ll;
    if (converged) break;

    // M step: weighted MLE updates with the covariance floor.
    for (int c = 0; c < n_components; ++c) {
      double mass = 0.0;
      for (size_t i = 0; i < n; ++i) mass += u[i] * resp(static_cast<int>(i), c);
      if (mass < 1e-12) {
        // Dead component; reseed it at a weighted random point.
        const size_t s = kmeanspp_seeds(samples, u, 1, rng)[0];
        g.means[c] = samples[s];
        g.vars[c] = global_var;
        g.weights[c] = 1.0 / static_cast<double>(n);
        continue;
      }
      g.weights[c] = mass;
      Vec mean(d, 0.0);
      for (size_t i = 0; i < n; ++i) {
        const double w = u[i] * resp(static_cast<int>(i), c);
        for (size_t j = 0; j < d; ++j) mean[j] += w * samples[i][j];
      }
      for (double& m : mean) m /= mass;
      Vec var(d, 0.0);
      for (size_t i = 0; i < n; ++i) {
        const double w = u[i] * resp(static_cast<int>(i), c);
        for (size_t j = 0; j < d; ++j) {
          const double diff = samples[i][j] - mean[j];
          var[j] += w * diff * diff;
        }
      }
      for (double& v : var) v = std::max(v / mass, var_floor);
      g.means[c] = std::move(mean);
      g.vars[c] = std::move(var);
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  return g;
}

void CemConfig::validate() const {
  if (sample_budget == 0) throw std::invalid_argument("cem.sample_budget must be positive");
  if (samples_per_iter < 1) throw std::invalid_argument("cem.samples_per_iter must be >= 1");
  if (static_cast<uint64_t>(samples_per_iter) > sample_budget)
    throw std::invalid_argument("cem.samples_per_iter exceeds cem.sample_budget");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("cem.alpha must lie in (0,1)");
  if (n_components < 1) throw std::invalid_argument("cem.n_components must be >= 1");
}

CemArtifacts cem_run(const CemConfig& config, const EnvironmentSpec& env, Rng& rng,
                     int threads, const ProgressFn& progress) {
  config.validate();
  CemArtifacts art;
  art.seed = rng.seed();

  // Initial proposal equals the nominal density (all components coincide).
  art.proposal.weights = Vec(config.n_components, 1.0 / config.n_components);
  for (int c = 0; c < config.n_components; ++c) {
    art.proposal.means.push_back(env.nominal_mean);
    art.proposal.vars.push_back(env.nominal_var);
  }

  const int n_per_iter = config.samples_per_iter;
  for (int iter = 0; art.rollouts_used + n_per_iter <= config.sample_budget; ++iter) {
    Rng draw_rng = rng.child("cem-draw", static_cast<uint64_t>(iter));
    std::vector<Vec> xs = gmm_sample(art.proposal, n_per_iter, draw_rng);
    std::vector<double> batch_r(xs.size());
    parallel_for(static_cast<int64_t>(xs.size()), threads, [&](int64_t i) {
      batch_r[i] = env.robustness_fn(env.rollout_fn(xs[i]));
    });
    art.rollouts_used += static_cast<uint64_t>(n_per_iter);

    const double threshold = update_threshold(batch_r, config.alpha, env.r_fail);
    std::vector<Vec> elites;
    Vec elite_log_w;
    for (int i = 0; i < n_per_iter; ++i) {
      if (batch_r[i] > threshold) continue;
      elite_log_w.push_back(nominal_logpdf(env, xs[i]) - gmm_logpdf(art.proposal, xs[i]));
      elites.push_back(xs[i]);
    }
    for (int i = 0; i < n_per_iter; ++i)
      art.dataset.append(std::move(xs[i]), batch_r[i], iter);

    double em_ll = 0.0;
    if (elites.size() >= static_cast<size_t>(config.n_components)) {
      Rng em_rng = rng.child("cem-em", static_cast<uint64_t>(iter));
      art.proposal = weighted_em_fit(elites, elite_log_w, config.n_components, em_rng,
                                     config.em_max_iters, config.em_tol,
                                     config.var_floor);
    } else {
      ++art.stalls;
    }

    double fail_count = 0.0;
    for (double r : batch_r)
      if (r <= env.r_fail) fail_count += 1.0;
    IterationRecord rec{iter, threshold, fail_count / n_per_iter, em_ll};
    art.iterations.push_back(rec);
    if (progress) progress(rec);
  }
  if (art.iterations.empty())
    throw std::invalid_argument("cem_run: budget smaller than one iteration");
  return art;
}

std::vector<RolloutRecord> cem_final_samples(const CemArtifacts& artifacts,
                                             const EnvironmentSpec& env, int n,
                                             Rng& rng, int threads) {
  std::vector<Vec> xs = gmm_sample(artifacts.proposal, n, rng);
  std::vector<RolloutRecord> records(xs.size());
  parallel_for(static_cast<int64_t>(xs.size()), threads,
               [&](int64_t i) { records[i] = rollout(env, xs[i]); });
  return records;
}

}  // namespace difs
