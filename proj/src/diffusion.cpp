#include "difs/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace difs {

Schedule make_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw std::invalid_argument("make_schedule: steps must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw std::invalid_argument("make_schedule: need 0 < beta_min <= beta_max < 1");
  Schedule s;
  s.steps = steps;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  double prod = 1.0;
  for (int k = 0; k < steps; ++k) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(k) / (steps - 1);
    s.beta[k] = beta_min + frac * (beta_max - beta_min);
    s.alpha[k] = 1.0 - s.beta[k];
    prod *= s.alpha[k];
    s.alpha_bar[k] = prod;
    if (k > 0 && !(s.alpha_bar[k] < s.alpha_bar[k - 1]))
      throw std::logic_error("make_schedule: alpha_bar not strictly decreasing");
  }
  return s;
}

Vec q_sample(const Vec& x0, int k, const Vec& eps, const Schedule& s) {
  if (k < 1 || k > s.steps) throw std::out_of_range("q_sample: k out of range");
  if (x0.size() != eps.size()) throw std::invalid_argument("q_sample: dim mismatch");
  const double ab = s.alpha_bar_at(k);
  const double c0 = std::sqrt(ab);
  const double c1 = std::sqrt(1.0 - ab);
  Vec out(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) out[i] = c0 * x0[i] + c1 * eps[i];
  return out;
}

Vec p_sample_step(const Denoiser& net, const Vec& x_k, int k, double r,
                  const Schedule& s, const Vec& z) {
  if (k < 1 || k > s.steps) throw std::out_of_range("p_sample_step: k out of range");
  if (x_k.size() != z.size()) throw std::invalid_argument("p_sample_step: dim mismatch");
  const Vec eps_hat = forward(net, x_k, k, r);
  const double beta = s.beta_at(k);
  const double coef = beta / std::sqrt(1.0 - s.alpha_bar_at(k));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha_at(k));
  const double noise_scale = k == 1 ? 0.0 : std::sqrt(beta);
  Vec out(x_k.size());
  for (size_t i = 0; i < x_k.size(); ++i)
    out[i] = inv_sqrt_alpha * (x_k[i] - coef * eps_hat[i]) + noise_scale * z[i];
  return out;
}

std::vector<Vec> sample_batch(const Denoiser& net, const Schedule& s,
                              const Vec& conditions, Rng& rng, int threads) {
  const int n = static_cast<int>(conditions.size());
  if (n < 1) throw std::invalid_argument("sample_batch: need n >= 1");
  const int d = net.dim_x;

  // Every chain owns a child stream of a fresh base seed, so parallel and
  // serial execution (and repeated calls) give distinct, reproducible sets.
  const Rng base(rng.next_u64());
  std::vector<Rng> chains;
  chains.reserve(n);
  for (int i = 0; i < n; ++i) chains.push_back(base.child("chain", static_cast<uint64_t>(i)));

  Mat x(n, d);
  Mat cond_rows(n, net.cond_embed_dim);
  parallel_for(n, threads, [&](int64_t i) {
    double* xi = x.row(static_cast<int>(i));
    for (int j = 0; j < d; ++j) xi[j] = chains[i].normal();
    const Vec ce = cond_embed(net.normalize_condition(conditions[i]), net.cond_embed_dim);
    std::copy(ce.begin(), ce.end(), cond_rows.row(static_cast<int>(i)));
  });

  Mat inputs(n, net.input_dim());
  for (int k = s.steps; k >= 1; --k) {
    const Vec te = time_embed(k, s.steps, net.time_embed_dim);
    const double beta = s.beta_at(k);
    const double coef = beta / std::sqrt(1.0 - s.alpha_bar_at(k));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha_at(k));
    const double noise_scale = k == 1 ? 0.0 : std::sqrt(beta);
    parallel_for(n, threads, [&](int64_t i) {
      double* row = inputs.row(static_cast<int>(i));
      std::copy(x.row(static_cast<int>(i)), x.row(static_cast<int>(i)) + d, row);
      std::copy(te.begin(), te.end(), row + d);
      std::copy(cond_rows.row(static_cast<int>(i)),
                cond_rows.row(static_cast<int>(i)) + net.cond_embed_dim,
                row + d + net.time_embed_dim);
    });
    const Mat eps_hat = mlp_apply(net, inputs, threads);
    parallel_for(n, threads, [&](int64_t i) {
      double* xi = x.row(static_cast<int>(i));
      const double* ei = eps_hat.row(static_cast<int>(i));
      for (int j = 0; j < d; ++j) {
        const double z = noise_scale == 0.0 ? 0.0 : chains[i].normal();
        xi[j] = inv_sqrt_alpha * (xi[j] - coef * ei[j]) + noise_scale * z;
      }
    });
  }

  std::vector<Vec> out(n);
  for (int i = 0; i < n; ++i) out[i] = Vec(x.row(i), x.row(i) + d);
  return out;
}

std::vector<Vec> sample(const Denoiser& net, const Schedule& s, double r, int n,
                        Rng& rng, int threads) {
  if (n < 1) throw std::invalid_argument("sample: need n >= 1");
  return sample_batch(net, s, Vec(static_cast<size_t>(n), r), rng, threads);
}

}  // namespace difs
