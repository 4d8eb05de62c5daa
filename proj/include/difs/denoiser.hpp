#pragma once

#include <string>
#include <utility>
#include <vector>

#include "difs/core.hpp"

namespace difs {

struct Schedule;

// Conditional epsilon-prediction MLP. Input rows are
// [x_k | time_embed(k) | cond_embed(r_norm)], hidden layers use SiLU, the
// output layer is linear and predicts the noise that produced x_k.
// Robustness values are min-max normalized with bounds frozen at training
// time; the bounds travel with the model so conditioning stays well defined
// when a requested value lies below everything seen during training.
struct Denoiser {
  std::vector<Mat> weights;  // weights[l] is (in x out)
  std::vector<Vec> biases;
  int dim_x = 0;
  std::vector<int> hidden;
  int time_embed_dim = 32;
  int cond_embed_dim = 16;
  std::string activation = "silu";
  bool conditional = true;
  double r_lo = 0.0;  // robustness normalization bounds
  double r_hi = 1.0;

  int input_dim() const { return dim_x + time_embed_dim + cond_embed_dim; }
  size_t param_count() const;
  // Normalized conditioning value; constant when the model is unconditional.
  double normalize_condition(double r) const;
};

// Gradient (or optimizer moment) storage shaped like a Denoiser's parameters.
struct ParamGrads {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};

ParamGrads zeros_like(const Denoiser& net);

struct AdamState {
  ParamGrads m;
  ParamGrads v;
  int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const Denoiser& net, double lr = 1e-3, double beta1 = 0.9,
                    double beta2 = 0.999, double eps = 1e-8);

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn layer by layer from rng,
// biases zero.
Denoiser init_params(int dim_x, const std::vector<int>& hidden, Rng& rng,
                     int time_embed_dim = 32, int cond_embed_dim = 16);

// Sinusoidal features [sin(k*w_j)..., cos(k*w_j)...] with w_j geometrically
// spaced in (0, 1]; dim_e must be even.
Vec time_embed(int k, int steps, int dim_e);

// Sinusoidal embedding of the normalized robustness value.
Vec cond_embed(double r_norm, int dim_e);

// Raw MLP on pre-assembled input rows ([x | time | cond]); the sampling loop
// assembles inputs itself to reuse per-chain condition embeddings.
Mat mlp_apply(const Denoiser& net, const Mat& inputs, int threads);

// Predicted noise for a single input. Throws on dimension mismatch or
// non-finite input.
Vec forward(const Denoiser& net, const Vec& x_k, int k, double r);

// Batched prediction; row i of x_k pairs with ks[i] and rs[i]. Rows are
// processed independently, so any thread count gives identical output.
Mat forward_batch(const Denoiser& net, const Mat& x_k, const std::vector<int>& ks,
                  const Vec& rs, int threads = 1);

struct LossGrad {
  double loss = 0.0;
  ParamGrads grads;
};

// Mean over the batch of ||eps - eps_theta(sqrt(ab_k) x0 + sqrt(1-ab_k) eps, k, r)||^2
// with k ~ U{1..K} and eps ~ N(0, I) drawn from rng per element, plus the
// exact reverse-mode gradient for the drawn (k, eps).
LossGrad loss_and_grad(const Denoiser& net, const std::vector<Vec>& x0s, const Vec& rs,
                       const Schedule& schedule, Rng& rng, int threads = 1);

// Deterministic variants for a fixed draw of (k, eps); the finite-difference
// oracle in the tests evaluates loss_fixed at perturbed parameters.
LossGrad loss_and_grad_fixed(const Denoiser& net, const std::vector<Vec>& x0s,
                             const Vec& rs, const std::vector<int>& ks,
                             const std::vector<Vec>& eps, const Schedule& schedule,
                             int threads = 1);
double loss_fixed(const Denoiser& net, const std::vector<Vec>& x0s, const Vec& rs,
                  const std::vector<int>& ks, const std::vector<Vec>& eps,
                  const Schedule& schedule);

// Standard Adam update with bias correction; increments state.t.
void adam_step(Denoiser& net, const ParamGrads& grads, AdamState& state);

}  // namespace difs
