#include "difs/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "difs/diffusion.hpp"

namespace difs {

namespace {

// Fixed chunk count for batch-gradient reduction. Chunks are combined in
// index order, so gradients are bit-identical for any thread count.
constexpr int kGradChunks = 4;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double silu(double z) { return z * sigmoid(z); }
double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

std::vector<int> layer_widths(const Denoiser& net) {
  std::vector<int> w;
  w.push_back(net.input_dim());
  for (int h : net.hidden) w.push_back(h);
  w.push_back(net.dim_x);
  return w;
}

// Z = A * W, rows [r0, r1) of A; Z preallocated (m x out), overwritten.
void matmul_rows(const Mat& a, int r0, int r1, const Mat& w, const Vec& b, Mat& z) {
  const int in = w.rows;
  const int out = w.cols;
  for (int i = r0; i < r1; ++i) {
    double* zi = z.row(i);
    for (int j = 0; j < out; ++j) zi[j] = b[j];
    const double* ai = a.row(i);
    for (int k = 0; k < in; ++k) {
      const double aik = ai[k];
      const double* wk = w.row(k);
      for (int j = 0; j < out; ++j) zi[j] += aik * wk[j];
    }
  }
}

void sinusoidal(double position, int dim_e, double* out) {
  const int half = dim_e / 2;
  for (int j = 0; j < half; ++j) {
    const double omega = std::exp(-std::log(10000.0) * static_cast<double>(j) /
                                  static_cast<double>(half));
    out[j] = std::sin(position * omega);
    out[half + j] = std::cos(position * omega);
  }
}

void assemble_row(const Denoiser& net, const double* x, int k, double r, double* row) {
  for (int i = 0; i < net.dim_x; ++i) row[i] = x[i];
  sinusoidal(static_cast<double>(k), net.time_embed_dim, row + net.dim_x);
  sinusoidal(net.normalize_condition(r) * 100.0, net.cond_embed_dim,
             row + net.dim_x + net.time_embed_dim);
}

}  // namespace

size_t Denoiser::param_count() const {
  size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

double Denoiser::normalize_condition(double r) const {
  if (!conditional) return 0.5;
  const double span = r_hi - r_lo;
  if (!(span > 1e-12)) return 0.5;
  return (r - r_lo) / span;
}

ParamGrads zeros_like(const Denoiser& net) {
  ParamGrads g;
  for (const auto& w : net.weights) g.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : net.biases) g.biases.emplace_back(b.size(), 0.0);
  return g;
}

AdamState make_adam(const Denoiser& net, double lr, double beta1, double beta2,
                    double eps) {
  AdamState st;
  st.m = zeros_like(net);
  st.v = zeros_like(net);
  st.lr = lr;
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.eps = eps;
  return st;
}

Denoiser init_params(int dim_x, const std::vector<int>& hidden, Rng& rng,
                     int time_embed_dim, int cond_embed_dim) {
  if (dim_x < 1) throw std::invalid_argument("init_params: dim_x must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("init_params: empty hidden list");
  if (time_embed_dim % 2 != 0 || cond_embed_dim % 2 != 0)
    throw std::invalid_argument("init_params: embedding dims must be even");
  Denoiser net;
  net.dim_x = dim_x;
  net.hidden = hidden;
  net.time_embed_dim = time_embed_dim;
  net.cond_embed_dim = cond_embed_dim;
  const auto widths = layer_widths(net);
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = rng.uniform_in(-scale, scale);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

Vec time_embed(int k, int /*steps*/, int dim_e) {
  if (dim_e % 2 != 0) throw std::invalid_argument("time_embed: dim_e must be even");
  Vec out(dim_e);
  sinusoidal(static_cast<double>(k), dim_e, out.data());
  return out;
}

Vec cond_embed(double r_norm, int dim_e) {
  if (dim_e % 2 != 0) throw std::invalid_argument("cond_embed: dim_e must be even");
  Vec out(dim_e);
  sinusoidal(r_norm * 100.0, dim_e, out.data());
  return out;
}

Mat mlp_apply(const Denoiser& net, const Mat& inputs, int threads) {
  if (inputs.cols != net.input_dim())
    throw std::invalid_argument("mlp_apply: input width mismatch");
  const int n = inputs.rows;
  const int n_layers = static_cast<int>(net.weights.size());
  Mat out(n, net.dim_x);
  const int chunk = 256;
  const int n_chunks = (n + chunk - 1) / chunk;
  parallel_for(n_chunks, threads, [&](int64_t c) {
    const int r0 = static_cast<int>(c) * chunk;
    const int r1 = std::min(n, r0 + chunk);
    Mat cur(r1 - r0, inputs.cols);
    for (int i = r0; i < r1; ++i)
      std::copy(inputs.row(i), inputs.row(i) + inputs.cols, cur.row(i - r0));
    for (int l = 0; l < n_layers; ++l) {
      Mat z(cur.rows, net.weights[l].cols);
      matmul_rows(cur, 0, cur.rows, net.weights[l], net.biases[l], z);
      if (l + 1 < n_layers)
        for (double& v : z.data) v = silu(v);
      cur = std::move(z);
    }
    for (int i = 0; i < cur.rows; ++i)
      std::copy(cur.row(i), cur.row(i) + cur.cols, out.row(r0 + i));
  });
  return out;
}

Vec forward(const Denoiser& net, const Vec& x_k, int k, double r) {
  if (static_cast<int>(x_k.size()) != net.dim_x)
    throw std::invalid_argument("forward: input dimension mismatch");
  if (!all_finite(x_k) || !std::isfinite(r))
    throw std::invalid_argument("forward: non-finite input");
  Mat input(1, net.input_dim());
  assemble_row(net, x_k.data(), k, r, input.row(0));
  Mat out = mlp_apply(net, input, 1);
  return Vec(out.row(0), out.row(0) + net.dim_x);
}

Mat forward_batch(const Denoiser& net, const Mat& x_k, const std::vector<int>& ks,
                  const Vec& rs, int threads) {
  if (x_k.cols != net.dim_x || static_cast<size_t>(x_k.rows) != ks.size() ||
      ks.size() != rs.size())
    throw std::invalid_argument("forward_batch: dimension mismatch");
  Mat inputs(x_k.rows, net.input_dim());
  for (int i = 0; i < x_k.rows; ++i)
    assemble_row(net, x_k.row(i), ks[i], rs[i], inputs.row(i));
  return mlp_apply(net, inputs, threads);
}

namespace {

// Forward pass storing pre-activations, then backprop of the mean squared
// noise-prediction error, restricted to rows [r0, r1). Loss denominator is
// the full batch size so chunk gradients add up to the batch gradient.
double chunk_loss_grad(const Denoiser& net, const Mat& inputs, const Mat& targets,
                       int r0, int r1, int batch_size, ParamGrads& grads) {
  const int m = r1 - r0;
  const int n_layers = static_cast<int>(net.weights.size());
  std::vector<Mat> acts;   // acts[0] = input rows, acts[l+1] = activation after layer l
  std::vector<Mat> preact; // preact[l] = pre-activation of layer l
  acts.emplace_back(m, inputs.cols);
  for (int i = 0; i < m; ++i)
    std::copy(inputs.row(r0 + i), inputs.row(r0 + i) + inputs.cols, acts[0].row(i));
  for (int l = 0; l < n_layers; ++l) {
    Mat z(m, net.weights[l].cols);
    matmul_rows(acts[l], 0, m, net.weights[l], net.biases[l], z);
    preact.push_back(z);
    if (l + 1 < n_layers)
      for (double& v : z.data) v = silu(v);
    acts.push_back(std::move(z));
  }

  const Mat& out = acts.back();
  double loss_sum = 0.0;
  Mat delta(m, net.dim_x);  // d(mean loss)/d(output)
  for (int i = 0; i < m; ++i) {
    const double* oi = out.row(i);
    const double* ti = targets.row(r0 + i);
    double* di = delta.row(i);
    for (int j = 0; j < net.dim_x; ++j) {
      const double diff = oi[j] - ti[j];
      loss_sum += diff * diff;
      di[j] = 2.0 * diff / static_cast<double>(batch_size);
    }
  }

  for (int l = n_layers - 1; l >= 0; --l) {
    const Mat& a_in = acts[static_cast<size_t>(l)];
    Mat& dw = grads.weights[static_cast<size_t>(l)];
    Vec& db = grads.biases[static_cast<size_t>(l)];
    const int out_w = net.weights[l].cols;
    const int in_w = net.weights[l].rows;
    for (int i = 0; i < m; ++i) {
      const double* ai = a_in.row(i);
      const double* di = delta.row(i);
      for (int j = 0; j < out_w; ++j) db[j] += di[j];
      for (int k = 0; k < in_w; ++k) {
        const double aik = ai[k];
        double* dwk = dw.row(k);
        for (int j = 0; j < out_w; ++j) dwk[j] += aik * di[j];
      }
    }
    if (l == 0) break;
    Mat prev(m, in_w);
    const Mat& w = net.weights[static_cast<size_t>(l)];
    const Mat& z_prev = preact[static_cast<size_t>(l) - 1];
    for (int i = 0; i < m; ++i) {
      const double* di = delta.row(i);
      double* pi = prev.row(i);
      for (int k = 0; k < in_w; ++k) {
        const double* wk = w.row(k);
        double acc = 0.0;
        for (int j = 0; j < out_w; ++j) acc += wk[j] * di[j];
        pi[k] = acc * silu_grad(z_prev.row(i)[k]);
      }
    }
    delta = std::move(prev);
  }
  return loss_sum;
}

struct NoisedBatch {
  Mat inputs;   // assembled MLP input rows
  Mat targets;  // the drawn eps rows
};

NoisedBatch build_noised_batch(const Denoiser& net, const std::vector<Vec>& x0s,
                               const Vec& rs, const std::vector<int>& ks,
                               const std::vector<Vec>& eps, const Schedule& schedule) {
  const int n = static_cast<int>(x0s.size());
  NoisedBatch nb{Mat(n, net.input_dim()), Mat(n, net.dim_x)};
  Vec x_k(net.dim_x);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(x0s[i].size()) != net.dim_x ||
        static_cast<int>(eps[i].size()) != net.dim_x)
      throw std::invalid_argument("loss: element dimension mismatch");
    const double ab = schedule.alpha_bar_at(ks[i]);
    const double c0 = std::sqrt(ab);
    const double c1 = std::sqrt(1.0 - ab);
    for (int j = 0; j < net.dim_x; ++j) {
      x_k[j] = c0 * x0s[i][j] + c1 * eps[i][j];
      nb.targets(i, j) = eps[i][j];
    }
    assemble_row(net, x_k.data(), ks[i], rs[i], nb.inputs.row(i));
  }
  return nb;
}

}  // namespace

LossGrad loss_and_grad_fixed(const Denoiser& net, const std::vector<Vec>& x0s,
                             const Vec& rs, const std::vector<int>& ks,
                             const std::vector<Vec>& eps, const Schedule& schedule,
                             int threads) {
  if (x0s.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const int n = static_cast<int>(x0s.size());
  const NoisedBatch nb = build_noised_batch(net, x0s, rs, ks, eps, schedule);

  const int n_chunks = std::min(kGradChunks, n);
  std::vector<ParamGrads> partial;
  partial.reserve(n_chunks);
  for (int c = 0; c < n_chunks; ++c) partial.push_back(zeros_like(net));
  Vec losses(n_chunks, 0.0);
  parallel_for(n_chunks, threads, [&](int64_t c) {
    const int r0 = static_cast<int>(n * c / n_chunks);
    const int r1 = static_cast<int>(n * (c + 1) / n_chunks);
    losses[c] = chunk_loss_grad(net, nb.inputs, nb.targets, r0, r1, n, partial[c]);
  });

  LossGrad result;
  result.grads = std::move(partial[0]);
  for (int c = 1; c < n_chunks; ++c) {
    for (size_t l = 0; l < result.grads.weights.size(); ++l) {
      auto& acc = result.grads.weights[l].data;
      const auto& add = partial[c].weights[l].data;
      for (size_t i = 0; i < acc.size(); ++i) acc[i] += add[i];
      auto& accb = result.grads.biases[l];
      const auto& addb = partial[c].biases[l];
      for (size_t i = 0; i < accb.size(); ++i) accb[i] += addb[i];
    }
  }
  double loss = 0.0;
  for (int c = 0; c < n_chunks; ++c) loss += losses[c];
  result.loss = loss / static_cast<double>(n);
  return result;
}

double loss_fixed(const Denoiser& net, const std::vector<Vec>& x0s, const Vec& rs,
                  const std::vector<int>& ks, const std::vector<Vec>& eps,
                  const Schedule& schedule) {
  if (x0s.empty()) throw std::invalid_argument("loss_fixed: empty batch");
  const NoisedBatch nb = build_noised_batch(net, x0s, rs, ks, eps, schedule);
  const Mat out = mlp_apply(net, nb.inputs, 1);
  double loss = 0.0;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) {
      const double d = out(i, j) - nb.targets(i, j);
      loss += d * d;
    }
  return loss / static_cast<double>(x0s.size());
}

LossGrad loss_and_grad(const Denoiser& net, const std::vector<Vec>& x0s, const Vec& rs,
                       const Schedule& schedule, Rng& rng, int threads) {
  if (x0s.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const int n = static_cast<int>(x0s.size());
  std::vector<int> ks(n);
  std::vector<Vec> eps(n);
  for (int i = 0; i < n; ++i) {
    ks[i] = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(schedule.steps)));
    eps[i].resize(net.dim_x);
    for (int j = 0; j < net.dim_x; ++j) eps[i][j] = rng.normal();
  }
  return loss_and_grad_fixed(net, x0s, rs, ks, eps, schedule, threads);
}

void adam_step(Denoiser& net, const ParamGrads& grads, AdamState& state) {
  if (grads.weights.size() != net.weights.size() ||
      grads.biases.size() != net.biases.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto update = [&](double& p, double g, double& m, double& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    p -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  };
  for (size_t l = 0; l < net.weights.size(); ++l) {
    if (grads.weights[l].rows != net.weights[l].rows ||
        grads.weights[l].cols != net.weights[l].cols)
      throw std::invalid_argument("adam_step: shape mismatch");
    auto& w = net.weights[l].data;
    const auto& g = grads.weights[l].data;
    auto& m = state.m.weights[l].data;
    auto& v = state.v.weights[l].data;
    for (size_t i = 0; i < w.size(); ++i) update(w[i], g[i], m[i], v[i]);
    auto& b = net.biases[l];
    const auto& gb = grads.biases[l];
    auto& mb = state.m.biases[l];
    auto& vb = state.v.biases[l];
    for (size_t i = 0; i < b.size(); ++i) update(b[i], gb[i], mb[i], vb[i]);
  }
}

}  // namespace difs
