#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace difs {

using Vec = std::vector<double>;

// Dense row-major matrix. Dimensions are fixed at construction.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  size_t size() const { return data.size(); }
};

// Deterministic stream generator: xoshiro256++ seeded through splitmix64,
// normals via Box-Muller. Identical seed and call sequence give an identical
// stream on every platform. A single Rng must not be shared across threads;
// derive per-worker generators with child().
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform_in(double lo, double hi);
  // Unbiased integer on [0, n), n >= 1.
  uint64_t uniform_int(uint64_t n);
  // Standard normal. Box-Muller pairs; the second value is cached.
  double normal();

  // Deterministic child stream from (seed, FNV-1a(tag), index). Children of
  // the same parent with distinct tags or indices are independent streams.
  Rng child(std::string_view tag, uint64_t index) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_ = 0;
  uint64_t s_[4] = {0, 0, 0, 0};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Draw from N(mean, diag(diag_var)). Throws on dimension mismatch or any
// variance <= 0.
Vec gaussian_sample(const Vec& mean, const Vec& diag_var, Rng& rng);

// Exact log density of the diagonal Gaussian N(mean, diag(diag_var)) at x.
double gaussian_logpdf(const Vec& x, const Vec& mean, const Vec& diag_var);

// Lower empirical quantile: sort ascending and return the element at index
// ceil(q*N)-1, clamped to [0, N-1]. q=0 gives the minimum, q=1 the maximum.
double quantile(const std::vector<double>& values, double q);

// Runs fn(i) for every i in [0, n) on up to `threads` workers. Work items
// must write only to per-index slots; under that contract results are
// identical for any thread count.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

}  // namespace difs
