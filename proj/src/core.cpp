#include "difs/core.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace difs {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// splitmix64 finalizer, used for seeding and child-stream derivation.
uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
  // Expand the seed into xoshiro256++ state with sequential splitmix64 steps.
  uint64_t sm = seed;
  for (auto& w : s_) {
    sm += 0x9E3779B97F4A7C15ull;
    uint64_t z = sm;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    w = z ^ (z >> 31);
  }
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_in(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("uniform_in: lo > hi");
  return lo + (hi - lo) * uniform();
}

uint64_t Rng::uniform_int(uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: n must be >= 1");
  const uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = kTwoPi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

Rng Rng::child(std::string_view tag, uint64_t index) const {
  uint64_t s = mix64(seed_ ^ fnv1a64(tag));
  s = mix64(s + 0x9E3779B97F4A7C15ull * (index + 1));
  return Rng(s);
}

Vec gaussian_sample(const Vec& mean, const Vec& diag_var, Rng& rng) {
  if (mean.size() != diag_var.size())
    throw std::invalid_argument("gaussian_sample: dimension mismatch");
  Vec out(mean.size());
  for (size_t i = 0; i < mean.size(); ++i) {
    if (!(diag_var[i] > 0.0))
      throw std::invalid_argument("gaussian_sample: variance must be positive");
    out[i] = mean[i] + std::sqrt(diag_var[i]) * rng.normal();
  }
  return out;
}

double gaussian_logpdf(const Vec& x, const Vec& mean, const Vec& diag_var) {
  if (x.size() != mean.size() || x.size() != diag_var.size())
    throw std::invalid_argument("gaussian_logpdf: dimension mismatch");
  double lp = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(diag_var[i] > 0.0))
      throw std::invalid_argument("gaussian_logpdf: variance must be positive");
    const double d = x[i] - mean[i];
    lp += -0.5 * (std::log(kTwoPi * diag_var[i]) + d * d / diag_var[i]);
  }
  return lp;
}

double quantile(const std::vector<double>& values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0,1]");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<long>(sorted.size());
  long idx = static_cast<long>(std::ceil(q * static_cast<double>(n))) - 1;
  idx = std::clamp(idx, 0L, n - 1);
  return sorted[static_cast<size_t>(idx)];
}

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::max<int64_t>(1, std::min<int64_t>(threads, n)));
  if (workers == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr err;
  std::mutex err_mu;
  for (int t = 0; t < workers; ++t) {
    const int64_t begin = n * t / workers;
    const int64_t end = n * (t + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (int64_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

bool all_finite(const Mat& m) {
  for (double x : m.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace difs
