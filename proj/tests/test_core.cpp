#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "difs/core.hpp"

using namespace difs;

TEST_SUITE_BEGIN("core");

TEST_CASE("rng streams are reproducible bit for bit") {
  Rng a(123456789ull);
  Rng b(123456789ull);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.normal() == b.normal());
  }
  Rng c(1ull);
  Rng d(2ull);
  CHECK(c.next_u64() != d.next_u64());
}

TEST_CASE("rng children are independent and deterministic") {
  Rng root(7ull);
  Rng c1 = root.child("train", 0);
  Rng c2 = root.child("train", 1);
  Rng c3 = root.child("sample", 0);
  CHECK(c1.next_u64() != c2.next_u64());
  CHECK(root.child("train", 0).next_u64() != c3.next_u64());
  Rng again = Rng(7ull).child("train", 0);
  Rng fresh = Rng(7ull).child("train", 0);
  for (int i = 0; i < 100; ++i) CHECK(again.next_u64() == fresh.next_u64());
}

TEST_CASE("uniform and uniform_int stay in range") {
  Rng rng(99ull);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const uint64_t k = rng.uniform_int(7);
    CHECK(k < 7);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
}

TEST_CASE("gaussian_sample matches its moments at fixed seed") {
  Rng rng(2024ull);
  const Vec mean = {0.0, 0.0};
  const Vec var = {1.0, 1.0};
  Vec sum(2, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vec x = gaussian_sample(mean, var, rng);
    sum[0] += x[0];
    sum[1] += x[1];
  }
  CHECK(std::abs(sum[0] / n) < 0.02);
  CHECK(std::abs(sum[1] / n) < 0.02);
}

TEST_CASE("gaussian_sample rejects bad input") {
  Rng rng(1ull);
  CHECK_THROWS_AS(gaussian_sample({0.0}, {0.0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_sample({0.0}, {1.0, 1.0}, rng), std::invalid_argument);
}

TEST_CASE("gaussian_sample is deterministic given the seed") {
  Rng a(42ull);
  Rng b(42ull);
  const Vec mean(3, 1.0);
  const Vec var(3, 2.0);
  CHECK(gaussian_sample(mean, var, a) == gaussian_sample(mean, var, b));
}

TEST_CASE("gaussian_logpdf closed forms") {
  CHECK(gaussian_logpdf({0.0}, {0.0}, {1.0}) == doctest::Approx(-0.9189385).epsilon(1e-6));
  CHECK(gaussian_logpdf({1.0, 1.0}, {0.0, 0.0}, {1.0, 1.0}) ==
        doctest::Approx(-2.8378771).epsilon(1e-6));
  // x = mean maximizes the density for fixed variance
  const double at_mean = gaussian_logpdf({2.0}, {2.0}, {0.5});
  CHECK(at_mean > gaussian_logpdf({2.3}, {2.0}, {0.5}));
  CHECK(at_mean > gaussian_logpdf({1.9}, {2.0}, {0.5}));
  CHECK_THROWS_AS(gaussian_logpdf({0.0}, {0.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("gaussian_logpdf integrates to one on a grid") {
  const int n = 4000;
  const double lo = -8.0, hi = 8.0;
  const double h = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double f = std::exp(gaussian_logpdf({x}, {0.0}, {1.0}));
    integral += (i == 0 || i == n) ? 0.5 * f : f;
  }
  integral *= h;
  CHECK(std::abs(integral - 1.0) < 1e-3);
}

TEST_CASE("quantile follows the lower empirical convention") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({3.0, 1.0, 2.0}, 0.0) == 1.0);
  CHECK(quantile({5.0}, 0.3) == 5.0);
  CHECK(quantile({4.0, 2.0, 9.0, 7.0}, 1.0) == 9.0);
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile({1.0}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile({1.0}, -0.1), std::invalid_argument);
}

TEST_CASE("quantile is monotone in q") {
  Rng rng(5ull);
  Vec values(57);
  for (double& v : values) v = rng.normal();
  double prev = quantile(values, 0.0);
  for (int i = 1; i <= 20; ++i) {
    const double cur = quantile(values, i / 20.0);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("parallel_for fills per-index slots identically for any thread count") {
  const int n = 1000;
  Vec base(n), multi(n);
  auto work = [](int64_t i) { return std::sqrt(static_cast<double>(i) + 0.25); };
  parallel_for(n, 1, [&](int64_t i) { base[i] = work(i); });
  parallel_for(n, 3, [&](int64_t i) { multi[i] = work(i); });
  CHECK(base == multi);
}

TEST_SUITE_END();
