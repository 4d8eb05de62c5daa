#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "difs/difs.hpp"

using namespace difs;

TEST_SUITE_BEGIN("difs");

namespace {

DifsConfig tiny_config() {
  DifsConfig cfg;
  cfg.sample_budget = 600;
  cfg.samples_per_iter = 200;
  cfg.train_steps_per_iter = 150;
  cfg.alpha = 0.5;
  cfg.schedule_steps = 50;
  cfg.beta_min = 1e-3;
  cfg.beta_max = 0.12;
  cfg.hidden = {32, 32};
  cfg.batch_size = 64;
  return cfg;
}

}  // namespace

TEST_CASE("update_threshold takes the clamped lower quantile") {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  CHECK(update_threshold({5.0, 1.0, 4.0, 2.0, 3.0}, 0.5, neg_inf) == 3.0);
  CHECK(update_threshold({-3.0, -1.0, -2.0}, 0.5, 0.0) == 0.0);
  CHECK(update_threshold({5.0, 1.0, 4.0}, 0.01, neg_inf) == 1.0);
  CHECK_THROWS_AS(update_threshold({}, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("unclamped quantile keeps at least an alpha fraction at or below") {
  Rng rng(88ull);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> r(257);
    for (double& v : r) v = rng.normal();
    const double alpha = rng.uniform_in(0.05, 0.95);
    const double thr = quantile(r, alpha);
    int at_or_below = 0;
    for (double v : r)
      if (v <= thr) ++at_or_below;
    CHECK(at_or_below >= static_cast<int>(std::ceil(alpha * r.size())));
  }
}

TEST_CASE("sample_conditions stays inside the interval") {
  Rng rng(9ull);
  const Vec degenerate = sample_conditions(32, 1.5, 1.5, rng);
  for (double c : degenerate) CHECK(c == 1.5);

  Rng rng2(10ull);
  const Vec draws = sample_conditions(10000, 0.0, 1.0, rng2);
  double mean = 0.0;
  for (double c : draws) {
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
    mean += c;
  }
  CHECK(std::abs(mean / draws.size() - 0.5) < 0.02);
  CHECK_THROWS_AS(sample_conditions(4, 0.0, -1.0, rng2), std::invalid_argument);
}

TEST_CASE("select_training_set filters by robustness, order stable") {
  LabeledDataset d;
  d.append({1.0, 0.0}, 1.0, 0);
  d.append({2.0, 0.0}, 3.0, 0);
  d.append({3.0, 0.0}, 2.0, 1);

  const LabeledDataset all = select_training_set(d, std::numeric_limits<double>::infinity());
  CHECK(all.size() == 3);
  const LabeledDataset none = select_training_set(d, 0.5);
  CHECK(none.size() == 0);
  const LabeledDataset some = select_training_set(d, 2.0);
  REQUIRE(some.size() == 2);
  CHECK(some.rs[0] == 1.0);
  CHECK(some.rs[1] == 2.0);
  CHECK(some.xs[1][0] == 3.0);
}

TEST_CASE("config validation names the bad field") {
  DifsConfig cfg = tiny_config();
  cfg.alpha = 1.5;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("alpha"), std::invalid_argument);
  cfg = tiny_config();
  cfg.samples_per_iter = 1000;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("samples_per_iter"),
                       std::invalid_argument);
  cfg = tiny_config();
  cfg.beta_max = 0.001;  // terminal mass nowhere near zero
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("schedule"), std::invalid_argument);
}

TEST_CASE("degenerate budget runs exactly one nominal iteration") {
  DifsConfig cfg = tiny_config();
  cfg.sample_budget = cfg.samples_per_iter;
  Rng rng(21ull);
  const DifsArtifacts art = difs_run(cfg, toy_env(), rng, 2);
  CHECK(art.iterations.size() == 1);
  CHECK(art.rollouts_used == cfg.sample_budget);
  CHECK(art.dataset.size() == static_cast<size_t>(cfg.samples_per_iter));
  for (int it : art.dataset.iteration) CHECK(it == 0);
}

TEST_CASE("adaptive loop bookkeeping on a small toy campaign") {
  const DifsConfig cfg = tiny_config();
  Rng rng(33ull);
  const DifsArtifacts art = difs_run(cfg, toy_env(), rng, 2);
  REQUIRE(art.iterations.size() == 3);
  CHECK(art.rollouts_used == 600);
  CHECK(art.dataset.size() == 600);

  // thresholds are monotone non-increasing and never below r_fail
  for (size_t i = 1; i < art.iterations.size(); ++i)
    CHECK(art.iterations[i].threshold <= art.iterations[i - 1].threshold);
  for (const auto& rec : art.iterations) CHECK(rec.threshold >= 0.0);

  // append-only dataset: batch i contributed exactly N pairs
  std::vector<int> counts(3, 0);
  for (int it : art.dataset.iteration) counts[static_cast<size_t>(it)]++;
  for (int c : counts) CHECK(c == 200);
}

TEST_CASE("difs_run is deterministic and thread-count agnostic") {
  const DifsConfig cfg = tiny_config();
  Rng a(5ull), b(5ull);
  const DifsArtifacts r1 = difs_run(cfg, toy_env(), a, 1);
  const DifsArtifacts r2 = difs_run(cfg, toy_env(), b, 2);
  REQUIRE(r1.iterations.size() == r2.iterations.size());
  for (size_t i = 0; i < r1.iterations.size(); ++i) {
    CHECK(r1.iterations[i].threshold == r2.iterations[i].threshold);
    CHECK(r1.iterations[i].mean_loss == r2.iterations[i].mean_loss);
  }
  for (size_t i = 0; i < r1.dataset.size(); ++i)
    CHECK(r1.dataset.xs[i] == r2.dataset.xs[i]);

  Rng fa(6ull), fb(6ull);
  const auto s1 = final_failure_samples(r1, toy_env(), 50, fa, 2);
  const auto s2 = final_failure_samples(r2, toy_env(), 50, fb, 1);
  REQUIRE(s1.size() == s2.size());
  for (size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].x == s2[i].x);
    CHECK(s1[i].x.size() == 2);
    CHECK(s1[i].is_failure == (s1[i].robustness <= 0.0));
  }
}

TEST_CASE("campaign with unreachable failures still completes") {
  // Robustness is floored above r_fail, so no batch ever converges and the
  // threshold just tracks the attained quantiles.
  EnvironmentSpec env = toy_env();
  env.r_fail = -10.0;
  env.robustness_fn = [](const Vec& s) { return 1.0 + std::abs(s[0]); };
  DifsConfig cfg = tiny_config();
  cfg.sample_budget = 400;
  cfg.samples_per_iter = 200;
  cfg.train_steps_per_iter = 30;
  Rng rng(77ull);
  const DifsArtifacts art = difs_run(cfg, env, rng, 2);
  CHECK(art.iterations.size() == 2);
  CHECK(art.converged_iteration < 0);
}

TEST_SUITE_END();
