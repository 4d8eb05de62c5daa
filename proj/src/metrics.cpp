#include "difs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace difs {

namespace {

constexpr uint64_t kMcChunk = 10000;

double sq_dist(const Vec& a, const Vec& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

struct Standardizer {
  Vec mean;
  Vec scale;

  explicit Standardizer(const std::vector<Vec>& pts) {
    const size_t d = pts[0].size();
    const double n = static_cast<double>(pts.size());
    mean.assign(d, 0.0);
    for (const auto& p : pts)
      for (size_t j = 0; j < d; ++j) mean[j] += p[j];
    for (double& m : mean) m /= n;
    scale.assign(d, 0.0);
    for (const auto& p : pts)
      for (size_t j = 0; j < d; ++j) {
        const double diff = p[j] - mean[j];
        scale[j] += diff * diff;
      }
    for (double& s : scale) {
      s = std::sqrt(s / n);
      if (!(s > 1e-12)) s = 1.0;  // constant coordinate: leave unscaled
    }
  }

  std::vector<Vec> apply(const std::vector<Vec>& pts) const {
    std::vector<Vec> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
      out[i].resize(pts[i].size());
      for (size_t j = 0; j < pts[i].size(); ++j)
        out[i][j] = (pts[i][j] - mean[j]) / scale[j];
    }
    return out;
  }
};

}  // namespace

GroundTruth mc_ground_truth(const EnvironmentSpec& env, int n_failures_wanted,
                            uint64_t max_draws, Rng& rng, int threads) {
  if (n_failures_wanted < 1 || max_draws == 0)
    throw std::invalid_argument("mc_ground_truth: positive limits required");
  GroundTruth gt;
  gt.seed = rng.seed();
  gt.environment = env.name;
  const Rng base(rng.next_u64());
  uint64_t drawn = 0;
  while (drawn < max_draws && gt.features.size() < static_cast<size_t>(n_failures_wanted)) {
    const uint64_t chunk = std::min(kMcChunk, max_draws - drawn);
    std::vector<uint8_t> fails(chunk, 0);
    std::vector<Vec> feats(chunk);
    parallel_for(static_cast<int64_t>(chunk), threads, [&](int64_t i) {
      Rng r = base.child("mc", drawn + static_cast<uint64_t>(i));
      const Vec x = nominal_sample(env, r);
      const Vec traj = env.rollout_fn(x);
      if (env.robustness_fn(traj) <= env.r_fail) {
        fails[i] = 1;
        feats[i] = env.feature_fn(traj);
      }
    });
    for (uint64_t i = 0; i < chunk; ++i) {
      if (!fails[i]) continue;
      ++gt.failures_seen;
      if (gt.features.size() < static_cast<size_t>(n_failures_wanted))
        gt.features.push_back(std::move(feats[i]));
    }
    drawn += chunk;
  }
  gt.draws = drawn;
  gt.estimate = static_cast<double>(gt.failures_seen) / static_cast<double>(drawn);
  gt.zero_failures = gt.failures_seen == 0;
  return gt;
}

GroundTruth toy_ground_truth(int n_samples, uint64_t proposal_draws, Rng& rng) {
  GroundTruth gt;
  gt.seed = rng.seed();
  gt.environment = "toy";
  const ToyOracle oracle = toy_is_ground_truth(n_samples, proposal_draws, rng);
  gt.features = oracle.samples;  // toy features are the disturbances themselves
  gt.estimate = oracle.estimate;
  gt.draws = oracle.proposal_draws;
  gt.failures_seen = oracle.samples.size();
  gt.analytic_probability = toy_analytic_failure_probability();
  gt.reference_estimate = 3.5e-5;  // independently reported MC estimate, kept
                                   // for auditability; it disagrees with the
                                   // analytic value by an order of magnitude
  return gt;
}

std::vector<double> knn_radius(const std::vector<Vec>& points, int k) {
  const int n = static_cast<int>(points.size());
  if (k < 1 || n <= k) throw std::invalid_argument("knn_radius: need more points than k");
  std::vector<double> radii(n);
  std::vector<double> d2(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (j != i) d2[m++] = sq_dist(points[i], points[j]);
    std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
    radii[i] = std::sqrt(d2[k - 1]);
  }
  return radii;
}

double density(const std::vector<Vec>& real_pts, const std::vector<Vec>& fake_pts,
               int k) {
  if (fake_pts.empty()) throw std::invalid_argument("density: empty generated set");
  const std::vector<double> radii = knn_radius(real_pts, k);
  size_t memberships = 0;
  for (const auto& f : fake_pts)
    for (size_t i = 0; i < real_pts.size(); ++i)
      if (sq_dist(f, real_pts[i]) <= radii[i] * radii[i]) ++memberships;
  return static_cast<double>(memberships) /
         (static_cast<double>(k) * static_cast<double>(fake_pts.size()));
}

double coverage(const std::vector<Vec>& real_pts, const std::vector<Vec>& fake_pts,
                int k) {
  if (fake_pts.empty()) throw std::invalid_argument("coverage: empty generated set");
  const std::vector<double> radii = knn_radius(real_pts, k);
  size_t covered = 0;
  for (size_t i = 0; i < real_pts.size(); ++i) {
    for (const auto& f : fake_pts) {
      if (sq_dist(f, real_pts[i]) <= radii[i] * radii[i]) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(real_pts.size());
}

double failure_rate(const std::vector<RolloutRecord>& records) {
  if (records.empty()) throw std::invalid_argument("failure_rate: empty list");
  double fails = 0.0;
  for (const auto& r : records)
    if (r.is_failure) fails += 1.0;
  return fails / static_cast<double>(records.size());
}

MetricsReport evaluate(const EnvironmentSpec& env, const GroundTruth& gt,
                       const SamplerFn& sampler, int n_eval, int k, Rng& rng,
                       int threads) {
  if (n_eval < 1) throw std::invalid_argument("evaluate: n_eval must be >= 1");
  if (gt.features.empty()) throw std::invalid_argument("evaluate: empty ground truth");
  MetricsReport report;
  report.environment = env.name;
  report.k = k;
  report.n_eval = n_eval;
  report.n_real = static_cast<int>(gt.features.size());
  report.seed = rng.seed();
  report.provenance = gt;
  report.provenance.features.clear();

  const std::vector<Vec> xs = sampler(n_eval, rng);
  std::vector<RolloutRecord> records(xs.size());
  parallel_for(static_cast<int64_t>(xs.size()), threads,
               [&](int64_t i) { records[i] = rollout(env, xs[i]); });
  report.failure_rate = failure_rate(records);

  std::vector<Vec> fake;
  for (const auto& rec : records)
    if (rec.is_failure) fake.push_back(env.feature_fn(rec.trajectory));
  report.n_failing = static_cast<int>(fake.size());
  if (!fake.empty()) {
    const Standardizer std_tf(gt.features);
    const std::vector<Vec> real_std = std_tf.apply(gt.features);
    const std::vector<Vec> fake_std = std_tf.apply(fake);
    report.density = density(real_std, fake_std, k);
    report.coverage = coverage(real_std, fake_std, k);
  }
  return report;
}

}  // namespace difs
