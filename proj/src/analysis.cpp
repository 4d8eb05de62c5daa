#include "difs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace difs {

namespace {

constexpr double kPowerTol = 1e-14;
constexpr int kPowerMaxSweeps = 10000;

void normalize(Vec& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
}

}  // namespace

PcaResult pca(const std::vector<Vec>& data, int n_components) {
  const int n = static_cast<int>(data.size());
  if (n_components < 1) throw std::invalid_argument("pca: n_components must be >= 1");
  if (n <= n_components) throw std::invalid_argument("pca: insufficient data");
  const int d = static_cast<int>(data[0].size());
  for (const auto& x : data)
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("pca: ragged data");

  PcaResult result;
  result.mean.assign(d, 0.0);
  for (const auto& x : data)
    for (int j = 0; j < d; ++j) result.mean[j] += x[j];
  for (double& m : result.mean) m /= n;

  Mat cov(d, d);
  for (const auto& x : data) {
    Vec c(d);
    for (int j = 0; j < d; ++j) c[j] = x[j] - result.mean[j];
    for (int i = 0; i < d; ++i) {
      const double ci = c[i];
      double* row = cov.row(i);
      for (int j = 0; j < d; ++j) row[j] += ci * c[j];
    }
  }
  for (double& v : cov.data) v /= (n - 1);

  double total_var = 0.0;
  for (int i = 0; i < d; ++i) total_var += cov(i, i);

  result.components = Mat(n_components, d);
  result.explained.assign(n_components, 0.0);
  if (!(total_var > 1e-300)) {
    // Zero-variance cloud: arbitrary orthonormal basis, zero explained.
    result.degenerate = true;
    for (int c = 0; c < n_components && c < d; ++c) result.components(c, c) = 1.0;
  } else {
    Mat work = cov;  // deflated in place
    for (int c = 0; c < n_components; ++c) {
      // Deterministic pseudo-random start vector per component.
      Rng start_rng(0x9C0FFEEull + static_cast<uint64_t>(c));
      Vec v(d);
      for (double& x : v) x = start_rng.normal();
      normalize(v);
      double eigenvalue = 0.0;
      for (int sweep = 0; sweep < kPowerMaxSweeps; ++sweep) {
        Vec next(d, 0.0);
        for (int i = 0; i < d; ++i) {
          const double* row = work.row(i);
          double acc = 0.0;
          for (int j = 0; j < d; ++j) acc += row[j] * v[j];
          next[i] = acc;
        }
        // Re-orthogonalize against the directions already found so deflation
        // residue cannot leak back in.
        for (int prev = 0; prev < c; ++prev) {
          double proj = 0.0;
          for (int j = 0; j < d; ++j) proj += next[j] * result.components(prev, j);
          for (int j = 0; j < d; ++j) next[j] -= proj * result.components(prev, j);
        }
        double norm = 0.0;
        for (double x : next) norm += x * x;
        norm = std::sqrt(norm);
        if (!(norm > 1e-300)) break;  // deflated to nothing
        for (double& x : next) x /= norm;
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += next[j] * v[j];
        v = std::move(next);
        eigenvalue = norm;
        if (1.0 - std::abs(dot) < kPowerTol) break;
      }
      // Sign fix: largest-magnitude entry positive.
      int arg = 0;
      for (int j = 1; j < d; ++j)
        if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
      if (v[arg] < 0.0)
        for (double& x : v) x = -x;
      for (int j = 0; j < d; ++j) result.components(c, j) = v[j];
      result.explained[c] = eigenvalue / total_var;
      // Deflate: work -= lambda v v^T.
      for (int i = 0; i < d; ++i) {
        double* row = work.row(i);
        for (int j = 0; j < d; ++j) row[j] -= eigenvalue * v[i] * v[j];
      }
    }
  }

  result.projections.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < std::min(2, n_components); ++c) {
      double acc = 0.0;
      for (int j = 0; j < d; ++j)
        acc += (data[i][j] - result.mean[j]) * result.components(c, j);
      result.projections[i][static_cast<size_t>(c)] = acc;
    }
    if (n_components < 2) result.projections[i][1] = 0.0;
  }
  return result;
}

ModeSplit mode_split(const std::vector<std::array<double, 2>>& projections) {
  if (projections.size() < 10)
    throw std::invalid_argument("mode_split: need at least 10 points");
  Vec pc1(projections.size());
  for (size_t i = 0; i < projections.size(); ++i) pc1[i] = projections[i][0];
  const double median = quantile(pc1, 0.5);

  Vec left, right;
  for (double v : pc1) (v - median < 0.0 ? left : right).push_back(v);
  if (left.empty() || right.empty())
    throw std::invalid_argument("mode_split: degenerate projection");

  auto mean_of = [](const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double m_l = mean_of(left);
  const double m_r = mean_of(right);
  auto ss_of = [](const Vec& v, double m) {
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
  };
  const double pooled_var = (ss_of(left, m_l) + ss_of(right, m_r)) /
                            static_cast<double>(left.size() + right.size() - 2);
  ModeSplit split;
  split.n_left = static_cast<int>(left.size());
  split.n_right = static_cast<int>(right.size());
  split.separation = pooled_var > 0.0
                         ? std::abs(m_l - m_r) / std::sqrt(pooled_var)
                         : std::numeric_limits<double>::infinity();
  return split;
}

void write_projections_csv(const std::string& path, const PcaResult& result,
                           const Vec& robustness, const std::vector<bool>& is_failure) {
  if (robustness.size() != result.projections.size() ||
      is_failure.size() != result.projections.size())
    throw std::invalid_argument("write_projections_csv: length mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "pc1,pc2,robustness,is_failure\n";
  out.precision(17);
  for (size_t i = 0; i < result.projections.size(); ++i)
    out << result.projections[i][0] << ',' << result.projections[i][1] << ','
        << robustness[i] << ',' << (is_failure[i] ? 1 : 0) << '\n';
}

void write_eigendisturbances_csv(const std::string& path, const PcaResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "component";
  for (int j = 0; j < result.components.cols; ++j) out << ",step" << j + 1;
  out << '\n';
  out.precision(17);
  for (int c = 0; c < result.components.rows; ++c) {
    out << c;
    for (int j = 0; j < result.components.cols; ++j) out << ',' << result.components(c, j);
    out << '\n';
  }
}

}  // namespace difs
