#pragma once

#include <array>
#include <string>

#include "difs/core.hpp"

namespace difs {

// Principal directions of a sample cloud. components rows are orthonormal;
// explained fractions are non-increasing and sum to at most 1.
struct PcaResult {
  Mat components;       // n_components x d, rows orthonormal
  Vec explained;        // fraction of total variance per component
  Vec mean;             // data mean removed before projection
  std::vector<std::array<double, 2>> projections;  // first two components
  bool degenerate = false;  // zero-variance input
};

// Top eigenvectors of the sample covariance by deflated power iteration
// (tolerance 1e-10, at most 1e4 sweeps per component). Signs are fixed so the
// largest-magnitude entry of each direction is positive.
PcaResult pca(const std::vector<Vec>& data, int n_components);

// Crude two-cluster split: median-center the first principal coordinate and
// split by sign. separation = |mean_left - mean_right| / pooled std.
struct ModeSplit {
  int n_left = 0;
  int n_right = 0;
  double separation = 0.0;
};
ModeSplit mode_split(const std::vector<std::array<double, 2>>& projections);

// CSV exports behind the multimodality figures: per-sample projections with
// robustness/failure labels, and the principal directions themselves
// ("eigendisturbances", one row per component).
void write_projections_csv(const std::string& path, const PcaResult& result,
                           const Vec& robustness, const std::vector<bool>& is_failure);
void write_eigendisturbances_csv(const std::string& path, const PcaResult& result);

}  // namespace difs
