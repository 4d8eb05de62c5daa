#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "difs/analysis.hpp"

using namespace difs;

TEST_SUITE_BEGIN("analysis");

TEST_CASE("rank-1 data gives the line direction with full explained variance") {
  std::vector<Vec> data;
  for (int i = -10; i <= 10; ++i) {
    const double t = 0.3 * i;
    data.push_back({t / std::sqrt(2.0), t / std::sqrt(2.0)});
  }
  const PcaResult r = pca(data, 2);
  CHECK(std::abs(r.components(0, 0)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-8));
  CHECK(std::abs(r.components(0, 1)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-8));
  CHECK(r.components(0, 0) > 0.0);  // sign fix
  CHECK(r.explained[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.explained[1] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("isotropic cloud splits the variance evenly") {
  Rng rng(2001ull);
  std::vector<Vec> data;
  for (int i = 0; i < 10000; ++i) data.push_back({rng.normal(), rng.normal()});
  const PcaResult r = pca(data, 2);
  CHECK(r.explained[0] == doctest::Approx(0.5).epsilon(0.04));
  CHECK(r.explained[1] == doctest::Approx(0.5).epsilon(0.04));
  CHECK(r.explained[0] >= r.explained[1]);
}

TEST_CASE("directions are orthonormal and projections reconstruct rank-d data") {
  Rng rng(11ull);
  std::vector<Vec> data;
  for (int i = 0; i < 300; ++i)
    data.push_back({rng.normal(), 0.5 * rng.normal()});
  const PcaResult r = pca(data, 2);
  double dot = 0.0, n0 = 0.0, n1 = 0.0;
  for (int j = 0; j < 2; ++j) {
    dot += r.components(0, j) * r.components(1, j);
    n0 += r.components(0, j) * r.components(0, j);
    n1 += r.components(1, j) * r.components(1, j);
  }
  CHECK(std::abs(dot) < 1e-8);
  CHECK(n0 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(n1 == doctest::Approx(1.0).epsilon(1e-8));

  // 2-D data with 2 components reconstructs losslessly.
  for (size_t i = 0; i < data.size(); ++i) {
    Vec rec(2, 0.0);
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < 2; ++j)
        rec[j] += r.projections[i][static_cast<size_t>(c)] * r.components(c, j);
    for (int j = 0; j < 2; ++j)
      CHECK(rec[j] + r.mean[j] == doctest::Approx(data[i][j]).epsilon(1e-8));
  }
}

TEST_CASE("pca is permutation invariant up to sign") {
  Rng rng(13ull);
  std::vector<Vec> data;
  for (int i = 0; i < 200; ++i) data.push_back({rng.normal(), 2.0 * rng.normal(), 0.3 * rng.normal()});
  auto shuffled = data;
  std::reverse(shuffled.begin(), shuffled.end());
  const PcaResult a = pca(data, 2);
  const PcaResult b = pca(shuffled, 2);
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < 3; ++j)
      CHECK(a.components(c, j) == doctest::Approx(b.components(c, j)).epsilon(1e-6));
}

TEST_CASE("degenerate zero-variance input is flagged") {
  const std::vector<Vec> data(10, Vec{1.0, 2.0});
  const PcaResult r = pca(data, 2);
  CHECK(r.degenerate);
  CHECK(r.explained[0] == 0.0);
  CHECK_THROWS_AS(pca({{1.0}}, 1), std::invalid_argument);
}

TEST_CASE("mode_split separates point masses and not a single blob") {
  std::vector<std::array<double, 2>> two_masses;
  Rng rng(15ull);
  for (int i = 0; i < 500; ++i) {
    const double c = i % 2 == 0 ? 5.0 : -5.0;
    two_masses.push_back({c + 0.1 * rng.normal(), 0.0});
  }
  const ModeSplit strong = mode_split(two_masses);
  CHECK(strong.separation > 2.0);
  CHECK(strong.n_left > 100);
  CHECK(strong.n_right > 100);

  // Unimodal baseline: a median split of a standard Gaussian has the closed
  // form 2*sqrt(2/pi)/sqrt(1 - 2/pi) ~= 2.648, the floor any genuinely
  // bimodal cloud must clear decisively.
  std::vector<std::array<double, 2>> blob;
  for (int i = 0; i < 1000; ++i) blob.push_back({rng.normal(), 0.0});
  const double baseline = 2.0 * std::sqrt(2.0 / M_PI) / std::sqrt(1.0 - 2.0 / M_PI);
  CHECK(mode_split(blob).separation == doctest::Approx(baseline).epsilon(0.08));
  CHECK(strong.separation > 3.0 * baseline);
  CHECK_THROWS_AS(mode_split({{0.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("csv exports carry the figure data") {
  std::vector<Vec> data;
  Rng rng(17ull);
  for (int i = 0; i < 50; ++i) data.push_back({rng.normal(), rng.normal(), rng.normal()});
  const PcaResult r = pca(data, 2);
  Vec rho(50, 0.25);
  std::vector<bool> fail(50, false);
  fail[3] = true;

  const auto dir = std::filesystem::temp_directory_path() / "difs_analysis_test";
  std::filesystem::create_directories(dir);
  const std::string proj_path = (dir / "projections.csv").string();
  const std::string eig_path = (dir / "eigendisturbances.csv").string();
  write_projections_csv(proj_path, r, rho, fail);
  write_eigendisturbances_csv(eig_path, r);

  std::ifstream proj(proj_path);
  std::string line;
  std::getline(proj, line);
  CHECK(line == "pc1,pc2,robustness,is_failure");
  int rows = 0;
  while (std::getline(proj, line)) ++rows;
  CHECK(rows == 50);

  std::ifstream eig(eig_path);
  std::getline(eig, line);
  CHECK(line.rfind("component,step1,step2", 0) == 0);
  rows = 0;
  while (std::getline(eig, line)) ++rows;
  CHECK(rows == 2);
  std::filesystem::remove_all(dir);
}

TEST_SUITE_END();
