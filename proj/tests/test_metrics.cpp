// Error-report arithmetic, scaling equivariance and the CSV emission.

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "tsnn/metrics.hpp"
#include "tsnn/rng.hpp"

using namespace tsnn;

namespace {

std::vector<double> linspace01(std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

}  // namespace

TEST(Metrics, IdenticalSeriesGiveZeroErrors) {
  const auto grid = linspace01(101);
  std::vector<std::vector<double>> series = {grid, grid};
  const auto rep = error_report(series, series, grid);
  ASSERT_EQ(rep.components.size(), 2u);
  for (const auto& ce : rep.components) {
    EXPECT_EQ(ce.linf, 0.0);
    EXPECT_EQ(ce.l2, 0.0);
    for (double e : ce.abs_err) ASSERT_EQ(e, 0.0);
  }
}

TEST(Metrics, PinnedTwoPointSeries) {
  const std::vector<double> grid = {0.0, 1.0};
  const std::vector<std::vector<double>> ref = {{1.0, 1.0}};
  const std::vector<std::vector<double>> nn = {{4.0, 5.0}};  // errors 3 and 4
  const auto rep = error_report(nn, ref, grid);
  EXPECT_EQ(rep.components[0].linf, 4.0);
  EXPECT_NEAR(rep.components[0].l2, std::sqrt(12.5), 1e-14);
  // Unit reference makes relative and absolute series coincide.
  EXPECT_EQ(rep.components[0].rel_err[0], 3.0);
  EXPECT_EQ(rep.components[0].rel_err[1], 4.0);
}

TEST(Metrics, RmsNeverExceedsMax) {
  Rng rng(77);
  const auto grid = linspace01(257);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(grid.size()), b(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      a[i] = rng.uniform(-5.0, 5.0);
      b[i] = rng.uniform(-5.0, 5.0);
    }
    const auto rep = error_report({a}, {b}, grid);
    ASSERT_LE(rep.components[0].l2, rep.components[0].linf);
  }
}

TEST(Metrics, ScalingEquivariance) {
  const auto grid = linspace01(11);
  std::vector<double> ref(grid.size(), 0.5), nn(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) nn[i] = 0.5 + 1e-4 * grid[i];
  const std::vector<int> m = {1};
  const auto scaled = error_report({nn}, {ref}, grid, m);
  const auto plain = error_report({nn}, {ref}, grid);
  EXPECT_EQ(scaled.components[0].linf, plain.components[0].linf);
  EXPECT_EQ(scaled.components[0].linf_scaled, 10.0 * plain.components[0].linf);
  EXPECT_EQ(scaled.components[0].l2_scaled, 10.0 * plain.components[0].l2);
  EXPECT_EQ(plain.components[0].linf_scaled, plain.components[0].linf);
}

TEST(Metrics, RelativeErrorFloorsNearZeroReference) {
  const std::vector<double> grid = {0.0};
  const auto rep = error_report({{1e-6}}, {{0.0}}, grid);
  EXPECT_EQ(rep.components[0].abs_err[0], 1e-6);
  EXPECT_EQ(rep.components[0].rel_err[0], 1e-6 / 1e-12);
}

TEST(Metrics, RejectsMismatchedShapes) {
  const std::vector<double> grid = {0.0, 1.0};
  EXPECT_THROW(error_report({{1.0, 2.0}}, {{1.0, 2.0}, {3.0, 4.0}}, grid), ConfigError);
  EXPECT_THROW(error_report({{1.0}}, {{1.0}}, grid), ConfigError);
  const std::vector<int> two_exponents = {1, 2};
  EXPECT_THROW(error_report({{1.0, 2.0}}, {{1.0, 2.0}}, grid, two_exponents), ConfigError);
}

TEST(Metrics, CsvRoundTripsValuesExactly) {
  const auto grid = linspace01(5);
  std::vector<double> ref(grid.size()), nn(grid.size());
  Rng rng(5);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ref[i] = rng.uniform(-1.0, 1.0);
    nn[i] = ref[i] + rng.uniform(-1e-3, 1e-3);
  }
  const auto rep = error_report({nn}, {ref}, grid);
  const std::string path = "metrics_roundtrip_test.csv";
  const std::vector<std::string> names = {"y"};
  write_error_csv(path, rep, names);

  std::ifstream in(path);
  ASSERT_TRUE(in.good());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "tau,ref_y,nn_y,abs_err_y,rel_err_y");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(parse_double(cell));
    ASSERT_EQ(vals.size(), 5u);
    EXPECT_EQ(vals[0], grid[rows]);
    EXPECT_EQ(vals[1], ref[rows]);
    EXPECT_EQ(vals[2], nn[rows]);
    EXPECT_EQ(vals[3], rep.components[0].abs_err[rows]);
    ++rows;
  }
  EXPECT_EQ(rows, grid.size());
  std::remove(path.c_str());
}

TEST(Metrics, MedianOddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(median({7.0}), 7.0);
  EXPECT_THROW(median({}), ConfigError);
}
