#pragma once
// Error measures between a trained model and a reference on an evaluation
// grid. The discrete l2 norm is root-mean-square over grid points, so paired
// (linf, l2) values stay comparable across grid resolutions; the relative
// series carries a 1e-12 floor on the reference magnitude because layers pass
// through zero.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tsnn/common.hpp"

namespace tsnn {

struct ComponentError {
  std::vector<double> abs_err;  // |nn - ref| per grid point
  std::vector<double> rel_err;  // abs / max(|ref|, 1e-12)
  int scale_exponent = 0;       // reported norms carry a 10^m factor
  double linf = 0.0;
  double l2 = 0.0;
  double linf_scaled = 0.0;
  double l2_scaled = 0.0;
};

struct ErrorReport {
  std::vector<double> grid;
  std::vector<std::vector<double>> nn;   // component-major series
  std::vector<std::vector<double>> ref;
  std::vector<ComponentError> components;
  std::string l2_convention = "rms";
};

/// Pointwise and scalar errors per component. Series are component-major and
/// must all match the grid length; scale_exponents may be empty (all zero) or
/// one entry per component.
inline ErrorReport error_report(std::vector<std::vector<double>> nn,
                                std::vector<std::vector<double>> ref,
                                std::span<const double> grid,
                                std::span<const int> scale_exponents = {}) {
  if (nn.size() != ref.size())
    throw ConfigError("error_report: component counts differ");
  if (!scale_exponents.empty() && scale_exponents.size() != nn.size())
    throw ConfigError("error_report: one scale exponent per component required");
  ErrorReport rep;
  rep.grid.assign(grid.begin(), grid.end());
  for (std::size_t c = 0; c < nn.size(); ++c) {
    if (nn[c].size() != grid.size() || ref[c].size() != grid.size())
      throw ConfigError("error_report: series length does not match the grid");
    ComponentError ce;
    ce.scale_exponent = scale_exponents.empty() ? 0 : scale_exponents[c];
    ce.abs_err.resize(grid.size());
    ce.rel_err.resize(grid.size());
    double sumsq = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double e = std::abs(nn[c][i] - ref[c][i]);
      ce.abs_err[i] = e;
      ce.rel_err[i] = e / std::max(std::abs(ref[c][i]), 1e-12);
      ce.linf = std::max(ce.linf, e);
      sumsq += e * e;
    }
    ce.l2 = std::sqrt(sumsq / static_cast<double>(grid.size()));
    const double factor = std::pow(10.0, ce.scale_exponent);
    ce.linf_scaled = factor * ce.linf;
    ce.l2_scaled = factor * ce.l2;
    rep.components.push_back(std::move(ce));
  }
  rep.nn = std::move(nn);
  rep.ref = std::move(ref);
  return rep;
}

/// One row per grid point: tau, then per component the reference value, the
/// model value and both error series.
inline void write_error_csv(const std::string& path, const ErrorReport& rep,
                            std::span<const std::string> names = {}) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "tau";
  for (std::size_t c = 0; c < rep.components.size(); ++c) {
    const std::string name = c < names.size() ? names[c] : "c" + std::to_string(c);
    out << ",ref_" << name << ",nn_" << name << ",abs_err_" << name << ",rel_err_" << name;
  }
  out << "\n";
  for (std::size_t i = 0; i < rep.grid.size(); ++i) {
    out << fmt_double(rep.grid[i]);
    for (std::size_t c = 0; c < rep.components.size(); ++c)
      out << ',' << fmt_double(rep.ref[c][i]) << ',' << fmt_double(rep.nn[c][i]) << ','
          << fmt_double(rep.components[c].abs_err[i]) << ','
          << fmt_double(rep.components[c].rel_err[i]);
    out << "\n";
  }
  if (!out) throw ConfigError("short write on '" + path + "'");
}

/// Median with the even-length midpoint averaged; used to summarize seed
/// sweeps.
inline double median(std::vector<double> xs) {
  if (xs.empty()) throw ConfigError("median: empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace tsnn
