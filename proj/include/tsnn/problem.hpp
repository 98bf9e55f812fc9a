#pragma once
// Problem catalog: singularly perturbed ODE systems on tau in [0,1], described
// by residual callables generic over the scalar type. The same residual source
// runs on plain doubles (reference integration), jets (exact solutions,
// diagnostics) and tape traces (training), so there is exactly one place where
// each dynamical system is written down.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tsnn/common.hpp"
#include "tsnn/jet.hpp"
#include "tsnn/tape.hpp"

namespace tsnn {

/// Geometric mean of the small parameters, in log space. With one parameter
/// this is the parameter itself.
inline double effective_epsilon(std::span<const double> eps) {
  if (eps.empty()) throw ConfigError("effective_epsilon: empty parameter vector");
  double acc = 0.0;
  for (double e : eps) {
    if (!(e > 0.0)) throw ConfigError("effective_epsilon: parameters must be positive");
    acc += std::log(e);
  }
  return std::exp(acc / static_cast<double>(eps.size()));
}

/// Policy for collapsing a problem's small-parameter vector into the single
/// stretch parameter the network sees.
struct EffectiveEpsilon {
  enum class Mode { GeometricMean, Smallest, Fixed };
  Mode mode = Mode::GeometricMean;
  double fixed = 0.0;

  double resolve(std::span<const double> eps) const {
    switch (mode) {
      case Mode::GeometricMean: return effective_epsilon(eps);
      case Mode::Smallest: {
        if (eps.empty()) throw ConfigError("effective_epsilon: empty parameter vector");
        double m = eps[0];
        for (double e : eps) {
          if (!(e > 0.0)) throw ConfigError("effective_epsilon: parameters must be positive");
          m = std::min(m, e);
        }
        return m;
      }
      case Mode::Fixed:
        if (!(fixed > 0.0)) throw ConfigError("fixed effective epsilon must be positive");
        return fixed;
    }
    return 0.0;
  }
};

/// Pointwise condition u[component](tau) = value; tau is 0 for initial
/// conditions, 0 or 1 for two-point boundary problems.
struct BoundaryCondition {
  double tau = 0.0;
  int component = 0;
  double value = 0.0;
};

template <class S>
using ResidualFn = std::function<void(const S& tau, std::span<const S> u,
                                      std::span<const S> du, std::span<const S> ddu,
                                      std::span<S> out)>;

struct ProblemSpec {
  std::string name;
  int n = 0;      // number of components
  int order = 1;  // highest derivative order in the residual
  std::vector<double> eps_vec;
  std::vector<BoundaryCondition> conditions;
  std::map<std::string, double> params;  // named constants, for manifests

  ResidualFn<double> residual_d;
  ResidualFn<Jet2> residual_j;
  ResidualFn<Trace> residual_t;

  // Closed-form solution if the problem has one; empty otherwise.
  std::function<void(double tau, std::span<double> out)> exact;

  template <class S>
  const ResidualFn<S>& residual() const;
};

template <>
inline const ResidualFn<double>& ProblemSpec::residual<double>() const { return residual_d; }
template <>
inline const ResidualFn<Jet2>& ProblemSpec::residual<Jet2>() const { return residual_j; }
template <>
inline const ResidualFn<Trace>& ProblemSpec::residual<Trace>() const { return residual_t; }

/// Installs one generic residual callable for all three scalar types.
template <class F>
inline void set_residual(ProblemSpec& p, F f) {
  p.residual_d = f;
  p.residual_j = f;
  p.residual_t = f;
}

// ----- catalog -----

/// Enzyme kinetics after the standard quasi-steady-state scaling: the slow
/// substrate u drives the fast complex fraction v, whose equation carries the
/// small parameter.
///   u' = -u + (u + k - lambda) v,          u(0) = 1
///   eps v' = u - (u + k) v,                v(0) = 0
inline ProblemSpec michaelis_menten(double eps, double lambda = 1.0, double k = 2.0) {
  if (!(eps > 0.0)) throw ConfigError("michaelis_menten: eps must be positive");
  ProblemSpec p;
  p.name = "mm-ivp";
  p.n = 2;
  p.order = 1;
  p.eps_vec = {eps};
  p.conditions = {{0.0, 0, 1.0}, {0.0, 1, 0.0}};
  p.params = {{"eps", eps}, {"lambda", lambda}, {"k", k}};
  set_residual(p, [eps, lambda, k](const auto& tau, auto u, auto du, auto, auto out) {
    (void)tau;
    out[0] = du[0] + u[0] - (u[0] + (k - lambda)) * u[1];
    out[1] = du[1] * eps - u[0] + (u[0] + k) * u[1];
  });
  return p;
}

namespace detail {

/// Exact solution of the coupled reaction-convection-diffusion two-point
/// problem below; expm1 keeps the layer ratios stable when eps is tiny.
template <class S>
std::array<S, 2> linear_bvp_solution(double eps, const S& tau) {
  const double pi = std::numbers::pi;
  const double den1 = std::expm1(-1.0 / eps);
  const double den2 = std::expm1(-2.0 / eps);
  const S u = (expm1(tau * (-1.0 / eps)) / den1 - sin(tau * (pi / 2.0))) * 2.0;
  const S v = expm1(tau * (-2.0 / eps)) / den2 - tau * exp(tau - 1.0);
  return {u, v};
}

/// Forcing terms manufactured so the solution above is exact; kept in the
/// same grouping as they appear in the problem statement.
template <class S>
S linear_bvp_f1(double eps, const S& tau) {
  const double pi = std::numbers::pi;
  const double e1 = std::exp(-1.0 / eps);
  const double e2 = std::exp(-2.0 / eps);
  const S et = exp(tau * (-1.0 / eps));
  const S et2 = exp(tau * (-2.0 / eps));
  const S s = sin(tau * (pi / 2.0));
  return (et * 4.0 - s * (pi * pi * eps * eps * (1.0 - e1))) / (2.0 * eps * (-1.0 + e1))
       + et * (2.0 / (eps * (1.0 - e1)))
       - cos(tau * (pi / 2.0)) * pi
       + (4.0 - et * 4.0) / (-1.0 + e1)
       + s * 4.0
       + (1.0 - et2) / (1.0 - e2)
       - tau * exp(tau - 1.0);
}

template <class S>
S linear_bvp_f2(double eps, const S& tau) {
  const double pi = std::numbers::pi;
  const double e1 = std::exp(-1.0 / eps);
  const double e2 = std::exp(-2.0 / eps);
  const S et = exp(tau * (-1.0 / eps));
  const S et2 = exp(tau * (-2.0 / eps));
  const S ex = exp(tau - 1.0);
  return (et2 * -4.0 - ex * (eps * eps * (1.0 - e2)) * (tau + 2.0)) / (eps * (1.0 - e2))
       + et2 * (4.0 / (eps * (1.0 - e2)))
       + (tau - 1.0) * ex * 2.0
       + (2.0 - et * 2.0) / (1.0 - e1)
       - sin(tau * (pi / 2.0)) * 2.0
       + (4.0 - et2 * 4.0) / (-1.0 + e2);
}

}  // namespace detail

/// Coupled second-order two-point problem with boundary layers at tau = 0 in
/// both components and a known closed-form solution:
///   eps u'' + u'  - 2u + v = f1,   u(0) = u(1) = 0
///   eps v'' + 2v' + u - 4v = f2,   v(0) = v(1) = 0
inline ProblemSpec linear_bvp(double eps) {
  if (!(eps > 0.0)) throw ConfigError("linear_bvp: eps must be positive");
  ProblemSpec p;
  p.name = "linear-bvp";
  p.n = 2;
  p.order = 2;
  p.eps_vec = {eps};
  p.conditions = {{0.0, 0, 0.0}, {1.0, 0, 0.0}, {0.0, 1, 0.0}, {1.0, 1, 0.0}};
  p.params = {{"eps", eps}};
  set_residual(p, [eps](const auto& tau, auto u, auto du, auto ddu, auto out) {
    out[0] = ddu[0] * eps + du[0] - u[0] * 2.0 + u[1] - detail::linear_bvp_f1(eps, tau);
    out[1] = ddu[1] * eps + du[1] * 2.0 + u[0] - u[1] * 4.0 - detail::linear_bvp_f2(eps, tau);
  });
  p.exact = [eps](double tau, std::span<double> out) {
    const auto s = detail::linear_bvp_solution(eps, tau);
    out[0] = s[0];
    out[1] = s[1];
  };
  return p;
}

/// Chemical kinetics with two separated fast scales, reduced to the (y, z)
/// pair after eliminating the conserved species. The rate ratios
/// eps1 = kf1/kf2 and eps2 = kf3/kf2 are the small parameters:
///   (eps1/eps2) y' = (eps1/eps2)(1 - y - z) - y^2/eps2 - y z,   y(0) = 0
///   eps1 z' = y^2,                                              z(0) = 0
inline ProblemSpec robertson_reduced(double k2, double k1 = 4e-2, double k3 = 1.0) {
  if (!(k1 > 0.0 && k2 > 0.0 && k3 > 0.0))
    throw ConfigError("robertson_reduced: rate constants must be positive");
  ProblemSpec p;
  const double eps1 = k1 / k2;
  const double eps2 = k3 / k2;
  p.name = "robertson";
  p.n = 2;
  p.order = 1;
  // The stretch parameter averages the coefficients multiplying the
  // derivatives in the reduced system, eps1/eps2 and eps1, not the raw rate
  // ratios; their geometric mean is eps1/sqrt(eps2).
  p.eps_vec = {eps1 / eps2, eps1};
  p.conditions = {{0.0, 0, 0.0}, {0.0, 1, 0.0}};
  p.params = {{"k1", k1}, {"k2", k2}, {"k3", k3}, {"eps1", eps1}, {"eps2", eps2}};
  const double ratio = eps1 / eps2;
  set_residual(p, [eps1, eps2, ratio](const auto& tau, auto u, auto du, auto, auto out) {
    (void)tau;
    out[0] = du[0] * ratio - (1.0 - u[0] - u[1]) * ratio + powi(u[0], 2) * (1.0 / eps2) +
             u[0] * u[1];
    out[1] = du[1] * eps1 - powi(u[0], 2);
  });
  return p;
}

/// Excitable-membrane caricature with three separated time scales; eps1 and
/// eps3 stay fixed while eps2 controls the recovery variable z:
///   eps1 v' = v - v^3/3 - z - w,   v(0) = 1.5
///   eps2 z' = v - 0.5 z,           z(0) = 0
///   eps3 w' = v - w,               w(0) = 0.2
inline ProblemSpec fitzhugh_nagumo(double eps2, double eps1 = 1e-1, double eps3 = 1e-2) {
  if (!(eps1 > 0.0 && eps2 > 0.0 && eps3 > 0.0))
    throw ConfigError("fitzhugh_nagumo: small parameters must be positive");
  ProblemSpec p;
  p.name = "fhn";
  p.n = 3;
  p.order = 1;
  p.eps_vec = {eps1, eps2, eps3};
  p.conditions = {{0.0, 0, 1.5}, {0.0, 1, 0.0}, {0.0, 2, 0.2}};
  p.params = {{"eps1", eps1}, {"eps2", eps2}, {"eps3", eps3}};
  set_residual(p, [eps1, eps2, eps3](const auto& tau, auto u, auto du, auto, auto out) {
    (void)tau;
    out[0] = du[0] * eps1 - u[0] + powi(u[0], 3) * (1.0 / 3.0) + u[1] + u[2];
    out[1] = du[1] * eps2 - u[0] + u[1] * 0.5;
    out[2] = du[2] * eps3 - u[0] + u[2];
  });
  return p;
}

// ----- registry -----

struct ProblemInfo {
  std::string name;
  int n;
  int order;
  std::string summary;
  std::vector<std::string> required;  // parameters without defaults
  std::vector<std::string> optional;
};

inline std::vector<ProblemInfo> problem_catalog() {
  return {
      {"mm-ivp", 2, 1, "enzyme kinetics IVP, fast complex fraction", {"eps"}, {"lambda", "k"}},
      {"linear-bvp", 2, 2, "coupled second-order BVP with exact solution", {"eps"}, {}},
      {"robertson", 2, 1, "reduced chemical kinetics, two small parameters", {"k2"}, {"k1", "k3"}},
      {"fhn", 3, 1, "three-scale excitable system", {"eps2"}, {"eps1", "eps3"}},
  };
}

/// Builds a catalog problem from named parameters. Unknown names and missing
/// required parameters are configuration errors.
inline ProblemSpec make_problem(const std::string& name,
                                const std::map<std::string, double>& args) {
  auto take = [&args](const char* key, double dflt, bool required = false) {
    auto it = args.find(key);
    if (it != args.end()) return it->second;
    if (required) throw ConfigError(std::string("missing required parameter '") + key + "'");
    return dflt;
  };
  auto reject_unknown = [&args](std::initializer_list<const char*> known) {
    for (const auto& [key, value] : args) {
      (void)value;
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) throw ConfigError("unknown problem parameter '" + key + "'");
    }
  };
  if (name == "mm-ivp") {
    reject_unknown({"eps", "lambda", "k"});
    return michaelis_menten(take("eps", 0.0, true), take("lambda", 1.0), take("k", 2.0));
  }
  if (name == "linear-bvp") {
    reject_unknown({"eps"});
    return linear_bvp(take("eps", 0.0, true));
  }
  if (name == "robertson") {
    reject_unknown({"k1", "k2", "k3"});
    return robertson_reduced(take("k2", 0.0, true), take("k1", 4e-2), take("k3", 1.0));
  }
  if (name == "fhn") {
    reject_unknown({"eps1", "eps2", "eps3"});
    return fitzhugh_nagumo(take("eps2", 0.0, true), take("eps1", 1e-1), take("eps3", 1e-2));
  }
  throw ConfigError("unknown problem '" + name + "'");
}

}  // namespace tsnn
