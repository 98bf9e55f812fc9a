#pragma once
// Reference integrators: classical RK4 with fixed steps and a 3-stage Radau
// IIA method (order 5, stiffly accurate) with simplified-Newton stages and an
// embedded error estimate. Solutions are stored with derivatives at every
// node so cubic Hermite sampling gives dense output.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tsnn/common.hpp"
#include "tsnn/jet.hpp"
#include "tsnn/problem.hpp"

namespace tsnn {

namespace detail {

/// In-place LU with partial pivoting for the small dense systems here
/// (Newton matrices up to 3n x 3n with n <= 3).
inline void lu_factor(std::vector<double>& a, int n, std::vector<int>& piv) {
  piv.resize(n);
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a[i * n + k]) > std::abs(a[p * n + k])) p = i;
    piv[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
    const double d = a[k * n + k];
    if (d == 0.0) throw SolverError("singular Newton matrix");
    for (int i = k + 1; i < n; ++i) {
      const double m = a[i * n + k] / d;
      a[i * n + k] = m;
      for (int j = k + 1; j < n; ++j) a[i * n + j] -= m * a[k * n + j];
    }
  }
}

inline void lu_solve(const std::vector<double>& a, int n, const std::vector<int>& piv,
                     std::vector<double>& x) {
  for (int k = 0; k < n; ++k) {
    if (piv[k] != k) std::swap(x[k], x[piv[k]]);
    for (int i = k + 1; i < n; ++i) x[i] -= a[i * n + k] * x[k];
  }
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) x[i] -= a[i * n + j] * x[j];
    x[i] /= a[i * n + i];
  }
}

}  // namespace detail

/// Explicit first-order field u' = f(t, u) with an optional analytic
/// Jacobian; absent one, forward differences with step 1e-7 (1 + |u_j|).
struct OdeField {
  int n = 0;
  std::function<void(double t, std::span<const double> u, std::span<double> du)> f;
  std::function<void(double t, std::span<const double> u, std::span<double> jac)> jacobian;

  /// Solves the residual for u'. Works for catalog first-order systems, whose
  /// residuals are linear in du with a constant diagonal coefficient:
  /// r_i = c_i du_i + g_i(tau, u).
  static OdeField from_problem(const ProblemSpec& p) {
    if (p.order != 1)
      throw ConfigError("OdeField: problem '" + p.name + "' is not first order");
    OdeField field;
    field.n = p.n;
    field.f = [p](double t, std::span<const double> u, std::span<double> du) {
      const int n = p.n;
      std::vector<double> zero(n, 0.0), basis(n, 0.0), r0(n), r1(n), dd(n, 0.0);
      std::vector<double> uv(u.begin(), u.end());
      p.residual<double>()(t, uv, zero, dd, r0);
      for (int i = 0; i < n; ++i) {
        basis.assign(n, 0.0);
        basis[i] = 1.0;
        p.residual<double>()(t, uv, basis, dd, r1);
        const double coeff = r1[i] - r0[i];
        if (coeff == 0.0)
          throw SolverError("field extraction: zero derivative coefficient in component " +
                            std::to_string(i));
        du[i] = -r0[i] / coeff;
      }
    };
    return field;
  }

  void eval_jacobian(double t, std::span<const double> u, std::vector<double>& jac) const {
    jac.assign(static_cast<std::size_t>(n) * n, 0.0);
    if (jacobian) {
      jacobian(t, u, jac);
      return;
    }
    std::vector<double> f0(n), f1(n), up(u.begin(), u.end());
    f(t, u, f0);
    for (int j = 0; j < n; ++j) {
      const double step = 1e-7 * (1.0 + std::abs(u[j]));
      const double saved = up[j];
      up[j] += step;
      f(t, up, f1);
      up[j] = saved;
      for (int i = 0; i < n; ++i) jac[i * n + j] = (f1[i] - f0[i]) / step;
    }
  }
};

/// Time grid with values and derivatives at every node; rows are node-major.
struct GridSolution {
  int n = 0;
  std::vector<double> t;
  std::vector<double> y;   // t.size() * n
  std::vector<double> dy;  // t.size() * n
};

/// Cubic Hermite interpolation, exact at the nodes. Sample times must lie
/// within the stored interval.
inline std::vector<double> sample_at(const GridSolution& g, std::span<const double> times) {
  if (g.t.size() < 2) throw ConfigError("sample_at: grid has fewer than two nodes");
  const double t0 = g.t.front(), t1 = g.t.back();
  std::vector<double> out(times.size() * g.n);
  for (std::size_t q = 0; q < times.size(); ++q) {
    const double tau = times[q];
    if (tau < t0 - 1e-12 || tau > t1 + 1e-12)
      throw ConfigError("sample_at: time " + fmt_double(tau) + " outside [" +
                        fmt_double(t0) + ", " + fmt_double(t1) + "]");
    auto it = std::upper_bound(g.t.begin(), g.t.end(), tau);
    std::size_t hi = std::min<std::size_t>(std::distance(g.t.begin(), it), g.t.size() - 1);
    if (hi == 0) hi = 1;
    const std::size_t lo = hi - 1;
    const double h = g.t[hi] - g.t[lo];
    const double s = std::clamp((tau - g.t[lo]) / h, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    for (int c = 0; c < g.n; ++c)
      out[q * g.n + c] = h00 * g.y[lo * g.n + c] + h10 * h * g.dy[lo * g.n + c] +
                         h01 * g.y[hi * g.n + c] + h11 * h * g.dy[hi * g.n + c];
  }
  return out;
}

/// Classical fourth-order Runge-Kutta with fixed step h; a leftover fraction
/// of the interval becomes one short final step.
inline GridSolution rk4_solve(const OdeField& field, std::span<const double> u0, double h,
                              double t0 = 0.0, double t1 = 1.0) {
  if (!(h > 0.0)) throw ConfigError("rk4_solve: step must be positive");
  if (!(t1 > t0)) throw ConfigError("rk4_solve: empty time interval");
  const int n = field.n;
  if (static_cast<int>(u0.size()) != n) throw ConfigError("rk4_solve: state size mismatch");
  const double span = t1 - t0;
  auto m = static_cast<std::int64_t>(std::floor(span / h + 1e-9));
  const double rem = span - static_cast<double>(m) * h;
  const bool short_step = rem > 1e-12 * span;

  GridSolution g;
  g.n = n;
  g.t.reserve(m + 2);
  std::vector<double> y(u0.begin(), u0.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  const auto record = [&](double t) {
    field.f(t, y, k1);
    g.t.push_back(t);
    g.y.insert(g.y.end(), y.begin(), y.end());
    g.dy.insert(g.dy.end(), k1.begin(), k1.end());
  };
  record(t0);
  const std::int64_t total = m + (short_step ? 1 : 0);
  for (std::int64_t i = 0; i < total; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    const double hs = (i < m) ? h : rem;
    // k1 is already f(t, y) from the record() call
    for (int c = 0; c < n; ++c) tmp[c] = y[c] + 0.5 * hs * k1[c];
    field.f(t + 0.5 * hs, tmp, k2);
    for (int c = 0; c < n; ++c) tmp[c] = y[c] + 0.5 * hs * k2[c];
    field.f(t + 0.5 * hs, tmp, k3);
    for (int c = 0; c < n; ++c) tmp[c] = y[c] + hs * k3[c];
    field.f(t + hs, tmp, k4);
    for (int c = 0; c < n; ++c)
      y[c] += hs / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
    for (double v : y)
      if (!std::isfinite(v))
        throw SolverError("rk4_solve: non-finite state at t = " + fmt_double(t + hs));
    record(i + 1 == total ? t1 : t0 + static_cast<double>(i + 1) * h);
  }
  return g;
}

struct RadauOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h0 = 1e-6;
  double hmax = 1e-2;  // also bounds the Hermite sampling error
  double hmin = 1e-14;
  std::int64_t max_steps = 4000000;
};

namespace detail {

/// Butcher data for the 3-stage Radau IIA method and its error estimate.
struct RadauTableau {
  double a[3][3], c[3], dd[3], gamma0;
  RadauTableau() {
    const double s6 = std::sqrt(6.0);
    a[0][0] = (88.0 - 7.0 * s6) / 360.0;
    a[0][1] = (296.0 - 169.0 * s6) / 1800.0;
    a[0][2] = (-2.0 + 3.0 * s6) / 225.0;
    a[1][0] = (296.0 + 169.0 * s6) / 1800.0;
    a[1][1] = (88.0 + 7.0 * s6) / 360.0;
    a[1][2] = (-2.0 - 3.0 * s6) / 225.0;
    a[2][0] = (16.0 - s6) / 36.0;
    a[2][1] = (16.0 + s6) / 36.0;
    a[2][2] = 1.0 / 9.0;
    c[0] = (4.0 - s6) / 10.0;
    c[1] = (4.0 + s6) / 10.0;
    c[2] = 1.0;
    dd[0] = -(13.0 + 7.0 * s6) / 3.0;
    dd[1] = (-13.0 + 7.0 * s6) / 3.0;
    dd[2] = -1.0 / 3.0;
    // real eigenvalue of A; the error estimate smooths with (I - gamma0 h J)
    gamma0 = (6.0 + std::cbrt(81.0) - std::cbrt(9.0)) / 30.0;
  }
};

inline const RadauTableau& radau_tableau() {
  static const RadauTableau tab;
  return tab;
}

/// One simplified-Newton solve of the stage equations. Returns false if the
/// iteration failed to contract. Z holds the stage increments on success.
inline bool radau_stages(const OdeField& field, double t, std::span<const double> y,
                         double h, const std::vector<double>& lu,
                         const std::vector<int>& piv, std::span<const double> sc,
                         std::vector<double>& Z, int& iters) {
  const auto& tab = radau_tableau();
  const int n = field.n;
  const int nz = 3 * n;
  Z.assign(nz, 0.0);
  std::vector<double> F(nz), R(nz), stage(n);
  double dyno_prev = 0.0;
  const int max_iter = 10;
  for (int it = 0; it < max_iter; ++it) {
    for (int s = 0; s < 3; ++s) {
      for (int c = 0; c < n; ++c) stage[c] = y[c] + Z[s * n + c];
      field.f(t + tab.c[s] * h, stage, std::span<double>(F).subspan(s * n, n));
    }
    for (int s = 0; s < 3; ++s)
      for (int c = 0; c < n; ++c) {
        double acc = Z[s * n + c];
        for (int j = 0; j < 3; ++j) acc -= h * tab.a[s][j] * F[j * n + c];
        R[s * n + c] = -acc;
      }
    lu_solve(lu, nz, piv, R);  // R becomes the Newton update
    double dyno = 0.0;
    for (int k = 0; k < nz; ++k) {
      const double q = R[k] / sc[k % n];
      dyno += q * q;
    }
    dyno = std::sqrt(dyno / nz);
    for (int k = 0; k < nz; ++k) Z[k] += R[k];
    if (!std::isfinite(dyno)) return false;
    iters = it + 1;
    if (dyno < 1e-15) return true;
    if (it > 0) {
      const double theta = dyno / dyno_prev;
      if (theta >= 0.99) return false;
      if (theta / (1.0 - theta) * dyno <= 1e-3) return true;
    }
    dyno_prev = dyno;
  }
  return false;
}

}  // namespace detail

/// Adaptive Radau IIA (order 5). Step control keeps the estimated local error
/// near one in the (atol, rtol) scale; growth is capped at 5x per step. A
/// step size underflow raises SolverError naming the failing time.
inline GridSolution radau5_solve(const OdeField& field, std::span<const double> u0,
                                 const RadauOptions& opts = {}) {
  const auto& tab = detail::radau_tableau();
  const int n = field.n;
  if (static_cast<int>(u0.size()) != n) throw ConfigError("radau5_solve: state size mismatch");
  const double t_end = 1.0;
  double t = 0.0;
  std::vector<double> y(u0.begin(), u0.end());

  GridSolution g;
  g.n = n;
  std::vector<double> f0(n), jac, M, Z, sc(n), err_vec(n), rhs(n), stage(n);
  std::vector<int> piv, piv_err;
  std::vector<double> lu_err;
  const auto record = [&](double tt) {
    field.f(tt, y, f0);
    g.t.push_back(tt);
    g.y.insert(g.y.end(), y.begin(), y.end());
    g.dy.insert(g.dy.end(), f0.begin(), f0.end());
  };
  record(0.0);

  double h = std::min({opts.h0, opts.hmax, t_end});
  bool first_or_rejected = true;
  std::int64_t steps = 0;
  while (t < t_end - 1e-14) {
    if (++steps > opts.max_steps)
      throw SolverError("radau5_solve: step budget exhausted at t = " + fmt_double(t));
    h = std::min(h, t_end - t);
    field.f(t, y, f0);
    field.eval_jacobian(t, y, jac);
    for (int c = 0; c < n; ++c) sc[c] = opts.atol + opts.rtol * std::abs(y[c]);

    bool accepted = false;
    while (!accepted) {
      // M = I - h (A (x) J), factored once per attempted step size
      const int nz = 3 * n;
      M.assign(static_cast<std::size_t>(nz) * nz, 0.0);
      for (int s = 0; s < 3; ++s)
        for (int j = 0; j < 3; ++j)
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
              M[(s * n + r) * nz + (j * n + c)] =
                  (s == j && r == c ? 1.0 : 0.0) - h * tab.a[s][j] * jac[r * n + c];
      detail::lu_factor(M, nz, piv);

      int newton_iters = 0;
      if (!detail::radau_stages(field, t, y, h, M, piv, sc, Z, newton_iters)) {
        h *= 0.5;
        first_or_rejected = true;
        if (h < opts.hmin)
          throw SolverError("radau5_solve: Newton stall, step underflow at t = " +
                            fmt_double(t));
        continue;
      }

      // Embedded error estimate smoothed by (I - gamma0 h J)
      lu_err.assign(jac.begin(), jac.end());
      for (auto& v : lu_err) v = -tab.gamma0 * h * v;
      for (int c = 0; c < n; ++c) lu_err[c * n + c] += 1.0;
      detail::lu_factor(lu_err, n, piv_err);
      auto estimate = [&](std::span<const double> fbase) {
        for (int c = 0; c < n; ++c) {
          double acc = tab.gamma0 * h * fbase[c];
          for (int s = 0; s < 3; ++s) acc += tab.gamma0 * tab.dd[s] * Z[s * n + c];
          err_vec[c] = acc;
        }
        detail::lu_solve(lu_err, n, piv_err, err_vec);
        double e = 0.0;
        for (int c = 0; c < n; ++c) {
          const double q = err_vec[c] / sc[c];
          e += q * q;
        }
        return std::sqrt(e / n);
      };
      double err = estimate(f0);
      if (err >= 1.0 && first_or_rejected) {
        // One smoothing pass helps when f has a large initial transient.
        for (int c = 0; c < n; ++c) stage[c] = y[c] + err_vec[c];
        field.f(t, stage, rhs);
        err = estimate(rhs);
      }

      if (!std::isfinite(err)) {
        h *= 0.5;
        first_or_rejected = true;
        if (h < opts.hmin)
          throw SolverError("radau5_solve: non-finite error estimate at t = " +
                            fmt_double(t));
        continue;
      }

      const double safe = 0.9 * std::pow(std::max(err, 1e-10), -0.25);
      if (err <= 1.0) {
        accepted = true;
        for (int c = 0; c < n; ++c) y[c] += Z[2 * n + c];  // stiffly accurate
        t = (t_end - t - h < 1e-14) ? t_end : t + h;
        record(t);
        h = std::min({h * std::clamp(safe, 0.125, 5.0), opts.hmax});
        first_or_rejected = false;
      } else {
        h *= std::clamp(safe, 0.125, 1.0);
        first_or_rejected = true;
        if (h < opts.hmin)
          throw SolverError("radau5_solve: repeated rejection, step underflow at t = " +
                            fmt_double(t));
      }
    }
  }
  return g;
}

/// Fixed-step Radau IIA driver without error control; used to measure the
/// method's convergence order directly.
inline GridSolution radau5_solve_fixed(const OdeField& field, std::span<const double> u0,
                                       double h, double t0 = 0.0, double t1 = 1.0) {
  const auto& tab = detail::radau_tableau();
  const int n = field.n;
  GridSolution g;
  g.n = n;
  std::vector<double> y(u0.begin(), u0.end());
  // Tight Newton scale: stage residue must stay far below the O(h^5)
  // discretization error this driver exists to measure.
  std::vector<double> f0(n), jac, M, Z, sc(n, 1e-11);
  std::vector<int> piv;
  const auto record = [&](double tt) {
    field.f(tt, y, f0);
    g.t.push_back(tt);
    g.y.insert(g.y.end(), y.begin(), y.end());
    g.dy.insert(g.dy.end(), f0.begin(), f0.end());
  };
  record(t0);
  const auto m = static_cast<std::int64_t>(std::llround((t1 - t0) / h));
  for (std::int64_t i = 0; i < m; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    field.eval_jacobian(t, y, jac);
    const int nz = 3 * n;
    M.assign(static_cast<std::size_t>(nz) * nz, 0.0);
    for (int s = 0; s < 3; ++s)
      for (int j = 0; j < 3; ++j)
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c)
            M[(s * n + r) * nz + (j * n + c)] =
                (s == j && r == c ? 1.0 : 0.0) - h * tab.a[s][j] * jac[r * n + c];
    detail::lu_factor(M, nz, piv);
    int iters = 0;
    if (!detail::radau_stages(field, t, y, h, M, piv, sc, Z, iters))
      throw SolverError("radau5_solve_fixed: Newton failed at t = " + fmt_double(t));
    for (int c = 0; c < n; ++c) y[c] += Z[2 * n + c];
    record(i + 1 == m ? t1 : t0 + static_cast<double>(i + 1) * h);
  }
  return g;
}

/// Closed-form solution of the linear boundary-value problem evaluated on a
/// caller-supplied grid, with derivative slots filled from jets.
inline GridSolution exact_bvp(double eps, std::span<const double> times) {
  if (times.size() < 2) throw ConfigError("exact_bvp: need at least two sample times");
  GridSolution g;
  g.n = 2;
  g.t.assign(times.begin(), times.end());
  g.y.resize(times.size() * 2);
  g.dy.resize(times.size() * 2);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto s = detail::linear_bvp_solution(eps, lift_input(times[i]));
    g.y[i * 2] = s[0].v;
    g.y[i * 2 + 1] = s[1].v;
    g.dy[i * 2] = s[0].d1;
    g.dy[i * 2 + 1] = s[1].d1;
  }
  return g;
}

}  // namespace tsnn
