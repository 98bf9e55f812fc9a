#pragma once
// Truncated second-order jets. A Jet2 carries (value, first, second) derivative
// slots with respect to one scalar input and propagates them through
// arithmetic, so evaluating a residual on jets yields u, u', u'' in one pass.

#include <cmath>

namespace tsnn {

// Generic residual code calls these unqualified; the using-declarations make
// the double overloads visible next to the Jet2/Trace ones.
using std::cos;
using std::exp;
using std::expm1;
using std::sin;
using std::tanh;

struct Jet2 {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

constexpr Jet2 lift_constant(double c) { return {c, 0.0, 0.0}; }

/// The integration variable itself: unit first derivative, zero curvature.
constexpr Jet2 lift_input(double tau) { return {tau, 1.0, 0.0}; }

constexpr Jet2 operator+(const Jet2& a, const Jet2& b) {
  return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}
constexpr Jet2 operator-(const Jet2& a, const Jet2& b) {
  return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}
constexpr Jet2 operator-(const Jet2& a) { return {-a.v, -a.d1, -a.d2}; }

/// Leibniz to second order.
constexpr Jet2 jet_mul(const Jet2& a, const Jet2& b) {
  return {a.v * b.v,
          a.d1 * b.v + a.v * b.d1,
          a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
constexpr Jet2 operator*(const Jet2& a, const Jet2& b) { return jet_mul(a, b); }

/// Quotient defined slot by slot so that jet_mul(a / b, b) == a exactly in
/// exact arithmetic: each slot reuses the previously solved ones.
constexpr Jet2 operator/(const Jet2& a, const Jet2& b) {
  const double qv = a.v / b.v;
  const double q1 = (a.d1 - qv * b.d1) / b.v;
  const double q2 = (a.d2 - qv * b.d2 - 2.0 * q1 * b.d1) / b.v;
  return {qv, q1, q2};
}

constexpr Jet2 operator+(const Jet2& a, double c) { return {a.v + c, a.d1, a.d2}; }
constexpr Jet2 operator+(double c, const Jet2& a) { return a + c; }
constexpr Jet2 operator-(const Jet2& a, double c) { return {a.v - c, a.d1, a.d2}; }
constexpr Jet2 operator-(double c, const Jet2& a) { return {c - a.v, -a.d1, -a.d2}; }
constexpr Jet2 operator*(const Jet2& a, double c) { return {a.v * c, a.d1 * c, a.d2 * c}; }
constexpr Jet2 operator*(double c, const Jet2& a) { return a * c; }
// Multiplies by the reciprocal (not slot-wise division) so the result is
// bit-identical to the tape's scale-by-1/c node.
constexpr Jet2 operator/(const Jet2& a, double c) { return a * (1.0 / c); }
constexpr Jet2 operator/(double c, const Jet2& a) { return lift_constant(c) / a; }

/// d tanh = 1 - tanh^2; the second slot applies the chain rule twice.
inline Jet2 jet_tanh(const Jet2& a) {
  const double t = std::tanh(a.v);
  const double s = 1.0 - t * t;
  return {t, s * a.d1, s * a.d2 - 2.0 * t * s * a.d1 * a.d1};
}
inline Jet2 tanh(const Jet2& a) { return jet_tanh(a); }

inline Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.v);
  return {e, e * a.d1, e * (a.d2 + a.d1 * a.d1)};
}

/// exp(a) - 1 with a stable value slot; derivative slots equal exp's.
inline Jet2 expm1(const Jet2& a) {
  const double m = std::expm1(a.v);
  const double e = m + 1.0;
  return {m, e * a.d1, e * (a.d2 + a.d1 * a.d1)};
}

inline Jet2 sin(const Jet2& a) {
  const double sv = std::sin(a.v);
  const double cv = std::cos(a.v);
  return {sv, cv * a.d1, cv * a.d2 - sv * a.d1 * a.d1};
}

inline Jet2 cos(const Jet2& a) {
  const double sv = std::sin(a.v);
  const double cv = std::cos(a.v);
  return {cv, -sv * a.d1, -sv * a.d2 - cv * a.d1 * a.d1};
}

/// Canonical power chain: v^k is built as pow(v, k-2) * v * v for k >= 2 so
/// that every scalar type (double, Jet2, tape replay) produces bit-identical
/// values. k = 2 at v = 0 stays finite because pow(0, 0) == 1.
inline double powi(double v, int k) {
  if (k == 0) return 1.0;
  if (k == 1) return v;
  return std::pow(v, k - 2) * v * v;
}

inline Jet2 powi(const Jet2& a, int k) {
  if (k == 0) return lift_constant(1.0);
  if (k == 1) return a;
  const double pkm2 = std::pow(a.v, k - 2);
  const double pkm1 = pkm2 * a.v;
  const double pk = pkm1 * a.v;
  const double kk = static_cast<double>(k);
  return {pk, kk * pkm1 * a.d1,
          kk * pkm1 * a.d2 + kk * (kk - 1.0) * pkm2 * a.d1 * a.d1};
}

}  // namespace tsnn
