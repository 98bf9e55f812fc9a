#pragma once
// Reverse-mode tape over second-order jets. The forward quantity at every tape
// node is a Jet2 (value and two tau-derivatives), so one backward sweep yields
// the gradient of a scalar that depends on network outputs AND their tau
// derivatives, exactly what a collocation loss needs.
//
// Usage: bind parameters, record the loss once per stage through the Trace
// sugar, then per optimizer step rebind(theta) to replay the forward values
// and call gradient(). Recording is the expensive part; replay touches each
// node once.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tsnn/common.hpp"
#include "tsnn/jet.hpp"

namespace tsnn {

enum class Op : std::uint8_t {
  Const, Input, Param,
  Add, Sub, Mul, Div, Neg, Scale, Shift,
  Tanh, Exp, Expm1, Sin, Cos, PowInt,
  D1, D2,
  Dot,
};

struct TapeNode {
  Op op;
  std::int32_t a = -1;   // first operand; Dot: offset into the term pool
  std::int32_t b = -1;   // second operand; Dot: term count
  std::int32_t aux = 0;  // Param: parameter index; PowInt: exponent; Dot: bias parameter or -1
  double c = 0.0;        // Const value, Input tau, Scale factor, Shift offset
};

/// One weighted term of a fused affine node: params[w] * node x.
struct DotTerm {
  std::int32_t w;
  std::int32_t x;
};

class AdjointRecorder {
 public:
  explicit AdjointRecorder(std::size_t n_params = 0) : n_params_(n_params) {}

  std::size_t param_count() const { return n_params_; }
  std::size_t size() const { return nodes_.size(); }

  /// Binds a parameter vector and recomputes every recorded node under it.
  /// Must be called before recording any Param or Dot node.
  void rebind(std::span<const double> params) {
    if (params.size() != n_params_)
      throw ConfigError("rebind: expected " + std::to_string(n_params_) +
                        " parameters, got " + std::to_string(params.size()));
    params_ = params.data();
    for (std::size_t i = 0; i < nodes_.size(); ++i) vals_[i] = eval(nodes_[i]);
  }

  // ----- recording -----

  std::int32_t constant(double c) { return push({Op::Const, -1, -1, 0, c}); }
  std::int32_t input(double tau) { return push({Op::Input, -1, -1, 0, tau}); }
  std::int32_t param(std::int32_t idx) { return push({Op::Param, -1, -1, idx, 0.0}); }

  std::int32_t add(std::int32_t a, std::int32_t b) { return push({Op::Add, a, b, 0, 0.0}); }
  std::int32_t sub(std::int32_t a, std::int32_t b) { return push({Op::Sub, a, b, 0, 0.0}); }
  std::int32_t mul(std::int32_t a, std::int32_t b) { return push({Op::Mul, a, b, 0, 0.0}); }
  std::int32_t div(std::int32_t a, std::int32_t b) { return push({Op::Div, a, b, 0, 0.0}); }
  std::int32_t neg(std::int32_t a) { return push({Op::Neg, a, -1, 0, 0.0}); }
  std::int32_t scale(std::int32_t a, double c) { return push({Op::Scale, a, -1, 0, c}); }
  std::int32_t shift(std::int32_t a, double c) { return push({Op::Shift, a, -1, 0, c}); }
  std::int32_t tanh_node(std::int32_t a) { return push({Op::Tanh, a, -1, 0, 0.0}); }
  std::int32_t exp_node(std::int32_t a) { return push({Op::Exp, a, -1, 0, 0.0}); }
  std::int32_t expm1_node(std::int32_t a) { return push({Op::Expm1, a, -1, 0, 0.0}); }
  std::int32_t sin_node(std::int32_t a) { return push({Op::Sin, a, -1, 0, 0.0}); }
  std::int32_t cos_node(std::int32_t a) { return push({Op::Cos, a, -1, 0, 0.0}); }
  std::int32_t pow_int(std::int32_t a, int k) { return push({Op::PowInt, a, -1, k, 0.0}); }

  /// Drops one derivative order: (v, d1, d2) -> (d1, d2, 0). The vacated slot
  /// is a truncation artifact; a scalar result must never read it.
  std::int32_t extract_d1(std::int32_t a) { return push({Op::D1, a, -1, 0, 0.0}); }
  std::int32_t extract_d2(std::int32_t a) { return push({Op::D2, a, -1, 0, 0.0}); }

  /// Fused affine combination sum_j params[w_j] * x_j (+ params[bias]).
  /// One node per neuron keeps the tape short.
  std::int32_t dot(std::span<const DotTerm> terms, std::int32_t bias_param = -1) {
    const auto off = static_cast<std::int32_t>(dot_terms_.size());
    dot_terms_.insert(dot_terms_.end(), terms.begin(), terms.end());
    return push({Op::Dot, off, static_cast<std::int32_t>(terms.size()), bias_param, 0.0});
  }

  void set_result(std::int32_t id) { result_ = id; }
  std::int32_t result() const { return result_; }

  // ----- evaluation -----

  Jet2 node_value(std::int32_t id) const { return vals_[id]; }
  double result_value() const { return vals_[result_].v; }

  /// One backward sweep from the result's value slot. Throws DivergenceError
  /// if the result or any accumulated gradient entry is non-finite.
  std::vector<double> gradient() {
    if (result_ < 0) throw ConfigError("gradient: no result node set");
    if (!std::isfinite(vals_[result_].v))
      throw DivergenceError("non-finite loss value");
    std::vector<double> grad(n_params_, 0.0);
    adj_.assign(nodes_.size(), Jet2{});
    adj_[result_] = {1.0, 0.0, 0.0};
    for (std::int32_t i = result_; i >= 0; --i) backprop(i, grad);
    for (double g : grad)
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient entry");
    return grad;
  }

 private:
  std::int32_t push(TapeNode n) {
    nodes_.push_back(n);
    vals_.push_back(eval(n));
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  Jet2 eval(const TapeNode& n) const {
    switch (n.op) {
      case Op::Const: return {n.c, 0.0, 0.0};
      case Op::Input: return {n.c, 1.0, 0.0};
      case Op::Param: return {params_[n.aux], 0.0, 0.0};
      case Op::Add:   return vals_[n.a] + vals_[n.b];
      case Op::Sub:   return vals_[n.a] - vals_[n.b];
      case Op::Mul:   return jet_mul(vals_[n.a], vals_[n.b]);
      case Op::Div:   return vals_[n.a] / vals_[n.b];
      case Op::Neg:   return -vals_[n.a];
      case Op::Scale: return vals_[n.a] * n.c;
      case Op::Shift: return vals_[n.a] + n.c;
      case Op::Tanh:  return jet_tanh(vals_[n.a]);
      case Op::Exp:   return exp(vals_[n.a]);
      case Op::Expm1: return expm1(vals_[n.a]);
      case Op::Sin:   return sin(vals_[n.a]);
      case Op::Cos:   return cos(vals_[n.a]);
      case Op::PowInt: return powi(vals_[n.a], n.aux);
      case Op::D1: { const Jet2 x = vals_[n.a]; return {x.d1, x.d2, 0.0}; }
      case Op::D2: { const Jet2 x = vals_[n.a]; return {x.d2, 0.0, 0.0}; }
      case Op::Dot: {
        Jet2 acc = (n.aux >= 0) ? Jet2{params_[n.aux], 0.0, 0.0} : Jet2{};
        for (std::int32_t j = 0; j < n.b; ++j) {
          const DotTerm& t = dot_terms_[n.a + j];
          const double w = params_[t.w];
          const Jet2& x = vals_[t.x];
          acc.v += w * x.v;
          acc.d1 += w * x.d1;
          acc.d2 += w * x.d2;
        }
        return acc;
      }
    }
    return {};
  }

  // Every forward rule below is an explicit function of the operand jets; the
  // backward rule is its exact transpose, accumulating adjoint triples
  // (dL/dv, dL/dd1, dL/dd2) into the operands.
  void backprop(std::int32_t i, std::vector<double>& grad) {
    const TapeNode& n = nodes_[i];
    const Jet2 o = adj_[i];
    if (o.v == 0.0 && o.d1 == 0.0 && o.d2 == 0.0) return;
    switch (n.op) {
      case Op::Const:
      case Op::Input:
        break;
      case Op::Param:
        grad[n.aux] += o.v;
        break;
      case Op::Add: {
        Jet2& a = adj_[n.a]; Jet2& b = adj_[n.b];
        a.v += o.v; a.d1 += o.d1; a.d2 += o.d2;
        b.v += o.v; b.d1 += o.d1; b.d2 += o.d2;
        break;
      }
      case Op::Sub: {
        Jet2& a = adj_[n.a]; Jet2& b = adj_[n.b];
        a.v += o.v; a.d1 += o.d1; a.d2 += o.d2;
        b.v -= o.v; b.d1 -= o.d1; b.d2 -= o.d2;
        break;
      }
      case Op::Mul: {
        const Jet2 av = vals_[n.a], bv = vals_[n.b];
        Jet2& a = adj_[n.a]; Jet2& b = adj_[n.b];
        a.v += o.v * bv.v + o.d1 * bv.d1 + o.d2 * bv.d2;
        a.d1 += o.d1 * bv.v + 2.0 * o.d2 * bv.d1;
        a.d2 += o.d2 * bv.v;
        b.v += o.v * av.v + o.d1 * av.d1 + o.d2 * av.d2;
        b.d1 += o.d1 * av.v + 2.0 * o.d2 * av.d1;
        b.d2 += o.d2 * av.v;
        break;
      }
      case Op::Div: {
        // The forward builds (qv, q1, q2) sequentially; walk those three
        // assignments in reverse, carrying local adjoints for qv and q1.
        const Jet2 av = vals_[n.a], bv = vals_[n.b], q = vals_[i];
        Jet2& a = adj_[n.a]; Jet2& b = adj_[n.b];
        double ov = o.v, o1 = o.d1;
        const double o2 = o.d2;
        // q2 = (a.d2 - qv*b.d2 - 2*q1*b.d1) / b.v
        a.d2 += o2 / bv.v;
        ov -= o2 * bv.d2 / bv.v;
        o1 -= 2.0 * o2 * bv.d1 / bv.v;
        b.d1 -= 2.0 * o2 * q.d1 / bv.v;
        b.d2 -= o2 * q.v / bv.v;
        b.v -= o2 * q.d2 / bv.v;
        // q1 = (a.d1 - qv*b.d1) / b.v
        a.d1 += o1 / bv.v;
        ov -= o1 * bv.d1 / bv.v;
        b.d1 -= o1 * q.v / bv.v;
        b.v -= o1 * q.d1 / bv.v;
        // qv = a.v / b.v
        a.v += ov / bv.v;
        b.v -= ov * q.v / bv.v;
        break;
      }
      case Op::Neg: {
        Jet2& a = adj_[n.a];
        a.v -= o.v; a.d1 -= o.d1; a.d2 -= o.d2;
        break;
      }
      case Op::Scale: {
        Jet2& a = adj_[n.a];
        a.v += o.v * n.c; a.d1 += o.d1 * n.c; a.d2 += o.d2 * n.c;
        break;
      }
      case Op::Shift: {
        Jet2& a = adj_[n.a];
        a.v += o.v; a.d1 += o.d1; a.d2 += o.d2;
        break;
      }
      case Op::Tanh: {
        const Jet2 av = vals_[n.a];
        const double t = vals_[i].v;
        const double s = 1.0 - t * t;
        Jet2& a = adj_[n.a];
        // o = (t, s*a1, s*a2 - 2 t s a1^2); d(ts)/dav = s(s - 2t^2)
        a.v += o.v * s + o.d1 * (-2.0 * t * s * av.d1) +
               o.d2 * (-2.0 * t * s * av.d2 - 2.0 * av.d1 * av.d1 * s * (s - 2.0 * t * t));
        a.d1 += o.d1 * s + o.d2 * (-4.0 * t * s * av.d1);
        a.d2 += o.d2 * s;
        break;
      }
      case Op::Exp:
      case Op::Expm1: {
        const Jet2 av = vals_[n.a];
        const double e = (n.op == Op::Exp) ? vals_[i].v : vals_[i].v + 1.0;
        Jet2& a = adj_[n.a];
        a.v += o.v * e + o.d1 * e * av.d1 + o.d2 * e * (av.d2 + av.d1 * av.d1);
        a.d1 += o.d1 * e + o.d2 * 2.0 * e * av.d1;
        a.d2 += o.d2 * e;
        break;
      }
      case Op::Sin: {
        const Jet2 av = vals_[n.a];
        const double sv = vals_[i].v;
        const double cv = std::cos(av.v);
        Jet2& a = adj_[n.a];
        a.v += o.v * cv + o.d1 * (-sv * av.d1) + o.d2 * (-sv * av.d2 - cv * av.d1 * av.d1);
        a.d1 += o.d1 * cv + o.d2 * (-2.0 * sv * av.d1);
        a.d2 += o.d2 * cv;
        break;
      }
      case Op::Cos: {
        const Jet2 av = vals_[n.a];
        const double cv = vals_[i].v;
        const double sv = std::sin(av.v);
        Jet2& a = adj_[n.a];
        a.v += o.v * (-sv) + o.d1 * (-cv * av.d1) + o.d2 * (-cv * av.d2 + sv * av.d1 * av.d1);
        a.d1 += o.d1 * (-sv) + o.d2 * (-2.0 * cv * av.d1);
        a.d2 += o.d2 * (-sv);
        break;
      }
      case Op::PowInt: {
        const int k = n.aux;
        Jet2& a = adj_[n.a];
        if (k == 0) break;
        if (k == 1) {
          a.v += o.v; a.d1 += o.d1; a.d2 += o.d2;
          break;
        }
        const Jet2 av = vals_[n.a];
        const double kk = static_cast<double>(k);
        const double pkm2 = std::pow(av.v, k - 2);
        const double pkm1 = pkm2 * av.v;
        const double pkm3 = (k == 2) ? 0.0 : std::pow(av.v, k - 3);
        a.v += o.v * kk * pkm1 + o.d1 * kk * (kk - 1.0) * pkm2 * av.d1 +
               o.d2 * (kk * (kk - 1.0) * pkm2 * av.d2 +
                       kk * (kk - 1.0) * (kk - 2.0) * pkm3 * av.d1 * av.d1);
        a.d1 += o.d1 * kk * pkm1 + o.d2 * 2.0 * kk * (kk - 1.0) * pkm2 * av.d1;
        a.d2 += o.d2 * kk * pkm1;
        break;
      }
      case Op::D1: {
        Jet2& a = adj_[n.a];
        a.d1 += o.v;
        a.d2 += o.d1;
        break;
      }
      case Op::D2: {
        Jet2& a = adj_[n.a];
        a.d2 += o.v;
        break;
      }
      case Op::Dot: {
        for (std::int32_t j = 0; j < n.b; ++j) {
          const DotTerm& t = dot_terms_[n.a + j];
          const double w = params_[t.w];
          const Jet2& x = vals_[t.x];
          Jet2& xa = adj_[t.x];
          xa.v += w * o.v;
          xa.d1 += w * o.d1;
          xa.d2 += w * o.d2;
          grad[t.w] += o.v * x.v + o.d1 * x.d1 + o.d2 * x.d2;
        }
        if (n.aux >= 0) grad[n.aux] += o.v;
        break;
      }
    }
  }

  std::vector<TapeNode> nodes_;
  std::vector<Jet2> vals_;
  std::vector<Jet2> adj_;
  std::vector<DotTerm> dot_terms_;
  std::size_t n_params_;
  const double* params_ = nullptr;
  std::int32_t result_ = -1;
};

/// Spec'd entry point: gradient of the recorded result with respect to every
/// parameter, untouched parameters included (their entries stay zero).
inline std::vector<double> param_gradient(AdjointRecorder& rec) {
  return rec.gradient();
}

/// Expression handle recording into an AdjointRecorder. Supports the same
/// operator set as Jet2, so residual lambdas instantiate for Trace unchanged.
struct Trace {
  AdjointRecorder* rec = nullptr;
  std::int32_t id = -1;
};

inline Trace operator+(const Trace& a, const Trace& b) { return {a.rec, a.rec->add(a.id, b.id)}; }
inline Trace operator-(const Trace& a, const Trace& b) { return {a.rec, a.rec->sub(a.id, b.id)}; }
inline Trace operator*(const Trace& a, const Trace& b) { return {a.rec, a.rec->mul(a.id, b.id)}; }
inline Trace operator/(const Trace& a, const Trace& b) { return {a.rec, a.rec->div(a.id, b.id)}; }
inline Trace operator-(const Trace& a) { return {a.rec, a.rec->neg(a.id)}; }
inline Trace operator+(const Trace& a, double c) { return {a.rec, a.rec->shift(a.id, c)}; }
inline Trace operator+(double c, const Trace& a) { return a + c; }
inline Trace operator-(const Trace& a, double c) { return {a.rec, a.rec->shift(a.id, -c)}; }
inline Trace operator-(double c, const Trace& a) { return {a.rec, a.rec->shift(a.rec->neg(a.id), c)}; }
inline Trace operator*(const Trace& a, double c) { return {a.rec, a.rec->scale(a.id, c)}; }
inline Trace operator*(double c, const Trace& a) { return a * c; }
inline Trace operator/(const Trace& a, double c) { return {a.rec, a.rec->scale(a.id, 1.0 / c)}; }
inline Trace operator/(double c, const Trace& a) { return {a.rec, a.rec->div(a.rec->constant(c), a.id)}; }
inline Trace tanh(const Trace& a) { return {a.rec, a.rec->tanh_node(a.id)}; }
inline Trace exp(const Trace& a) { return {a.rec, a.rec->exp_node(a.id)}; }
inline Trace expm1(const Trace& a) { return {a.rec, a.rec->expm1_node(a.id)}; }
inline Trace sin(const Trace& a) { return {a.rec, a.rec->sin_node(a.id)}; }
inline Trace cos(const Trace& a) { return {a.rec, a.rec->cos_node(a.id)}; }
inline Trace powi(const Trace& a, int k) { return {a.rec, a.rec->pow_int(a.id, k)}; }

}  // namespace tsnn
