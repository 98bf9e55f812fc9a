#pragma once
// Two-scale feedforward network. The input map sends tau to
// (tau, eps^gamma * (tau - tau_c), eps^gamma), so one tanh MLP sees the slow
// variable, a stretched fast variable and the stretch factor itself. With
// gamma < 0 the stretched coordinate resolves boundary/transition layers of
// width ~eps^(-gamma) without moving the collocation grid.

#include <array>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tsnn/common.hpp"
#include "tsnn/jet.hpp"
#include "tsnn/rng.hpp"
#include "tsnn/tape.hpp"

namespace tsnn {

struct TwoScaleConfig {
  double epsilon = 1.0;  // effective small parameter of the current stage
  double gamma = -0.5;
  double tau_c = 0.5;    // center of the stretched coordinate

  void validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("two-scale epsilon must be positive");
    if (!(gamma < 0.0)) throw ConfigError("two-scale gamma must be negative");
    if (!(tau_c >= 0.0 && tau_c <= 1.0)) throw ConfigError("tau_c must lie in [0,1]");
  }

  double stretch() const { return std::pow(epsilon, gamma); }
};

enum class FeatureMode { TwoScale, Vanilla };

inline int feature_dim(FeatureMode m) { return m == FeatureMode::TwoScale ? 3 : 1; }

inline std::array<Jet2, 3> two_scale_features(const Jet2& tau, const TwoScaleConfig& cfg) {
  const double s = cfg.stretch();
  return {tau, (tau - cfg.tau_c) * s, lift_constant(s)};
}

/// Flat parameter vector in layer order: for each layer, the weight matrix
/// row-major (out x in) followed by the bias vector.
struct NetworkParams {
  std::vector<int> widths;  // input dim first, output dim last
  std::vector<double> theta;

  static std::size_t count(std::span<const int> widths) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
      n += static_cast<std::size_t>(widths[l + 1]) * widths[l] + widths[l + 1];
    return n;
  }

  int inputs() const { return widths.front(); }
  int outputs() const { return widths.back(); }

  void validate(FeatureMode mode) const {
    if (widths.size() < 2) throw ConfigError("network needs at least two layers");
    if (widths.front() != feature_dim(mode))
      throw ConfigError("first width " + std::to_string(widths.front()) +
                        " does not match feature dimension " +
                        std::to_string(feature_dim(mode)));
    for (int w : widths)
      if (w <= 0) throw ConfigError("network widths must be positive");
    if (theta.size() != count(widths))
      throw ConfigError("parameter vector length mismatch");
  }
};

/// Glorot uniform weights U(+-sqrt(6/(fan_in+fan_out))), zero biases, drawn in
/// flat layout order so the same seed always yields the same parameters.
inline NetworkParams init_xavier(std::vector<int> widths, std::uint64_t seed,
                                 FeatureMode mode = FeatureMode::TwoScale) {
  NetworkParams p;
  p.widths = std::move(widths);
  if (p.widths.size() < 2) throw ConfigError("network needs at least two layers");
  if (p.widths.front() != feature_dim(mode))
    throw ConfigError("first width " + std::to_string(p.widths.front()) +
                      " does not match feature dimension " +
                      std::to_string(feature_dim(mode)));
  p.theta.resize(NetworkParams::count(p.widths));
  Rng rng(seed);
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < p.widths.size(); ++l) {
    const int fan_in = p.widths[l];
    const int fan_out = p.widths[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < fan_out * fan_in; ++i) p.theta[at++] = rng.uniform(-bound, bound);
    for (int i = 0; i < fan_out; ++i) p.theta[at++] = 0.0;
  }
  return p;
}

/// Jet-valued forward pass: tanh hidden layers, affine output. Accumulation
/// order (bias first, then weighted terms in input order) matches the tape's
/// fused dot node bit for bit.
inline std::vector<Jet2> forward(const NetworkParams& p, const Jet2& tau,
                                 const TwoScaleConfig& cfg,
                                 FeatureMode mode = FeatureMode::TwoScale) {
  p.validate(mode);
  std::vector<Jet2> x;
  if (mode == FeatureMode::TwoScale) {
    const auto f = two_scale_features(tau, cfg);
    x.assign(f.begin(), f.end());
  } else {
    x.assign(1, tau);
  }
  std::vector<Jet2> y;
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < p.widths.size(); ++l) {
    const int n_in = p.widths[l];
    const int n_out = p.widths[l + 1];
    const std::size_t w0 = at;
    const std::size_t b0 = at + static_cast<std::size_t>(n_out) * n_in;
    y.assign(n_out, Jet2{});
    for (int i = 0; i < n_out; ++i) {
      Jet2 acc{p.theta[b0 + i], 0.0, 0.0};
      for (int j = 0; j < n_in; ++j) {
        const double w = p.theta[w0 + static_cast<std::size_t>(i) * n_in + j];
        acc.v += w * x[j].v;
        acc.d1 += w * x[j].d1;
        acc.d2 += w * x[j].d2;
      }
      y[i] = (l + 2 < p.widths.size()) ? jet_tanh(acc) : acc;
    }
    x.swap(y);
    at = b0 + n_out;
  }
  return x;
}

/// Records the same forward pass onto a tape. The recorder must already be
/// bound to a parameter vector laid out like NetworkParams::theta.
inline std::vector<Trace> forward_traced(AdjointRecorder& rec, std::span<const int> widths,
                                         Trace tau, const TwoScaleConfig& cfg,
                                         FeatureMode mode = FeatureMode::TwoScale) {
  std::vector<std::int32_t> x;
  if (mode == FeatureMode::TwoScale) {
    const double s = cfg.stretch();
    x = {tau.id, rec.scale(rec.shift(tau.id, -cfg.tau_c), s), rec.constant(s)};
  } else {
    x = {tau.id};
  }
  if (static_cast<int>(x.size()) != widths.front())
    throw ConfigError("first width does not match feature dimension");
  std::vector<DotTerm> terms;
  std::vector<std::int32_t> y;
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int n_in = widths[l];
    const int n_out = widths[l + 1];
    const std::size_t w0 = at;
    const std::size_t b0 = at + static_cast<std::size_t>(n_out) * n_in;
    y.clear();
    for (int i = 0; i < n_out; ++i) {
      terms.clear();
      for (int j = 0; j < n_in; ++j)
        terms.push_back({static_cast<std::int32_t>(w0 + static_cast<std::size_t>(i) * n_in + j),
                         x[j]});
      const auto affine = rec.dot(terms, static_cast<std::int32_t>(b0 + i));
      y.push_back(l + 2 < widths.size() ? rec.tanh_node(affine) : affine);
    }
    x.swap(y);
    at = b0 + n_out;
  }
  std::vector<Trace> out;
  out.reserve(x.size());
  for (auto id : x) out.push_back({&rec, id});
  return out;
}

// ----- checkpoints -----

/// Everything needed to warm-start or evaluate a trained network. epsilon in
/// `scale` is the stage the parameters were trained at.
struct Checkpoint {
  NetworkParams params;
  FeatureMode mode = FeatureMode::TwoScale;
  TwoScaleConfig scale;
  std::uint64_t seed = 0;
};

/// Versioned text format; parameters as hexadecimal floats for an exact
/// round trip.
inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << "tsnn-net 1\n";
  out << "feature " << (ck.mode == FeatureMode::TwoScale ? "two-scale" : "vanilla") << "\n";
  out << "widths";
  for (int w : ck.params.widths) out << ' ' << w;
  out << "\n";
  out << "epsilon " << fmt_hex(ck.scale.epsilon) << "\n";
  out << "gamma " << fmt_hex(ck.scale.gamma) << "\n";
  out << "tau_c " << fmt_hex(ck.scale.tau_c) << "\n";
  out << "seed " << ck.seed << "\n";
  out << "theta " << ck.params.theta.size() << "\n";
  for (double t : ck.params.theta) out << fmt_hex(t) << "\n";
  if (!out) throw ConfigError("short write on checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint '" + path + "'");
  auto fail = [&](const std::string& what) {
    throw ConfigError("checkpoint '" + path + "': " + what);
  };
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "tsnn-net" || version != 1) fail("unknown format header");
  Checkpoint ck;
  in >> word;
  if (word != "feature") fail("expected 'feature'");
  in >> word;
  if (word == "two-scale") ck.mode = FeatureMode::TwoScale;
  else if (word == "vanilla") ck.mode = FeatureMode::Vanilla;
  else fail("unknown feature mode '" + word + "'");
  in >> word;
  if (word != "widths") fail("expected 'widths'");
  {
    std::string rest;
    std::getline(in, rest);
    std::istringstream ws(rest);
    int w;
    while (ws >> w) ck.params.widths.push_back(w);
    if (ck.params.widths.size() < 2) fail("too few widths");
  }
  auto read_hex = [&](const char* key) {
    in >> word;
    if (word != key) fail(std::string("expected '") + key + "'");
    in >> word;
    return parse_double(word);
  };
  ck.scale.epsilon = read_hex("epsilon");
  ck.scale.gamma = read_hex("gamma");
  ck.scale.tau_c = read_hex("tau_c");
  in >> word >> ck.seed;
  if (word != "seed") fail("expected 'seed'");
  std::size_t n = 0;
  in >> word >> n;
  if (word != "theta") fail("expected 'theta'");
  if (n != NetworkParams::count(ck.params.widths)) fail("theta length does not match widths");
  ck.params.theta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> word)) fail("truncated parameter list");
    ck.params.theta[i] = parse_double(word);
  }
  if (!in) fail("corrupt parameter list");
  ck.scale.validate();
  ck.params.validate(ck.mode);
  return ck;
}

}  // namespace tsnn
