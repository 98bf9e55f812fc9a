#pragma once
// Shared error types and round-trip numeric formatting.

#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace tsnn {

/// Bad or inconsistent run configuration: unknown keys, invalid values,
/// checkpoint shape mismatches. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training. The CLI maps this to exit
/// code 3.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reference integrator failure (step size underflow, Newton stall). The CLI
/// maps this to exit code 4.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest decimal form that strtod parses back to identical bits. Tries
/// increasing precision; 17 significant digits always round-trip for IEEE
/// doubles, so the loop terminates.
inline std::string fmt_double(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

/// Hexadecimal float form; exact by construction. Used in checkpoints where
/// readability matters less than an obviously lossless round trip.
inline std::string fmt_hex(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

/// Strict double parse: the whole token must be consumed. Accepts both the
/// decimal and hexadecimal forms above.
inline double parse_double(const std::string& s) {
  if (s.empty()) throw ConfigError("empty numeric token");
  char* end = nullptr;
  double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw ConfigError("malformed numeric token '" + s + "'");
  return x;
}

}  // namespace tsnn
