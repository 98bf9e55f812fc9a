#pragma once
// Deterministic randomness. Every random draw in a run flows from one root
// seed through tagged splitting, and the uniform mapping is spelled out by
// hand: std::uniform_real_distribution is implementation-defined, which would
// break bit-identical reruns across standard libraries.

#include <cstdint>
#include <random>
#include <string_view>

namespace tsnn {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Child seed for one named consumer ("xavier", "colloc" per stage, ...).
/// Distinct (tag, index) pairs give independent streams from the same root.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::uint64_t state = root ^ h;
  std::uint64_t out = splitmix64(state);
  state ^= index;
  out ^= splitmix64(state);
  return out;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform on the open interval (0,1): top 52 bits, offset half an ulp so
  /// neither endpoint is reachable.
  double uniform01() {
    return (static_cast<double>(eng_() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

 private:
  std::mt19937_64 eng_;  // output sequence fixed by the standard
};

}  // namespace tsnn
