#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace panelmc {

// SplitMix64 step, used only to derive stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic seed for a named stream. Every random quantity in the
// simulation harness gets its own (stream, index) pair so that parallel
// replications reproduce the serial run bit for bit.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  std::uint64_t s = master ^ (0xA0761D6478BD642FULL * (stream + 1));
  std::uint64_t first = splitmix64(s);
  s ^= 0xE7037ED1A0B428DBULL * (index + 1);
  return first ^ splitmix64(s);
}

// mt19937_64 with explicit uniform and Box-Muller normal draws. The normal
// variate consumes exactly two uniforms per call (no cached spare), so the
// draw sequence is a pure function of the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; avoids log(0) in Box-Muller.
  double uniform_pos() { return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53; }

  double normal(double mean = 0.0, double sd = 1.0) {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return gen_() % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace panelmc
