#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qope/core/error.hpp"

namespace qope::core {

// Deterministic hierarchical random stream.
//
// Every stochastic component receives its own stream, derived from a parent
// by fork(child) or fork(label). Forking uses only the stream identity (not
// the draw position), so the draw sequence of a child never depends on how
// much the parent has consumed. Identical (seed, fork path) therefore yields
// identical sequences across runs and thread schedules.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : id_(mix(seed ^ kDomain)), state_(id_) {}

  RngStream fork(std::uint64_t child) const {
    return RngStream(mix(id_ + mix(child + 0x9E3779B97F4A7C15ull)), true);
  }

  RngStream fork(std::string_view label) const {
    // FNV-1a over the label bytes, then the same derivation as fork(child).
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : label) {
      h ^= c;
      h *= 0x100000001B3ull;
    }
    return fork(h);
  }

  std::uint64_t next_u64() {
    // splitmix64
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Standard normal via Box-Muller, caching the spare draw.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Gamma(shape, 1) by Marsaglia-Tsang; the shape<1 case uses the boost
  // Gamma(a) = Gamma(a+1) * U^{1/a}.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw ConfigError("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform_pos();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  double chi_square(double df) { return 2.0 * gamma(0.5 * df); }

  // Student-t via Z / sqrt(V/df); supports non-integer df.
  double student_t(double df) { return normal() / std::sqrt(chi_square(df) / df); }

  // Index draw from an unnormalized nonnegative weight vector.
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw NumericalError("categorical: nonpositive total weight");
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t id() const { return id_; }

private:
  RngStream(std::uint64_t id, bool) : id_(id), state_(id) {}

  static constexpr std::uint64_t kDomain = 0xA0761D6478BD642Full;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t id_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace qope::core
