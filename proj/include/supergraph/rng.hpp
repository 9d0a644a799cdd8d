#pragma once

#include <cstdint>

#include "supergraph/types.hpp"

namespace supergraph {

/// Deterministic splitmix64 generator. The same seed yields the same stream
/// on every platform, which keeps every seeded artifact byte-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  Scalar next_unit() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  Scalar next_uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

inline Mat random_matrix(Rng& rng, Index rows, Index cols, Scalar lo, Scalar hi) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_uniform(lo, hi);
  return m;
}

/// Fan-scaled uniform init in +-sqrt(6 / (fan_in + fan_out)).
inline Mat fan_scaled_matrix(Rng& rng, Index fan_in, Index fan_out) {
  const Scalar bound = std::sqrt(Scalar(6) / static_cast<Scalar>(fan_in + fan_out));
  return random_matrix(rng, fan_in, fan_out, -bound, bound);
}

}  // namespace supergraph
