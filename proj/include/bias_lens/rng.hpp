#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace bias_lens {

// Seeded generator with platform-independent draws. std::mt19937's raw output
// is fully specified by the standard, but the std distributions are not, so
// bounded integers and reals are derived from raw 32-bit words here.
class Rng {
 public:
  explicit Rng(std::uint32_t seed) : engine_(seed) {}

  std::uint32_t next_u32() { return static_cast<std::uint32_t>(engine_()); }

  // Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::size_t uniform_index(std::size_t bound);

  // Uniform real in [0, 1) with 53 random bits.
  double uniform_real();

  // Uniform real in [lo, hi).
  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

 private:
  std::mt19937 engine_;
};

}  // namespace bias_lens
