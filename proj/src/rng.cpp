#include "bias_lens/rng.hpp"

#include <limits>

#include "bias_lens/error.hpp"

namespace bias_lens {

std::size_t Rng::uniform_index(std::size_t bound) {
  if (bound == 0) throw ValidationError("uniform_index: bound must be positive");
  constexpr std::uint64_t kRange = std::uint64_t{1} << 32;
  if (bound > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("uniform_index: bound exceeds 32 bits");
  }
  const std::uint64_t limit = (kRange / bound) * bound;
  while (true) {
    const std::uint64_t x = next_u32();
    if (x < limit) return static_cast<std::size_t>(x % bound);
  }
}

double Rng::uniform_real() {
  const std::uint64_t a = next_u32() >> 5;
  const std::uint64_t b = next_u32() >> 6;
  return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) / 9007199254740992.0;
}

}  // namespace bias_lens
