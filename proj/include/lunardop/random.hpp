#ifndef LUNARDOP_RANDOM_HPP
#define LUNARDOP_RANDOM_HPP

#include <cstdint>
#include <random>

namespace lunardop {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Streams label the consumer
/// (trial index, noise axis, ...), so draws never depend on call order
/// elsewhere.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6c756e61u};
  return Rng(seq);
}

/// Sub-seed derived from a parent seed, for APIs that take a plain seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_rng(seed, stream);
  return rng();
}

}  // namespace lunardop

#endif  // LUNARDOP_RANDOM_HPP
