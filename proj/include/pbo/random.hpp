#ifndef PBO_RANDOM_HPP
#define PBO_RANDOM_HPP

#include <cstdint>
#include <random>

namespace pbo {

using Rng = std::mt19937_64;

// Tags that keep independent consumers of one master seed apart.
enum class StreamTag : std::uint32_t {
  kNetworkInit = 1,
  kSample = 2,
  kShuffle = 3,
  kBaseline = 4,
};

// Derives an independent generator from (seed, tag, a, b). Every random
// decision in a run is keyed this way, so the result does not depend on the
// order in which workers execute.
inline Rng substream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                     std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

}  // namespace pbo

#endif  // PBO_RANDOM_HPP
