#pragma once

#include <cstdint>
#include <random>

namespace tsr {

/// Named sub-streams so that independent draws never share a generator.
enum class Stream : std::uint32_t {
  kScenario = 1,
  kDensityNoise = 2,
  kPositionNoise = 3,
  kCollocation = 4,
  kOdeInstants = 5,
  kThetaInit = 6,
  kPhiInit = 7,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

}  // namespace tsr
