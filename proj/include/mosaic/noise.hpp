// Keyed Gaussian noise. Every (seed, view, timestep, stream) tuple owns an
// independent engine, so results never depend on the order in which channels
// are advanced.
#pragma once

#include <cstdint>
#include <random>

#include "mosaic/image.hpp"

namespace mosaic {

enum class NoiseStream : std::uint32_t { kInitial = 0, kStep = 1 };

inline std::mt19937_64 keyed_engine(std::uint64_t seed, int view_id, int t, NoiseStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(view_id),
                    static_cast<std::uint32_t>(t),
                    static_cast<std::uint32_t>(stream),
                    0x6d6f7361u};
  return std::mt19937_64(seq);
}

inline LatentImage keyed_normal(int height, int width, int channels, std::uint64_t seed, int view_id,
                                int t, NoiseStream stream) {
  LatentImage out(height, width, channels);
  auto engine = keyed_engine(seed, view_id, t, stream);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : out.data()) v = normal(engine);
  return out;
}

}  // namespace mosaic
