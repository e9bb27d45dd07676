#pragma once

// Seeded random streams. Every chain, replicate and posterior draw gets its
// own engine seeded from (seed, stream ids), so results do not depend on the
// order in which parallel tasks run.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace concord {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> streams = {}) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto s : streams) {
    words.push_back(static_cast<std::uint32_t>(s));
    words.push_back(static_cast<std::uint32_t>(s >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline double std_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }
inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Gamma with the given shape and rate.
inline double gamma_draw(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

/// Inverse-Gamma(shape, scale): density proportional to x^{-shape-1} e^{-scale/x}.
inline double inv_gamma_draw(Rng& rng, double shape, double scale) { return scale / gamma_draw(rng, shape, 1.0); }

}  // namespace concord
