#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "promp/types.hpp"

namespace promp {

using Rng = std::mt19937_64;

/// Derives an independent generator from a root seed and a path of stream
/// indices, e.g. (seed, iteration, task, phase). Equal paths give equal
/// streams regardless of the order in which streams are created.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Uniform double in [0, 1) built from the raw 64-bit output, so results do
/// not depend on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal draw (Box-Muller on uniform01), library-independent.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Samples an index from an unnormalized nonnegative weight vector.
template <typename Weights>
std::size_t sample_categorical(const Weights& w, Rng& rng) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(w.size()); ++i) total += w[i];
  double u = uniform01(rng) * total;
  const auto n = static_cast<std::size_t>(w.size());
  for (std::size_t i = 0; i < n; ++i) {
    u -= w[static_cast<Eigen::Index>(i)];
    if (u < 0.0) return i;
  }
  // rounding: fall back to the last index with positive mass
  for (std::size_t i = n; i-- > 0;)
    if (w[static_cast<Eigen::Index>(i)] > 0.0) return i;
  return n - 1;
}

}  // namespace promp
