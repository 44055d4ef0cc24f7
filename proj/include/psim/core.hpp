// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace psim {

using Vec3 = std::array<double, 3>;

/// Dense row-major matrix. Small enough workloads that we keep this
/// hand-rolled instead of pulling in a linear algebra package; the
/// quantized integer paths need exact control over every operation anyway.
template <typename T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

  T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  bool operator==(const Mat&) const = default;
};

using MatD = Mat<double>;
using MatI = Mat<std::int32_t>;

// ---------------------------------------------------------------------------
// Seeded randomness.
//
// Every random quantity in the artifact flows from one global seed through
// named sub-streams so that reports are reproducible bit for bit. The stream
// derivation and the value derivation below are part of the file-format
// contract and must not change within a major version:
//
//   derive_seed(base, tag) = splitmix64_mix(base XOR fnv1a64(tag))
//   uniform01(rng)         = (rng() >> 11) * 2^-53          (in [0,1))
//   normal pair            = Box-Muller on two uniform01 draws
//
// mt19937_64 is bit-exact across platforms, so the only residual platform
// dependence is libm (log/cos/sin) in the Gaussian path.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Named sub-stream seed from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return splitmix64_mix(base ^ fnv1a64(tag));
}

/// Uniform double in [0,1) from the top 53 bits of one engine draw.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo,hi).
inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

}  // namespace psim
