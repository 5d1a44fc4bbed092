// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "plce/nn/tensor.hpp"

namespace plce::nn {

// Xavier/Glorot uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
// Values are drawn with a hand-rolled uniform map over mt19937_64 output so
// that weights are identical across standard library implementations.
template <typename T>
void XavierUniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out,
                   std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
    v = static_cast<T>((2.0 * u - 1.0) * a);
  }
}

// Uniform [lo, hi) with the same portable mapping.
inline double UniformDraw(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Standard normal via Box-Muller on the portable uniform draw.
inline double NormalDraw(std::mt19937_64& rng) {
  double u1 = UniformDraw(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = UniformDraw(rng, 0.0, 1.0);
  const double u2 = UniformDraw(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Derives independent child seeds from one root seed (splitmix64).
inline std::uint64_t SplitSeed(std::uint64_t root, std::uint64_t purpose) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (purpose + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace plce::nn
