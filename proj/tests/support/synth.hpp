// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Deterministic synthetic speech-like and noise signals for tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "plce/dsp/stft.hpp"

namespace plce::synth {

// Harmonic tone with a slow amplitude envelope and a seeded pitch.
inline dsp::Waveform Voiced(std::size_t n, std::uint64_t seed, double level = 0.2) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> f0d(110.0, 260.0), phase(0.0, 2.0 * std::numbers::pi);
  const double f0 = f0d(rng);
  double ph[4];
  for (double& p : ph) p = phase(rng);
  dsp::Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / dsp::kSampleRate;
    const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 3.0 * t);
    double v = 0.0;
    for (int h = 1; h <= 4; ++h) v += std::sin(2.0 * std::numbers::pi * f0 * h * t + ph[h - 1]) / h;
    w.samples[i] = level * env * v;
  }
  return w;
}

inline dsp::Waveform WhiteNoise(std::size_t n, std::uint64_t seed, double level = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, level);
  dsp::Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = g(rng);
  return w;
}

}  // namespace plce::synth
