// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Mixture synthesis at a prescribed SNR and the SNR-ramp intermediate
// targets: target q (q < Q) keeps the clean signal and attenuates the mixing
// noise by 10*q dB; target Q is the clean signal itself.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "plce/dsp/stft.hpp"
#include "plce/error.hpp"

namespace plce::training {

using dsp::Spectrogram;
using dsp::Waveform;

inline constexpr double kStageSnrStepDb = 10.0;
inline constexpr double kMinTrainSnrDb = -5.0;
inline constexpr double kMaxTrainSnrDb = 30.0;
inline constexpr double kTrainSnrStepDb = 2.0;

inline double MeanPower(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

inline double SnrDb(const std::vector<double>& signal, const std::vector<double>& noise) {
  return 10.0 * std::log10(MeanPower(signal) / MeanPower(noise));
}

inline bool InTrainingRange(double snr_db) {
  return snr_db >= kMinTrainSnrDb && snr_db <= kMaxTrainSnrDb;
}

// Grid -5, -3, ..., 29 dB.
inline bool OnTrainingGrid(double snr_db) {
  if (!InTrainingRange(snr_db)) return false;
  const double steps = (snr_db - kMinTrainSnrDb) / kTrainSnrStepDb;
  return std::abs(steps - std::round(steps)) < 1e-9;
}

struct MixResult {
  Waveform mixture;
  Waveform scaled_noise;
  double gain = 0.0;
  std::size_t noise_offset = 0;  // start of the random cut in the noise source
};

// Cuts a clean-length segment from `noise` at a seeded random offset and
// scales it by g = sqrt(P_clean / (P_noise * 10^(snr/10))).
inline MixResult MixAtSnr(const Waveform& clean, const Waveform& noise, double snr_db,
                          std::uint64_t seed) {
  if (clean.samples.empty()) throw DataError("mix: empty clean signal");
  if (noise.samples.size() < clean.samples.size()) {
    throw DataError("mix: noise source shorter than clean signal");
  }
  if (!std::isfinite(snr_db)) throw DataError("mix: SNR must be finite");
  MixResult r;
  const std::size_t span = noise.samples.size() - clean.samples.size();
  std::mt19937_64 rng(seed);
  r.noise_offset = span == 0 ? 0 : static_cast<std::size_t>(rng() % (span + 1));
  std::vector<double> cut(noise.samples.begin() + static_cast<std::ptrdiff_t>(r.noise_offset),
                          noise.samples.begin() +
                              static_cast<std::ptrdiff_t>(r.noise_offset + clean.samples.size()));
  const double p_clean = MeanPower(clean.samples);
  const double p_noise = MeanPower(cut);
  if (!(p_clean > 0.0)) throw DataError("mix: clean signal is silent");
  if (!(p_noise > 0.0)) throw DataError("mix: noise segment is silent");
  r.gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  r.scaled_noise.samples.resize(cut.size());
  r.mixture.samples.resize(cut.size());
  for (std::size_t i = 0; i < cut.size(); ++i) {
    r.scaled_noise.samples[i] = r.gain * cut[i];
    r.mixture.samples[i] = clean.samples[i] + r.scaled_noise.samples[i];
  }
  return r;
}

// Amplitude factor applied to the mixing noise in target q (q < Q).
inline double TargetNoiseFactor(std::size_t q) {
  return std::pow(10.0, -kStageSnrStepDb * static_cast<double>(q) / 20.0);
}

// Time-domain stage targets; index q-1 holds target q.
inline std::vector<Waveform> SynthTargetWaveforms(const Waveform& clean,
                                                  const Waveform& scaled_noise,
                                                  std::size_t stages) {
  if (stages < 1) throw DataError("targets: at least one stage is required");
  if (clean.samples.size() != scaled_noise.samples.size()) {
    throw DataError("targets: clean and noise lengths differ");
  }
  std::vector<Waveform> out;
  for (std::size_t q = 1; q <= stages; ++q) {
    Waveform t = clean;
    if (q < stages) {
      const double f = TargetNoiseFactor(q);
      for (std::size_t i = 0; i < t.samples.size(); ++i) {
        t.samples[i] += f * scaled_noise.samples[i];
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Spectrogram> SynthTargets(const Waveform& clean,
                                             const Waveform& scaled_noise,
                                             std::size_t stages) {
  std::vector<Spectrogram> out;
  for (const auto& w : SynthTargetWaveforms(clean, scaled_noise, stages)) {
    out.push_back(dsp::Stft(w));
  }
  return out;
}

}  // namespace plce::training
