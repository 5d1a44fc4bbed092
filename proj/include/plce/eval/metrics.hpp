// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "plce/dsp/stft.hpp"
#include "plce/error.hpp"

namespace plce::eval {

inline constexpr double kSiSdrCeilingDb = 100.0;
inline constexpr double kSegSnrFloorDb = -10.0;
inline constexpr double kSegSnrCeilingDb = 35.0;
// Reference frames at or below -60 dBFS mean power are treated as silence.
inline constexpr double kVoicedFloorDbfs = -60.0;

namespace detail {
inline void CheckPair(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size()) throw Error("metric: estimate and reference lengths differ");
  if (ref.empty()) throw Error("metric: empty signals");
}
}  // namespace detail

// Scale-invariant SDR: 10 log10(|a s|^2 / |a s - e|^2), a = <e,s>/|s|^2.
inline double SiSdr(const std::vector<double>& estimate, const std::vector<double>& reference) {
  detail::CheckPair(estimate, reference);
  double ss = 0.0, es = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ss += reference[i] * reference[i];
    es += estimate[i] * reference[i];
  }
  if (!(ss > 0.0)) throw Error("si-sdr: silent reference");
  const double alpha = es / ss;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = alpha * reference[i];
    const double r = t - estimate[i];
    target += t * t;
    residual += r * r;
  }
  if (residual <= target * 1e-10) return kSiSdrCeilingDb;
  return std::min(kSiSdrCeilingDb, 10.0 * std::log10(target / residual));
}

// Per-frame SNR of each voiced reference frame, clamped to [-10, 35] dB.
inline std::vector<double> SegmentSnrs(const std::vector<double>& estimate,
                                       const std::vector<double>& reference,
                                       std::size_t frame = dsp::kFrameSize,
                                       std::size_t hop = dsp::kHop) {
  detail::CheckPair(estimate, reference);
  if (frame == 0 || hop == 0) throw Error("seg-snr: frame and hop must be positive");
  const double floor_power = std::pow(10.0, kVoicedFloorDbfs / 10.0);
  std::vector<double> out;
  for (std::size_t start = 0; start + frame <= reference.size(); start += hop) {
    double sig = 0.0, err = 0.0;
    for (std::size_t i = start; i < start + frame; ++i) {
      sig += reference[i] * reference[i];
      const double d = reference[i] - estimate[i];
      err += d * d;
    }
    if (sig / static_cast<double>(frame) <= floor_power) continue;
    const double snr = err > 0.0 ? 10.0 * std::log10(sig / err) : kSegSnrCeilingDb;
    out.push_back(std::clamp(snr, kSegSnrFloorDb, kSegSnrCeilingDb));
  }
  return out;
}

inline double SegSnr(const std::vector<double>& estimate, const std::vector<double>& reference,
                     std::size_t frame = dsp::kFrameSize, std::size_t hop = dsp::kHop) {
  const auto snrs = SegmentSnrs(estimate, reference, frame, hop);
  if (snrs.empty()) throw Error("seg-snr: reference has no voiced frames");
  double s = 0.0;
  for (double v : snrs) s += v;
  return s / static_cast<double>(snrs.size());
}

}  // namespace plce::eval
