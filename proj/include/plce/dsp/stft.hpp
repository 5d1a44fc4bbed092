// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// 20 ms / 10 ms STFT at 16 kHz: 320-sample periodic Hann frames, hop 160,
// 320-point real DFT keeping bins 0..160. Analysis prepends one hop of zeros
// so that frame l covers input samples [(l-1)*160, (l+1)*160); the frame
// count L = floor((N-1)/160) + 2 makes every sample covered by two frames.
// Synthesis is weighted overlap-add normalized by the summed squared window.

#pragma once

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "plce/error.hpp"

namespace plce::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kFrameSize = 320;
inline constexpr std::size_t kHop = 160;
inline constexpr std::size_t kFftSize = 320;
inline constexpr std::size_t kNumBins = kFftSize / 2 + 1;  // 161

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

// K x L complex spectrum split into real and imaginary planes, each stored
// row-major with the frame index contiguous (index k * L + l).
struct Spectrogram {
  std::size_t bins = 0;    // K
  std::size_t frames = 0;  // L
  std::vector<double> real;
  std::vector<double> imag;

  Spectrogram() = default;
  Spectrogram(std::size_t k, std::size_t l)
      : bins(k), frames(l), real(k * l, 0.0), imag(k * l, 0.0) {}

  std::size_t size() const { return bins * frames; }
  double& re(std::size_t k, std::size_t l) { return real[k * frames + l]; }
  double& im(std::size_t k, std::size_t l) { return imag[k * frames + l]; }
  double re(std::size_t k, std::size_t l) const { return real[k * frames + l]; }
  double im(std::size_t k, std::size_t l) const { return imag[k * frames + l]; }

  bool SameShape(const Spectrogram& o) const {
    return bins == o.bins && frames == o.frames;
  }
  friend bool operator==(const Spectrogram& a, const Spectrogram& b) {
    return a.bins == b.bins && a.frames == b.frames && a.real == b.real &&
           a.imag == b.imag;
  }
};

// Periodic Hann: 0.5 - 0.5 cos(2 pi t / size).
inline std::vector<double> MakeWindow(std::size_t size) {
  if (size == 0) throw AudioError("window size must be positive");
  std::vector<double> w(size);
  for (std::size_t t = 0; t < size; ++t) {
    w[t] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(t) /
                                static_cast<double>(size));
  }
  return w;
}

inline std::size_t FrameCount(std::size_t num_samples) {
  return num_samples == 0 ? 0 : (num_samples - 1) / kHop + 2;
}

namespace detail {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

// Plans are created once, under static-local initialization since planner
// calls are not thread-safe, and executed through the new-array interface.
class FftPlans {
 public:
  static const FftPlans& Get() {
    static const FftPlans plans;
    return plans;
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
  ~FftPlans() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  void Forward(double* in, fftw_complex* out) const {
    fftw_execute_dft_r2c(forward_, in, out);
  }
  // Unnormalized; overwrites `in`.
  void Inverse(fftw_complex* in, double* out) const {
    fftw_execute_dft_c2r(inverse_, in, out);
  }

 private:
  FftPlans() {
    FftwBuffer<double> r(fftw_alloc_real(kFftSize));
    FftwBuffer<fftw_complex> c(fftw_alloc_complex(kNumBins));
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(kFftSize), r.get(), c.get(),
                                    FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(kFftSize), c.get(), r.get(),
                                    FFTW_ESTIMATE);
  }
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace detail

inline Spectrogram Stft(const Waveform& x) {
  if (x.samples.empty()) throw AudioError("stft: empty waveform");
  if (x.sample_rate != kSampleRate) throw AudioError("stft: waveform must be 16 kHz");
  const std::size_t n = x.samples.size();
  const std::size_t frames = FrameCount(n);
  static const std::vector<double> window = MakeWindow(kFrameSize);
  const auto& plans = detail::FftPlans::Get();
  detail::FftwBuffer<double> in(fftw_alloc_real(kFftSize));
  detail::FftwBuffer<fftw_complex> out(fftw_alloc_complex(kNumBins));
  Spectrogram s(kNumBins, frames);
  for (std::size_t l = 0; l < frames; ++l) {
    for (std::size_t t = 0; t < kFrameSize; ++t) {
      // Padded index l*hop + t maps to input sample l*hop + t - hop.
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l * kHop + t) -
                                 static_cast<std::ptrdiff_t>(kHop);
      const double v = (src >= 0 && static_cast<std::size_t>(src) < n)
                           ? x.samples[static_cast<std::size_t>(src)]
                           : 0.0;
      if (!std::isfinite(v)) throw AudioError("stft: non-finite sample");
      in[t] = v * window[t];
    }
    plans.Forward(in.get(), out.get());
    for (std::size_t k = 0; k < kNumBins; ++k) {
      s.re(k, l) = out[k][0];
      s.im(k, l) = out[k][1];
    }
  }
  return s;
}

inline Waveform Istft(const Spectrogram& s, std::size_t length) {
  if (s.bins != kNumBins) {
    throw AudioError("istft: expected " + std::to_string(kNumBins) +
                     " bins, got " + std::to_string(s.bins));
  }
  static const std::vector<double> window = MakeWindow(kFrameSize);
  const auto& plans = detail::FftPlans::Get();
  const std::size_t padded = s.frames == 0 ? 0 : (s.frames - 1) * kHop + kFrameSize;
  std::vector<double> acc(padded, 0.0), norm(padded, 0.0);
  detail::FftwBuffer<fftw_complex> in(fftw_alloc_complex(kNumBins));
  detail::FftwBuffer<double> out(fftw_alloc_real(kFftSize));
  for (std::size_t l = 0; l < s.frames; ++l) {
    for (std::size_t k = 0; k < kNumBins; ++k) {
      in[k][0] = s.re(k, l);
      in[k][1] = s.im(k, l);
    }
    // A real signal has purely real DC and Nyquist bins.
    in[0][1] = 0.0;
    in[kNumBins - 1][1] = 0.0;
    plans.Inverse(in.get(), out.get());
    for (std::size_t t = 0; t < kFrameSize; ++t) {
      const double v = out[t] / static_cast<double>(kFftSize);
      acc[l * kHop + t] += v * window[t];
      norm[l * kHop + t] += window[t] * window[t];
    }
  }
  Waveform y;
  y.samples.assign(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t p = i + kHop;
    if (p < padded && norm[p] > 1e-10) y.samples[i] = acc[p] / norm[p];
  }
  return y;
}

}  // namespace plce::dsp
