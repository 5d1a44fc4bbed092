// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "plce/dsp/stft.hpp"
#include "plce/error.hpp"
#include "plce/nn/ops.hpp"

namespace plce::model {

// Kernel geometry shared by every encoder/decoder convolution: 2 frames by
// 3 bins, stride 2 along frequency, one bin of padding on each side.
inline constexpr std::size_t kKernelTime = 2;
inline constexpr std::size_t kKernelFreq = 3;
inline constexpr nn::ConvSpec kEncoderSpec{2, 1, 0};
// Stage-input convolution and output layer keep the frequency size.
inline constexpr nn::ConvSpec kSameSpec{1, 1, 0};
// ConvGRU gates use one frame by 3 bins, so the stage recurrence adds no
// time context.
inline constexpr std::size_t kGruKernelTime = 1;

struct ModelConfig {
  std::size_t stages = 5;
  std::size_t bins = dsp::kNumBins;
  std::size_t channels = 64;
  std::size_t encoder_depth = 5;
  std::size_t lstm_layers = 2;
  std::size_t lstm_units = 256;
  bool gate_enabled = true;
  bool srnn_enabled = true;
  bool skip_connections = true;
  // Runtime option, not stored in weight files.
  nn::NormMode norm_mode = nn::NormMode::kUtterance;

  void Validate() const {
    if (stages < 1) throw ModelError("config: at least one stage is required");
    if (bins < 1 || channels < 1 || encoder_depth < 1 || lstm_layers < 1 ||
        lstm_units < 1) {
      throw ModelError("config: all layer sizes must be positive");
    }
    (void)FrequencyChain();
  }

  // Frequency sizes entering and leaving each encoder block:
  // 161 -> 81 -> 41 -> 21 -> 11 -> 6 for the default configuration.
  std::vector<std::size_t> FrequencyChain() const {
    std::vector<std::size_t> chain{bins};
    for (std::size_t i = 0; i < encoder_depth; ++i) {
      if (chain.back() + 2 * kEncoderSpec.pad_f < kKernelFreq) {
        throw ModelError("config: encoder too deep for " + std::to_string(bins) +
                         " bins");
      }
      chain.push_back(nn::ConvOutFreq(chain.back(), kKernelFreq, kEncoderSpec));
    }
    return chain;
  }

  // Output padding that makes decoder block i (1-based) restore
  // chain[depth - i] from chain[depth - i + 1].
  std::size_t DecoderOutPad(std::size_t block) const {
    const auto chain = FrequencyChain();
    const std::size_t in = chain[encoder_depth - block + 1];
    const std::size_t target = chain[encoder_depth - block];
    const std::size_t base = nn::DeconvOutFreq(in, kKernelFreq, kEncoderSpec);
    if (target < base) throw ModelError("config: decoder cannot invert encoder");
    return target - base;
  }

  std::size_t BottleneckFeatures() const {
    return channels * FrequencyChain().back();
  }
};

// Parameter-name prefix of stage q.
inline std::string CellPrefix(std::size_t q) { return "cell" + std::to_string(q); }

// Small configuration for tests and desk-scale training.
inline ModelConfig TinyConfig(std::size_t stages = 5) {
  ModelConfig c;
  c.stages = stages;
  c.channels = 4;
  c.lstm_units = 16;
  return c;
}

}  // namespace plce::model
