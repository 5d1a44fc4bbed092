// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// One stage of the progressive network as a differentiable graph:
//
//   h^ = PReLU(IN(conv([X_r, X_i, S_r, S_i])))          shared stage input
//   h  = ConvGRU(h^, h_prev)   (or h^ without the SRNN)  shared recurrence
//   e_i = PReLU(IN(GLU(e_{i-1}))),  e_0 = h              stage encoder
//   z  = proj(LSTM(LSTM(flatten(e_D))))                  stage bottleneck
//   d_i = PReLU(IN(GLU^T([d_{i-1}, e_{D-i+1}])))         stage decoder
//   S  = conv(d_D)                                       2-channel RI output

#pragma once

#include <functional>
#include <optional>
#include <string>

#include "plce/model/config.hpp"
#include "plce/nn/layers.hpp"
#include "plce/nn/lstm.hpp"

namespace plce::model {

template <typename T>
class Network {
 public:
  using Lookup = std::function<nn::Var<T>(const std::string&)>;

  struct StageOutput {
    nn::Var<T> estimate;  // [2, K, L]
    nn::Var<T> hidden;    // [C, K, L]; the stage input map without SRNN
  };

  Network(ModelConfig config, Lookup lookup)
      : config_(std::move(config)), param_(std::move(lookup)) {
    config_.Validate();
  }

  const ModelConfig& config() const { return config_; }

  // Runs stage q (1-based). `noisy` and `previous` are [2, K, L] RI maps;
  // `hidden` is the previous SRNN state, or an empty Var before stage 1.
  StageOutput Stage(std::size_t q, const nn::Var<T>& noisy,
                    const nn::Var<T>& previous, const nn::Var<T>& hidden) const {
    if (q < 1 || q > config_.stages) {
      throw ModelError("stage " + std::to_string(q) + " outside 1.." +
                       std::to_string(config_.stages));
    }
    if (noisy.shape().size() != 3 || noisy.shape()[0] != 2 ||
        noisy.shape()[1] != config_.bins || noisy.shape() != previous.shape()) {
      throw ShapeError("stage input must be two matching (2, " +
                       std::to_string(config_.bins) + ", L) maps");
    }
    const std::size_t C = config_.channels;
    const std::size_t L = noisy.shape()[2];

    nn::Var<T> stage_in = nn::ConcatChannels(noisy, previous);
    nn::Var<T> h = NormAct(nn::Conv2d(stage_in, P("srnn.conv.w"), P("srnn.conv.b"), kSameSpec),
                           "srnn");
    if (config_.srnn_enabled) {
      nn::Var<T> h_prev = hidden ? hidden
                                 : nn::Var<T>::Constant(nn::Tensor<T>(nn::Shape{C, config_.bins, L}));
      nn::ConvGruParams<T> gru{Conv("srnn.gru.z"), Conv("srnn.gru.r"), Conv("srnn.gru.h")};
      h = nn::ConvGruStep(h_prev, h, gru, kSameSpec);
    }

    const std::string cell = CellPrefix(q);
    std::vector<nn::Var<T>> skips;
    nn::Var<T> e = h;
    for (std::size_t i = 1; i <= config_.encoder_depth; ++i) {
      e = Block(e, cell + ".enc" + std::to_string(i), kEncoderSpec, false);
      skips.push_back(e);
    }

    const auto chain = config_.FrequencyChain();
    nn::Var<T> seq = nn::Reshape(e, nn::Shape{C * chain.back(), L});
    for (std::size_t j = 1; j <= config_.lstm_layers; ++j) {
      const std::string p = cell + ".lstm" + std::to_string(j);
      seq = nn::LstmLayer(seq, P(p + ".w_ih"), P(p + ".w_hh"), P(p + ".b"));
    }
    seq = nn::Linear(seq, P(cell + ".proj.w"), P(cell + ".proj.b"));
    nn::Var<T> d = nn::Reshape(seq, nn::Shape{C, chain.back(), L});

    for (std::size_t i = 1; i <= config_.encoder_depth; ++i) {
      nn::Var<T> in = config_.skip_connections
                          ? nn::ConcatChannels(d, skips[config_.encoder_depth - i])
                          : d;
      nn::ConvSpec spec = kEncoderSpec;
      spec.out_pad_f = config_.DecoderOutPad(i);
      d = Block(in, cell + ".dec" + std::to_string(i), spec, true);
    }
    nn::Var<T> out = nn::Conv2d(d, P(cell + ".out.w"), P(cell + ".out.b"), kSameSpec);
    return {out, h};
  }

 private:
  nn::Var<T> P(const std::string& name) const { return param_(name); }

  nn::ConvParams<T> Conv(const std::string& prefix) const {
    return {P(prefix + ".w"), P(prefix + ".b")};
  }

  nn::Var<T> NormAct(const nn::Var<T>& x, const std::string& prefix) const {
    nn::Var<T> y = nn::InstanceNorm(x, P(prefix + ".norm.gamma"),
                                    P(prefix + ".norm.beta"), config_.norm_mode);
    return nn::PRelu(y, P(prefix + ".prelu.alpha"));
  }

  nn::Var<T> Block(const nn::Var<T>& x, const std::string& prefix,
                   nn::ConvSpec spec, bool transposed) const {
    std::optional<nn::ConvParams<T>> gate;
    if (config_.gate_enabled) gate = Conv(prefix + ".gate");
    return NormAct(nn::Glu(x, Conv(prefix), gate, spec, transposed), prefix);
  }

  ModelConfig config_;
  Lookup param_;
};

}  // namespace plce::model
