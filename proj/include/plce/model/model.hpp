// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "plce/dsp/stft.hpp"
#include "plce/model/network.hpp"
#include "plce/model/weights.hpp"

namespace plce::model {

// [2, K, L] RI map, channel 0 real.
template <typename T = float>
nn::Tensor<T> ToTensor(const dsp::Spectrogram& s) {
  nn::Tensor<T> t(nn::Shape{2, s.bins, s.frames});
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<T>(s.real[i]);
    t[n + i] = static_cast<T>(s.imag[i]);
  }
  return t;
}

template <typename T>
dsp::Spectrogram FromTensor(const nn::Tensor<T>& t) {
  nn::CheckRank(t.shape(), 3, "spectrogram");
  if (t.dim(0) != 2) throw ShapeError("spectrogram tensor needs 2 channels");
  dsp::Spectrogram s(t.dim(1), t.dim(2));
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    s.real[i] = static_cast<double>(t[i]);
    s.imag[i] = static_cast<double>(t[n + i]);
  }
  return s;
}

// Inference-time recurrence carried between stages.
struct StageState {
  std::size_t q = 1;             // next stage to run
  nn::Tensor<float> hidden;      // SRNN state; empty means all-zero
  dsp::Spectrogram previous;     // S~^{q-1}; the noisy input before stage 1

  static StageState Initial(const dsp::Spectrogram& noisy) {
    StageState s;
    s.previous = noisy;
    return s;
  }
};

struct StageResult {
  dsp::Spectrogram estimate;
  StageState state;
};

// Read-only inference wrapper. Safe to share across threads.
class Model {
 public:
  explicit Model(ModelWeights weights,
                 nn::NormMode norm_mode = nn::NormMode::kUtterance)
      : Model(InferConfig(weights), weights, norm_mode) {}

  Model(ModelConfig config, const ModelWeights& weights,
        nn::NormMode norm_mode = nn::NormMode::kUtterance)
      : config_(std::move(config)) {
    config_.norm_mode = norm_mode;
    for (const ParamSpec& p : ParamLayout(config_)) {
      const auto& t = weights.at(p.name);
      if (t.shape() != p.shape) {
        throw ModelError("parameter " + p.name + " has shape " +
                         nn::ShapeString(t.shape()) + ", expected " +
                         nn::ShapeString(p.shape));
      }
      auto node = std::make_shared<nn::Node<float>>();
      node->value = t;
      params_.emplace(p.name, std::move(node));
    }
  }

  const ModelConfig& config() const { return config_; }
  std::size_t stages() const { return config_.stages; }

  StageResult ForwardStage(const StageState& state, const dsp::Spectrogram& noisy) const {
    if (state.q < 1 || state.q > config_.stages) {
      throw ModelError("stage overflow: stage " + std::to_string(state.q) +
                       " requested, model has " + std::to_string(config_.stages));
    }
    if (!state.previous.SameShape(noisy)) {
      throw ShapeError("previous estimate and noisy input differ in shape");
    }
    Network<float> net(config_, [this](const std::string& name) {
      auto it = params_.find(name);
      if (it == params_.end()) throw ModelError("missing parameter " + name);
      return nn::Var<float>(it->second, nullptr);
    });
    nn::Var<float> hidden;
    if (!state.hidden.empty()) hidden = nn::Var<float>::Constant(state.hidden);
    auto out = net.Stage(state.q, nn::Var<float>::Constant(ToTensor(noisy)),
                         nn::Var<float>::Constant(ToTensor(state.previous)), hidden);
    StageResult r;
    r.estimate = FromTensor(out.estimate.value());
    r.state.q = state.q + 1;
    if (config_.srnn_enabled) r.state.hidden = out.hidden.value();
    r.state.previous = r.estimate;
    return r;
  }

  // All Q stage estimates S~^1 .. S~^Q.
  std::vector<dsp::Spectrogram> ForwardAll(const dsp::Spectrogram& noisy) const {
    std::vector<dsp::Spectrogram> out;
    StageState state = StageState::Initial(noisy);
    for (std::size_t q = 1; q <= config_.stages; ++q) {
      StageResult r = ForwardStage(state, noisy);
      out.push_back(std::move(r.estimate));
      state = std::move(r.state);
    }
    return out;
  }

 private:
  ModelConfig config_;
  std::map<std::string, std::shared_ptr<nn::Node<float>>> params_;
};

}  // namespace plce::model
