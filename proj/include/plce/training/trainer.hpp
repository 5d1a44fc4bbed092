// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "plce/csv.hpp"
#include "plce/model/model.hpp"
#include "plce/nn/init.hpp"
#include "plce/training/mixing.hpp"
#include "plce/training/optim.hpp"

namespace plce::training {

// sum_q q * mse(S~^q, S^q) / sum_q q, the mean taken over every RI element.
template <typename T>
nn::Var<T> WeightedLoss(const std::vector<nn::Var<T>>& estimates,
                        const std::vector<nn::Var<T>>& targets) {
  if (estimates.empty() || estimates.size() != targets.size()) {
    throw ShapeError("weighted loss: need matching, non-empty stage lists");
  }
  const std::size_t Q = estimates.size();
  const double norm = static_cast<double>(Q * (Q + 1) / 2);
  nn::Var<T> total;
  for (std::size_t q = 1; q <= Q; ++q) {
    nn::Var<T> term = nn::Scale(nn::MeanSquaredError(estimates[q - 1], targets[q - 1]),
                                static_cast<T>(static_cast<double>(q) / norm));
    total = total ? nn::Add(total, term) : term;
  }
  return total;
}

struct TrainingExample {
  std::string id;
  double snr_db = 0.0;
  dsp::Spectrogram noisy;
  std::vector<dsp::Spectrogram> targets;  // S^1 .. S^Q
};

inline TrainingExample MakeExample(std::string id, const dsp::Waveform& clean,
                                   const dsp::Waveform& noise, double snr_db,
                                   std::uint64_t seed, std::size_t stages) {
  MixResult mix = MixAtSnr(clean, noise, snr_db, seed);
  TrainingExample ex;
  ex.id = std::move(id);
  ex.snr_db = snr_db;
  ex.noisy = dsp::Stft(mix.mixture);
  ex.targets = SynthTargets(clean, mix.scaled_noise, stages);
  return ex;
}

struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t batch = 8;
  AdamOptions adam;
  std::uint64_t seed = 20210301;
  std::size_t max_steps = 0;  // 0: no limit
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  model::ModelWeights weights;
  std::vector<EpochStats> curve;
  std::vector<double> step_losses;  // batch loss before each update
};

// Differentiable forward over all stages plus the weighted loss of one
// utterance.
template <typename T>
nn::Var<T> UtteranceLoss(const model::Network<T>& net, const TrainingExample& ex) {
  const std::size_t Q = net.config().stages;
  if (ex.targets.size() != Q) {
    throw DataError("example " + ex.id + " has " + std::to_string(ex.targets.size()) +
                    " targets, model has " + std::to_string(Q) + " stages");
  }
  auto noisy = nn::Var<T>::Constant(model::ToTensor<T>(ex.noisy));
  nn::Var<T> prev = noisy;
  nn::Var<T> hidden;
  std::vector<nn::Var<T>> est, tgt;
  for (std::size_t q = 1; q <= Q; ++q) {
    auto out = net.Stage(q, noisy, prev, hidden);
    est.push_back(out.estimate);
    tgt.push_back(nn::Var<T>::Constant(model::ToTensor<T>(ex.targets[q - 1])));
    prev = out.estimate;
    hidden = out.hidden;
  }
  return WeightedLoss(est, tgt);
}

inline double EvaluateLoss(const model::ModelConfig& config,
                           const model::ModelWeights& weights,
                           const std::vector<TrainingExample>& set) {
  if (set.empty()) throw DataError("evaluation set is empty");
  std::map<std::string, nn::Var<float>> constants;
  for (const auto& [name, t] : weights.params()) {
    constants.emplace(name, nn::Var<float>::Constant(t));
  }
  model::Network<float> net(config, [&](const std::string& name) {
    auto it = constants.find(name);
    if (it == constants.end()) throw ModelError("missing parameter " + name);
    return it->second;
  });
  double sum = 0.0;
  for (const auto& ex : set) sum += UtteranceLoss(net, ex).value()[0];
  return sum / static_cast<double>(set.size());
}

// Adam on the stage-weighted loss. A step averages the loss over a batch of
// utterances; each utterance runs as its own graph, so no padding is needed.
// The learning rate is halved by LrSchedule on the validation loss (the
// training set stands in when `val` is empty). Deterministic in options.seed.
inline TrainResult TrainLoop(const model::ModelConfig& config,
                             const std::vector<TrainingExample>& train,
                             const std::vector<TrainingExample>& val,
                             const TrainOptions& options) {
  if (train.empty()) throw DataError("training set is empty");
  if (options.batch == 0) throw DataError("batch size must be positive");
  model::ModelWeights init = model::BuildModel(config, nn::SplitSeed(options.seed, 0));
  std::map<std::string, std::shared_ptr<nn::Node<float>>> params;
  for (auto& [name, t] : init.params()) {
    auto node = std::make_shared<nn::Node<float>>();
    node->value = std::move(t);
    node->requires_grad = true;
    params.emplace(name, std::move(node));
  }

  std::mt19937_64 shuffle_rng(nn::SplitSeed(options.seed, 2));
  std::vector<std::size_t> order(train.size());
  AdamState adam;
  AdamOptions adam_opt = options.adam;
  LrSchedule schedule;
  TrainResult result;
  const auto& val_set = val.empty() ? train : val;

  auto snapshot = [&] {
    model::ParamMap m;
    for (const auto& [name, node] : params) m.emplace(name, node->value);
    return model::ModelWeights(std::move(m));
  };

  std::size_t steps = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng() % i]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      if (options.max_steps && steps >= options.max_steps) break;
      const std::size_t end = std::min(order.size(), start + options.batch);
      nn::Tape<float> tape;
      model::Network<float> net(config, [&](const std::string& name) {
        auto it = params.find(name);
        if (it == params.end()) throw ModelError("missing parameter " + name);
        return tape.Bind(it->second);
      });
      nn::Var<float> batch_loss;
      for (std::size_t i = start; i < end; ++i) {
        nn::Var<float> l = UtteranceLoss(net, train[order[i]]);
        batch_loss = batch_loss ? nn::Add(batch_loss, l) : l;
      }
      batch_loss = nn::Scale(batch_loss, 1.0f / static_cast<float>(end - start));
      for (auto& [name, node] : params) node->ZeroGrad();
      tape.Backward(batch_loss);
      AdamStep(params, adam, adam_opt);
      const double lv = batch_loss.value()[0];
      result.step_losses.push_back(lv);
      epoch_loss += lv;
      ++batches;
      ++steps;
    }
    if (batches == 0) break;
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = epoch_loss / static_cast<double>(batches);
    st.val_loss = EvaluateLoss(config, snapshot(), val_set);
    st.lr = adam_opt.lr;
    result.curve.push_back(st);
    adam_opt.lr *= schedule.Observe(st.val_loss);
  }
  result.weights = snapshot();
  return result;
}

// epoch,train_loss,val_loss,lr
inline void WriteLossCurveCsv(std::ostream& os, const std::vector<EpochStats>& curve) {
  os << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << csv::FormatNumber(e.train_loss) << ','
       << csv::FormatNumber(e.val_loss) << ',' << csv::FormatNumber(e.lr) << '\n';
  }
}

}  // namespace plce::training
