// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <random>

#include "plce/model/model.hpp"

namespace plce::model {
namespace {

dsp::Spectrogram RandomSpec(std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  dsp::Spectrogram s(dsp::kNumBins, frames);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.real[i] = g(rng);
    s.imag[i] = g(rng);
  }
  return s;
}

std::size_t LayoutCount(const ModelConfig& c) {
  std::size_t n = 0;
  for (const auto& p : ParamLayout(c)) n += nn::NumElements(p.shape);
  return n;
}

TEST(Config, FrequencyChainAndDecoderPads) {
  ModelConfig c;
  EXPECT_EQ(c.FrequencyChain(), (std::vector<std::size_t>{161, 81, 41, 21, 11, 6}));
  for (std::size_t i = 1; i <= 5; ++i) EXPECT_EQ(c.DecoderOutPad(i), 0u);
  EXPECT_EQ(c.BottleneckFeatures(), 384u);
  c.bins = 160;  // 160 -> 80 -> 40 -> 20 -> 10 -> 5; the decoder needs padding
  EXPECT_EQ(c.DecoderOutPad(1), 1u);  // 5 -> 9, padded to 10
  EXPECT_EQ(c.FrequencyChain().back(), 5u);
}

TEST(Config, RejectsZeroStages) {
  ModelConfig c;
  c.stages = 0;
  EXPECT_THROW(c.Validate(), ModelError);
  EXPECT_THROW(BuildModel(c, 1), ModelError);
}

TEST(Weights, ToyParameterCountByHand) {
  ModelConfig c;
  c.stages = 1;
  c.channels = 2;
  c.lstm_units = 3;
  const std::size_t conv_in = 2 * 4 * 2 * 3 + 2;           // srnn.conv: 50
  const std::size_t norm_act = 2 + 2 + 1;                  // gamma, beta, alpha
  const std::size_t gru = 3 * (2 * 4 * 1 * 3 + 2);         // z, r, h: 78
  const std::size_t enc = 5 * (2 * (2 * 2 * 6 + 2) + 5);   // gated blocks: 285
  const std::size_t lstm1 = 12 * 12 + 12 * 3 + 12;         // in 12 = 2 ch x 6 bins
  const std::size_t lstm2 = 12 * 3 + 12 * 3 + 12;
  const std::size_t proj = 12 * 3 + 12;
  const std::size_t dec = 5 * (2 * (4 * 2 * 2 * 3 + 2) + 5);  // skip concat: 4 in
  const std::size_t out = 2 * 2 * 6 + 2;
  const std::size_t total =
      conv_in + norm_act + gru + enc + lstm1 + lstm2 + proj + dec + out;
  EXPECT_EQ(total, 1293u);
  EXPECT_EQ(ParamCount(BuildModel(c, 1)), total);
  EXPECT_EQ(LayoutCount(c), total);
}

TEST(Weights, AblationCountOrdering) {
  std::size_t count[2][2];
  for (int gate = 0; gate < 2; ++gate) {
    for (int srnn = 0; srnn < 2; ++srnn) {
      ModelConfig c;
      c.gate_enabled = gate;
      c.srnn_enabled = srnn;
      count[gate][srnn] = LayoutCount(c);
    }
  }
  RecordProperty("params_gate_srnn", std::to_string(count[1][1]));
  EXPECT_GT(count[1][1], count[1][0]);
  EXPECT_GT(count[1][1], count[0][1]);
  EXPECT_GT(count[1][0], count[0][1]);
  EXPECT_GT(count[0][1], count[0][0]);
}

TEST(Weights, SameSeedSameWeights) {
  const auto c = TinyConfig();
  EXPECT_EQ(BuildModel(c, 42), BuildModel(c, 42));
  EXPECT_FALSE(BuildModel(c, 42) == BuildModel(c, 43));
  const auto w = BuildModel(c, 42);
  EXPECT_EQ(w.at("srnn.prelu.alpha")[0], 0.25f);
  EXPECT_EQ(w.at("cell1.lstm1.b")[c.lstm_units], 1.0f);  // forget-gate bias
  EXPECT_EQ(w.at("cell1.lstm1.b")[0], 0.0f);
}

TEST(Weights, InferConfigRecoversArchitecture) {
  for (int variant = 0; variant < 4; ++variant) {
    ModelConfig c = TinyConfig(3);
    c.gate_enabled = variant & 1;
    c.srnn_enabled = variant & 2;
    const ModelConfig back = InferConfig(BuildModel(c, 1));
    EXPECT_EQ(back.stages, 3u);
    EXPECT_EQ(back.channels, c.channels);
    EXPECT_EQ(back.lstm_units, c.lstm_units);
    EXPECT_EQ(back.lstm_layers, c.lstm_layers);
    EXPECT_EQ(back.gate_enabled, c.gate_enabled);
    EXPECT_EQ(back.srnn_enabled, c.srnn_enabled);
  }
}

TEST(Model, StageOutputShape) {
  for (bool srnn : {true, false}) {
    ModelConfig c = TinyConfig(2);
    c.srnn_enabled = srnn;
    const Model m(c, BuildModel(c, 3));
    for (std::size_t L : {2u, 7u, 13u}) {
      const auto noisy = RandomSpec(L, L);
      const auto r = m.ForwardStage(StageState::Initial(noisy), noisy);
      EXPECT_EQ(r.estimate.bins, 161u);
      EXPECT_EQ(r.estimate.frames, L);
      EXPECT_EQ(r.state.q, 2u);
      EXPECT_EQ(r.state.hidden.empty(), !srnn);
    }
  }
}

TEST(Model, ForwardAllEqualsManualStages) {
  const auto c = TinyConfig();
  const Model m(c, BuildModel(c, 5));
  const auto noisy = RandomSpec(9, 1);
  const auto all = m.ForwardAll(noisy);
  ASSERT_EQ(all.size(), 5u);
  StageState s = StageState::Initial(noisy);
  for (std::size_t q = 0; q < 5; ++q) {
    auto r = m.ForwardStage(s, noisy);
    EXPECT_EQ(r.estimate, all[q]);
    s = r.state;
  }
  try {
    m.ForwardStage(s, noisy);
    FAIL() << "stage 6 of 5 ran";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("stage overflow"), std::string::npos);
  }
}

TEST(Model, ZeroInputZeroBiasesGivesZeroOutput) {
  const auto c = TinyConfig(2);
  const Model m(c, BuildModel(c, 8));  // biases start at zero
  const dsp::Spectrogram zero(161, 6);
  for (const auto& s : m.ForwardAll(zero)) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      ASSERT_EQ(s.real[i], 0.0);
      ASSERT_EQ(s.imag[i], 0.0);
    }
  }
}

// Stage 1 written out as a straight line of tensor ops.
TEST(Model, MatchesStraightLineComposition) {
  ModelConfig c = TinyConfig(1);
  c.encoder_depth = 2;
  c.lstm_layers = 1;
  c.bins = 161;
  auto w = BuildModel(c, 9);
  // Perturb the zero-initialized biases so every term contributes.
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  ParamMap params = w.params();
  for (auto& [name, t] : params) {
    if (name.size() > 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
      for (auto& v : t.values()) v = static_cast<float>(u(rng));
    }
  }
  w = ModelWeights(params);
  const Model m(c, w);
  const auto noisy = RandomSpec(5, 11);
  const auto got = m.ForwardStage(StageState::Initial(noisy), noisy).estimate;

  using V = nn::Var<float>;
  auto P = [&](const std::string& n) { return V::Constant(w.at(n)); };
  auto norm_act = [&](const V& x, const std::string& p) {
    return nn::PRelu(nn::InstanceNorm(x, P(p + ".norm.gamma"), P(p + ".norm.beta"),
                                      nn::NormMode::kUtterance),
                     P(p + ".prelu.alpha"));
  };
  auto glu = [&](const V& x, const std::string& p, nn::ConvSpec s, bool tr) {
    auto conv = [&](const std::string& q) {
      return tr ? nn::Deconv2d(x, P(q + ".w"), P(q + ".b"), s)
                : nn::Conv2d(x, P(q + ".w"), P(q + ".b"), s);
    };
    return norm_act(nn::Mul(conv(p), nn::Sigmoid(conv(p + ".gate"))), p);
  };
  const V X = V::Constant(ToTensor(noisy));
  V h = norm_act(nn::Conv2d(nn::ConcatChannels(X, X), P("srnn.conv.w"), P("srnn.conv.b"),
                            nn::ConvSpec{1, 1, 0}),
                 "srnn");
  {
    const V h0 = V::Constant(nn::Tensor<float>(h.shape()));
    const V xh = nn::ConcatChannels(h, h0);
    const nn::ConvSpec s{1, 1, 0};
    const V z = nn::Sigmoid(nn::Conv2d(xh, P("srnn.gru.z.w"), P("srnn.gru.z.b"), s));
    const V r = nn::Sigmoid(nn::Conv2d(xh, P("srnn.gru.r.w"), P("srnn.gru.r.b"), s));
    const V cand = nn::Tanh(nn::Conv2d(nn::ConcatChannels(h, nn::Mul(r, h0)), P("srnn.gru.h.w"),
                                       P("srnn.gru.h.b"), s));
    h = nn::Add(nn::Mul(nn::Sub(V::Constant(nn::Tensor<float>(z.shape(), 1.0f)), z), h0),
                nn::Mul(z, cand));
  }
  const V e1 = glu(h, "cell1.enc1", {2, 1, 0}, false);   // 161 -> 81
  const V e2 = glu(e1, "cell1.enc2", {2, 1, 0}, false);  // 81 -> 41
  V seq = nn::Reshape(e2, nn::Shape{4 * 41, 5});
  seq = nn::LstmLayer(seq, P("cell1.lstm1.w_ih"), P("cell1.lstm1.w_hh"), P("cell1.lstm1.b"));
  seq = nn::Linear(seq, P("cell1.proj.w"), P("cell1.proj.b"));
  V d = nn::Reshape(seq, nn::Shape{4, 41, 5});
  d = glu(nn::ConcatChannels(d, e2), "cell1.dec1", {2, 1, 0}, true);  // 41 -> 81
  d = glu(nn::ConcatChannels(d, e1), "cell1.dec2", {2, 1, 0}, true);  // 81 -> 161
  const V out = nn::Conv2d(d, P("cell1.out.w"), P("cell1.out.b"), nn::ConvSpec{1, 1, 0});
  EXPECT_EQ(got, FromTensor(out.value()));
}

TEST(Model, StreamingNormIsCausal) {
  const auto c = TinyConfig(3);
  const Model m(c, BuildModel(c, 12), nn::NormMode::kCumulative);
  const Model u(c, BuildModel(c, 12), nn::NormMode::kUtterance);
  auto noisy = RandomSpec(12, 2);
  const auto base = m.ForwardAll(noisy);
  const auto base_u = u.ForwardAll(noisy);
  const std::size_t t0 = 7;
  for (std::size_t k = 0; k < noisy.bins; ++k) noisy.re(k, t0) += 1.0;
  const auto moved = m.ForwardAll(noisy);
  const auto moved_u = u.ForwardAll(noisy);
  bool utterance_leaks = false;
  for (std::size_t q = 0; q < 3; ++q) {
    for (std::size_t k = 0; k < 161; ++k) {
      for (std::size_t t = 0; t < t0; ++t) {
        ASSERT_EQ(moved[q].re(k, t), base[q].re(k, t));
        ASSERT_EQ(moved[q].im(k, t), base[q].im(k, t));
        utterance_leaks |= moved_u[q].re(k, t) != base_u[q].re(k, t);
      }
    }
  }
  EXPECT_TRUE(utterance_leaks);
}

TEST(Model, RejectsMismatchedWeights) {
  const auto c = TinyConfig(2);
  auto params = BuildModel(c, 1).params();
  params.at("cell1.out.b") = nn::Tensor<float>(nn::Shape{3});
  EXPECT_THROW(Model(ModelWeights(params)), ModelError);
  params.erase("cell2.out.b");
  EXPECT_THROW(InferConfig(ModelWeights(params)), ModelError);
}

}  // namespace
}  // namespace plce::model
