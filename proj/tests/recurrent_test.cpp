// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>

#include "plce/nn/layers.hpp"
#include "plce/nn/lstm.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace plce::nn {
namespace {

using testing::RandomTensor;

Var<double> C(const Tensor<double>& t) { return Var<double>::Constant(t); }

TEST(Lstm, ZeroWeightsGiveZeroOutput) {
  std::mt19937_64 rng(1);
  auto y = LstmLayer(C(RandomTensor<double>({3, 5}, rng)), C(Tensor<double>(Shape{8, 3})),
                     C(Tensor<double>(Shape{8, 2})), C(Tensor<double>(Shape{8})));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, SingleUnitOneStepByHand) {
  // H = 1, In = 1; weights w_ih = [a_i, a_f, a_g, a_o], no recurrence used at t = 0.
  const double x = 0.7;
  Tensor<double> w_ih(Shape{4, 1}, std::vector<double>{0.5, -0.3, 0.8, 1.2});
  Tensor<double> w_hh(Shape{4, 1}, std::vector<double>{0.1, 0.2, 0.3, 0.4});
  Tensor<double> b(Shape{4}, std::vector<double>{0.05, 1.0, -0.1, 0.0});
  auto y = LstmLayer(C(Tensor<double>(Shape{1, 1}, x)), C(w_ih), C(w_hh), C(b));
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double c = sig(0.5 * x + 0.05) * std::tanh(0.8 * x - 0.1);
  EXPECT_NEAR(y.value()[0], sig(1.2 * x) * std::tanh(c), 1e-15);
}

TEST(Lstm, MatchesStepwiseOracle) {
  std::mt19937_64 rng(2);
  auto x = RandomTensor<double>({5, 9}, rng);
  auto w_ih = RandomTensor<double>({12, 5}, rng);
  auto w_hh = RandomTensor<double>({12, 3}, rng);
  auto b = RandomTensor<double>({12}, rng);
  auto y = LstmLayer(C(x), C(w_ih), C(w_hh), C(b));
  const auto ref = oracle::Lstm(x, w_ih, w_hh, b);
  for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(y.value()[k], ref[k], 1e-13);
}

TEST(Lstm, PerturbingFrameLeavesEarlierOutputsBitIdentical) {
  std::mt19937_64 rng(3);
  auto x = RandomTensor<float>({4, 8}, rng);
  auto w_ih = RandomTensor<float>({8, 4}, rng);
  auto w_hh = RandomTensor<float>({8, 2}, rng);
  auto b = RandomTensor<float>({8}, rng);
  auto run = [&](const Tensor<float>& in) {
    return LstmLayer(Var<float>::Constant(in), Var<float>::Constant(w_ih),
                     Var<float>::Constant(w_hh), Var<float>::Constant(b))
        .value();
  };
  const auto base = run(x);
  const std::size_t t0 = 5;
  for (std::size_t i = 0; i < 4; ++i) x[i * 8 + t0] += 0.5f;
  const auto moved = run(x);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t t = 0; t < t0; ++t) EXPECT_EQ(moved[k * 8 + t], base[k * 8 + t]);
  }
  EXPECT_NE(moved[t0], base[t0]);
}

ConvGruParams<double> GruParams(std::mt19937_64& rng, std::size_t ch, double update_bias) {
  auto conv = [&](double bias) {
    return ConvParams<double>{C(RandomTensor<double>({ch, 2 * ch, 1, 3}, rng, -0.3, 0.3)),
                              C(Tensor<double>(Shape{ch}, bias))};
  };
  ConvGruParams<double> p;
  p.update = conv(update_bias);
  p.reset = conv(0.0);
  p.candidate = conv(0.0);
  return p;
}

TEST(ConvGru, ClosedUpdateGateKeepsState) {
  std::mt19937_64 rng(4);
  auto h = RandomTensor<double>({2, 5, 3}, rng);
  auto x = RandomTensor<double>({2, 5, 3}, rng);
  auto out = ConvGruStep(C(h), C(x), GruParams(rng, 2, -60.0), ConvSpec{1, 1, 0});
  for (std::size_t k = 0; k < h.size(); ++k) EXPECT_NEAR(out.value()[k], h[k], 1e-20);
}

TEST(ConvGru, OpenUpdateGateTakesCandidate) {
  std::mt19937_64 rng(5);
  auto h = RandomTensor<double>({2, 5, 3}, rng);
  auto x = RandomTensor<double>({2, 5, 3}, rng);
  const auto p = GruParams(rng, 2, 60.0);
  auto out = ConvGruStep(C(h), C(x), p, ConvSpec{1, 1, 0});
  auto r = Sigmoid(Conv2d(ConcatChannels(C(x), C(h)), p.reset.w, p.reset.b, ConvSpec{1, 1, 0}));
  auto cand = Tanh(Conv2d(ConcatChannels(C(x), Mul(r, C(h))), p.candidate.w, p.candidate.b,
                          ConvSpec{1, 1, 0}));
  for (std::size_t k = 0; k < h.size(); ++k) EXPECT_NEAR(out.value()[k], cand.value()[k], 1e-20);
}

TEST(ConvGru, MatchesComposedOracle) {
  std::mt19937_64 rng(6);
  auto h = RandomTensor<double>({3, 4, 2}, rng);
  auto x = RandomTensor<double>({3, 4, 2}, rng);
  const auto p = GruParams(rng, 3, 0.2);
  auto out = ConvGruStep(C(h), C(x), p, ConvSpec{1, 1, 0});

  // Gate pre-activations from the nested-loop convolution oracle.
  Tensor<double> xh(Shape{6, 4, 2});
  for (std::size_t k = 0; k < h.size(); ++k) {
    xh[k] = x[k];
    xh[h.size() + k] = h[k];
  }
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const auto zp = oracle::Conv(xh, p.update.w.value(), p.update.b.value(), 1, 1);
  const auto rp = oracle::Conv(xh, p.reset.w.value(), p.reset.b.value(), 1, 1);
  Tensor<double> xrh = xh;
  for (std::size_t k = 0; k < h.size(); ++k) xrh[h.size() + k] = sig(rp[k]) * h[k];
  const auto cp = oracle::Conv(xrh, p.candidate.w.value(), p.candidate.b.value(), 1, 1);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double z = sig(zp[k]);
    EXPECT_NEAR(out.value()[k], (1 - z) * h[k] + z * std::tanh(cp[k]), 1e-14);
  }
}

TEST(ConvGru, ShapeMismatchThrows) {
  std::mt19937_64 rng(7);
  EXPECT_THROW(ConvGruStep(C(Tensor<double>(Shape{2, 5, 3})), C(Tensor<double>(Shape{2, 4, 3})),
                           GruParams(rng, 2, 0.0), ConvSpec{1, 1, 0}),
               ShapeError);
}

}  // namespace
}  // namespace plce::nn
