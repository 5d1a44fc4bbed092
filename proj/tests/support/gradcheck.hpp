// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Central finite-difference gradient checks for graph ops.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "plce/nn/ops.hpp"

namespace plce::testing {

template <typename T>
nn::Tensor<T> RandomTensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                           double hi = 1.0) {
  nn::Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

// Values with |v| >= margin, for ops with a kink at zero.
template <typename T>
nn::Tensor<T> RandomTensorAwayFromZero(nn::Shape shape, std::mt19937_64& rng, double margin) {
  nn::Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> u(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.values()) v = static_cast<T>(sign(rng) ? u(rng) : -u(rng));
  return t;
}

template <typename T>
using GraphFn = std::function<nn::Var<T>(const std::vector<nn::Var<T>>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t input = 0;    // input holding the worst element
  std::size_t element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares backprop gradients of L = sum(f(inputs) * R), R a fixed random
// projection, against central differences of L. Per-element error is
// |a - n| / max(|a|, |n|, floor) where floor is 1e-2 of the largest
// gradient magnitude of that input, so round-off in entries that are
// orders of magnitude below the tensor's scale does not dominate.
//
// The differences are taken on `reference`, the same graph evaluated in
// double at the (exactly representable) inputs, so single-precision
// backprop is measured against a reference free of float round-off.
template <typename T>
GradCheckResult GradCheck(const std::vector<nn::Tensor<T>>& inputs, const GraphFn<T>& fn,
                          const GraphFn<double>& reference, std::uint64_t seed,
                          double step = 1e-5) {
  nn::Tape<T> tape;
  std::vector<nn::Var<T>> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.Leaf(t));
  nn::Var<T> y = fn(leaves);
  std::mt19937_64 rng(seed ^ 0x5DEECE66DULL);
  const nn::Tensor<T> proj = RandomTensor<T>(y.shape(), rng);
  tape.Backward(nn::Sum(nn::Mul(y, nn::Var<T>::Constant(proj))));

  auto loss_at = [&](std::vector<nn::Tensor<double>>& vals) {
    std::vector<nn::Var<double>> vars;
    for (const auto& v : vals) vars.push_back(nn::Var<double>::Constant(v));
    const nn::Tensor<double> out = reference(vars).value();
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      s += static_cast<double>(out[k]) * static_cast<double>(proj[k]);
    }
    return s;
  };

  GradCheckResult res;
  std::vector<nn::Tensor<double>> vals;
  for (const auto& t : inputs) vals.push_back(t.template Cast<double>());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const nn::Tensor<T>& g = leaves[i].grad();
    std::vector<double> analytic(inputs[i].size(), 0.0), numeric(inputs[i].size(), 0.0);
    double scale = 0.0;
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double x0 = vals[i][k];
      vals[i][k] = x0 + step;
      const double lp = loss_at(vals);
      vals[i][k] = x0 - step;
      const double lm = loss_at(vals);
      vals[i][k] = x0;
      numeric[k] = (lp - lm) / (2.0 * step);
      analytic[k] = g.empty() ? 0.0 : static_cast<double>(g[k]);
      scale = std::max({scale, std::abs(numeric[k]), std::abs(analytic[k])});
    }
    const double floor = std::max(1e-2 * scale, 1e-12);
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
      const double rel = std::abs(analytic[k] - numeric[k]) / denom;
      if (rel > res.max_rel_error) {
        res = {rel, i, k, analytic[k], numeric[k]};
      }
    }
  }
  return res;
}

inline std::string Describe(const GradCheckResult& r) {
  return "max rel error " + std::to_string(r.max_rel_error) + " at input " +
         std::to_string(r.input) + "[" + std::to_string(r.element) + "] analytic " +
         std::to_string(r.analytic) + " numeric " + std::to_string(r.numeric);
}

}  // namespace plce::testing
