// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <optional>

#include "plce/nn/ops.hpp"

namespace plce::nn {

template <typename T>
struct ConvParams {
  Var<T> w;
  Var<T> b;
};

// Gated linear unit: conv_a(x) * sigmoid(conv_b(x)). Both branches share
// stride and padding. Without a gate branch this is a plain convolution.
template <typename T>
Var<T> Glu(const Var<T>& x, const ConvParams<T>& main,
           const std::optional<ConvParams<T>>& gate, ConvSpec spec,
           bool transposed = false) {
  auto conv = [&](const ConvParams<T>& p) {
    return transposed ? Deconv2d(x, p.w, p.b, spec) : Conv2d(x, p.w, p.b, spec);
  };
  Var<T> a = conv(main);
  if (!gate) return a;
  Var<T> g = conv(*gate);
  if (a.shape() != g.shape()) {
    throw ShapeError("glu: branch shapes differ " + ShapeString(a.shape()) +
                     " vs " + ShapeString(g.shape()));
  }
  return Mul(a, Sigmoid(g));
}

template <typename T>
struct ConvGruParams {
  ConvParams<T> update;     // z gate, input [x, h]
  ConvParams<T> reset;      // r gate, input [x, h]
  ConvParams<T> candidate;  // input [x, r*h]
};

// One ConvGRU update over feature maps:
//   z = sigmoid(W_z * [x, h]),  r = sigmoid(W_r * [x, h])
//   h~ = tanh(W_h * [x, r . h]),  h' = (1 - z) . h + z . h~
template <typename T>
Var<T> ConvGruStep(const Var<T>& h_prev, const Var<T>& x,
                   const ConvGruParams<T>& p, ConvSpec spec) {
  if (h_prev.shape() != x.shape()) {
    throw ShapeError("convgru: hidden " + ShapeString(h_prev.shape()) +
                     " and input " + ShapeString(x.shape()) + " differ");
  }
  Var<T> xh = ConcatChannels(x, h_prev);
  Var<T> z = Sigmoid(Conv2d(xh, p.update.w, p.update.b, spec));
  Var<T> r = Sigmoid(Conv2d(xh, p.reset.w, p.reset.b, spec));
  Var<T> xrh = ConcatChannels(x, Mul(r, h_prev));
  Var<T> cand = Tanh(Conv2d(xrh, p.candidate.w, p.candidate.b, spec));
  if (cand.shape() != h_prev.shape()) {
    throw ShapeError("convgru: gate convolution changes the map shape");
  }
  Var<T> keep = Sub(Var<T>::Constant(Tensor<T>(z.shape(), T(1))), z);
  return Add(Mul(keep, h_prev), Mul(z, cand));
}

}  // namespace plce::nn
