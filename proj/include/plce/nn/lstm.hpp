// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <vector>

#include "plce/nn/ops.hpp"

namespace plce::nn {

namespace kernels {

struct LstmTrace {
  std::vector<double> gates;  // activated i, f, g, o: [4H, L]
  std::vector<double> cell;   // [H, L]
  std::vector<double> hidden; // [H, L]
};

template <typename T>
LstmTrace LstmRun(const Tensor<T>& x, const Tensor<T>& w_ih,
                     const Tensor<T>& w_hh, const Tensor<T>& b) {
  const std::size_t in = x.dim(0), L = x.dim(1), H = w_hh.dim(1);
  LstmTrace tr{std::vector<double>(4 * H * L), std::vector<double>(H * L),
                  std::vector<double>(H * L)};
  std::vector<double> a(4 * H), h_prev(H, 0.0), c_prev(H, 0.0);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double s = b[r];
      const T* wi = w_ih.data() + r * in;
      for (std::size_t i = 0; i < in; ++i) s += static_cast<double>(wi[i]) * x[i * L + t];
      const T* wh = w_hh.data() + r * H;
      for (std::size_t k = 0; k < H; ++k) s += static_cast<double>(wh[k]) * h_prev[k];
      a[r] = s;
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double ig = 1.0 / (1.0 + std::exp(-a[k]));
      const double fg = 1.0 / (1.0 + std::exp(-a[H + k]));
      const double gg = std::tanh(a[2 * H + k]);
      const double og = 1.0 / (1.0 + std::exp(-a[3 * H + k]));
      const double c = fg * c_prev[k] + ig * gg;
      const double h = og * std::tanh(c);
      tr.gates[k * L + t] = ig;
      tr.gates[(H + k) * L + t] = fg;
      tr.gates[(2 * H + k) * L + t] = gg;
      tr.gates[(3 * H + k) * L + t] = og;
      tr.cell[k * L + t] = c;
      tr.hidden[k * L + t] = h;
      c_prev[k] = c;
      h_prev[k] = h;
    }
  }
  return tr;
}

}  // namespace kernels

// One unidirectional LSTM layer with zero initial state. Gate blocks of the
// stacked weights are ordered input, forget, cell, output.
// x: [In, L] (features by frame), w_ih: [4H, In], w_hh: [4H, H], b: [4H].
// Returns the hidden sequence [H, L]; output frame t only sees frames <= t.
template <typename T>
Var<T> LstmLayer(const Var<T>& x, const Var<T>& w_ih, const Var<T>& w_hh,
                 const Var<T>& b) {
  CheckRank(x.shape(), 2, "lstm");
  CheckRank(w_ih.shape(), 2, "lstm");
  CheckRank(w_hh.shape(), 2, "lstm");
  const std::size_t in = x.shape()[0], L = x.shape()[1];
  const std::size_t H = w_hh.shape()[1];
  if (w_hh.shape()[0] != 4 * H || w_ih.shape()[0] != 4 * H ||
      w_ih.shape()[1] != in || b.value().size() != 4 * H) {
    throw ShapeError("lstm: weights " + ShapeString(w_ih.shape()) + "/" +
                     ShapeString(w_hh.shape()) + " incompatible with input " +
                     ShapeString(x.shape()));
  }
  auto trace = kernels::LstmRun(x.value(), w_ih.value(), w_hh.value(), b.value());
  Tensor<T> y(Shape{H, L});
  for (std::size_t k = 0; k < H * L; ++k) y[k] = static_cast<T>(trace.hidden[k]);
  return MakeResult(std::move(y), {&x, &w_ih, &w_hh, &b}, [&] {
    return [xn = x.node(), wi = w_ih.node(), wh = w_hh.node(), bn = b.node(),
            tr = std::move(trace)](const Tensor<T>& g, const Tensor<T>&) {
      const Tensor<T>& xv = xn->value;
      const std::size_t in = xv.dim(0), L = xv.dim(1), H = wh->value.dim(1);
      std::vector<double> da(4 * H * L);  // pre-activation gradients
      std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
      for (std::size_t t = L; t-- > 0;) {
        for (std::size_t k = 0; k < H; ++k) {
          const double ig = tr.gates[k * L + t];
          const double fg = tr.gates[(H + k) * L + t];
          const double gg = tr.gates[(2 * H + k) * L + t];
          const double og = tr.gates[(3 * H + k) * L + t];
          const double c = tr.cell[k * L + t];
          const double c_prev = t > 0 ? tr.cell[k * L + t - 1] : 0.0;
          const double tc = std::tanh(c);
          const double dh = static_cast<double>(g[k * L + t]) + dh_next[k];
          const double dc = dh * og * (1.0 - tc * tc) + dc_next[k];
          da[k * L + t] = dc * gg * ig * (1.0 - ig);
          da[(H + k) * L + t] = dc * c_prev * fg * (1.0 - fg);
          da[(2 * H + k) * L + t] = dc * ig * (1.0 - gg * gg);
          da[(3 * H + k) * L + t] = dh * tc * og * (1.0 - og);
          dc_next[k] = dc * fg;
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        for (std::size_t r = 0; r < 4 * H; ++r) {
          const double d = da[r * L + t];
          if (d == 0.0) continue;
          const T* w = wh->value.data() + r * H;
          for (std::size_t k = 0; k < H; ++k) dh_next[k] += d * w[k];
        }
      }
      if (bn->requires_grad) {
        Tensor<T> db(bn->value.shape());
        for (std::size_t r = 0; r < 4 * H; ++r) {
          double s = 0.0;
          for (std::size_t t = 0; t < L; ++t) s += da[r * L + t];
          db[r] = static_cast<T>(s);
        }
        bn->AccumulateGrad(db);
      }
      if (wi->requires_grad) {
        Tensor<T> dw(wi->value.shape());
        for (std::size_t r = 0; r < 4 * H; ++r)
          for (std::size_t i = 0; i < in; ++i) {
            double s = 0.0;
            for (std::size_t t = 0; t < L; ++t) s += da[r * L + t] * xv[i * L + t];
            dw[r * in + i] = static_cast<T>(s);
          }
        wi->AccumulateGrad(dw);
      }
      if (wh->requires_grad) {
        Tensor<T> dw(wh->value.shape());
        for (std::size_t r = 0; r < 4 * H; ++r)
          for (std::size_t k = 0; k < H; ++k) {
            double s = 0.0;
            for (std::size_t t = 1; t < L; ++t) s += da[r * L + t] * tr.hidden[k * L + t - 1];
            dw[r * H + k] = static_cast<T>(s);
          }
        wh->AccumulateGrad(dw);
      }
      if (xn->requires_grad) {
        Tensor<T> dx(xv.shape());
        for (std::size_t i = 0; i < in; ++i)
          for (std::size_t t = 0; t < L; ++t) {
            double s = 0.0;
            for (std::size_t r = 0; r < 4 * H; ++r) {
              s += da[r * L + t] * wi->value[r * in + i];
            }
            dx[i * L + t] = static_cast<T>(s);
          }
        xn->AccumulateGrad(dx);
      }
    };
  });
}

}  // namespace plce::nn
