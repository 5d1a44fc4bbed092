// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Differentiable layer kernels on [channels, freq, time] feature maps.
//
// Time is causal everywhere: a kernel with kT taps along time reads frames
// t-(kT-1) .. t, tap j of the kernel multiplying frame t-(kT-1-j). Missing
// past frames are zero. Reductions accumulate in double regardless of T.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "plce/nn/autograd.hpp"
#include "plce/nn/tensor.hpp"

namespace plce::nn {

struct ConvSpec {
  std::size_t stride_f = 1;
  std::size_t pad_f = 0;
  std::size_t out_pad_f = 0;  // transposed convolution only
};

inline std::size_t ConvOutFreq(std::size_t f, std::size_t kf, ConvSpec s) {
  if (f + 2 * s.pad_f < kf) {
    throw ShapeError("conv2d: kernel wider than padded input");
  }
  return (f + 2 * s.pad_f - kf) / s.stride_f + 1;
}

inline std::size_t DeconvOutFreq(std::size_t f, std::size_t kf, ConvSpec s) {
  const std::ptrdiff_t out = static_cast<std::ptrdiff_t>((f - 1) * s.stride_f) -
                             2 * static_cast<std::ptrdiff_t>(s.pad_f) +
                             static_cast<std::ptrdiff_t>(kf + s.out_pad_f);
  if (f == 0 || out <= 0) throw ShapeError("deconv2d: empty output");
  return static_cast<std::size_t>(out);
}

namespace kernels {

// Index geometry shared by the regular and transposed convolutions.
// `transposed` selects fo = fi*s - p + df instead of fi = fo*s - p + df.
struct ConvGeometry {
  std::size_t ci, co, kt, kf, fin, fout, frames;
  ConvSpec spec;
  bool transposed;

  // Returns the input frequency row read by output row fo through tap df,
  // or -1 when it falls into padding.
  std::ptrdiff_t InputRow(std::size_t fo, std::size_t df) const {
    if (!transposed) {
      const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(fo * spec.stride_f + df) -
                                static_cast<std::ptrdiff_t>(spec.pad_f);
      return (fi >= 0 && fi < static_cast<std::ptrdiff_t>(fin)) ? fi : -1;
    }
    // fo = fi*s - p + df  =>  fi = (fo + p - df) / s when divisible.
    const std::ptrdiff_t num = static_cast<std::ptrdiff_t>(fo + spec.pad_f) -
                               static_cast<std::ptrdiff_t>(df);
    if (num < 0 || num % static_cast<std::ptrdiff_t>(spec.stride_f) != 0) return -1;
    const std::ptrdiff_t fi = num / static_cast<std::ptrdiff_t>(spec.stride_f);
    return fi < static_cast<std::ptrdiff_t>(fin) ? fi : -1;
  }

  std::size_t WeightIndex(std::size_t o, std::size_t i, std::size_t j,
                          std::size_t df) const {
    // Regular: [Co, Ci, kT, kF]. Transposed: [Ci, Co, kT, kF].
    return transposed ? ((i * co + o) * kt + j) * kf + df
                      : ((o * ci + i) * kt + j) * kf + df;
  }
};

template <typename T>
ConvGeometry MakeGeometry(const Tensor<T>& x, const Tensor<T>& w,
                          const Tensor<T>& b, ConvSpec spec, bool transposed) {
  const char* name = transposed ? "deconv2d" : "conv2d";
  CheckRank(x.shape(), 3, name);
  CheckRank(w.shape(), 4, name);
  CheckRank(b.shape(), 1, name);
  if (spec.stride_f == 0) throw ShapeError(std::string(name) + ": zero stride");
  ConvGeometry g{};
  g.transposed = transposed;
  g.spec = spec;
  g.ci = x.dim(0);
  g.co = transposed ? w.dim(1) : w.dim(0);
  const std::size_t w_in = transposed ? w.dim(0) : w.dim(1);
  if (w_in != g.ci) {
    throw ShapeError(std::string(name) + ": weight expects " +
                     std::to_string(w_in) + " input channels, input has " +
                     std::to_string(g.ci));
  }
  if (b.dim(0) != g.co) throw ShapeError(std::string(name) + ": bias size mismatch");
  g.kt = w.dim(2);
  g.kf = w.dim(3);
  g.fin = x.dim(1);
  g.frames = x.dim(2);
  g.fout = transposed ? DeconvOutFreq(g.fin, g.kf, spec) : ConvOutFreq(g.fin, g.kf, spec);
  return g;
}

template <typename T>
Tensor<T> ConvForward(const ConvGeometry& g, const Tensor<T>& x,
                      const Tensor<T>& w, const Tensor<T>& b) {
  const std::size_t frames = g.frames;
  Tensor<T> out(Shape{g.co, g.fout, frames});
  std::vector<double> acc(g.fout * frames);
  for (std::size_t o = 0; o < g.co; ++o) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(b[o]));
    for (std::size_t i = 0; i < g.ci; ++i) {
      for (std::size_t j = 0; j < g.kt; ++j) {
        const std::size_t shift = g.kt - 1 - j;
        if (shift >= frames) continue;
        for (std::size_t df = 0; df < g.kf; ++df) {
          const double wv = w[g.WeightIndex(o, i, j, df)];
          if (wv == 0.0) continue;
          for (std::size_t fo = 0; fo < g.fout; ++fo) {
            const std::ptrdiff_t fi = g.InputRow(fo, df);
            if (fi < 0) continue;
            const T* xr = x.data() + (i * g.fin + fi) * frames;
            double* ar = acc.data() + fo * frames;
            for (std::size_t t = shift; t < frames; ++t) ar[t] += wv * xr[t - shift];
          }
        }
      }
    }
    T* dst = out.data() + o * g.fout * frames;
    for (std::size_t k = 0; k < acc.size(); ++k) dst[k] = static_cast<T>(acc[k]);
  }
  return out;
}

// Gradients of ConvForward. Any of dx/dw/db may be null.
template <typename T>
void ConvBackward(const ConvGeometry& g, const Tensor<T>& x, const Tensor<T>& w,
                  const Tensor<T>& gy, Tensor<T>* dx, Tensor<T>* dw,
                  Tensor<T>* db) {
  const std::size_t frames = g.frames;
  std::vector<double> dxa(dx ? x.size() : 0);
  for (std::size_t o = 0; o < g.co; ++o) {
    const T* go = gy.data() + o * g.fout * frames;
    if (db) {
      double s = 0.0;
      for (std::size_t k = 0; k < g.fout * frames; ++k) s += go[k];
      (*db)[o] += static_cast<T>(s);
    }
    for (std::size_t i = 0; i < g.ci; ++i) {
      for (std::size_t j = 0; j < g.kt; ++j) {
        const std::size_t shift = g.kt - 1 - j;
        if (shift >= frames) continue;
        for (std::size_t df = 0; df < g.kf; ++df) {
          const std::size_t widx = g.WeightIndex(o, i, j, df);
          const double wv = w[widx];
          double wgrad = 0.0;
          for (std::size_t fo = 0; fo < g.fout; ++fo) {
            const std::ptrdiff_t fi = g.InputRow(fo, df);
            if (fi < 0) continue;
            const std::size_t xoff = (i * g.fin + fi) * frames;
            const T* xr = x.data() + xoff;
            const T* gr = go + fo * frames;
            if (dw) {
              for (std::size_t t = shift; t < frames; ++t) {
                wgrad += static_cast<double>(gr[t]) * xr[t - shift];
              }
            }
            if (dx) {
              double* dr = dxa.data() + xoff;
              for (std::size_t t = shift; t < frames; ++t) dr[t - shift] += wv * gr[t];
            }
          }
          if (dw) (*dw)[widx] += static_cast<T>(wgrad);
        }
      }
    }
  }
  if (dx) {
    for (std::size_t k = 0; k < dxa.size(); ++k) (*dx)[k] += static_cast<T>(dxa[k]);
  }
}

}  // namespace kernels

namespace detail {

template <typename T>
Var<T> ConvImpl(const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvSpec spec,
                bool transposed) {
  const kernels::ConvGeometry g =
      kernels::MakeGeometry(x.value(), w.value(), b.value(), spec, transposed);
  Tensor<T> y = kernels::ConvForward(g, x.value(), w.value(), b.value());
  return MakeResult(std::move(y), {&x, &w, &b}, [&] {
    return [g, xn = x.node(), wn = w.node(), bn = b.node()](const Tensor<T>& gy, const Tensor<T>&) {
      Tensor<T> dx, dw, db;
      if (xn->requires_grad) dx = Tensor<T>(xn->value.shape());
      if (wn->requires_grad) dw = Tensor<T>(wn->value.shape());
      if (bn->requires_grad) db = Tensor<T>(bn->value.shape());
      kernels::ConvBackward(g, xn->value, wn->value, gy,
                            xn->requires_grad ? &dx : nullptr,
                            wn->requires_grad ? &dw : nullptr,
                            bn->requires_grad ? &db : nullptr);
      if (xn->requires_grad) xn->AccumulateGrad(dx);
      if (wn->requires_grad) wn->AccumulateGrad(dw);
      if (bn->requires_grad) bn->AccumulateGrad(db);
    };
  });
}

}  // namespace detail

// Causal 2-D convolution. x: [Ci, F, T], w: [Co, Ci, kT, kF], b: [Co].
// Output [Co, F', T] with F' = floor((F + 2*pad_f - kF) / stride_f) + 1.
template <typename T>
Var<T> Conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvSpec spec) {
  return detail::ConvImpl(x, w, b, spec, /*transposed=*/false);
}

// Transposed along frequency, causal convolution along time.
// x: [Ci, F, T], w: [Ci, Co, kT, kF], b: [Co].
// Output [Co, F', T] with F' = (F-1)*stride_f - 2*pad_f + kF + out_pad_f.
template <typename T>
Var<T> Deconv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvSpec spec) {
  return detail::ConvImpl(x, w, b, spec, /*transposed=*/true);
}

namespace detail {

inline void CheckSameShape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + ShapeString(a) +
                     " vs " + ShapeString(b));
  }
}

}  // namespace detail

template <typename T>
Var<T> Add(const Var<T>& a, const Var<T>& b) {
  detail::CheckSameShape(a.shape(), b.shape(), "add");
  Tensor<T> y = a.value();
  y.Accumulate(b.value());
  return MakeResult(std::move(y), {&a, &b}, [&] {
    return [an = a.node(), bn = b.node()](const Tensor<T>& g, const Tensor<T>&) {
      Propagate(an, g);
      Propagate(bn, g);
    };
  });
}

template <typename T>
Var<T> Sub(const Var<T>& a, const Var<T>& b) {
  detail::CheckSameShape(a.shape(), b.shape(), "sub");
  Tensor<T> y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y[k] -= b.value()[k];
  return MakeResult(std::move(y), {&a, &b}, [&] {
    return [an = a.node(), bn = b.node()](const Tensor<T>& g, const Tensor<T>&) {
      Propagate(an, g);
      if (bn->requires_grad) {
        Tensor<T> neg = g;
        for (auto& v : neg.values()) v = -v;
        bn->AccumulateGrad(neg);
      }
    };
  });
}

template <typename T>
Var<T> Mul(const Var<T>& a, const Var<T>& b) {
  detail::CheckSameShape(a.shape(), b.shape(), "mul");
  Tensor<T> y = a.value();
  for (std::size_t k = 0; k < y.size(); ++k) y[k] *= b.value()[k];
  return MakeResult(std::move(y), {&a, &b}, [&] {
    return [an = a.node(), bn = b.node()](const Tensor<T>& g, const Tensor<T>&) {
      if (an->requires_grad) {
        Tensor<T> d = g;
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= bn->value[k];
        an->AccumulateGrad(d);
      }
      if (bn->requires_grad) {
        Tensor<T> d = g;
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= an->value[k];
        bn->AccumulateGrad(d);
      }
    };
  });
}

template <typename T>
Var<T> Scale(const Var<T>& a, T factor) {
  Tensor<T> y = a.value();
  for (auto& v : y.values()) v *= factor;
  return MakeResult(std::move(y), {&a}, [&] {
    return [an = a.node(), factor](const Tensor<T>& g, const Tensor<T>&) {
      Tensor<T> d = g;
      for (auto& v : d.values()) v *= factor;
      Propagate(an, d);
    };
  });
}

template <typename T>
T SigmoidScalar(T v) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
}

template <typename T>
Var<T> Sigmoid(const Var<T>& a) {
  Tensor<T> y = a.value();
  for (auto& v : y.values()) v = SigmoidScalar(v);
  return MakeResult(std::move(y), {&a}, [&] {
    return [an = a.node()](const Tensor<T>& g, const Tensor<T>& out) {
      Tensor<T> d = g;
      for (std::size_t k = 0; k < d.size(); ++k) d[k] *= out[k] * (T(1) - out[k]);
      Propagate(an, d);
    };
  });
}

template <typename T>
Var<T> Tanh(const Var<T>& a) {
  Tensor<T> y = a.value();
  for (auto& v : y.values()) v = std::tanh(v);
  return MakeResult(std::move(y), {&a}, [&] {
    return [an = a.node()](const Tensor<T>& g, const Tensor<T>& out) {
      Tensor<T> d = g;
      for (std::size_t k = 0; k < d.size(); ++k) d[k] *= T(1) - out[k] * out[k];
      Propagate(an, d);
    };
  });
}

// x if x >= 0 else alpha*x, alpha a single learnable scalar.
template <typename T>
Var<T> PRelu(const Var<T>& x, const Var<T>& alpha) {
  if (alpha.value().size() != 1) throw ShapeError("prelu: alpha must be a scalar");
  const T a = alpha.value()[0];
  Tensor<T> y = x.value();
  for (auto& v : y.values()) v = v >= T(0) ? v : a * v;
  return MakeResult(std::move(y), {&x, &alpha}, [&] {
    return [xn = x.node(), an = alpha.node()](const Tensor<T>& g, const Tensor<T>&) {
      const T a = an->value[0];
      const Tensor<T>& xv = xn->value;
      if (xn->requires_grad) {
        Tensor<T> d = g;
        for (std::size_t k = 0; k < d.size(); ++k) {
          if (xv[k] < T(0)) d[k] *= a;
        }
        xn->AccumulateGrad(d);
      }
      if (an->requires_grad) {
        double s = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (xv[k] < T(0)) s += static_cast<double>(g[k]) * xv[k];
        }
        an->AccumulateGrad(Tensor<T>::Scalar(static_cast<T>(s)));
      }
    };
  });
}

enum class NormMode {
  kUtterance,  // statistics over the whole (F, T) plane
  kCumulative  // frame t uses statistics over (F, frames <= t)
};

namespace kernels {

// Per-channel, per-frame statistics. For kUtterance every frame of a
// channel shares one (mean, inv_std) pair.
struct NormStats {
  std::vector<double> mean;     // [C * T]
  std::vector<double> inv_std;  // [C * T]
};

template <typename T>
NormStats ComputeNormStats(const Tensor<T>& x, NormMode mode, double eps) {
  const std::size_t C = x.dim(0), F = x.dim(1), L = x.dim(2);
  NormStats s{std::vector<double>(C * L), std::vector<double>(C * L)};
  for (std::size_t c = 0; c < C; ++c) {
    if (mode == NormMode::kUtterance) {
      double sum = 0.0;
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t t = 0; t < L; ++t) sum += x.at(c, f, t);
      const double n = static_cast<double>(F * L);
      const double mean = sum / n;
      double var = 0.0;
      for (std::size_t f = 0; f < F; ++f)
        for (std::size_t t = 0; t < L; ++t) {
          const double d = x.at(c, f, t) - mean;
          var += d * d;
        }
      var /= n;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (std::size_t t = 0; t < L; ++t) {
        s.mean[c * L + t] = mean;
        s.inv_std[c * L + t] = inv;
      }
    } else {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t f = 0; f < F; ++f) {
          const double v = x.at(c, f, t);
          s1 += v;
          s2 += v * v;
        }
        const double n = static_cast<double>(F * (t + 1));
        const double mean = s1 / n;
        const double var = std::max(0.0, s2 / n - mean * mean);
        s.mean[c * L + t] = mean;
        s.inv_std[c * L + t] = 1.0 / std::sqrt(var + eps);
      }
    }
  }
  return s;
}

}  // namespace kernels

// (x - mean) / sqrt(var + eps) * gamma + beta, statistics per channel.
// x: [C, F, T], gamma/beta: [C].
template <typename T>
Var<T> InstanceNorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    NormMode mode = NormMode::kUtterance, double eps = 1e-5) {
  CheckRank(x.shape(), 3, "instance_norm");
  const std::size_t C = x.shape()[0], F = x.shape()[1], L = x.shape()[2];
  if (gamma.value().size() != C || beta.value().size() != C) {
    throw ShapeError("instance_norm: gamma/beta must have one entry per channel");
  }
  kernels::NormStats stats = kernels::ComputeNormStats(x.value(), mode, eps);
  Tensor<T> y(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    const double gm = gamma.value()[c], bt = beta.value()[c];
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < L; ++t) {
        const double xhat =
            (x.value().at(c, f, t) - stats.mean[c * L + t]) * stats.inv_std[c * L + t];
        y.at(c, f, t) = static_cast<T>(xhat * gm + bt);
      }
  }
  return MakeResult(std::move(y), {&x, &gamma, &beta}, [&] {
    return [xn = x.node(), gn = gamma.node(), bn = beta.node(), mode,
            stats = std::move(stats)](const Tensor<T>& g, const Tensor<T>&) {
      const Tensor<T>& xv = xn->value;
      const std::size_t C = xv.dim(0), F = xv.dim(1), L = xv.dim(2);
      Tensor<T> dx(xv.shape()), dgamma(gn->value.shape()), dbeta(bn->value.shape());
      for (std::size_t c = 0; c < C; ++c) {
        const double gm = gn->value[c];
        double sg = 0.0, sgx = 0.0;
        auto xhat = [&](std::size_t f, std::size_t t) {
          return (xv.at(c, f, t) - stats.mean[c * L + t]) * stats.inv_std[c * L + t];
        };
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < L; ++t) {
            sg += g.at(c, f, t);
            sgx += g.at(c, f, t) * xhat(f, t);
          }
        dbeta[c] = static_cast<T>(sg);
        dgamma[c] = static_cast<T>(sgx);
        if (!xn->requires_grad) continue;
        if (mode == NormMode::kUtterance) {
          const double n = static_cast<double>(F * L);
          const double inv = stats.inv_std[c * L];
          const double mean_g = gm * sg / n, mean_gx = gm * sgx / n;
          for (std::size_t f = 0; f < F; ++f)
            for (std::size_t t = 0; t < L; ++t) {
              const double gh = g.at(c, f, t) * gm;
              dx.at(c, f, t) = static_cast<T>(inv * (gh - mean_g - xhat(f, t) * mean_gx));
            }
        } else {
          // Frame t's output depends on the running sums S1_t = sum x and
          // S2_t = sum x^2 over frames <= t; route their gradients back
          // through suffix sums.
          std::vector<double> ds1(L), ds2(L);
          for (std::size_t t = 0; t < L; ++t) {
            const double n = static_cast<double>(F * (t + 1));
            const double inv = stats.inv_std[c * L + t];
            const double mean = stats.mean[c * L + t];
            double sum_gh = 0.0, sum_ghx = 0.0;
            for (std::size_t f = 0; f < F; ++f) {
              const double gh = g.at(c, f, t) * gm;
              sum_gh += gh;
              sum_ghx += gh * (xv.at(c, f, t) - mean);
              dx.at(c, f, t) = static_cast<T>(gh * inv);
            }
            const double dmean = -inv * sum_gh;
            const double dvar = -0.5 * sum_ghx * inv * inv * inv;
            ds1[t] = (dmean - 2.0 * mean * dvar) / n;
            ds2[t] = dvar / n;
          }
          double suffix1 = 0.0, suffix2 = 0.0;
          for (std::size_t t = L; t-- > 0;) {
            suffix1 += ds1[t];
            suffix2 += ds2[t];
            for (std::size_t f = 0; f < F; ++f) {
              dx.at(c, f, t) = static_cast<T>(dx.at(c, f, t) + suffix1 +
                                              2.0 * xv.at(c, f, t) * suffix2);
            }
          }
        }
      }
      Propagate(xn, dx);
      Propagate(gn, dgamma);
      Propagate(bn, dbeta);
    };
  });
}

// Concatenation along the leading (channel) axis.
template <typename T>
Var<T> ConcatChannels(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || sa.empty() ||
      !std::equal(sa.begin() + 1, sa.end(), sb.begin() + 1)) {
    throw ShapeError("concat: incompatible shapes " + ShapeString(sa) + " and " +
                     ShapeString(sb));
  }
  Shape so = sa;
  so[0] += sb[0];
  std::vector<T> data(a.value().values().begin(), a.value().values().end());
  data.insert(data.end(), b.value().values().begin(), b.value().values().end());
  Tensor<T> y(so, std::move(data));
  return MakeResult(std::move(y), {&a, &b}, [&] {
    return [an = a.node(), bn = b.node()](const Tensor<T>& g, const Tensor<T>&) {
      const std::size_t na = an->value.size();
      if (an->requires_grad) {
        std::vector<T> d(g.values().begin(), g.values().begin() + na);
        an->AccumulateGrad(Tensor<T>(an->value.shape(), std::move(d)));
      }
      if (bn->requires_grad) {
        std::vector<T> d(g.values().begin() + na, g.values().end());
        bn->AccumulateGrad(Tensor<T>(bn->value.shape(), std::move(d)));
      }
    };
  });
}

template <typename T>
Var<T> Reshape(const Var<T>& a, Shape shape) {
  Tensor<T> y = a.value().Reshaped(std::move(shape));
  return MakeResult(std::move(y), {&a}, [&] {
    return [an = a.node()](const Tensor<T>& g, const Tensor<T>&) {
      Propagate(an, g.Reshaped(an->value.shape()));
    };
  });
}

// Per-frame affine map. x: [In, T], w: [Out, In], b: [Out] -> [Out, T].
template <typename T>
Var<T> Linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  CheckRank(x.shape(), 2, "linear");
  CheckRank(w.shape(), 2, "linear");
  const std::size_t in = x.shape()[0], L = x.shape()[1], out = w.shape()[0];
  if (w.shape()[1] != in || b.value().size() != out) {
    throw ShapeError("linear: weight " + ShapeString(w.shape()) +
                     " incompatible with input " + ShapeString(x.shape()));
  }
  Tensor<T> y(Shape{out, L});
  std::vector<double> acc(L);
  for (std::size_t o = 0; o < out; ++o) {
    std::fill(acc.begin(), acc.end(), static_cast<double>(b.value()[o]));
    for (std::size_t i = 0; i < in; ++i) {
      const double wv = w.value()[o * in + i];
      const T* xr = x.value().data() + i * L;
      for (std::size_t t = 0; t < L; ++t) acc[t] += wv * xr[t];
    }
    for (std::size_t t = 0; t < L; ++t) y[o * L + t] = static_cast<T>(acc[t]);
  }
  return MakeResult(std::move(y), {&x, &w, &b}, [&] {
    return [xn = x.node(), wn = w.node(), bn = b.node()](const Tensor<T>& g, const Tensor<T>&) {
      const std::size_t in = xn->value.dim(0), L = xn->value.dim(1);
      const std::size_t out = wn->value.dim(0);
      Tensor<T> dx(xn->value.shape()), dw(wn->value.shape()), db(bn->value.shape());
      std::vector<double> dxa(in * L, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const T* gr = g.data() + o * L;
        double sb = 0.0;
        for (std::size_t t = 0; t < L; ++t) sb += gr[t];
        db[o] = static_cast<T>(sb);
        for (std::size_t i = 0; i < in; ++i) {
          const T* xr = xn->value.data() + i * L;
          double sw = 0.0;
          const double wv = wn->value[o * in + i];
          for (std::size_t t = 0; t < L; ++t) {
            sw += static_cast<double>(gr[t]) * xr[t];
            dxa[i * L + t] += wv * gr[t];
          }
          dw[o * in + i] = static_cast<T>(sw);
        }
      }
      for (std::size_t k = 0; k < dxa.size(); ++k) dx[k] = static_cast<T>(dxa[k]);
      Propagate(xn, dx);
      Propagate(wn, dw);
      Propagate(bn, db);
    };
  });
}

template <typename T>
Var<T> Sum(const Var<T>& a) {
  double s = 0.0;
  for (T v : a.value().values()) s += v;
  return MakeResult(Tensor<T>::Scalar(static_cast<T>(s)), {&a}, [&] {
    return [an = a.node()](const Tensor<T>& g, const Tensor<T>&) {
      Propagate(an, Tensor<T>(an->value.shape(), g[0]));
    };
  });
}

// mean((a - b)^2) over all elements.
template <typename T>
Var<T> MeanSquaredError(const Var<T>& a, const Var<T>& b) {
  detail::CheckSameShape(a.shape(), b.shape(), "mse");
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mse: empty tensors");
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = static_cast<double>(a.value()[k]) - b.value()[k];
    s += d * d;
  }
  return MakeResult(Tensor<T>::Scalar(static_cast<T>(s / n)), {&a, &b}, [&] {
    return [an = a.node(), bn = b.node()](const Tensor<T>& g, const Tensor<T>&) {
      const std::size_t n = an->value.size();
      const double scale = 2.0 * g[0] / static_cast<double>(n);
      Tensor<T> da(an->value.shape());
      for (std::size_t k = 0; k < n; ++k) {
        da[k] = static_cast<T>(scale * (static_cast<double>(an->value[k]) - bn->value[k]));
      }
      if (bn->requires_grad) {
        Tensor<T> dbv = da;
        for (auto& v : dbv.values()) v = -v;
        bn->AccumulateGrad(dbv);
      }
      Propagate(an, da);
    };
  });
}

}  // namespace plce::nn
