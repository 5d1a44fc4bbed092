// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "plce/error.hpp"
#include "plce/nn/autograd.hpp"

namespace plce::training {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamState {
  std::size_t step = 0;
  std::map<std::string, AdamMoments> moments;
};

// Bias-corrected Adam over named parameter nodes, reading each node's
// accumulated gradient (missing gradient = zero). Throws on a non-finite
// gradient before touching any parameter.
inline void AdamStep(const std::map<std::string, std::shared_ptr<nn::Node<float>>>& params,
                     AdamState& state, const AdamOptions& opt) {
  for (const auto& [name, node] : params) {
    for (std::size_t i = 0; i < node->grad.size(); ++i) {
      if (!std::isfinite(node->grad[i])) {
        throw NumericError("non-finite gradient in " + name + " at element " +
                           std::to_string(i) + " (step " + std::to_string(state.step + 1) +
                           ")");
      }
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (const auto& [name, node] : params) {
    const std::size_t n = node->value.size();
    AdamMoments& mom = state.moments[name];
    if (mom.m.size() != n) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double g = node->grad.empty() ? 0.0 : static_cast<double>(node->grad[i]);
      mom.m[i] = opt.beta1 * mom.m[i] + (1.0 - opt.beta1) * g;
      mom.v[i] = opt.beta2 * mom.v[i] + (1.0 - opt.beta2) * g * g;
      const double m_hat = mom.m[i] / c1;
      const double v_hat = mom.v[i] / c2;
      node->value[i] = static_cast<float>(node->value[i] -
                                          opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps));
    }
  }
}

// Halves the learning rate once the monitored loss has increased on three
// consecutive epochs; the run of increases then starts over.
class LrSchedule {
 public:
  explicit LrSchedule(std::size_t patience = 3) : patience_(patience) {}

  // Records one epoch loss; returns the multiplier to apply (0.5 or 1).
  double Observe(double loss) {
    if (has_last_ && loss > last_) {
      ++increases_;
    } else {
      increases_ = 0;
    }
    has_last_ = true;
    last_ = loss;
    if (increases_ >= patience_) {
      increases_ = 0;
      ++halvings_;
      return 0.5;
    }
    return 1.0;
  }

  std::size_t halvings() const { return halvings_; }

 private:
  std::size_t patience_;
  std::size_t increases_ = 0;
  std::size_t halvings_ = 0;
  bool has_last_ = false;
  double last_ = 0.0;
};

}  // namespace plce::training
