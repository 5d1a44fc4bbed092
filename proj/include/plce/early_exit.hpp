// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Threshold-driven early exit for stage-wise enhancement.
//
// After stage q the adjacent spectral distance
//
//   Dist_q = sum_{k,l} |S~^q(k,l) - S~^{q-1}(k,l)|^2 / (Z * K * L),
//   Z      = sum_{k,l} |X(k,l)|^2 / (K * L),
//
// is compared against tau, with S~^0 = X. Inference stops at the first stage
// with Dist_q < tau (strict), or after the last stage. tau = +inf always
// exits after stage 1; tau = 0 never exits early.

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "plce/csv.hpp"
#include "plce/dsp/stft.hpp"
#include "plce/error.hpp"
#include "plce/model/model.hpp"

namespace plce::early_exit {

using dsp::Spectrogram;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct ExitPolicy {
  double tau = 0.0;
  std::size_t max_stages = 5;

  void Validate() const {
    if (std::isnan(tau) || tau < 0.0) {
      throw Error("exit threshold must be >= 0 or +inf");
    }
    if (max_stages < 1) throw Error("exit policy needs at least one stage");
  }
};

struct StageTrace {
  std::vector<double> dists;       // Dist_1 .. Dist_exit
  std::size_t exit_stage = 0;      // 1-based
  double z = 0.0;                  // normalization of the noisy input
  std::vector<double> wall_times;  // seconds per computed stage
};

// Mean power of the noisy spectrum.
inline double ComputeZ(const Spectrogram& x) {
  if (x.size() == 0) throw AudioError("normalization of an empty spectrogram");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += x.real[i] * x.real[i] + x.imag[i] * x.imag[i];
  }
  const double z = s / static_cast<double>(x.size());
  if (!(z > 0.0)) throw AudioError("degenerate normalization: input is digitally silent");
  return z;
}

inline double ComputeDist(const Spectrogram& a, const Spectrogram& b, double z) {
  if (!a.SameShape(b)) {
    throw ShapeError("distance between spectrograms of different shapes");
  }
  if (a.size() == 0) throw ShapeError("distance between empty spectrograms");
  if (!(z > 0.0)) throw Error("distance normalization must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dr = a.real[i] - b.real[i];
    const double di = a.imag[i] - b.imag[i];
    s += dr * dr + di * di;
  }
  return s / (z * static_cast<double>(a.size()));
}

// First stage whose distance is strictly below tau, else the last stage.
inline std::size_t ExitStageFromDists(const std::vector<double>& dists, double tau) {
  for (std::size_t q = 0; q < dists.size(); ++q) {
    if (dists[q] < tau) return q + 1;
  }
  return dists.size();
}

struct EarlyExitResult {
  Spectrogram estimate;
  StageTrace trace;
};

// Runs stages until the exit rule fires. Stages after the exit are never
// computed. `Runner` needs stages() and
// ForwardStage(const StageState&, const Spectrogram&) -> StageResult.
template <typename Runner>
EarlyExitResult RunWithEarlyExit(const Runner& model, const Spectrogram& noisy,
                                 const ExitPolicy& policy) {
  policy.Validate();
  if (policy.max_stages > model.stages()) {
    throw ModelError("exit policy allows " + std::to_string(policy.max_stages) +
                     " stages, model has " + std::to_string(model.stages()));
  }
  EarlyExitResult out;
  out.trace.z = ComputeZ(noisy);
  model::StageState state = model::StageState::Initial(noisy);
  for (std::size_t q = 1; q <= policy.max_stages; ++q) {
    const auto start = std::chrono::steady_clock::now();
    model::StageResult r = model.ForwardStage(state, noisy);
    const double dist = ComputeDist(r.estimate, state.previous, out.trace.z);
    out.trace.wall_times.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    out.trace.dists.push_back(dist);
    state = std::move(r.state);
    if (dist < policy.tau || q == policy.max_stages) {
      out.trace.exit_stage = q;
      out.estimate = std::move(r.estimate);
      break;
    }
  }
  return out;
}

// All-stage distances Dist_1..Dist_Q from a full forward pass.
inline std::vector<double> StageDistances(const Spectrogram& noisy,
                                          const std::vector<Spectrogram>& estimates) {
  const double z = ComputeZ(noisy);
  std::vector<double> d;
  const Spectrogram* prev = &noisy;
  for (const auto& e : estimates) {
    d.push_back(ComputeDist(e, *prev, z));
    prev = &e;
  }
  return d;
}

enum class SpeedupAggregation {
  kMeanOfRatios,  // mean over utterances of Q / exit_stage
  kRatioOfTotals  // Q * N / sum of exit stages
};

inline double SpeedupRatio(const std::vector<std::size_t>& exit_stages,
                           std::size_t stages,
                           SpeedupAggregation agg = SpeedupAggregation::kMeanOfRatios) {
  if (exit_stages.empty()) throw Error("speed-up ratio of an empty set");
  double sum = 0.0;
  for (std::size_t e : exit_stages) {
    if (e < 1 || e > stages) {
      throw Error("exit stage " + std::to_string(e) + " outside 1.." +
                  std::to_string(stages));
    }
    sum += agg == SpeedupAggregation::kMeanOfRatios
               ? static_cast<double>(stages) / static_cast<double>(e)
               : static_cast<double>(e);
  }
  const double n = static_cast<double>(exit_stages.size());
  return agg == SpeedupAggregation::kMeanOfRatios ? sum / n
                                                  : static_cast<double>(stages) * n / sum;
}

// utterance_id,snr_db,tau,stage,dist,exited,wall_time_ms
inline void WriteTraceCsvHeader(std::ostream& os) {
  os << "utterance_id,snr_db,tau,stage,dist,exited,wall_time_ms\n";
}

inline void WriteTraceCsvRows(std::ostream& os, const std::string& utterance_id,
                              double snr_db, double tau, const StageTrace& trace) {
  for (std::size_t q = 0; q < trace.dists.size(); ++q) {
    os << csv::Escape(utterance_id) << ',' << csv::FormatNumber(snr_db) << ','
       << csv::FormatNumber(tau) << ',' << q + 1 << ','
       << csv::FormatNumber(trace.dists[q]) << ','
       << (q + 1 == trace.exit_stage ? 1 : 0) << ','
       << csv::FormatNumber(q < trace.wall_times.size() ? trace.wall_times[q] * 1e3 : 0.0)
       << '\n';
  }
}

}  // namespace plce::early_exit
