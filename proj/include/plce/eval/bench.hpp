// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Threshold sweeps (speed-up vs. quality per input SNR) and per-stage
// distance tables over a labeled test set.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "plce/csv.hpp"
#include "plce/dsp/stft.hpp"
#include "plce/dsp/wav.hpp"
#include "plce/early_exit.hpp"
#include "plce/eval/metrics.hpp"
#include "plce/model/model.hpp"

namespace plce::eval {

struct TestUtterance {
  std::string id;
  double snr_db = 0.0;
  dsp::Waveform noisy;
  dsp::Waveform clean;
};

// Worker count: PLCE_THREADS when set, else the hardware concurrency.
inline std::size_t WorkerCount(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PLCE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, jobs) on a small thread pool. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void ParallelFor(std::size_t jobs, Fn&& fn) {
  const std::size_t workers = WorkerCount(jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Memoizes stage results of one utterance so that a threshold sweep
// computes every stage at most once. Each early-exit run starts from the
// initial state, so stage q always sees the same inputs.
class CachedStages {
 public:
  explicit CachedStages(const model::Model& model) : model_(model) {}
  std::size_t stages() const { return model_.stages(); }
  model::StageResult ForwardStage(const model::StageState& state,
                                  const dsp::Spectrogram& noisy) const {
    if (state.q <= cache_.size()) return cache_[state.q - 1];
    auto r = model_.ForwardStage(state, noisy);
    cache_.push_back(r);
    return r;
  }
  std::size_t computed() const { return cache_.size(); }

 private:
  const model::Model& model_;
  mutable std::vector<model::StageResult> cache_;
};

struct BenchRow {
  double tau = 0.0;
  double snr_db = 0.0;
  std::size_t n = 0;
  double mean_exit_stage = 0.0;
  double speedup = 0.0;         // mean of per-utterance Q / exit_stage
  double speedup_totals = 0.0;  // Q * n / sum of exit stages
  double si_sdr_db = 0.0;
  double seg_snr_db = 0.0;
  std::optional<double> external;
};

struct BenchReport {
  std::size_t stages = 0;
  std::vector<BenchRow> rows;  // tau in given order, then ascending SNR
};

struct BenchOptions {
  bool with_totals = false;
  // Command with {est} and {ref} placeholders; prints one number.
  std::string metric_command;
};

namespace detail {

inline std::string Substitute(std::string cmd, const std::string& key,
                              const std::string& value) {
  for (std::size_t p = cmd.find(key); p != std::string::npos;
       p = cmd.find(key, p + value.size())) {
    cmd.replace(p, key.size(), value);
  }
  return cmd;
}

inline std::string ShellQuote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

inline double RunMetricCommand(const std::string& tmpl, const dsp::Waveform& est,
                               const dsp::Waveform& ref, const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path();
  const fs::path est_path = dir / ("plce_est_" + tag + ".wav");
  const fs::path ref_path = dir / ("plce_ref_" + tag + ".wav");
  dsp::WriteWav(est_path.string(), est);
  dsp::WriteWav(ref_path.string(), ref);
  std::string cmd = Substitute(tmpl, "{est}", ShellQuote(est_path.string()));
  cmd = Substitute(cmd, "{ref}", ShellQuote(ref_path.string()));
  std::string output;
  if (FILE* pipe = popen(cmd.c_str(), "r")) {
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe)) output += buf;
    const int status = pclose(pipe);
    fs::remove(est_path);
    fs::remove(ref_path);
    if (status != 0) throw Error("metric command failed: " + cmd);
  } else {
    throw Error("cannot run metric command: " + cmd);
  }
  return csv::ParseNumber(output.substr(0, output.find_first_of("\r\n")));
}

}  // namespace detail

inline BenchReport RunBench(const model::Model& model,
                            const std::vector<TestUtterance>& testset,
                            const std::vector<double>& taus,
                            const BenchOptions& options = {}) {
  if (testset.empty()) throw DataError("benchmark test set is empty");
  if (taus.empty()) throw DataError("benchmark needs at least one threshold");
  const std::size_t Q = model.stages();

  struct Cell {
    std::size_t exit_stage = 0;
    double si_sdr = 0.0;
    double seg_snr = 0.0;
    double external = 0.0;
  };
  // Deterministic reduction order: sorted by utterance id.
  std::vector<std::size_t> order(testset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return testset[a].id < testset[b].id;
  });

  std::vector<std::vector<Cell>> cells(testset.size(), std::vector<Cell>(taus.size()));
  ParallelFor(testset.size(), [&](std::size_t u) {
    const TestUtterance& utt = testset[u];
    const dsp::Spectrogram noisy = dsp::Stft(utt.noisy);
    CachedStages runner(model);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      auto r = early_exit::RunWithEarlyExit(runner, noisy,
                                            early_exit::ExitPolicy{taus[t], Q});
      const dsp::Waveform est = dsp::Istft(r.estimate, utt.noisy.size());
      Cell& c = cells[u][t];
      c.exit_stage = r.trace.exit_stage;
      c.si_sdr = SiSdr(est.samples, utt.clean.samples);
      c.seg_snr = SegSnr(est.samples, utt.clean.samples);
      if (!options.metric_command.empty()) {
        c.external = detail::RunMetricCommand(options.metric_command, est, utt.clean,
                                              std::to_string(u) + "_" + std::to_string(t));
      }
    }
  });

  std::set<double> snrs;
  for (const auto& u : testset) snrs.insert(u.snr_db);
  BenchReport report;
  report.stages = Q;
  for (std::size_t t = 0; t < taus.size(); ++t) {
    for (double snr : snrs) {
      BenchRow row;
      row.tau = taus[t];
      row.snr_db = snr;
      std::vector<std::size_t> exits;
      double si = 0.0, seg = 0.0, ext = 0.0;
      for (std::size_t u : order) {
        if (testset[u].snr_db != snr) continue;
        const Cell& c = cells[u][t];
        exits.push_back(c.exit_stage);
        si += c.si_sdr;
        seg += c.seg_snr;
        ext += c.external;
      }
      const double n = static_cast<double>(exits.size());
      row.n = exits.size();
      double stage_sum = 0.0;
      for (std::size_t e : exits) stage_sum += static_cast<double>(e);
      row.mean_exit_stage = stage_sum / n;
      row.speedup = early_exit::SpeedupRatio(exits, Q);
      row.speedup_totals =
          early_exit::SpeedupRatio(exits, Q, early_exit::SpeedupAggregation::kRatioOfTotals);
      row.si_sdr_db = si / n;
      row.seg_snr_db = seg / n;
      if (!options.metric_command.empty()) row.external = ext / n;
      report.rows.push_back(row);
    }
  }
  return report;
}

// tau,snr_db,n,mean_exit_stage,speedup,si_sdr_db,seg_snr_db
// (+ speedup_totals when requested, + ext_metric when a hook ran).
inline void WriteReportCsv(std::ostream& os, const BenchReport& report,
                           bool with_totals = false) {
  const bool ext = !report.rows.empty() && report.rows.front().external.has_value();
  os << "tau,snr_db,n,mean_exit_stage,speedup,si_sdr_db,seg_snr_db";
  if (with_totals) os << ",speedup_totals";
  if (ext) os << ",ext_metric";
  os << '\n';
  for (const auto& r : report.rows) {
    os << csv::FormatNumber(r.tau) << ',' << csv::FormatNumber(r.snr_db) << ',' << r.n
       << ',' << csv::FormatNumber(r.mean_exit_stage) << ','
       << csv::FormatNumber(r.speedup) << ',' << csv::FormatNumber(r.si_sdr_db) << ','
       << csv::FormatNumber(r.seg_snr_db);
    if (with_totals) os << ',' << csv::FormatNumber(r.speedup_totals);
    if (ext) os << ',' << csv::FormatNumber(*r.external);
    os << '\n';
  }
}

struct DistTraceRow {
  double snr_db = 0.0;
  std::size_t stage = 0;
  double mean_dist = 0.0;
  double log10_mean_dist = 0.0;
};

// Mean Dist_q per (input SNR, stage) over full Q-stage passes.
inline std::vector<DistTraceRow> DistTraceAggregate(const model::Model& model,
                                                    const std::vector<TestUtterance>& testset) {
  if (testset.empty()) throw DataError("trace test set is empty");
  const std::size_t Q = model.stages();
  std::vector<std::vector<double>> dists(testset.size());
  ParallelFor(testset.size(), [&](std::size_t u) {
    const dsp::Spectrogram noisy = dsp::Stft(testset[u].noisy);
    dists[u] = early_exit::StageDistances(noisy, model.ForwardAll(noisy));
  });
  std::vector<std::size_t> order(testset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return testset[a].id < testset[b].id;
  });
  std::set<double> snrs;
  for (const auto& u : testset) snrs.insert(u.snr_db);
  std::vector<DistTraceRow> rows;
  for (double snr : snrs) {
    for (std::size_t q = 1; q <= Q; ++q) {
      double s = 0.0;
      std::size_t n = 0;
      for (std::size_t u : order) {
        if (testset[u].snr_db != snr) continue;
        s += dists[u][q - 1];
        ++n;
      }
      DistTraceRow row;
      row.snr_db = snr;
      row.stage = q;
      row.mean_dist = s / static_cast<double>(n);
      row.log10_mean_dist = std::log10(row.mean_dist);
      rows.push_back(row);
    }
  }
  return rows;
}

// snr_db,stage,mean_dist,log10_mean_dist
inline void WriteTraceTableCsv(std::ostream& os, const std::vector<DistTraceRow>& rows) {
  os << "snr_db,stage,mean_dist,log10_mean_dist\n";
  for (const auto& r : rows) {
    os << csv::FormatNumber(r.snr_db) << ',' << r.stage << ','
       << csv::FormatNumber(r.mean_dist) << ',' << csv::FormatNumber(r.log10_mean_dist)
       << '\n';
  }
}

// Reads <dir>/mixtures.csv (as written by `plce mix`): columns id,
// mixture_path, clean_path and snr_db; relative paths resolve against <dir>.
inline std::vector<TestUtterance> LoadTestSet(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest = fs::path(dir) / "mixtures.csv";
  if (!fs::is_directory(dir)) throw DataError(dir + ": not a directory");
  if (!fs::exists(manifest)) throw DataError(dir + ": no mixtures.csv test manifest");
  const csv::Table t = csv::ReadFile(manifest.string());
  const std::size_t c_id = t.Column("id"), c_mix = t.Column("mixture_path"),
                    c_clean = t.Column("clean_path"), c_snr = t.Column("snr_db");
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path.string() : (fs::path(dir) / path).string();
  };
  std::vector<TestUtterance> out;
  for (const auto& row : t.rows) {
    TestUtterance u;
    u.id = row[c_id];
    u.snr_db = csv::ParseNumber(row[c_snr]);
    u.noisy = dsp::ReadWav(resolve(row[c_mix]));
    u.clean = dsp::ReadWav(resolve(row[c_clean]));
    if (u.noisy.size() != u.clean.size()) {
      throw DataError(u.id + ": mixture and clean lengths differ");
    }
    out.push_back(std::move(u));
  }
  if (out.empty()) throw DataError(dir + ": test manifest has no rows");
  return out;
}

}  // namespace plce::eval
