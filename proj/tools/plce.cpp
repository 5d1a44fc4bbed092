// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// plce: mix, train, enhance, bench and trace.
// Exit codes: 0 ok, 1 other error, 2 usage, 3 model, 4 audio, 5 data.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "plce/plce.hpp"

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 20210301;
constexpr const char* kTauGrid = "inf,0.6,0.2,0.08,0.04,0.02,0.01,0";

class UsageError : public plce::Error {
 public:
  using Error::Error;
};

double ParseTau(const std::string& s) {
  double v = 0.0;
  try {
    v = plce::csv::ParseNumber(s);
  } catch (const plce::DataError&) {
    throw UsageError("bad threshold '" + s + "'");
  }
  if (std::isnan(v) || v < 0.0) throw UsageError("threshold must be >= 0 or inf: " + s);
  return v;
}

std::vector<double> ParseTauList(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(ParseTau(item));
  if (out.empty()) throw UsageError("empty threshold list");
  return out;
}

plce::nn::NormMode ParseNorm(const std::string& s) {
  if (s == "utterance") return plce::nn::NormMode::kUtterance;
  if (s == "streaming") return plce::nn::NormMode::kCumulative;
  throw UsageError("--norm must be 'utterance' or 'streaming'");
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw plce::DataError(path + ": cannot open for writing");
  return out;
}

// ---- mix --------------------------------------------------------------

struct MixArgs {
  std::string manifest;
  std::string out_dir;
  std::uint64_t seed = kDefaultSeed;
  bool any_snr = false;
};

int RunMix(const MixArgs& a) {
  const auto rows = plce::training::ReadManifest(a.manifest, a.seed);
  fs::create_directories(a.out_dir);
  auto sidecar = OpenOut((fs::path(a.out_dir) / "mixtures.csv").string());
  sidecar << "id,mixture_path,noise_segment_path,clean_path,noise_path,snr_db,"
             "realized_snr_db,seed,noise_offset,gain\n";
  std::size_t failed = 0;
  for (const auto& row : rows) {
    try {
      plce::training::CheckRowSnr(row, a.any_snr);
      const auto clean = plce::dsp::ReadWav(row.clean_path);
      const auto noise = plce::dsp::ReadWav(row.noise_path);
      const auto mix = plce::training::MixAtSnr(clean, noise, row.snr_db, row.seed);
      const std::string mix_name = row.id + "_mix.wav";
      const std::string noise_name = row.id + "_noise.wav";
      plce::dsp::WriteWav((fs::path(a.out_dir) / mix_name).string(), mix.mixture);
      plce::dsp::WriteWav((fs::path(a.out_dir) / noise_name).string(), mix.scaled_noise);
      const double realized = plce::training::SnrDb(clean.samples, mix.scaled_noise.samples);
      using plce::csv::Escape;
      using plce::csv::FormatNumber;
      sidecar << Escape(row.id) << ',' << Escape(mix_name) << ',' << Escape(noise_name) << ','
              << Escape(fs::absolute(row.clean_path).lexically_normal().string()) << ','
              << Escape(fs::absolute(row.noise_path).lexically_normal().string()) << ','
              << FormatNumber(row.snr_db) << ',' << FormatNumber(realized) << ',' << row.seed
              << ',' << mix.noise_offset << ',' << FormatNumber(mix.gain) << '\n';
    } catch (const plce::Error& e) {
      std::cerr << "row " << row.index + 1 << " (" << row.id << "): " << e.what() << '\n';
      ++failed;
    }
  }
  std::cerr << rows.size() - failed << " of " << rows.size() << " mixtures written\n";
  return failed == 0 ? 0 : 5;
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string val_manifest;
  std::string out;
  std::string loss_csv;
  std::size_t epochs = 50;
  std::size_t batch = 8;
  double lr = 1e-3;
  std::uint64_t seed = kDefaultSeed;
  std::size_t stages = 5;
  std::size_t channels = 64;
  std::size_t lstm_units = 256;
  std::size_t lstm_layers = 2;
  std::size_t max_steps = 0;
  bool no_gate = false;
  bool no_srnn = false;
  bool any_snr = false;
};

int RunTrain(const TrainArgs& a) {
  plce::model::ModelConfig config;
  config.stages = a.stages;
  config.channels = a.channels;
  config.lstm_units = a.lstm_units;
  config.lstm_layers = a.lstm_layers;
  config.gate_enabled = !a.no_gate;
  config.srnn_enabled = !a.no_srnn;
  try {
    config.Validate();
  } catch (const plce::ModelError& e) {
    throw UsageError(e.what());
  }
  if (a.epochs == 0 || a.batch == 0) throw UsageError("--epochs and --batch must be positive");
  if (!(a.lr > 0.0)) throw UsageError("--lr must be positive");

  const auto train = plce::training::LoadExamples(a.manifest, a.seed, a.stages, a.any_snr);
  std::vector<plce::training::TrainingExample> val;
  if (!a.val_manifest.empty()) {
    val = plce::training::LoadExamples(a.val_manifest, plce::nn::SplitSeed(a.seed, 3), a.stages,
                                       a.any_snr);
  }
  plce::training::TrainOptions opt;
  opt.epochs = a.epochs;
  opt.batch = a.batch;
  opt.adam.lr = a.lr;
  opt.seed = a.seed;
  opt.max_steps = a.max_steps;
  const auto result = plce::training::TrainLoop(config, train, val, opt);
  plce::model::SaveWeights(result.weights, a.out);
  if (!a.loss_csv.empty()) {
    auto out = OpenOut(a.loss_csv);
    plce::training::WriteLossCurveCsv(out, result.curve);
  }
  for (const auto& e : result.curve) {
    std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss
              << " lr " << e.lr << '\n';
  }
  return 0;
}

// ---- enhance ----------------------------------------------------------

struct EnhanceArgs {
  std::string model;
  std::string in;
  std::string out;
  std::string trace;
  std::string tau = "0";
  std::size_t stages = 0;
  std::string norm = "utterance";
};

int RunEnhance(const EnhanceArgs& a) {
  const double tau = ParseTau(a.tau);
  const auto norm = ParseNorm(a.norm);
  const plce::model::Model model(plce::model::LoadWeights(a.model), norm);
  const std::size_t stages = a.stages == 0 ? model.stages() : a.stages;
  if (stages > model.stages()) {
    throw UsageError("--stages " + std::to_string(stages) + " exceeds the model's " +
                     std::to_string(model.stages()));
  }
  const auto noisy = plce::dsp::ReadWav(a.in);
  const auto spec = plce::dsp::Stft(noisy);
  const auto r = plce::early_exit::RunWithEarlyExit(model, spec, {tau, stages});
  plce::dsp::WriteWav(a.out, plce::dsp::Istft(r.estimate, noisy.size()));
  if (!a.trace.empty()) {
    auto out = OpenOut(a.trace);
    plce::early_exit::WriteTraceCsvHeader(out);
    plce::early_exit::WriteTraceCsvRows(out, fs::path(a.in).stem().string(), NAN, tau,
                                        r.trace);
  }
  std::cerr << "exit stage " << r.trace.exit_stage << " of " << stages << '\n';
  return 0;
}

// ---- bench / trace ----------------------------------------------------

struct BenchArgs {
  std::string model;
  std::string test_dir;
  std::string report;
  std::string taus = kTauGrid;
  std::string metric_cmd;
  std::string norm = "utterance";
  bool with_totals = false;
};

int RunBench(const BenchArgs& a) {
  const auto taus = ParseTauList(a.taus);
  const plce::model::Model model(plce::model::LoadWeights(a.model), ParseNorm(a.norm));
  const auto testset = plce::eval::LoadTestSet(a.test_dir);
  plce::eval::BenchOptions opt;
  opt.with_totals = a.with_totals;
  opt.metric_command = a.metric_cmd;
  const auto report = plce::eval::RunBench(model, testset, taus, opt);
  auto out = OpenOut(a.report);
  plce::eval::WriteReportCsv(out, report, a.with_totals);
  return 0;
}

struct TraceArgs {
  std::string model;
  std::string test_dir;
  std::string out;
  std::string norm = "utterance";
};

int RunTrace(const TraceArgs& a) {
  const plce::model::Model model(plce::model::LoadWeights(a.model), ParseNorm(a.norm));
  const auto rows = plce::eval::DistTraceAggregate(model, plce::eval::LoadTestSet(a.test_dir));
  auto out = OpenOut(a.out);
  plce::eval::WriteTraceTableCsv(out, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive speech enhancement with threshold early exit"};
  app.require_subcommand(1);

  MixArgs mix;
  auto* c_mix = app.add_subcommand("mix", "Synthesize noisy mixtures from a manifest");
  c_mix->add_option("--manifest", mix.manifest, "CSV: clean_path,noise_path,snr_db[,seed]")
      ->required();
  c_mix->add_option("--out", mix.out_dir, "Output directory")->required();
  c_mix->add_option("--seed", mix.seed, "Root seed")->capture_default_str();
  c_mix->add_flag("--any-snr", mix.any_snr, "Accept any SNR within [-5, 30] dB");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model");
  c_train->add_option("--manifest", tr.manifest, "Training manifest")->required();
  c_train->add_option("--val", tr.val_manifest, "Validation manifest");
  c_train->add_option("--out", tr.out, "Output weight file")->required();
  c_train->add_option("--loss-csv", tr.loss_csv, "Loss curve CSV");
  c_train->add_option("--epochs", tr.epochs)->capture_default_str();
  c_train->add_option("--batch", tr.batch)->capture_default_str();
  c_train->add_option("--lr", tr.lr)->capture_default_str();
  c_train->add_option("--seed", tr.seed)->capture_default_str();
  c_train->add_option("--stages", tr.stages)->capture_default_str();
  c_train->add_option("--channels", tr.channels)->capture_default_str();
  c_train->add_option("--lstm-units", tr.lstm_units)->capture_default_str();
  c_train->add_option("--lstm-layers", tr.lstm_layers)->capture_default_str();
  c_train->add_option("--max-steps", tr.max_steps, "Stop after N updates (0: no limit)")
      ->capture_default_str();
  c_train->add_flag("--no-gate", tr.no_gate, "Plain convolutions instead of GLUs");
  c_train->add_flag("--no-srnn", tr.no_srnn, "Drop the stage-recurrent ConvGRU");
  c_train->add_flag("--any-snr", tr.any_snr, "Accept any SNR within [-5, 30] dB");

  EnhanceArgs en;
  auto* c_enh = app.add_subcommand("enhance", "Enhance one WAV file");
  c_enh->add_option("--model", en.model)->required();
  c_enh->add_option("--in", en.in)->required();
  c_enh->add_option("--out", en.out)->required();
  c_enh->add_option("--tau", en.tau, "Exit threshold (number or inf)")->capture_default_str();
  c_enh->add_option("--stages", en.stages, "Stage cap (0: all)")->capture_default_str();
  c_enh->add_option("--trace", en.trace, "Per-stage trace CSV");
  c_enh->add_option("--norm", en.norm, "utterance|streaming")->capture_default_str();

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Threshold sweep over a test set");
  c_bench->add_option("--model", be.model)->required();
  c_bench->add_option("--test-dir", be.test_dir, "Directory written by `plce mix`")->required();
  c_bench->add_option("--report", be.report)->required();
  c_bench->add_option("--taus", be.taus)->capture_default_str();
  c_bench->add_option("--metric-cmd", be.metric_cmd, "External metric: {est} {ref}");
  c_bench->add_option("--norm", be.norm, "utterance|streaming")->capture_default_str();
  c_bench->add_flag("--with-totals", be.with_totals, "Add a ratio-of-totals speed-up column");

  TraceArgs tc;
  auto* c_trace = app.add_subcommand("trace", "Mean per-stage distance table");
  c_trace->add_option("--model", tc.model)->required();
  c_trace->add_option("--test-dir", tc.test_dir)->required();
  c_trace->add_option("--out", tc.out)->required();
  c_trace->add_option("--norm", tc.norm, "utterance|streaming")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_mix) return RunMix(mix);
    if (*c_train) return RunTrain(tr);
    if (*c_enh) return RunEnhance(en);
    if (*c_bench) return RunBench(be);
    if (*c_trace) return RunTrace(tc);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const plce::ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 3;
  } catch (const plce::AudioError& e) {
    std::cerr << "audio error: " << e.what() << '\n';
    return 4;
  } catch (const plce::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
