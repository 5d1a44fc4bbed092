// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plce/csv.hpp"
#include "plce/dsp/wav.hpp"
#include "plce/model/weights.hpp"
#include "support/synth.hpp"

namespace plce {
namespace {

namespace fs = std::filesystem;

fs::path Root() { return fs::temp_directory_path() / "plce_cli_test"; }

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int Plce(const std::string& args) {
  const std::string cmd = std::string(PLCE_CLI) + " " + args + " 2>>" +
                          (Root() / "stderr.log").string() + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string P(const std::string& name) { return (Root() / name).string(); }

const std::string kTinyModel = "--channels 4 --lstm-units 16 --lstm-layers 2";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(Root());
    fs::create_directories(Root() / "audio");
    for (int i = 0; i < 3; ++i) {
      dsp::WriteWav(P("audio/clean" + std::to_string(i) + ".wav"), synth::Voiced(4800, i));
    }
    dsp::WriteWav(P("audio/noise.wav"), synth::WhiteNoise(16000, 9));
    std::ofstream(P("train.csv")) << "clean_path,noise_path,snr_db\n"
                                     "audio/clean0.wav,audio/noise.wav,-5\n"
                                     "audio/clean1.wav,audio/noise.wav,5\n"
                                     "audio/clean2.wav,audio/noise.wav,15\n";
    std::ofstream(P("test.csv")) << "id,clean_path,noise_path,snr_db\n"
                                    "t0,audio/clean0.wav,audio/noise.wav,0\n"
                                    "t1,audio/clean1.wav,audio/noise.wav,5\n"
                                    "t2,audio/clean2.wav,audio/noise.wav,10\n";
    ASSERT_EQ(Plce("mix --manifest " + P("test.csv") + " --out " + P("testset") + " --any-snr"), 0);
    ASSERT_EQ(Plce("train --manifest " + P("train.csv") + " --out " + P("model.plcw") +
                  " --loss-csv " + P("loss.csv") + " --epochs 1 --batch 2 " + kTinyModel),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(Root()); }
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(Plce(""), 2);
  EXPECT_EQ(Plce("frobnicate"), 2);
  EXPECT_EQ(Plce("enhance --model " + P("model.plcw")), 2);
  EXPECT_EQ(Plce("enhance --model " + P("model.plcw") + " --in " + P("audio/clean0.wav") +
                " --out " + P("x.wav") + " --tau abc"),
            2);
  EXPECT_EQ(Plce("enhance --model " + P("model.plcw") + " --in " + P("audio/clean0.wav") +
                " --out " + P("x.wav") + " --tau -1"),
            2);
  EXPECT_EQ(Plce("train --manifest " + P("train.csv") + " --out " + P("x.plcw") +
                " --channels 0"),
            2);
  EXPECT_EQ(Plce("train --manifest " + P("train.csv") + " --out " + P("x.plcw") + " --epochs 0"),
            2);
  EXPECT_EQ(Plce("bench --model " + P("model.plcw") + " --test-dir " + P("testset") +
                " --report " + P("x.csv") + " --taus 0.1,,x"),
            2);
}

TEST_F(Cli, ModelAudioAndDataErrors) {
  std::ofstream(P("junk.plcw")) << "definitely not weights";
  EXPECT_EQ(Plce("enhance --model " + P("junk.plcw") + " --in " + P("audio/clean0.wav") +
                " --out " + P("x.wav")),
            3);
  EXPECT_EQ(Plce("enhance --model " + P("missing.plcw") + " --in " + P("audio/clean0.wav") +
                " --out " + P("x.wav")),
            3);
  EXPECT_EQ(Plce("enhance --model " + P("model.plcw") + " --in " + P("missing.wav") + " --out " +
                P("x.wav")),
            4);
  std::ofstream(P("bad.wav")) << "RIFF....WAVEjunk";
  EXPECT_EQ(Plce("enhance --model " + P("model.plcw") + " --in " + P("bad.wav") + " --out " +
                P("x.wav")),
            4);
  fs::create_directories(Root() / "empty");
  EXPECT_EQ(Plce("bench --model " + P("model.plcw") + " --test-dir " + P("empty") + " --report " +
                P("x.csv")),
            5);
  EXPECT_EQ(Plce("trace --model " + P("model.plcw") + " --test-dir " + P("empty") + " --out " +
                P("x.csv")),
            5);
  EXPECT_EQ(Plce("train --manifest " + P("missing.csv") + " --out " + P("x.plcw")), 5);
}

TEST_F(Cli, MixWritesSidecarAndIsDeterministic) {
  const auto t = csv::ReadFile(P("testset/mixtures.csv"));
  ASSERT_EQ(t.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& r = t.rows[i];
    EXPECT_TRUE(fs::exists(Root() / "testset" / r[t.Column("mixture_path")]));
    EXPECT_TRUE(fs::exists(Root() / "testset" / r[t.Column("noise_segment_path")]));
    EXPECT_NEAR(csv::ParseNumber(r[t.Column("realized_snr_db")]),
                csv::ParseNumber(r[t.Column("snr_db")]), 1e-6);
  }
  ASSERT_EQ(Plce("mix --manifest " + P("test.csv") + " --out " + P("testset2") + " --any-snr"), 0);
  EXPECT_EQ(Slurp(P("testset/mixtures.csv")), Slurp(P("testset2/mixtures.csv")));
  EXPECT_EQ(Slurp(P("testset/t1_mix.wav")), Slurp(P("testset2/t1_mix.wav")));
  ASSERT_EQ(Plce("mix --manifest " + P("test.csv") + " --out " + P("testset3") +
                " --any-snr --seed 5"),
            0);
  EXPECT_NE(Slurp(P("testset/t1_mix.wav")), Slurp(P("testset3/t1_mix.wav")));
}

TEST_F(Cli, MixRejectsOffGridRows) {
  // 0 and 10 dB are off the -5:2:29 grid; only --any-snr admits them.
  EXPECT_EQ(Plce("mix --manifest " + P("test.csv") + " --out " + P("offgrid")), 5);
  const auto t = csv::ReadFile(P("offgrid/mixtures.csv"));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][t.Column("id")], "t1");
  std::ofstream(P("range.csv")) << "clean_path,noise_path,snr_db\n"
                                   "audio/clean0.wav,audio/noise.wav,31\n"
                                   "audio/clean0.wav,audio/noise.wav,7\n";
  EXPECT_EQ(Plce("mix --manifest " + P("range.csv") + " --out " + P("range") + " --any-snr"), 5);
  EXPECT_EQ(csv::ReadFile(P("range/mixtures.csv")).rows.size(), 1u);
}

TEST_F(Cli, TrainWritesLoadableDeterministicWeights) {
  const auto w = model::LoadWeights(P("model.plcw"));
  EXPECT_EQ(model::InferConfig(w).stages, 5u);
  EXPECT_EQ(csv::ReadFile(P("loss.csv")).rows.size(), 1u);
  ASSERT_EQ(Plce("train --manifest " + P("train.csv") + " --out " + P("model2.plcw") +
                " --epochs 1 --batch 2 " + kTinyModel),
            0);
  EXPECT_EQ(Slurp(P("model.plcw")), Slurp(P("model2.plcw")));
}

TEST_F(Cli, EnhanceSentinelsAndLength) {
  const std::string base = "enhance --model " + P("model.plcw") + " --in " +
                           P("testset/t0_mix.wav") + " --out " + P("enh.wav") + " --trace " +
                           P("trace.csv");
  ASSERT_EQ(Plce(base + " --tau inf"), 0);
  auto t = csv::ReadFile(P("trace.csv"));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][t.Column("stage")], "1");
  EXPECT_EQ(t.rows[0][t.Column("exited")], "1");
  EXPECT_EQ(dsp::ReadWav(P("enh.wav")).size(), dsp::ReadWav(P("testset/t0_mix.wav")).size());

  ASSERT_EQ(Plce(base + " --tau 0"), 0);
  t = csv::ReadFile(P("trace.csv"));
  ASSERT_EQ(t.rows.size(), 5u);
  EXPECT_EQ(t.rows[4][t.Column("stage")], "5");
  EXPECT_EQ(t.rows[4][t.Column("exited")], "1");
  const std::string first = Slurp(P("enh.wav"));
  ASSERT_EQ(Plce(base + " --tau 0"), 0);
  EXPECT_EQ(Slurp(P("enh.wav")), first);

  ASSERT_EQ(Plce(base + " --tau 0 --stages 2 --norm streaming"), 0);
  EXPECT_EQ(csv::ReadFile(P("trace.csv")).rows.size(), 2u);
  EXPECT_EQ(Plce(base + " --stages 6"), 2);
}

TEST_F(Cli, BenchAndTraceReports) {
  const std::string bench = "bench --model " + P("model.plcw") + " --test-dir " + P("testset") +
                            " --taus inf,0.6,0.2,0.08,0.04,0.02,0.01,0 --report ";
  ASSERT_EQ(Plce(bench + P("report.csv")), 0);
  const auto t = csv::ReadFile(P("report.csv"));
  ASSERT_EQ(t.rows.size(), 8u * 3u);
  EXPECT_EQ(t.rows.front()[t.Column("speedup")], "5");
  EXPECT_EQ(t.rows.back()[t.Column("speedup")], "1");
  ASSERT_EQ(Plce(bench + P("report2.csv")), 0);
  EXPECT_EQ(Slurp(P("report.csv")), Slurp(P("report2.csv")));

  ASSERT_EQ(Plce("trace --model " + P("model.plcw") + " --test-dir " + P("testset") + " --out " +
                P("dist.csv")),
            0);
  EXPECT_EQ(csv::ReadFile(P("dist.csv")).rows.size(), 15u);
}

}  // namespace
}  // namespace plce
