// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Dataset manifests: CSV with columns clean_path, noise_path, snr_db and an
// optional seed. Relative paths resolve against the manifest's directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plce/csv.hpp"
#include "plce/dsp/wav.hpp"
#include "plce/nn/init.hpp"
#include "plce/training/mixing.hpp"
#include "plce/training/trainer.hpp"

namespace plce::training {

inline constexpr std::uint64_t kDataSeedPurpose = 1;

struct ManifestRow {
  std::size_t index = 0;  // 0-based data row
  std::string id;
  std::string clean_path;
  std::string noise_path;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

// Row seed: the manifest's seed column when present, else derived from the
// root seed's data stream and the row index.
inline std::uint64_t RowSeed(std::uint64_t root, std::size_t index,
                             std::optional<std::uint64_t> manifest_seed) {
  if (manifest_seed) return *manifest_seed;
  return nn::SplitSeed(nn::SplitSeed(root, kDataSeedPurpose), index);
}

inline std::vector<ManifestRow> ReadManifest(const std::string& path, std::uint64_t root_seed) {
  namespace fs = std::filesystem;
  const csv::Table t = csv::ReadFile(path);
  const std::size_t c_clean = t.Column("clean_path"), c_noise = t.Column("noise_path"),
                    c_snr = t.Column("snr_db");
  const bool has_seed = t.HasColumn("seed"), has_id = t.HasColumn("id");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q.string() : (base / q).lexically_normal().string();
  };
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    ManifestRow m;
    m.index = i;
    m.id = has_id ? r[t.Column("id")] : "utt" + std::to_string(i + 1);
    m.clean_path = resolve(r[c_clean]);
    m.noise_path = resolve(r[c_noise]);
    m.snr_db = csv::ParseNumber(r[c_snr]);
    std::optional<std::uint64_t> seed;
    if (has_seed && !r[t.Column("seed")].empty()) {
      try {
        seed = std::stoull(r[t.Column("seed")]);
      } catch (const std::exception&) {
        throw DataError(path + ": row " + std::to_string(i + 1) + ": bad seed");
      }
    }
    m.seed = RowSeed(root_seed, i, seed);
    rows.push_back(std::move(m));
  }
  return rows;
}

// Rejects SNRs off the training grid, or outside the training range when
// `any_snr` is set.
inline void CheckRowSnr(const ManifestRow& row, bool any_snr) {
  if (any_snr ? !InTrainingRange(row.snr_db) : !OnTrainingGrid(row.snr_db)) {
    throw DataError(row.id + ": snr_db " + csv::FormatNumber(row.snr_db) +
                    (any_snr ? " outside [-5, 30] dB" : " not on the -5:2:29 dB grid"));
  }
}

inline TrainingExample LoadExample(const ManifestRow& row, std::size_t stages, bool any_snr) {
  CheckRowSnr(row, any_snr);
  return MakeExample(row.id, dsp::ReadWav(row.clean_path), dsp::ReadWav(row.noise_path),
                     row.snr_db, row.seed, stages);
}

inline std::vector<TrainingExample> LoadExamples(const std::string& manifest,
                                                 std::uint64_t root_seed, std::size_t stages,
                                                 bool any_snr) {
  std::vector<TrainingExample> out;
  for (const auto& row : ReadManifest(manifest, root_seed)) {
    out.push_back(LoadExample(row, stages, any_snr));
  }
  if (out.empty()) throw DataError(manifest + ": manifest has no rows");
  return out;
}

}  // namespace plce::training
