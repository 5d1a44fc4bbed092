// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Parameter layout and the PLCW weight file.
//
// Names: "srnn.*" holds the stage-input convolution and the ConvGRU, shared
// by all stages; "cell{q}.*" (q = 1..Q) holds the unshared encoder, LSTM,
// projection, decoder and output layer of stage q.
//
// File (little-endian): "PLCW", u32 version = 1, u32 tensor count, then per
// tensor u32 name length, name bytes, u32 rank, u64 dims[rank], u8 dtype
// (0 = f32), f32 data; finally a CRC32 of every preceding byte.

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "plce/model/config.hpp"
#include "plce/nn/init.hpp"
#include "plce/nn/tensor.hpp"

namespace plce::model {

using ParamMap = std::map<std::string, nn::Tensor<float>>;

class ModelWeights {
 public:
  ModelWeights() = default;
  explicit ModelWeights(ParamMap params) : params_(std::move(params)) {}

  const nn::Tensor<float>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ModelError("missing parameter " + name);
    return it->second;
  }
  nn::Tensor<float>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ModelError("missing parameter " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }
  std::size_t size() const { return params_.size(); }

  friend bool operator==(const ModelWeights& a, const ModelWeights& b) {
    return a.params_ == b.params_;
  }

 private:
  ParamMap params_;
};

inline std::size_t ParamCount(const ModelWeights& w) {
  std::size_t n = 0;
  for (const auto& [name, t] : w.params()) n += t.size();
  return n;
}

enum class Init { kXavier, kZeros, kOnes, kPRelu, kLstmBias };

struct ParamSpec {
  std::string name;
  nn::Shape shape;
  Init init;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

namespace detail {

inline void AddConv(std::vector<ParamSpec>& out, const std::string& prefix,
                    std::size_t cin, std::size_t cout, std::size_t kt,
                    std::size_t kf, bool transposed) {
  nn::Shape w = transposed ? nn::Shape{cin, cout, kt, kf} : nn::Shape{cout, cin, kt, kf};
  out.push_back({prefix + ".w", w, Init::kXavier, cin * kt * kf, cout * kt * kf});
  out.push_back({prefix + ".b", {cout}, Init::kZeros});
}

// Conv (GLU when gated) + instance norm + PReLU.
inline void AddBlock(std::vector<ParamSpec>& out, const std::string& prefix,
                     std::size_t cin, std::size_t cout, bool gated,
                     bool transposed) {
  AddConv(out, prefix, cin, cout, kKernelTime, kKernelFreq, transposed);
  if (gated) {
    AddConv(out, prefix + ".gate", cin, cout, kKernelTime, kKernelFreq, transposed);
  }
  out.push_back({prefix + ".norm.gamma", {cout}, Init::kOnes});
  out.push_back({prefix + ".norm.beta", {cout}, Init::kZeros});
  out.push_back({prefix + ".prelu.alpha", {1}, Init::kPRelu});
}

}  // namespace detail


// Every parameter of the configured network, in initialization order.
inline std::vector<ParamSpec> ParamLayout(const ModelConfig& c) {
  c.Validate();
  const std::size_t C = c.channels;
  std::vector<ParamSpec> out;
  // Stage input [X_r, X_i, S_r, S_i] -> C channels.
  detail::AddConv(out, "srnn.conv", 4, C, kKernelTime, kKernelFreq, false);
  out.push_back({"srnn.norm.gamma", {C}, Init::kOnes});
  out.push_back({"srnn.norm.beta", {C}, Init::kZeros});
  out.push_back({"srnn.prelu.alpha", {1}, Init::kPRelu});
  if (c.srnn_enabled) {
    for (const char* gate : {"z", "r", "h"}) {
      detail::AddConv(out, std::string("srnn.gru.") + gate, 2 * C, C,
                      kGruKernelTime, kKernelFreq, false);
    }
  }
  const std::size_t bottleneck = c.BottleneckFeatures();
  for (std::size_t q = 1; q <= c.stages; ++q) {
    const std::string cell = CellPrefix(q);
    for (std::size_t i = 1; i <= c.encoder_depth; ++i) {
      detail::AddBlock(out, cell + ".enc" + std::to_string(i), C, C, c.gate_enabled,
                       false);
    }
    std::size_t in = bottleneck;
    for (std::size_t j = 1; j <= c.lstm_layers; ++j) {
      const std::string p = cell + ".lstm" + std::to_string(j);
      const std::size_t H = c.lstm_units;
      out.push_back({p + ".w_ih", {4 * H, in}, Init::kXavier, in, 4 * H});
      out.push_back({p + ".w_hh", {4 * H, H}, Init::kXavier, H, 4 * H});
      out.push_back({p + ".b", {4 * H}, Init::kLstmBias});
      in = H;
    }
    out.push_back({cell + ".proj.w", {bottleneck, in}, Init::kXavier, in, bottleneck});
    out.push_back({cell + ".proj.b", {bottleneck}, Init::kZeros});
    const std::size_t dec_in = c.skip_connections ? 2 * C : C;
    for (std::size_t i = 1; i <= c.encoder_depth; ++i) {
      detail::AddBlock(out, cell + ".dec" + std::to_string(i), dec_in, C,
                       c.gate_enabled, true);
    }
    detail::AddConv(out, cell + ".out", C, 2, kKernelTime, kKernelFreq, false);
  }
  return out;
}

// Allocates and initializes all parameters. Deterministic in `seed`.
inline ModelWeights BuildModel(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParamMap params;
  for (const ParamSpec& p : ParamLayout(config)) {
    nn::Tensor<float> t(p.shape);
    switch (p.init) {
      case Init::kXavier:
        nn::XavierUniform(t, p.fan_in, p.fan_out, rng);
        break;
      case Init::kZeros:
        break;
      case Init::kOnes:
        t.Fill(1.0f);
        break;
      case Init::kPRelu:
        t.Fill(0.25f);
        break;
      case Init::kLstmBias: {
        const std::size_t H = t.size() / 4;
        for (std::size_t k = H; k < 2 * H; ++k) t[k] = 1.0f;  // forget gate
        break;
      }
    }
    params.emplace(p.name, std::move(t));
  }
  return ModelWeights(std::move(params));
}

// Recovers the architecture from parameter names and shapes, then checks
// that the weights match the layout exactly.
inline ModelConfig InferConfig(const ModelWeights& w) {
  if (!w.contains("srnn.conv.w")) throw ModelError("weights lack srnn.conv.w");
  ModelConfig c;
  c.channels = w.at("srnn.conv.w").dim(0);
  c.bins = dsp::kNumBins;
  c.srnn_enabled = w.contains("srnn.gru.z.w");
  c.gate_enabled = w.contains("cell1.enc1.gate.w");
  c.stages = 0;
  while (w.contains(CellPrefix(c.stages + 1) + ".out.w")) ++c.stages;
  c.encoder_depth = 0;
  while (w.contains("cell1.enc" + std::to_string(c.encoder_depth + 1) + ".w")) {
    ++c.encoder_depth;
  }
  c.lstm_layers = 0;
  while (w.contains("cell1.lstm" + std::to_string(c.lstm_layers + 1) + ".w_hh")) {
    ++c.lstm_layers;
  }
  if (c.stages == 0 || c.encoder_depth == 0 || c.lstm_layers == 0) {
    throw ModelError("weights do not describe a complete network");
  }
  c.lstm_units = w.at("cell1.lstm1.w_hh").dim(1);
  c.skip_connections = w.at("cell1.dec1.w").dim(0) == 2 * c.channels;
  const auto layout = ParamLayout(c);
  if (layout.size() != w.size()) {
    throw ModelError("weights contain " + std::to_string(w.size()) +
                     " tensors, architecture expects " + std::to_string(layout.size()));
  }
  for (const ParamSpec& p : layout) {
    if (!w.contains(p.name)) throw ModelError("missing parameter " + p.name);
    if (w.at(p.name).shape() != p.shape) {
      throw ModelError("parameter " + p.name + " has shape " +
                       nn::ShapeString(w.at(p.name).shape()) + ", expected " +
                       nn::ShapeString(p.shape));
    }
  }
  return c;
}

namespace detail {

inline void Put(std::string& out, const void* p, std::size_t n) {
  out.append(static_cast<const char*>(p), n);
}
template <typename U>
void PutLe(std::string& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  }
  Put(out, b, sizeof(U));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}
  template <typename U>
  U Le() {
    Need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > limit_) throw ModelError("weight file truncated");
  }
  const std::string& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

inline std::uint32_t Crc32(const std::string& bytes, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n)));
}

}  // namespace detail

inline constexpr std::uint32_t kWeightFileVersion = 1;

inline std::string EncodeWeights(const ModelWeights& w) {
  std::string out;
  out.append("PLCW");
  detail::PutLe<std::uint32_t>(out, kWeightFileVersion);
  detail::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(w.size()));
  for (const auto& [name, t] : w.params()) {
    detail::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    detail::PutLe<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::PutLe<std::uint64_t>(out, d);
    detail::PutLe<std::uint8_t>(out, 0);
    for (float v : t.values()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      detail::PutLe<std::uint32_t>(out, bits);
    }
  }
  detail::PutLe<std::uint32_t>(out, detail::Crc32(out, out.size()));
  return out;
}

inline ModelWeights DecodeWeights(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "PLCW") != 0) {
    throw ModelError("not a weight file");
  }
  if (bytes.size() < 16) throw ModelError("weight file truncated");
  const std::size_t body = bytes.size() - 4;
  detail::Reader crc_reader(bytes, bytes.size());
  (void)crc_reader.Bytes(body);
  const std::uint32_t stored_crc = crc_reader.Le<std::uint32_t>();
  detail::Reader r(bytes, body);
  (void)r.Bytes(4);
  const auto version = r.Le<std::uint32_t>();
  if (version != kWeightFileVersion) {
    throw ModelError("unsupported weight file version " + std::to_string(version));
  }
  const auto count = r.Le<std::uint32_t>();
  ParamMap params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.Le<std::uint32_t>();
    std::string name = r.Bytes(name_len);
    const auto rank = r.Le<std::uint32_t>();
    if (rank > 8) throw ModelError("weight file: implausible rank for " + name);
    nn::Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.Le<std::uint64_t>());
    const auto dtype = r.Le<std::uint8_t>();
    if (dtype != 0) throw ModelError("weight file: unsupported dtype for " + name);
    const std::size_t n = nn::NumElements(shape);
    if (n > (body - r.pos()) / 4) throw ModelError("weight file truncated");
    std::vector<float> data(n);
    for (auto& v : data) {
      const auto bits = r.Le<std::uint32_t>();
      std::memcpy(&v, &bits, sizeof v);
    }
    if (!params.emplace(name, nn::Tensor<float>(shape, std::move(data))).second) {
      throw ModelError("weight file: duplicate tensor " + name);
    }
  }
  if (r.pos() != body) throw ModelError("weight file: trailing bytes");
  if (detail::Crc32(bytes, body) != stored_crc) {
    throw ModelError("weight file: checksum mismatch");
  }
  return ModelWeights(std::move(params));
}

inline void SaveWeights(const ModelWeights& w, const std::string& path) {
  const std::string bytes = EncodeWeights(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelError(path + ": write failed");
}

inline ModelWeights LoadWeights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(path + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeWeights(bytes);
}

}  // namespace plce::model
