// Copyright 2026 The plce Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// RIFF/WAVE, 16-bit little-endian PCM, mono, 16 kHz. Nothing else.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "plce/dsp/stft.hpp"
#include "plce/error.hpp"

namespace plce::dsp {

namespace detail {

inline std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline void PutU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace detail

inline Waveform DecodeWav(const std::vector<unsigned char>& bytes,
                          const std::string& origin = "<memory>") {
  auto fail = [&](const std::string& why) {
    return AudioError(origin + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = detail::ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      if (std::memcmp(chunk, "data", 4) == 0) throw fail("truncated data chunk");
      throw fail("truncated chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = detail::ReadU16(f);
      const std::uint16_t channels = detail::ReadU16(f + 2);
      const std::uint32_t rate = detail::ReadU32(f + 4);
      const std::uint16_t bits = detail::ReadU16(f + 14);
      if (format != 1) throw fail("unsupported sample format (PCM only)");
      if (bits != 16) throw fail("unsupported bit depth " + std::to_string(bits));
      if (channels != 1) throw fail("unsupported channel count " + std::to_string(channels));
      if (rate != static_cast<std::uint32_t>(kSampleRate)) {
        throw fail("unsupported sample rate " + std::to_string(rate));
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (!data) throw fail("missing data chunk");
  if (data_size % 2 != 0) throw fail("odd-sized 16-bit data chunk");
  Waveform w;
  w.samples.resize(data_size / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const auto v = static_cast<std::int16_t>(detail::ReadU16(data + 2 * i));
    w.samples[i] = static_cast<double>(v) / 32768.0;
  }
  return w;
}

inline Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError(path + ": cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return DecodeWav(bytes, path);
}

// Canonical 44-byte header followed by samples clamped to [-1, 1].
inline std::string EncodeWav(const Waveform& w) {
  if (w.sample_rate != kSampleRate) throw AudioError("write: waveform must be 16 kHz");
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out.append("RIFF");
  detail::PutU32(out, 36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  detail::PutU32(out, 16);
  detail::PutU16(out, 1);  // PCM
  detail::PutU16(out, 1);  // mono
  detail::PutU32(out, kSampleRate);
  detail::PutU32(out, kSampleRate * 2);  // byte rate
  detail::PutU16(out, 2);                // block align
  detail::PutU16(out, 16);
  out.append("data");
  detail::PutU32(out, data_bytes);
  for (double v : w.samples) {
    if (!std::isfinite(v)) throw AudioError("write: non-finite sample");
    const double q = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
    const auto s = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
    detail::PutU16(out, static_cast<std::uint16_t>(s));
  }
  return out;
}

inline void WriteWav(const std::string& path, const Waveform& w) {
  const std::string bytes = EncodeWav(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AudioError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw AudioError(path + ": write failed");
}

}  // namespace plce::dsp
