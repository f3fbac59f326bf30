// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// RIFF/WAVE reader and writer: PCM16 or IEEE float32, 1..8 channels, 16 kHz.

#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dirhear/signal/buffer.hpp"

namespace dirhear {

enum class WavFormat { pcm16, float32 };

namespace detail {

inline void put_u32(std::vector<char>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::vector<char>& b, uint16_t v) {
  b.push_back(char(v & 0xff));
  b.push_back(char(v >> 8));
}
inline uint32_t get_u32(const unsigned char* p) { return p[0] | (p[1] << 8) | (p[2] << 16) | (uint32_t(p[3]) << 24); }
inline uint16_t get_u16(const unsigned char* p) { return uint16_t(p[0] | (p[1] << 8)); }

}  // namespace detail

// Writes to path + ".tmp" then renames, so a failed write leaves nothing behind.
inline void atomic_write_file(const std::string& path, const std::vector<char>& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    require(bool(f), Errc::io, "cannot open " + tmp + " for writing");
    f.write(bytes.data(), std::streamsize(bytes.size()));
    f.flush();
    if (!f) {
      std::filesystem::remove(tmp);
      throw Error(Errc::io, "write failed: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(Errc::io, "rename to " + path + " failed: " + ec.message());
  }
}

template <typename T>
std::vector<char> encode_wav(const MultichannelBuffer<T>& x, WavFormat fmt) {
  require(x.channels() >= 1 && x.channels() <= 8, Errc::shape, "wav supports 1..8 channels");
  require(x.sample_rate == kSampleRate, Errc::config, "only 16 kHz audio is supported");
  const uint16_t ch = uint16_t(x.channels());
  const uint16_t bps = fmt == WavFormat::pcm16 ? 16 : 32;
  const uint32_t n = uint32_t(x.samples());
  const uint32_t data_bytes = n * ch * (bps / 8);
  std::vector<char> b;
  b.reserve(44 + data_bytes);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(b, 16);
  detail::put_u16(b, fmt == WavFormat::pcm16 ? 1 : 3);
  detail::put_u16(b, ch);
  detail::put_u32(b, kSampleRate);
  detail::put_u32(b, kSampleRate * ch * (bps / 8));
  detail::put_u16(b, uint16_t(ch * (bps / 8)));
  detail::put_u16(b, bps);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(b, data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    for (uint16_t c = 0; c < ch; ++c) {
      double v = double(x[c][i]);
      if (fmt == WavFormat::pcm16) {
        long q = std::clamp(std::lround(v * 32768.0), -32768L, 32767L);
        detail::put_u16(b, uint16_t(int16_t(q)));
      } else {
        float f = float(v);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        detail::put_u32(b, u);
      }
    }
  }
  return b;
}

template <typename T>
void write_wav(const std::string& path, const MultichannelBuffer<T>& x, WavFormat fmt = WavFormat::float32) {
  atomic_write_file(path, encode_wav(x, fmt));
}

template <typename T = double>
MultichannelBuffer<T> read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), Errc::io, "cannot open " + path);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(b.size() >= 12 && std::memcmp(b.data(), "RIFF", 4) == 0 && std::memcmp(b.data() + 8, "WAVE", 4) == 0,
          Errc::io, path + ": not a RIFF/WAVE file");
  std::size_t pos = 12;
  int fmt_tag = 0, ch = 0, bps = 0;
  uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= b.size()) {
    uint32_t len = detail::get_u32(&b[pos + 4]);
    const unsigned char* body = &b[pos + 8];
    require(pos + 8 + len <= b.size(), Errc::io, path + ": truncated chunk");
    if (std::memcmp(&b[pos], "fmt ", 4) == 0) {
      require(len >= 16, Errc::io, path + ": short fmt chunk");
      fmt_tag = detail::get_u16(body);
      ch = detail::get_u16(body + 2);
      rate = detail::get_u32(body + 4);
      bps = detail::get_u16(body + 14);
      if (fmt_tag == 0xFFFE && len >= 26) fmt_tag = detail::get_u16(body + 24);  // extensible subformat
    } else if (std::memcmp(&b[pos], "data", 4) == 0) {
      data = body;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  require(ch >= 1 && ch <= 8, Errc::io, path + ": unsupported channel count " + std::to_string(ch));
  require(rate == uint32_t(kSampleRate), Errc::config,
          path + ": sample rate " + std::to_string(rate) + " is not 16000 (no resampler)");
  bool pcm16 = fmt_tag == 1 && bps == 16;
  bool f32 = fmt_tag == 3 && bps == 32;
  require(pcm16 || f32, Errc::io, path + ": only PCM16 and float32 are supported");
  require(data != nullptr, Errc::io, path + ": missing data chunk");
  std::size_t frame_bytes = std::size_t(ch) * (bps / 8);
  std::size_t n = data_len / frame_bytes;
  MultichannelBuffer<T> x(ch, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < ch; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * (bps / 8);
      if (pcm16) {
        x[c][i] = T(int16_t(detail::get_u16(p)) / 32768.0);
      } else {
        uint32_t u = detail::get_u32(p);
        float v;
        std::memcpy(&v, &u, 4);
        x[c][i] = T(v);
      }
    }
  }
  return x;
}

}  // namespace dirhear
