// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "dirhear/core/error.hpp"

namespace dirhear {

inline constexpr int kSampleRate = 16000;
inline constexpr int kBlockSize = 128;

template <typename T>
struct MultichannelBuffer {
  std::vector<std::vector<T>> data;  // [channel][sample]
  int sample_rate = kSampleRate;

  MultichannelBuffer() = default;
  MultichannelBuffer(std::size_t channels, std::size_t samples) : data(channels, std::vector<T>(samples, T(0))) {}

  std::size_t channels() const { return data.size(); }
  std::size_t samples() const { return data.empty() ? 0 : data[0].size(); }
  std::vector<T>& operator[](std::size_t c) { return data[c]; }
  const std::vector<T>& operator[](std::size_t c) const { return data[c]; }

  void validate() const {
    require(!data.empty(), Errc::shape, "buffer has no channels");
    require(sample_rate == kSampleRate, Errc::config,
            "sample rate " + std::to_string(sample_rate) + " != 16000");
    for (const auto& ch : data) {
      require(ch.size() == data[0].size(), Errc::shape, "channels have unequal length");
      for (T v : ch) require(std::isfinite(double(v)), Errc::poisoned, "non-finite sample");
    }
  }

  template <typename U>
  MultichannelBuffer<U> cast() const {
    MultichannelBuffer<U> out;
    out.sample_rate = sample_rate;
    out.data.resize(data.size());
    for (std::size_t c = 0; c < data.size(); ++c) out.data[c].assign(data[c].begin(), data[c].end());
    return out;
  }
};

struct Spectrum {
  std::vector<std::complex<double>> bins;  // fft_size/2+1
  long frame_index = 0;
  int fft_size = 0;
};

}  // namespace dirhear
