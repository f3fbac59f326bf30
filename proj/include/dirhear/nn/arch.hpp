// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Architecture arithmetic: receptive field, lookahead, parameter and MAC
// counts, and the causal padding each layer has to cache.

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dirhear/nn/weights.hpp"

namespace dirhear {

inline long ipow(long b, int e) {
  long r = 1;
  while (e-- > 0) r *= b;
  return r;
}

// Sum of dilations k^0 .. k^(M-1).
inline long dilation_sum(const ModelConfig& c) {
  long s = 0;
  for (int m = 0; m < c.M; ++m) s += ipow(c.k, m);
  return s;
}

// Latent frames seen by one output frame of stack s (its skip tap).
inline long stack_span_frames(const ModelConfig& c, int s) {
  const long per = long(c.dilated_kernel() - 1) * dilation_sum(c);
  long span = 1 + per;
  for (int i = 1; i <= s; ++i) span += ipow(2, i - 1) + per * ipow(2, i);
  return span;
}

// Latent frames seen by one mask frame. The causal nearest-neighbour
// upsampling of stack s can reach back up to 2^s - 1 extra frames.
inline long receptive_field_frames(const ModelConfig& c) {
  c.validate();
  long rf = 0;
  for (int s = 0; s < c.N; ++s) rf = std::max(rf, stack_span_frames(c, s) + ipow(2, s) - 1);
  return rf;
}

// Input samples that influence one output sample: encoder frames overlap by
// kernel - stride, and each output sample mixes kernel/stride decoder frames.
inline long receptive_field_samples(const ModelConfig& c) {
  long f = receptive_field_frames(c) + c.enc_kernel / c.enc_stride - 1;
  return (f - 1) * c.enc_stride + c.enc_kernel;
}

inline double receptive_field_seconds(const ModelConfig& c) {
  return double(receptive_field_samples(c)) / kSampleRate;
}

inline double lookahead_ms(const ModelConfig& c) { return 1000.0 * c.lookahead_samples() / kSampleRate; }

inline std::size_t count_params(const ModelConfig& c) {
  std::size_t n = 0;
  for (const auto& s : tensor_specs(c)) n += std::size_t(s.rows) * s.cols;
  return n;
}

struct LayerCost {
  std::string name;
  double frame_rate = 0;  // frames per second at this layer
  double macs_per_frame = 0;
};

// Real multiply-accumulates per layer; a complex multiply counts as 4.
// Biases, activations and norms are not counted.
inline std::vector<LayerCost> layer_costs(const ModelConfig& c) {
  c.validate();
  const double fr = c.frame_rate();
  const int K = c.dilated_kernel();
  std::vector<LayerCost> v;
  v.push_back({"encoder", fr, double(2 * c.C) * c.in_channels() * c.enc_kernel});
  for (int s = 0; s < c.N; ++s) {
    const double r = fr / double(ipow(2, s));
    std::string p = "stack" + std::to_string(s);
    if (s > 0) v.push_back({p + ".down", r, 4.0 * c.C * 2});
    v.push_back({p + ".in", r, 4.0 * c.H * c.C});
    for (int m = 0; m < c.M; ++m) v.push_back({p + ".layer" + std::to_string(m), r, 4.0 * c.H * c.H * K});
    v.push_back({p + ".skip", r, 4.0 * c.D * c.H});
    if (s < c.N - 1) v.push_back({p + ".out", r, 4.0 * c.C * c.H});
  }
  v.push_back({"head.mid", fr, 4.0 * c.D * c.D});
  v.push_back({"head.mask", fr, 4.0 * c.C * c.D});
  v.push_back({"head.apply", fr, 4.0 * c.C});
  v.push_back({"decoder", fr, double(c.enc_kernel) * 2 * c.C});
  return v;
}

inline double macs_per_second(const ModelConfig& c) {
  double t = 0;
  for (const auto& l : layer_costs(c)) t += l.frame_rate * l.macs_per_frame;
  return t;
}

// Causal history frames each dilated layer needs, at its own rate.
struct PaddingEntry {
  int stack = 0, layer = 0;
  long frames = 0;    // (kernel - 1) * dilation
  int channels = 0;   // complex channels
};

inline std::vector<PaddingEntry> padding_tally(const ModelConfig& c) {
  c.validate();
  std::vector<PaddingEntry> v;
  for (int s = 0; s < c.N; ++s)
    for (int m = 0; m < c.M; ++m) v.push_back({s, m, long(c.dilated_kernel() - 1) * ipow(c.k, m), c.H});
  return v;
}

inline long total_padding_frames(const ModelConfig& c) {
  long t = 0;
  for (const auto& p : padding_tally(c)) t += p.frames;
  return t;
}

}  // namespace dirhear
