// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Speech-like test signals: words made of voiced syllables (harmonic series
// with drifting pitch and a formant-shaped spectrum) and unvoiced noise
// bursts, separated by silent gaps.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dirhear/core/error.hpp"
#include "dirhear/signal/buffer.hpp"

namespace dirhear {

namespace detail {

// Two-resonance spectral envelope, peaks near f1 and f2.
inline double formant_gain(double f, double f1, double f2) {
  auto peak = [](double f, double fc, double bw) { return 1.0 / (1.0 + std::pow((f - fc) / bw, 2.0)); };
  return 0.15 + peak(f, f1, 120.0) + 0.6 * peak(f, f2, 200.0);
}

inline void add_voiced(std::vector<double>& x, std::size_t at, std::size_t len, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double f0 = 90.0 + 160.0 * U(rng);
  const double drift = (U(rng) - 0.5) * 0.4;  // relative pitch change over the syllable
  const double f1 = 300.0 + 600.0 * U(rng), f2 = 900.0 + 1600.0 * U(rng);
  const double fs = kSampleRate;
  const int harmonics = int(std::min(40.0, 4000.0 / f0));
  std::vector<double> amp(harmonics + 1), phase(harmonics + 1);
  for (int h = 1; h <= harmonics; ++h) {
    amp[h] = formant_gain(h * f0, f1, f2) / std::sqrt(double(h));
    phase[h] = 2.0 * std::numbers::pi * U(rng);
  }
  double ph = 0.0;
  for (std::size_t i = 0; i < len && at + i < x.size(); ++i) {
    double u = double(i) / double(len);
    double f = f0 * (1.0 + drift * u);
    ph += 2.0 * std::numbers::pi * f / fs;
    double env = std::sin(std::numbers::pi * u);
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h) v += amp[h] * std::sin(h * ph + phase[h]);
    x[at + i] += env * env * v;
  }
}

inline void add_unvoiced(std::vector<double>& x, std::size_t at, std::size_t len, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  // one-pole high-pass then low-pass: a 1.5-6 kHz hiss
  const double a_lp = 0.3 + 0.4 * U(rng);
  double prev = 0.0, lp = 0.0;
  for (std::size_t i = 0; i < len && at + i < x.size(); ++i) {
    double w = N(rng);
    double hp = w - prev;
    prev = w;
    lp = a_lp * lp + (1.0 - a_lp) * hp;
    double u = double(i) / double(len);
    x[at + i] += 0.35 * std::sin(std::numbers::pi * u) * lp;
  }
}

}  // namespace detail

// Returns `duration` seconds at 16 kHz, RMS about 0.05 over active parts.
// Every word is at most 1.2 s long and followed by a gap of 120-400 ms of
// exact zeros, so any 4 s window contains a silent gap.
inline std::vector<double> synth_speech(std::mt19937_64& rng, double duration) {
  require(duration > 0, Errc::config, "synth_speech duration must be positive");
  const std::size_t n = std::size_t(duration * kSampleRate);
  std::vector<double> x(n, 0.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::size_t t = std::size_t(U(rng) * 0.3 * kSampleRate);
  while (t < n) {
    const int syllables = 1 + int(U(rng) * 4.0);
    std::size_t word_len = 0;
    for (int s = 0; s < syllables && word_len < std::size_t(1.2 * kSampleRate); ++s) {
      std::size_t len = std::size_t((0.08 + 0.22 * U(rng)) * kSampleRate);
      len = std::min(len, std::size_t(1.2 * kSampleRate) - word_len);
      if (U(rng) < 0.75) detail::add_voiced(x, t + word_len, len, rng);
      else detail::add_unvoiced(x, t + word_len, len, rng);
      word_len += len;
    }
    t += word_len + std::size_t((0.12 + 0.28 * U(rng)) * kSampleRate);
  }
  double e = 0;
  std::size_t active = 0;
  for (double v : x)
    if (v != 0.0) e += v * v, ++active;
  if (active > 0) {
    double g = 0.05 / std::sqrt(e / double(active));
    for (auto& v : x) v *= g;
  }
  return x;
}

}  // namespace dirhear
