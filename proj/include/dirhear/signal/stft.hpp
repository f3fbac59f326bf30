// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Weighted overlap-add STFT. The same window is applied on analysis and
// synthesis, so a window/hop pair is accepted when sum_k w^2[n + k*hop] is
// constant. Frame j covers samples [j*hop - (n - hop), j*hop + hop).

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dirhear/signal/buffer.hpp"
#include "dirhear/signal/fft.hpp"

namespace dirhear {

enum class WindowKind { sqrt_hann, hann };

inline std::vector<double> make_window(WindowKind kind, int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    double h = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);  // periodic
    w[i] = kind == WindowKind::sqrt_hann ? std::sqrt(h) : h;
  }
  return w;
}

// Returns the overlap-add constant of w^2 for this hop, throws if not constant.
inline double check_cola(const std::vector<double>& w, int hop) {
  int n = int(w.size());
  require(hop > 0 && n % hop == 0, Errc::config,
          "hop " + std::to_string(hop) + " does not divide fft size " + std::to_string(n));
  double ref = 0;
  for (int r = 0; r < hop; ++r) {
    double s = 0;
    for (int k = r; k < n; k += hop) s += w[k] * w[k];
    if (r == 0) ref = s;
    require(std::abs(s - ref) <= 1e-9 * std::max(1.0, ref), Errc::config,
            "window/hop pair is not constant-overlap-add");
  }
  require(ref > 0, Errc::config, "degenerate window");
  return ref;
}

struct StftSpec {
  int fft_size = 256;
  int hop = 128;
  WindowKind window = WindowKind::sqrt_hann;
};

inline int stft_frame_count(std::size_t samples, const StftSpec& s) {
  int blocks = int((samples + s.hop - 1) / s.hop);
  return blocks + s.fft_size / s.hop - 1;
}

// Returns spectra[channel][frame].
inline std::vector<std::vector<Spectrum>> stft(const MultichannelBuffer<double>& x, const StftSpec& s) {
  auto w = make_window(s.window, s.fft_size);
  check_cola(w, s.hop);
  Fft<double> f(s.fft_size);
  const int n = s.fft_size, lead = n - s.hop;
  const long L = long(x.samples());
  const int J = stft_frame_count(x.samples(), s);
  std::vector<std::vector<Spectrum>> out(x.channels());
  std::vector<double> frame(n);
  std::vector<std::complex<double>> work;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    out[c].resize(J);
    for (int j = 0; j < J; ++j) {
      long start = long(j) * s.hop - lead;
      for (int i = 0; i < n; ++i) {
        long t = start + i;
        frame[i] = (t >= 0 && t < L) ? x[c][t] * w[i] : 0.0;
      }
      Spectrum& sp = out[c][j];
      sp.fft_size = n;
      sp.frame_index = j;
      sp.bins.resize(n / 2 + 1);
      f.forward_real(frame.data(), sp.bins.data(), work);
    }
  }
  return out;
}

inline MultichannelBuffer<double> istft(const std::vector<std::vector<Spectrum>>& spectra, std::size_t length,
                                        const StftSpec& s) {
  auto w = make_window(s.window, s.fft_size);
  double cola = check_cola(w, s.hop);
  Fft<double> f(s.fft_size);
  const int n = s.fft_size, lead = n - s.hop;
  MultichannelBuffer<double> y(spectra.size(), length);
  std::vector<double> frame(n);
  std::vector<std::complex<double>> work;
  for (std::size_t c = 0; c < spectra.size(); ++c) {
    for (const auto& sp : spectra[c]) {
      require(sp.fft_size == n && int(sp.bins.size()) == n / 2 + 1, Errc::shape, "spectrum size mismatch");
      f.inverse_real(sp.bins.data(), frame.data(), work);
      long start = sp.frame_index * s.hop - lead;
      for (int i = 0; i < n; ++i) {
        long t = start + i;
        if (t >= 0 && t < long(length)) y[c][t] += frame[i] * w[i] / cola;
      }
    }
  }
  return y;
}

// Streaming analysis for one channel: push hop samples, get the frame that
// ends with them.
class StftAnalyzer {
 public:
  explicit StftAnalyzer(const StftSpec& s) : s_(s), w_(make_window(s.window, s.fft_size)), fft_(s.fft_size) {
    check_cola(w_, s.hop);
    hist_.assign(s.fft_size, 0.0);
    frame_.resize(s.fft_size);
  }

  void push(const double* hop_samples, std::complex<double>* bins) {
    const int n = s_.fft_size, h = s_.hop;
    std::copy(hist_.begin() + h, hist_.end(), hist_.begin());
    std::copy(hop_samples, hop_samples + h, hist_.end() - h);
    for (int i = 0; i < n; ++i) frame_[i] = hist_[i] * w_[i];
    fft_.forward_real(frame_.data(), bins, work_);
  }

  void reset() { std::fill(hist_.begin(), hist_.end(), 0.0); }

 private:
  StftSpec s_;
  std::vector<double> w_;
  Fft<double> fft_;
  std::vector<double> hist_, frame_;
  std::vector<std::complex<double>> work_;
};

// Streaming synthesis for one channel: push a frame, get hop finished
// samples (delayed by fft_size - hop).
class OlaSynth {
 public:
  explicit OlaSynth(const StftSpec& s) : s_(s), w_(make_window(s.window, s.fft_size)), fft_(s.fft_size) {
    cola_ = check_cola(w_, s.hop);
    acc_.assign(s.fft_size, 0.0);
    frame_.resize(s.fft_size);
  }

  void push(const std::complex<double>* bins, double* out) {
    const int n = s_.fft_size, h = s_.hop;
    fft_.inverse_real(bins, frame_.data(), work_);
    for (int i = 0; i < n; ++i) acc_[i] += frame_[i] * w_[i] / cola_;
    std::copy(acc_.begin(), acc_.begin() + h, out);
    std::copy(acc_.begin() + h, acc_.end(), acc_.begin());
    std::fill(acc_.end() - h, acc_.end(), 0.0);
  }

  void reset() { std::fill(acc_.begin(), acc_.end(), 0.0); }

 private:
  StftSpec s_;
  std::vector<double> w_;
  Fft<double> fft_;
  double cola_ = 1;
  std::vector<double> acc_, frame_;
  std::vector<std::complex<double>> work_;
};

}  // namespace dirhear
