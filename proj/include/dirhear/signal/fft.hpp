// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Iterative radix-2 FFT. Forward is unnormalized, inverse scales by 1/n.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "dirhear/core/error.hpp"

namespace dirhear {

inline bool is_pow2(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

template <typename T>
class Fft {
 public:
  using cpx = std::complex<T>;

  explicit Fft(std::size_t n) : n_(n) {
    require(is_pow2(n), Errc::config, "fft size " + std::to_string(n) + " is not a power of two");
    rev_.resize(n);
    int bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (int b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      rev_[i] = r;
    }
    tw_.resize(n / 2 + 1);
    for (std::size_t k = 0; k < tw_.size(); ++k) {
      double a = -2.0 * std::numbers::pi * double(k) / double(n);
      tw_[k] = cpx(T(std::cos(a)), T(std::sin(a)));
    }
  }

  std::size_t size() const { return n_; }

  void forward(cpx* x) const { run(x, false); }

  void inverse(cpx* x) const {
    run(x, true);
    T s = T(1) / T(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i] *= s;
  }

  // real input of length n -> n/2+1 bins
  void forward_real(const T* in, cpx* bins, std::vector<cpx>& work) const {
    work.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) work[i] = cpx(in[i], T(0));
    run(work.data(), false);
    for (std::size_t k = 0; k <= n_ / 2; ++k) bins[k] = work[k];
  }

  // n/2+1 bins (hermitian half) -> real output of length n
  void inverse_real(const cpx* bins, T* out, std::vector<cpx>& work) const {
    work.resize(n_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) work[k] = bins[k];
    for (std::size_t k = n_ / 2 + 1; k < n_; ++k) work[k] = std::conj(bins[n_ - k]);
    run(work.data(), true);
    T s = T(1) / T(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = work[i].real() * s;
  }

 private:
  void run(cpx* x, bool inv) const {
    for (std::size_t i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      std::size_t half = len / 2, step = n_ / len;
      for (std::size_t i = 0; i < n_; i += len) {
        for (std::size_t j = 0; j < half; ++j) {
          cpx w = tw_[j * step];
          if (inv) w = std::conj(w);
          cpx u = x[i + j];
          cpx v = x[i + j + half] * w;
          x[i + j] = u + v;
          x[i + j + half] = u - v;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<std::size_t> rev_;
  std::vector<cpx> tw_;
};

inline std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x) {
  Fft<double> f(x.size());
  f.forward(x.data());
  return x;
}

inline std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> x) {
  Fft<double> f(x.size());
  f.inverse(x.data());
  return x;
}

inline std::vector<std::complex<double>> fft(const std::vector<double>& x) {
  std::vector<std::complex<double>> c(x.begin(), x.end());
  return fft(std::move(c));
}

// Linear convolution through zero-padded FFT.
inline std::vector<double> fft_convolve(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) return {};
  std::size_t out = a.size() + b.size() - 1;
  std::size_t n = next_pow2(out);
  Fft<double> f(n);
  std::vector<std::complex<double>> A(n), B(n);
  for (std::size_t i = 0; i < a.size(); ++i) A[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) B[i] = b[i];
  f.forward(A.data());
  f.forward(B.data());
  for (std::size_t i = 0; i < n; ++i) A[i] *= B[i];
  f.inverse(A.data());
  std::vector<double> y(out);
  for (std::size_t i = 0; i < out; ++i) y[i] = A[i].real();
  return y;
}

}  // namespace dirhear
