// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Small dense complex matrices (c <= 8) and a Cholesky solver.

#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "dirhear/core/error.hpp"

namespace dirhear {

using cd = std::complex<double>;
using CVec = std::vector<cd>;

struct CMat {
  int n = 0;
  std::vector<cd> a;  // row-major

  CMat() = default;
  explicit CMat(int n_) : n(n_), a(std::size_t(n_) * n_, cd(0, 0)) {}
  static CMat identity(int n) {
    CMat m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  cd& operator()(int i, int j) { return a[std::size_t(i) * n + j]; }
  const cd& operator()(int i, int j) const { return a[std::size_t(i) * n + j]; }

  double trace_real() const {
    double t = 0;
    for (int i = 0; i < n; ++i) t += (*this)(i, i).real();
    return t;
  }
};

inline cd dot_h(const CVec& x, const CVec& y) {  // x^H y
  cd s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

inline CVec matvec(const CMat& m, const CVec& x) {
  CVec y(m.n, cd(0, 0));
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) y[i] += m(i, j) * x[j];
  return y;
}

inline double quad_form(const CMat& m, const CVec& w) {  // w^H M w (real part)
  return dot_h(w, matvec(m, w)).real();
}

// Solves A x = b for Hermitian positive definite A.
inline CVec cholesky_solve(const CMat& A, const CVec& b) {
  const int n = A.n;
  require(int(b.size()) == n, Errc::shape, "cholesky_solve: size mismatch");
  CMat L(n);
  for (int j = 0; j < n; ++j) {
    double d = A(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(L(j, k));
    require(d > 0 && std::isfinite(d), Errc::internal, "matrix is not positive definite");
    double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      cd s = A(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * std::conj(L(j, k));
      L(i, j) = s / ljj;
    }
  }
  CVec y(n);
  for (int i = 0; i < n; ++i) {
    cd s = b[i];
    for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i).real();
  }
  CVec x(n);
  for (int i = n - 1; i >= 0; --i) {
    cd s = y[i];
    for (int k = i + 1; k < n; ++k) s -= std::conj(L(k, i)) * x[k];
    x[i] = s / L(i, i).real();
  }
  return x;
}

// Distortionless solution w = A^-1 d / (d^H A^-1 d).
inline CVec mvdr_solve(const CMat& A, const CVec& d) {
  CVec x = cholesky_solve(A, d);
  cd den = dot_h(d, x);
  require(std::abs(den) > 0, Errc::internal, "degenerate distortionless denominator");
  for (auto& v : x) v /= den;
  return x;
}

}  // namespace dirhear
