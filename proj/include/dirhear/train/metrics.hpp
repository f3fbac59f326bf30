// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Separation metrics and the training objective.

#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dirhear/nn/tape.hpp"

namespace dirhear {

inline constexpr double kMetricClampDb = 60.0;

inline double clamp_db(double v) {
  if (std::isnan(v)) return -kMetricClampDb;
  return std::max(-kMetricClampDb, std::min(kMetricClampDb, v));
}

// SI-SDR in dB: alpha = <est, ref> / |ref|^2, 10 log10(|alpha ref|^2 / |est - alpha ref|^2),
// clamped to +-60 dB.
template <typename A, typename B>
double si_sdr(const A* est, const B* ref, std::size_t n) {
  double er = 0, rr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    er += double(est[i]) * double(ref[i]);
    rr += double(ref[i]) * double(ref[i]);
  }
  require(rr > 0, Errc::contract, "si_sdr: reference is all zero");
  const double a = er / rr;
  double t = 0, e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double ti = a * double(ref[i]), d = double(est[i]) - ti;
    t += ti * ti;
    e += d * d;
  }
  if (e == 0) return kMetricClampDb;
  if (t == 0) return -kMetricClampDb;
  return clamp_db(10.0 * std::log10(t / e));
}

template <typename A, typename B>
double si_sdr(const std::vector<A>& est, const std::vector<B>& ref) {
  require(est.size() == ref.size(), Errc::shape, "si_sdr: length mismatch");
  return si_sdr(est.data(), ref.data(), est.size());
}

// Plain energy-ratio SDR: 10 log10(|ref|^2 / |ref - est|^2), clamped.
template <typename A, typename B>
double sdr(const std::vector<A>& est, const std::vector<B>& ref) {
  require(est.size() == ref.size(), Errc::shape, "sdr: length mismatch");
  double rr = 0, e = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    double d = double(ref[i]) - double(est[i]);
    rr += double(ref[i]) * double(ref[i]);
    e += d * d;
  }
  require(rr > 0, Errc::contract, "sdr: reference is all zero");
  if (e == 0) return kMetricClampDb;
  return clamp_db(10.0 * std::log10(rr / e));
}

template <typename A, typename B>
double mean_l1(const std::vector<A>& est, const std::vector<B>& ref) {
  double s = 0;
  for (std::size_t i = 0; i < est.size(); ++i) s += std::abs(double(est[i]) - double(ref[i]));
  return est.empty() ? 0.0 : s / double(est.size());
}

// ---------------------------------------------------------------- tape ops

// est: 1 x T node, ref: 1 x T constant. Gradient is zero where the clamp is active.
template <typename T>
VarP<T> si_sdr_node(Tape<T>& tp, const VarP<T>& est, const Mat<T>& ref) {
  require(est->value.rows() == 1 && ref.rows() == 1 && est->value.cols() == ref.cols(), Errc::shape,
          "si_sdr: est and ref must be 1 x T of equal length");
  const double s = si_sdr(est->value.data(), ref.data(), std::size_t(ref.cols()));
  Mat<T> v(1, 1);
  v(0, 0) = T(s);
  auto out = tp.node(std::move(v), est->needs_grad);
  if (out->needs_grad)
    tp.record([est, ref, s, out] {
      if (!out->has_grad() || std::abs(s) >= kMetricClampDb) return;
      const long n = ref.cols();
      double er = 0, rr = 0;
      for (long i = 0; i < n; ++i) {
        er += double(est->value(0, i)) * double(ref(0, i));
        rr += double(ref(0, i)) * double(ref(0, i));
      }
      const double a = er / rr;
      double e2 = 0;
      for (long i = 0; i < n; ++i) {
        double d = double(est->value(0, i)) - a * double(ref(0, i));
        e2 += d * d;
      }
      // dS/de = 10/ln10 (2 ref / <e, ref> - 2 res / |res|^2)
      const double k = double(out->grad(0, 0)) * 10.0 / std::numbers::ln10;
      auto& g = est->g();
      for (long i = 0; i < n; ++i) {
        double r = double(ref(0, i)), res = double(est->value(0, i)) - a * r;
        g(0, i) += T(k * (2.0 * r / er - 2.0 * res / e2));
      }
    });
  return out;
}

template <typename T>
VarP<T> mean_l1_node(Tape<T>& tp, const VarP<T>& est, const Mat<T>& ref) {
  require(est->value.rows() == ref.rows() && est->value.cols() == ref.cols(), Errc::shape, "l1: shape mismatch");
  Mat<T> v(1, 1);
  v(0, 0) = T((est->value - ref).cwiseAbs().template cast<double>().mean());
  auto out = tp.node(std::move(v), est->needs_grad);
  if (out->needs_grad)
    tp.record([est, ref, out] {
      if (!out->has_grad()) return;
      const T k = out->grad(0, 0) / T(ref.size());
      auto& g = est->g();
      for (long i = 0; i < ref.size(); ++i) {
        T d = est->value(i) - ref(i);
        g(i) += d > T(0) ? k : (d < T(0) ? -k : T(0));
      }
    });
  return out;
}

// Weighted sum of 1 x 1 nodes.
template <typename T>
VarP<T> lincomb(Tape<T>& tp, const std::vector<VarP<T>>& xs, const std::vector<double>& w) {
  Mat<T> v = Mat<T>::Zero(1, 1);
  bool ng = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    v(0, 0) += T(w[i]) * xs[i]->value(0, 0);
    ng = ng || xs[i]->needs_grad;
  }
  auto out = tp.node(std::move(v), ng);
  if (out->needs_grad)
    tp.record([xs, w, out] {
      if (!out->has_grad()) return;
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (xs[i]->needs_grad) xs[i]->g()(0, 0) += T(w[i]) * out->grad(0, 0);
    });
  return out;
}

struct LossWeights {
  double si_sdr = 1.0;
  double l1 = 10.0;
};

template <typename T>
struct LossTerms {
  VarP<T> loss;
  double si_sdr_db = 0, l1 = 0;
};

// loss = -w_si * SI-SDR(est, ref) + w_l1 * mean |est - ref|, times `scale`.
template <typename T>
LossTerms<T> loss_graph(Tape<T>& tp, const VarP<T>& est, const Mat<T>& ref, const LossWeights& lw = {},
                        double scale = 1.0) {
  auto s = si_sdr_node(tp, est, ref);
  auto l = mean_l1_node(tp, est, ref);
  LossTerms<T> r;
  r.loss = lincomb(tp, {s, l}, {-lw.si_sdr * scale, lw.l1 * scale});
  r.si_sdr_db = double(s->value(0, 0));
  r.l1 = double(l->value(0, 0));
  return r;
}

// Unscaled loss value without a tape.
template <typename A, typename B>
double loss_value(const std::vector<A>& est, const std::vector<B>& ref, const LossWeights& lw = {}) {
  return -lw.si_sdr * si_sdr(est, ref) + lw.l1 * mean_l1(est, ref);
}

}  // namespace dirhear
