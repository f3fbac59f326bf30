// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Complex network ops. kern:: holds the forward kernels shared by the
// offline graph and the streaming engine; the free functions below record
// them on a Tape together with their adjoints.
//
// A complex tensor with Ch channels and F frames is a 2Ch x F real matrix,
// real parts on top. Adjoints follow the split convention: for y = a x,
// dL/dx = conj(a) dL/dy with dL/dz = dL/dRe z + j dL/dIm z.

#pragma once

#include <cmath>
#include <vector>

#include "dirhear/nn/tape.hpp"

namespace dirhear {

namespace kern {

// [R -I; I R] per tap: 2Co x (K * 2Ci), tap j at columns [2Ci j, 2Ci (j+1)).
template <typename T>
Mat<T> block_weights(const Mat<T>& W, int K) {
  const int Co = int(W.rows()) / 2, Ci = int(W.cols()) / K;
  Mat<T> Wb(2 * Co, 2 * Ci * K);
  for (int j = 0; j < K; ++j) {
    auto R = W.block(0, j * Ci, Co, Ci);
    auto I = W.block(Co, j * Ci, Co, Ci);
    Wb.block(0, 2 * Ci * j, Co, Ci) = R;
    Wb.block(0, 2 * Ci * j + Ci, Co, Ci) = -I;
    Wb.block(Co, 2 * Ci * j, Co, Ci) = I;
    Wb.block(Co, 2 * Ci * j + Ci, Co, Ci) = R;
  }
  return Wb;
}

// Adds d(L)/d(Wb) for tap j back onto the [R; I] storage.
template <typename T>
void fold_block_grad(const Mat<T>& G, int j, int Ci, Mat<T>& gW) {
  const int Co = int(gW.rows()) / 2;
  gW.block(0, j * Ci, Co, Ci) += G.block(0, 0, Co, Ci) + G.block(Co, Ci, Co, Ci);
  gW.block(Co, j * Ci, Co, Ci) += G.block(Co, 0, Co, Ci) - G.block(0, Ci, Co, Ci);
}

// Causal dilated conv over a window holding (K-1)*dil history frames
// followed by n = y.cols() new frames.
template <typename T>
void cconv_window(const Mat<T>& Wb, const Mat<T>* bias, int K, int dil, const Eigen::Ref<const Mat<T>>& xw,
                  Eigen::Ref<Mat<T>> y) {
  const int n = int(y.cols()), Ci2 = int(Wb.cols()) / K;
  if (bias) y = bias->replicate(1, n);
  else y.setZero();
  for (int j = 0; j < K; ++j) y.noalias() += Wb.middleCols(j * Ci2, Ci2) * xw.middleCols(j * dil, n);
}

// Same with implicit zero history over a whole sequence.
template <typename T>
void cconv_full(const Mat<T>& Wb, const Mat<T>* bias, int K, int dil, const Mat<T>& x, Mat<T>& y) {
  const int F = int(x.cols()), Ci2 = int(Wb.cols()) / K;
  y.resize(Wb.rows(), F);
  if (bias) y = bias->replicate(1, F);
  else y.setZero();
  for (int j = 0; j < K; ++j) {
    int s = (K - 1 - j) * dil;
    if (s >= F) continue;
    y.rightCols(F - s).noalias() += Wb.middleCols(j * Ci2, Ci2) * x.leftCols(F - s);
  }
}

// y[g] = a0 x[2g] + a1 x[2g+1] + b, per channel (complex).
template <typename T>
void downsample2(const Mat<T>& A, const Mat<T>& b, const Eigen::Ref<const Mat<T>>& x, Eigen::Ref<Mat<T>> y) {
  const int C = int(x.rows()) / 2, G = int(y.cols());
  for (int g = 0; g < G; ++g)
    for (int c = 0; c < C; ++c) {
      T r = b(c, 0), i = b(C + c, 0);
      for (int t = 0; t < 2; ++t) {
        T ar = A(c, t), ai = A(C + c, t), xr = x(c, 2 * g + t), xi = x(C + c, 2 * g + t);
        r += ar * xr - ai * xi;
        i += ar * xi + ai * xr;
      }
      y(c, g) = r;
      y(C + c, g) = i;
    }
}

// TReLU: Re' = ReLU(h_rr Re + h_ri Im + b1), Im' = ReLU(h_ri Re + h_ii Im + b2)
// (h_ir in place of the second h_ri when unshared).
template <typename T>
void trelu(const Mat<T>& P, bool shared, const Eigen::Ref<const Mat<T>>& x, Eigen::Ref<Mat<T>> y) {
  const int C = int(x.rows()) / 2, F = int(x.cols());
  for (int t = 0; t < F; ++t)
    for (int c = 0; c < C; ++c) {
      T re = x(c, t), im = x(C + c, t);
      T hir = shared ? P(1, c) : P(5, c);
      T pr = P(0, c) * re + P(1, c) * im + P(3, c);
      T pi = hir * re + P(2, c) * im + P(4, c);
      y(c, t) = pr > T(0) ? pr : T(0);
      y(C + c, t) = pi > T(0) ? pi : T(0);
    }
}

// tanh(r)/r and (d/dr (tanh(r)/r)) / r, with series near 0.
inline void ctanh_factors(double r, double& s, double& ds_over_r) {
  if (r < 1e-3) {
    double r2 = r * r;
    s = 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0;
    ds_over_r = -2.0 / 3.0 + 8.0 * r2 / 15.0 - 34.0 * r2 * r2 / 105.0;
    return;
  }
  double th = std::tanh(r), sech2 = 1.0 - th * th;
  s = th / r;
  ds_over_r = (r * sech2 - th) / (r * r * r);
}

template <typename T>
void ctanh(const Eigen::Ref<const Mat<T>>& x, Eigen::Ref<Mat<T>> y) {
  const int C = int(x.rows()) / 2, F = int(x.cols());
  for (int t = 0; t < F; ++t)
    for (int c = 0; c < C; ++c) {
      double re = double(x(c, t)), im = double(x(C + c, t));
      double s, d;
      ctanh_factors(std::sqrt(re * re + im * im), s, d);
      y(c, t) = T(s * re);
      y(C + c, t) = T(s * im);
    }
}

// Causal cumulative power normalisation, continuing from (acc, count):
// m_t = mean of |x|^2 over frames 0..t, y = scale * x / sqrt(m_t + eps) + bias.
// Writes u_t = 1/sqrt(m_t + eps) to U if given.
template <typename T>
void cnorm(const Mat<T>& NP, double eps, const Eigen::Ref<const Mat<T>>& x, std::vector<double>& acc, long& count,
           Eigen::Ref<Mat<T>> y, Mat<T>* U = nullptr) {
  const int C = int(x.rows()) / 2, F = int(x.cols());
  for (int t = 0; t < F; ++t) {
    ++count;
    for (int c = 0; c < C; ++c) {
      T re = x(c, t), im = x(C + c, t);
      acc[c] += double(re) * double(re) + double(im) * double(im);
      T u = T(1.0 / std::sqrt(acc[c] / double(count) + eps));
      if (U) (*U)(c, t) = u;
      T hr = re * u, hi = im * u;
      T gr = NP(c, 0), gi = NP(C + c, 0);
      y(c, t) = gr * hr - gi * hi + NP(c, 1);
      y(C + c, t) = gr * hi + gi * hr + NP(C + c, 1);
    }
  }
}

template <typename T>
void cmul(const Eigen::Ref<const Mat<T>>& a, const Eigen::Ref<const Mat<T>>& b, Eigen::Ref<Mat<T>> y) {
  const int C = int(a.rows()) / 2;
  auto ar = a.topRows(C), ai = a.bottomRows(C), br = b.topRows(C), bi = b.bottomRows(C);
  y.topRows(C) = ar.cwiseProduct(br) - ai.cwiseProduct(bi);
  y.bottomRows(C) = ar.cwiseProduct(bi) + ai.cwiseProduct(br);
}

// Polyphase view of a real multichannel signal for the encoder: column q
// holds samples [S (q - Q + 1), S (q - Q + 2)) with Q = kernel / S, row
// pos * Cin + ci. Frame f reads columns f .. f + Q - 1.
template <typename T>
Mat<T> polyphase(const Mat<T>& x, int S, int Q) {
  const int Cin = int(x.rows()), F = int(x.cols()) / S;
  Mat<T> P = Mat<T>::Zero(Cin * S, F + Q - 1);
  for (int f = 0; f < F; ++f)
    for (int p = 0; p < S; ++p) P.col(f + Q - 1).segment(p * Cin, Cin) = x.col(f * S + p);
  return P;
}

// Encoder over a polyphase window of (Q - 1) + n columns: y = sum_j E_j P_{j..}.
template <typename T>
void encode_window(const Mat<T>& E, int Q, const Eigen::Ref<const Mat<T>>& Pw, Eigen::Ref<Mat<T>> y) {
  const int n = int(y.cols()), w = int(E.cols()) / Q;
  y.setZero();
  for (int j = 0; j < Q; ++j) y.noalias() += E.middleCols(j * w, w) * Pw.middleCols(j, n);
}

// Decoder frames V = Dw z; frame f is added to output samples starting at
// S f - (kernel - 2 S + 1). That offset makes the worst-case lookahead
// kernel - stride.
inline int decoder_offset(int kernel, int S) { return kernel - 2 * S + 1; }

}  // namespace kern

// ----------------------------------------------------------------------------
// Recorded ops

template <typename T>
VarP<T> cconv(Tape<T>& tp, const VarP<T>& x, const VarP<T>& W, const VarP<T>& b, int K, int dil) {
  require(W->value.cols() % K == 0 && W->value.cols() / K * 2 == x->value.rows(), Errc::shape,
          "complex conv: input channels do not match the weight");
  Mat<T> Wb = kern::block_weights(W->value, K);
  Mat<T> y;
  kern::cconv_full(Wb, b ? &b->value : nullptr, K, dil, x->value, y);
  bool ng = x->needs_grad || W->needs_grad || (b && b->needs_grad);
  auto out = tp.node(std::move(y), ng);
  if (out->needs_grad)
    tp.record([x, W, b, K, dil, out, Wb = std::move(Wb)] {
      if (!out->has_grad()) return;
      const Mat<T>& gy = out->grad;
      const int F = int(gy.cols()), Ci2 = int(x->value.rows());
      for (int j = 0; j < K; ++j) {
        int s = (K - 1 - j) * dil;
        if (s >= F) continue;
        if (W->needs_grad) {
          Mat<T> G = gy.rightCols(F - s) * x->value.leftCols(F - s).transpose();
          kern::fold_block_grad(G, j, Ci2 / 2, W->g());
        }
        if (x->needs_grad) x->g().leftCols(F - s).noalias() += Wb.middleCols(j * Ci2, Ci2).transpose() * gy.rightCols(F - s);
      }
      if (b && b->needs_grad) b->g() += gy.rowwise().sum();
    });
  return out;
}

template <typename T>
VarP<T> downsample2(Tape<T>& tp, const VarP<T>& x, const VarP<T>& A, const VarP<T>& b) {
  const int G = int(x->value.cols()) / 2, C = int(x->value.rows()) / 2;
  require(A->value.rows() == x->value.rows(), Errc::shape, "downsample: channel mismatch");
  Mat<T> y(2 * C, G);
  kern::downsample2<T>(A->value, b->value, x->value, y);
  auto out = tp.node(std::move(y), x->needs_grad || A->needs_grad || b->needs_grad);
  if (out->needs_grad)
    tp.record([x, A, b, out, G, C] {
      if (!out->has_grad()) return;
      const Mat<T>& gy = out->grad;
      for (int g = 0; g < G; ++g)
        for (int c = 0; c < C; ++c) {
          T gr = gy(c, g), gi = gy(C + c, g);
          for (int t = 0; t < 2; ++t) {
            T ar = A->value(c, t), ai = A->value(C + c, t);
            T xr = x->value(c, 2 * g + t), xi = x->value(C + c, 2 * g + t);
            if (x->needs_grad) {
              x->g()(c, 2 * g + t) += ar * gr + ai * gi;
              x->g()(C + c, 2 * g + t) += ar * gi - ai * gr;
            }
            if (A->needs_grad) {
              A->g()(c, t) += xr * gr + xi * gi;
              A->g()(C + c, t) += xr * gi - xi * gr;
            }
          }
          if (b->needs_grad) {
            b->g()(c, 0) += gr;
            b->g()(C + c, 0) += gi;
          }
        }
    });
  return out;
}

template <typename T>
VarP<T> trelu(Tape<T>& tp, const VarP<T>& x, const VarP<T>& P, bool shared) {
  const int C = int(x->value.rows()) / 2, F = int(x->value.cols());
  require(P->value.cols() == C && P->value.rows() >= (shared ? 5 : 6), Errc::shape, "trelu: parameter shape");
  Mat<T> y(2 * C, F);
  kern::trelu<T>(P->value, shared, x->value, y);
  auto out = tp.node(std::move(y), x->needs_grad || P->needs_grad);
  if (out->needs_grad)
    tp.record([x, P, shared, out, C, F] {
      if (!out->has_grad()) return;
      const Mat<T>& gy = out->grad;
      const Mat<T>& p = P->value;
      Mat<T> gP = Mat<T>::Zero(p.rows(), p.cols());
      for (int t = 0; t < F; ++t)
        for (int c = 0; c < C; ++c) {
          T re = x->value(c, t), im = x->value(C + c, t);
          T hir = shared ? p(1, c) : p(5, c);
          T pr = p(0, c) * re + p(1, c) * im + p(3, c);
          T pi = hir * re + p(2, c) * im + p(4, c);
          T gr = pr > T(0) ? gy(c, t) : T(0);  // subgradient 0 at the kink
          T gi = pi > T(0) ? gy(C + c, t) : T(0);
          if (x->needs_grad) {
            x->g()(c, t) += gr * p(0, c) + gi * hir;
            x->g()(C + c, t) += gr * p(1, c) + gi * p(2, c);
          }
          gP(0, c) += gr * re;
          gP(1, c) += gr * im;
          gP(2, c) += gi * im;
          gP(3, c) += gr;
          gP(4, c) += gi;
          if (shared) gP(1, c) += gi * re;
          else gP(5, c) += gi * re;
        }
      if (P->needs_grad) P->g() += gP;
    });
  return out;
}

template <typename T>
VarP<T> ctanh(Tape<T>& tp, const VarP<T>& x) {
  Mat<T> y(x->value.rows(), x->value.cols());
  kern::ctanh<T>(x->value, y);
  auto out = tp.node(std::move(y), x->needs_grad);
  if (out->needs_grad)
    tp.record([x, out] {
      if (!out->has_grad()) return;
      const int C = int(x->value.rows()) / 2, F = int(x->value.cols());
      for (int t = 0; t < F; ++t)
        for (int c = 0; c < C; ++c) {
          double re = double(x->value(c, t)), im = double(x->value(C + c, t));
          double gr = double(out->grad(c, t)), gi = double(out->grad(C + c, t));
          double s, d;
          kern::ctanh_factors(std::sqrt(re * re + im * im), s, d);
          double dot = re * gr + im * gi;
          x->g()(c, t) += T(s * gr + d * re * dot);
          x->g()(C + c, t) += T(s * gi + d * im * dot);
        }
    });
  return out;
}

template <typename T>
VarP<T> cnorm(Tape<T>& tp, const VarP<T>& x, const VarP<T>& NP, double eps) {
  const int C = int(x->value.rows()) / 2, F = int(x->value.cols());
  require(NP->value.rows() == 2 * C && NP->value.cols() == 2, Errc::shape, "norm: parameter shape");
  Mat<T> y(2 * C, F), U(C, F);
  std::vector<double> acc(C, 0.0);
  long count = 0;
  kern::cnorm<T>(NP->value, eps, x->value, acc, count, y, &U);
  auto out = tp.node(std::move(y), x->needs_grad || NP->needs_grad);
  if (out->needs_grad)
    tp.record([x, NP, out, C, F, U = std::move(U)] {
      if (!out->has_grad()) return;
      const Mat<T>& gy = out->grad;
      const Mat<T>& np = NP->value;
      Mat<T> gNP = Mat<T>::Zero(2 * C, 2);
      std::vector<double> dm(std::size_t(C) * F);
      for (int t = 0; t < F; ++t)
        for (int c = 0; c < C; ++c) {
          T gr = gy(c, t), gi = gy(C + c, t), u = U(c, t);
          T re = x->value(c, t), im = x->value(C + c, t), hr = re * u, hi = im * u;
          T sr = np(c, 0), si = np(C + c, 0);
          gNP(c, 0) += hr * gr + hi * gi;
          gNP(C + c, 0) += hr * gi - hi * gr;
          gNP(c, 1) += gr;
          gNP(C + c, 1) += gi;
          T ghr = sr * gr + si * gi, ghi = sr * gi - si * gr;
          if (x->needs_grad) {
            x->g()(c, t) += u * ghr;
            x->g()(C + c, t) += u * ghi;
          }
          double du = double(re) * ghr + double(im) * ghi;
          dm[std::size_t(t) * C + c] = du * (-0.5 * double(u) * u * u) / double(t + 1);
        }
      if (x->needs_grad) {
        std::vector<double> run(C, 0.0);
        for (int t = F; t-- > 0;)
          for (int c = 0; c < C; ++c) {
            run[c] += dm[std::size_t(t) * C + c];
            x->g()(c, t) += T(2.0 * double(x->value(c, t)) * run[c]);
            x->g()(C + c, t) += T(2.0 * double(x->value(C + c, t)) * run[c]);
          }
      }
      if (NP->needs_grad) NP->g() += gNP;
    });
  return out;
}

template <typename T>
VarP<T> cmul(Tape<T>& tp, const VarP<T>& a, const VarP<T>& b) {
  require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(), Errc::shape,
          "complex multiply: shape mismatch");
  Mat<T> y(a->value.rows(), a->value.cols());
  kern::cmul<T>(a->value, b->value, y);
  auto out = tp.node(std::move(y), a->needs_grad || b->needs_grad);
  if (out->needs_grad)
    tp.record([a, b, out] {
      if (!out->has_grad()) return;
      const int C = int(a->value.rows()) / 2;
      const Mat<T>& g = out->grad;
      auto gr = g.topRows(C), gi = g.bottomRows(C);
      auto accum = [&](const VarP<T>& dst, const VarP<T>& other) {
        if (!dst->needs_grad) return;
        auto orr = other->value.topRows(C), oi = other->value.bottomRows(C);
        dst->g().topRows(C) += orr.cwiseProduct(gr) + oi.cwiseProduct(gi);
        dst->g().bottomRows(C) += orr.cwiseProduct(gi) - oi.cwiseProduct(gr);
      };
      accum(a, b);
      accum(b, a);
    });
  return out;
}

template <typename T>
VarP<T> add(Tape<T>& tp, const VarP<T>& a, const VarP<T>& b) {
  require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(), Errc::shape, "add: shape mismatch");
  auto out = tp.node(a->value + b->value, a->needs_grad || b->needs_grad);
  if (out->needs_grad)
    tp.record([a, b, out] {
      if (!out->has_grad()) return;
      if (a->needs_grad) a->g() += out->grad;
      if (b->needs_grad) b->g() += out->grad;
    });
  return out;
}

// Columns [start, start + n) of x.
template <typename T>
VarP<T> slice_cols(Tape<T>& tp, const VarP<T>& x, int start, int n) {
  require(start >= 0 && n >= 0 && start + n <= x->value.cols(), Errc::shape, "slice: range outside the tensor");
  auto out = tp.node(x->value.middleCols(start, n), x->needs_grad);
  if (out->needs_grad)
    tp.record([x, start, n, out] {
      if (out->has_grad()) x->g().middleCols(start, n) += out->grad;
    });
  return out;
}

// Causal nearest-neighbour upsampling by r to F frames: frame f takes input
// frame floor((f + 1) / r) - 1, zero before the first one is complete.
template <typename T>
VarP<T> upsample_causal(Tape<T>& tp, const VarP<T>& x, int r, int F) {
  Mat<T> y = Mat<T>::Zero(x->value.rows(), F);
  for (int f = 0; f < F; ++f) {
    int g = (f + 1) / r - 1;
    if (g >= 0) {
      require(g < x->value.cols(), Errc::shape, "upsample: input too short");
      y.col(f) = x->value.col(g);
    }
  }
  auto out = tp.node(std::move(y), x->needs_grad);
  if (out->needs_grad)
    tp.record([x, r, F, out] {
      if (!out->has_grad()) return;
      for (int f = 0; f < F; ++f) {
        int g = (f + 1) / r - 1;
        if (g >= 0) x->g().col(g) += out->grad.col(f);
      }
    });
  return out;
}

// Real (Cin x T) signal to 2C x T/S latent; no bias.
template <typename T>
VarP<T> encoder(Tape<T>& tp, const VarP<T>& x, const VarP<T>& E, int kernel, int S) {
  const int Q = kernel / S, Cin = int(x->value.rows());
  require(E->value.cols() == Cin * kernel, Errc::shape,
          "encoder: expected " + std::to_string(E->value.cols() / kernel) + " input channels, got " +
              std::to_string(Cin));
  require(x->value.cols() % S == 0, Errc::shape, "encoder: length must be a multiple of the stride");
  const int F = int(x->value.cols()) / S;
  Mat<T> P = kern::polyphase(x->value, S, Q);
  Mat<T> y(E->value.rows(), F);
  kern::encode_window<T>(E->value, Q, P, y);
  auto out = tp.node(std::move(y), x->needs_grad || E->needs_grad);
  if (out->needs_grad)
    tp.record([x, E, Q, S, F, Cin, out, P = std::move(P)] {
      if (!out->has_grad()) return;
      const int w = int(E->value.cols()) / Q;
      Mat<T> gP;
      if (x->needs_grad) gP = Mat<T>::Zero(P.rows(), P.cols());
      for (int j = 0; j < Q; ++j) {
        if (E->needs_grad) E->g().middleCols(j * w, w).noalias() += out->grad * P.middleCols(j, F).transpose();
        if (x->needs_grad) gP.middleCols(j, F).noalias() += E->value.middleCols(j * w, w).transpose() * out->grad;
      }
      if (x->needs_grad)
        for (int f = 0; f < F; ++f)
          for (int p = 0; p < S; ++p) x->g().col(f * S + p) += gP.col(f + Q - 1).segment(p * Cin, Cin);
    });
  return out;
}

// 2C x F latent to a 1 x (S F) waveform by overlap-add of kernel-long frames.
template <typename T>
VarP<T> decoder(Tape<T>& tp, const VarP<T>& z, const VarP<T>& Dw, int kernel, int S) {
  require(Dw->value.cols() == z->value.rows(), Errc::shape, "decoder: channel mismatch");
  const int F = int(z->value.cols()), L = S * F, off = kern::decoder_offset(kernel, S);
  Mat<T> V = Dw->value * z->value;
  Mat<T> y = Mat<T>::Zero(1, L);
  for (int f = 0; f < F; ++f)
    for (int i = 0; i < kernel; ++i) {
      int t = S * f - off + i;
      if (t >= 0 && t < L) y(0, t) += V(i, f);
    }
  auto out = tp.node(std::move(y), z->needs_grad || Dw->needs_grad);
  if (out->needs_grad)
    tp.record([z, Dw, kernel, S, F, L, off, out] {
      if (!out->has_grad()) return;
      Mat<T> gV = Mat<T>::Zero(kernel, F);
      for (int f = 0; f < F; ++f)
        for (int i = 0; i < kernel; ++i) {
          int t = S * f - off + i;
          if (t >= 0 && t < L) gV(i, f) = out->grad(0, t);
        }
      if (Dw->needs_grad) Dw->g().noalias() += gV * z->value.transpose();
      if (z->needs_grad) z->g().noalias() += Dw->value.transpose() * gV;
    });
  return out;
}

}  // namespace dirhear
