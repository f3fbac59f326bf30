// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Offline forward graph: encoder, strided TCN separator, mask head, decoder.
// The same graph serves inference (non-recording tape) and training.

#pragma once

#include <string>
#include <vector>

#include "dirhear/beamform/prebeam.hpp"
#include "dirhear/nn/arch.hpp"
#include "dirhear/nn/ops.hpp"

namespace dirhear {

// One tape leaf per tensor, in tensor_specs order.
template <typename T>
struct ParamSet {
  const ModelWeights<T>* w = nullptr;
  std::vector<VarP<T>> leaves;

  const VarP<T>& operator[](const std::string& name) const { return leaves[w->id(name)]; }
};

template <typename T>
ParamSet<T> make_params(Tape<T>& tp, const ModelWeights<T>& w, bool needs_grad) {
  ParamSet<T> p{&w, {}};
  for (const auto& m : w.tensors) p.leaves.push_back(tp.leaf(m, needs_grad));
  return p;
}

template <typename T>
void store_params(const ParamSet<T>& p, ModelWeights<T>& w) {
  for (std::size_t i = 0; i < p.leaves.size(); ++i) w.tensors[i] = p.leaves[i]->value;
}

template <typename T>
struct ForwardResult {
  VarP<T> latent, mask, masked, output;
};

template <typename T>
VarP<T> act_norm(Tape<T>& tp, const ParamSet<T>& P, const std::string& n, const VarP<T>& x, const ModelConfig& c) {
  return cnorm(tp, trelu(tp, x, P[n + ".act"], c.shared_hri), P[n + ".norm"], c.norm_eps);
}

template <typename T>
VarP<T> conv1x1(Tape<T>& tp, const ParamSet<T>& P, const std::string& n, const VarP<T>& x) {
  return cconv(tp, x, P[n + ".w"], P[n + ".b"], 1, 1);
}

// Latent (2C x F) to mask (2C x F).
template <typename T>
VarP<T> separator_graph(Tape<T>& tp, const ParamSet<T>& P, const VarP<T>& latent) {
  const ModelConfig& c = P.w->config;
  const int F = int(latent->value.cols()), K = c.dilated_kernel();
  VarP<T> trunk = latent, skips;
  for (int s = 0; s < c.N; ++s) {
    const std::string p = "s" + std::to_string(s);
    if (s > 0) trunk = downsample2(tp, trunk, P[p + ".down.w"], P[p + ".down.b"]);
    VarP<T> h = act_norm(tp, P, p + ".in", conv1x1(tp, P, p + ".in", trunk), c);
    long dil = 1;
    for (int m = 0; m < c.M; ++m, dil *= c.k) {
      const std::string l = p + ".l" + std::to_string(m);
      VarP<T> y = cconv(tp, h, P[l + ".w"], P[l + ".b"], K, int(dil));
      h = add(tp, h, act_norm(tp, P, l, y, c));
    }
    VarP<T> sk = upsample_causal(tp, conv1x1(tp, P, p + ".skip", h), 1 << s, F);
    skips = skips ? add(tp, skips, sk) : sk;
    if (s < c.N - 1) trunk = add(tp, trunk, conv1x1(tp, P, p + ".out", h));
  }
  VarP<T> a = act_norm(tp, P, "head0", skips, c);
  a = act_norm(tp, P, "head1", conv1x1(tp, P, "head.mid", a), c);
  return ctanh(tp, conv1x1(tp, P, "head.mask", a));
}

// input: in_channels x T with T a multiple of the encoder stride.
template <typename T>
ForwardResult<T> forward_graph(Tape<T>& tp, const ParamSet<T>& P, const VarP<T>& input) {
  const ModelConfig& c = P.w->config;
  ForwardResult<T> r;
  r.latent = encoder(tp, input, P["enc.w"], c.enc_kernel, c.enc_stride);
  r.mask = separator_graph(tp, P, r.latent);
  r.masked = cmul(tp, r.mask, r.latent);
  r.output = decoder(tp, r.masked, P["dec.w"], c.enc_kernel, c.enc_stride);
  return r;
}

// Inference on a whole signal; returns 1 x T.
template <typename T>
Mat<T> forward_offline(const ModelWeights<T>& w, const Mat<T>& input) {
  Tape<T> tp(false);
  auto P = make_params(tp, w, false);
  return forward_graph(tp, P, tp.leaf(input)).output->value;
}

// Encoder frames whose 32-sample window lies entirely inside the input
// (no causal zero padding): (T - kernel) / stride + 1 frames.
template <typename T>
Mat<T> encoder_valid(const ModelWeights<T>& w, const Mat<T>& input) {
  const ModelConfig& c = w.config;
  const int S = c.enc_stride, Q = c.enc_kernel / S;
  require(input.rows() == c.in_channels(), Errc::shape, "encoder: input channels do not match the config");
  require(input.cols() >= c.enc_kernel, Errc::shape, "encoder: input shorter than the kernel");
  const int F = int((input.cols() - c.enc_kernel) / S + 1);
  Mat<T> x = input.leftCols(std::size_t(F - 1) * S + c.enc_kernel);
  Mat<T> xp = Mat<T>::Zero(x.rows(), (x.cols() + S - 1) / S * S);
  xp.leftCols(x.cols()) = x;
  Mat<T> P = kern::polyphase(xp, S, Q);
  Mat<T> y(2 * c.C, F);
  kern::encode_window<T>(w["enc.w"], Q, P.middleCols(Q - 1, F + Q - 1), y);
  return y;
}

// Rows of the prebeam output that feed the network.
inline int network_first_row(const ModelConfig& c) { return c.use_beamformers ? 0 : 3; }

// Prebeam output (mics + 3 rows) to network input, zero-padded to a whole
// number of encoder strides.
template <typename T>
Mat<T> network_input(const MultichannelBuffer<double>& pre, const ModelConfig& c) {
  require(int(pre.channels()) == c.mics + 3, Errc::shape,
          "prebeam output has " + std::to_string(pre.channels()) + " rows, config expects " +
              std::to_string(c.mics + 3));
  const int r0 = network_first_row(c), S = c.enc_stride;
  const std::size_t L = pre.samples(), Lp = (L + S - 1) / S * S;
  Mat<T> x = Mat<T>::Zero(c.in_channels(), long(Lp));
  for (int r = 0; r < c.in_channels(); ++r)
    for (std::size_t t = 0; t < L; ++t) x(r, long(t)) = T(pre[r0 + r][t]);
  return x;
}

// Whole pipeline without streaming: prebeam, network, trimmed to the input
// length. Aligned with the input (no block or lookahead delay). The input is
// zero-extended by the decoder lookahead so the last samples see the same
// prebeam tail a stream fed trailing zeros would.
template <typename T>
std::vector<T> separate_offline(const ModelWeights<T>& w, const ArrayGeometry& g, double theta, const BeamParams& bp,
                                const MultichannelBuffer<double>& mixture) {
  require(g.size() == w.config.mics, Errc::shape,
          "weights expect " + std::to_string(w.config.mics) + " mics, input has " + std::to_string(g.size()));
  require(int(mixture.channels()) == g.size(), Errc::shape,
          "input has " + std::to_string(mixture.channels()) + " channels, array has " + std::to_string(g.size()));
  const std::size_t L = mixture.samples();
  MultichannelBuffer<double> padded(mixture.channels(), L + std::size_t(w.config.lookahead_samples()));
  for (std::size_t c = 0; c < mixture.channels(); ++c) std::copy(mixture[c].begin(), mixture[c].end(), padded[c].begin());
  auto pre = run_prebeam_offline(padded, g, theta, bp);
  Mat<T> y = forward_offline(w, network_input<T>(pre, w.config));
  return std::vector<T>(y.data(), y.data() + L);
}

}  // namespace dirhear
