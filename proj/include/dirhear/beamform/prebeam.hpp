// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Block pipeline in front of the network: one STFT frame per 128-sample
// block, three beamformers plus the aligned channels, back to time domain.
// Output rows: [superdirective, mvdr, nonlinear, aligned_0 .. aligned_{c-1}],
// delayed by fft_size - hop = 128 samples.

#pragma once

#include <vector>

#include "dirhear/beamform/beamformers.hpp"
#include "dirhear/signal/stft.hpp"

namespace dirhear {

class Prebeam {
 public:
  Prebeam(const ArrayGeometry& g, double theta, const BeamParams& p, const StftSpec& spec = {})
      : g_(g), p_(p), spec_(spec) {
    g_.validate();
    p_.validate();
    require(spec_.hop == kBlockSize, Errc::config, "prebeam hop must equal the 128-sample block");
    c_ = g_.size();
    bins_ = spec_.fft_size / 2 + 1;
    for (int i = 0; i < c_; ++i) ana_.emplace_back(spec_);
    for (int i = 0; i < c_ + 3; ++i) syn_.emplace_back(spec_);
    mvdr_ = make_mvdr_state(c_, spec_.fft_size, p_);
    y_.assign(c_, Spectrum{std::vector<cd>(bins_), 0, spec_.fft_size});
    set_theta(theta);
  }

  void set_theta(double theta) {
    theta_ = theta;
    steer_ = steering_table(g_, theta, spec_.fft_size);
    sd_ = superdirective_design(g_, theta, spec_.fft_size, p_.sd_epsilon);
  }

  double theta() const { return theta_; }
  int mics() const { return c_; }
  int out_channels() const { return c_ + 3; }
  const MvdrState& mvdr() const { return mvdr_; }
  const std::vector<CVec>& mvdr_weights_last() const { return w_mvdr_; }
  const SuperdirectiveWeights& superdirective() const { return sd_; }
  const std::vector<CVec>& steering() const { return steer_; }
  long frames() const { return frame_; }

  // in[c] points at 128 samples; out is (c+3) x 128 row-major.
  void process_block(const double* const* in, double* out) {
    for (int i = 0; i < c_; ++i) {
      ana_[i].push(in[i], y_[i].bins.data());
      y_[i].frame_index = frame_;
    }
    auto aligned = align_steered(y_);
    // weights come from past frames only; the current frame updates R after
    if (mvdr_.frames_seen == 0) w_mvdr_ = delay_and_sum_weights();
    else w_mvdr_ = mvdr_weights(mvdr_, steer_);
    mvdr_update(mvdr_, y_);
    Spectrum sd = apply_weights(sd_.w, y_);
    Spectrum mv = apply_weights(w_mvdr_, y_);
    auto nl = nonlinear_process(aligned, p_.mask_floor, p_.mask_eps);
    const int B = kBlockSize;
    syn_[0].push(sd.bins.data(), out);
    syn_[1].push(mv.bins.data(), out + B);
    syn_[2].push(nl.out.bins.data(), out + 2 * B);
    for (int i = 0; i < c_; ++i) syn_[3 + i].push(aligned[i].bins.data(), out + (3 + i) * B);
    ++frame_;
  }

  void reset() {
    for (auto& a : ana_) a.reset();
    for (auto& s : syn_) s.reset();
    mvdr_ = make_mvdr_state(c_, spec_.fft_size, p_);
    frame_ = 0;
  }

 private:
  std::vector<CVec> delay_and_sum_weights() const {
    std::vector<CVec> w = steer_;
    for (auto& v : w)
      for (auto& x : v) x /= double(c_);
    return w;
  }

  // Alignment multiplies by conj(d), the same steering table MVDR uses.
  std::vector<Spectrum> align_steered(const std::vector<Spectrum>& y) const {
    std::vector<Spectrum> a = y;
    for (int i = 1; i < c_; ++i)
      for (int k = 0; k < bins_; ++k) a[i].bins[k] *= std::conj(steer_[k][i]);
    return a;
  }

  ArrayGeometry g_;
  BeamParams p_;
  StftSpec spec_;
  int c_ = 0, bins_ = 0;
  double theta_ = 0;
  std::vector<StftAnalyzer> ana_;
  std::vector<OlaSynth> syn_;
  MvdrState mvdr_;
  SuperdirectiveWeights sd_;
  std::vector<CVec> steer_, w_mvdr_;
  std::vector<Spectrum> y_;
  long frame_ = 0;
};

inline MultichannelBuffer<double> run_prebeam(const MultichannelBuffer<double>& block, Prebeam& state) {
  require(int(block.channels()) == state.mics(), Errc::shape, "prebeam: channel count != mic count");
  require(block.samples() == std::size_t(kBlockSize), Errc::contract,
          "prebeam block must be exactly 128 samples, got " + std::to_string(block.samples()));
  std::vector<const double*> in(block.channels());
  for (std::size_t i = 0; i < block.channels(); ++i) in[i] = block[i].data();
  std::vector<double> out(std::size_t(state.out_channels()) * kBlockSize);
  state.process_block(in.data(), out.data());
  MultichannelBuffer<double> y(state.out_channels(), kBlockSize);
  for (int r = 0; r < state.out_channels(); ++r)
    std::copy(out.begin() + r * kBlockSize, out.begin() + (r + 1) * kBlockSize, y[r].begin());
  return y;
}

// Whole-signal prebeam with the 128-sample block delay removed; output has
// the input length.
inline MultichannelBuffer<double> run_prebeam_offline(const MultichannelBuffer<double>& x, const ArrayGeometry& g,
                                                      double theta, const BeamParams& p) {
  require(int(x.channels()) == g.size(), Errc::shape, "prebeam: channel count != mic count");
  Prebeam pb(g, theta, p);
  const std::size_t L = x.samples();
  const std::size_t blocks = (L + kBlockSize - 1) / kBlockSize + 1;
  const int C = pb.out_channels();
  MultichannelBuffer<double> y(C, L);
  std::vector<std::vector<double>> blk(x.channels(), std::vector<double>(kBlockSize));
  std::vector<const double*> in(x.channels());
  std::vector<double> out(std::size_t(C) * kBlockSize);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      for (int i = 0; i < kBlockSize; ++i) {
        std::size_t t = b * kBlockSize + i;
        blk[c][i] = t < L ? x[c][t] : 0.0;
      }
      in[c] = blk[c].data();
    }
    pb.process_block(in.data(), out.data());
    if (b == 0) continue;
    for (int r = 0; r < C; ++r)
      for (int i = 0; i < kBlockSize; ++i) {
        std::size_t t = (b - 1) * kBlockSize + i;
        if (t < L) y[r][t] = out[std::size_t(r) * kBlockSize + i];
      }
  }
  return y;
}

}  // namespace dirhear
