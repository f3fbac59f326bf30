// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Block-by-block pipeline: prebeam, encoder, strided TCN and decoder run
// incrementally on 128-sample blocks. Every dilated conv keeps its causal
// padding in a mirrored ring, so windows are contiguous without shifting.
// Output lags the input by one block (prebeam) plus the decoder lookahead.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dirhear/nn/model.hpp"

namespace dirhear {

// Ring of `hist + chunk` frames; frame i lives at column i mod cap and again
// at cap + (i mod cap), so the newest hist + n frames are always contiguous.
template <typename T>
class FrameRing {
 public:
  FrameRing() = default;
  FrameRing(int rows, int hist, int chunk) : hist_(hist), cap_(hist + chunk), buf_(Mat<T>::Zero(rows, 2 * cap_)) {}

  void push(const Eigen::Ref<const Mat<T>>& x) {
    for (int i = 0; i < x.cols(); ++i) {
      buf_.col(head_) = x.col(i);
      buf_.col(head_ + cap_) = x.col(i);
      head_ = head_ + 1 == cap_ ? 0 : head_ + 1;
    }
  }

  // hist frames of padding followed by the n most recent frames
  auto window(int n) const {
    int start = ((head_ - n - hist_) % cap_ + cap_) % cap_;
    return buf_.middleCols(start, hist_ + n);
  }

  int history() const { return hist_; }
  int rows() const { return int(buf_.rows()); }
  std::size_t allocated_bytes() const { return std::size_t(buf_.size()) * sizeof(T); }
  void reset() {
    buf_.setZero();
    head_ = 0;
  }

 private:
  int hist_ = 0, cap_ = 0, head_ = 0;
  Mat<T> buf_;
};

// Weights plus their expanded conv blocks; immutable and shareable between
// streams.
template <typename T>
struct CompiledModel {
  ModelWeights<T> w;
  std::vector<Mat<T>> block;  // per tensor index; empty unless a conv weight

  explicit CompiledModel(ModelWeights<T> weights) : w(std::move(weights)) {
    w.config.validate();
    block.resize(w.tensors.size());
    for (std::size_t i = 0; i < w.specs.size(); ++i)
      if (w.specs[i].kind == TensorKind::complex_weight) {
        const bool dilated = w.specs[i].name.find(".l") != std::string::npos;
        block[i] = kern::block_weights(w.tensors[i], dilated ? w.config.dilated_kernel() : 1);
      }
  }
  const Mat<T>& operator[](const std::string& n) const { return w[n]; }
  const Mat<T>& blk(const std::string& n) const { return block[w.id(n + ".w")]; }
};

struct NormState {
  std::vector<double> acc;
  long count = 0;
  void reset() {
    std::fill(acc.begin(), acc.end(), 0.0);
    count = 0;
  }
};

// Network half of the stream: prebeam output rows in, waveform samples out.
template <typename T>
class NetStream {
 public:
  explicit NetStream(std::shared_ptr<const CompiledModel<T>> m) : m_(std::move(m)) {
    const ModelConfig& c = m_->w.config;
    F_ = c.frames_per_block();
    S_ = c.enc_stride;
    Q_ = c.enc_kernel / S_;
    enc_ = FrameRing<T>(c.in_channels() * S_, Q_ - 1, F_);
    const int K = c.dilated_kernel();
    for (int s = 0; s < c.N; ++s) {
      Stack st;
      st.n = F_ >> s;
      st.in_norm.acc.assign(c.H, 0.0);
      long dil = 1;
      for (int m = 0; m < c.M; ++m, dil *= c.k) {
        st.rings.emplace_back(2 * c.H, int((K - 1) * dil), st.n);
        st.dil.push_back(int(dil));
        st.norms.push_back({std::vector<double>(c.H, 0.0), 0});
      }
      st.last_skip = Mat<T>::Zero(2 * c.D, 1);
      stacks_.push_back(std::move(st));
    }
    head0_.acc.assign(c.D, 0.0);
    head1_.acc.assign(c.D, 0.0);
    ola_.assign(std::size_t(kBlockSize + c.enc_kernel), T(0));
  }

  const ModelConfig& config() const { return m_->w.config; }

  // x: in_channels x 128. Writes 128 samples for network time
  // [128 b - lookahead, 128 b + 128 - lookahead).
  void process(const Mat<T>& x, T* out) {
    const ModelConfig& c = config();
    const CompiledModel<T>& M = *m_;
    const int Cin = c.in_channels(), K = c.dilated_kernel();
    require(x.rows() == Cin && x.cols() == kBlockSize, Errc::shape, "network block shape");
    Mat<T> pc(Cin * S_, F_);
    for (int f = 0; f < F_; ++f)
      for (int p = 0; p < S_; ++p) pc.col(f).segment(p * Cin, Cin) = x.col(f * S_ + p);
    enc_.push(pc);
    Mat<T> z(2 * c.C, F_);
    kern::encode_window<T>(M["enc.w"], Q_, enc_.window(F_), z);

    Mat<T> trunk = z, skips(2 * c.D, F_), up(2 * c.D, F_);
    for (int s = 0; s < c.N; ++s) {
      Stack& st = stacks_[s];
      const std::string p = "s" + std::to_string(s);
      const int n = st.n;
      if (s > 0) {
        Mat<T> d(2 * c.C, n);
        kern::downsample2<T>(M[p + ".down.w"], M[p + ".down.b"], trunk, d);
        trunk = std::move(d);
      }
      Mat<T> h(2 * c.H, n), y(2 * c.H, n);
      conv1x1(p + ".in", trunk, h);
      act_norm(p + ".in", h, st.in_norm);
      for (int m = 0; m < c.M; ++m) {
        const std::string l = p + ".l" + std::to_string(m);
        st.rings[m].push(h);
        kern::cconv_window<T>(M.blk(l), &M[l + ".b"], K, st.dil[m], st.rings[m].window(n), y);
        act_norm(l, y, st.norms[m]);
        h += y;
      }
      Mat<T> sk(2 * c.D, n);
      conv1x1(p + ".skip", h, sk);
      const int r = 1 << s;
      for (int i = 0; i < F_; ++i) {
        int g = (i + 1) / r - 1;
        up.col(i) = g >= 0 ? sk.col(g) : st.last_skip.col(0);
      }
      st.last_skip = sk.col(n - 1);
      if (s == 0) skips = up;
      else skips += up;
      if (s < c.N - 1) {
        Mat<T> o(2 * c.C, n);
        conv1x1(p + ".out", h, o);
        trunk += o;
      }
    }
    act_norm("head0", skips, head0_);
    Mat<T> a(2 * c.D, F_), mk(2 * c.C, F_);
    conv1x1("head.mid", skips, a);
    act_norm("head1", a, head1_);
    conv1x1("head.mask", a, mk);
    kern::ctanh<T>(mk, mk);
    Mat<T> masked(2 * c.C, F_);
    kern::cmul<T>(mk, z, masked);
    Mat<T> V = M["dec.w"] * masked;

    // overlap-add ring: network time t lives in slot t mod cap
    const int cap = int(ola_.size()), L = c.lookahead_samples(), off = kern::decoder_offset(c.enc_kernel, S_);
    const long b0 = long(block_) * kBlockSize - L;  // first sample emitted now
    for (int f = 0; f < F_; ++f) {
      long t0 = (long(block_) * F_ + f) * S_ - off;
      for (int i = 0; i < c.enc_kernel; ++i) {
        long t = t0 + i;
        if (t < 0) continue;
        ola_[std::size_t(t % cap)] += V(i, f);
      }
    }
    for (int i = 0; i < kBlockSize; ++i) {
      long t = b0 + i;
      if (t < 0) {
        out[i] = T(0);
        continue;
      }
      T& slot = ola_[std::size_t(t % cap)];
      out[i] = slot;
      slot = T(0);
    }
    ++block_;
  }

  void reset() {
    enc_.reset();
    for (auto& st : stacks_) {
      for (auto& r : st.rings) r.reset();
      for (auto& n : st.norms) n.reset();
      st.in_norm.reset();
      st.last_skip.setZero();
    }
    head0_.reset();
    head1_.reset();
    std::fill(ola_.begin(), ola_.end(), T(0));
    block_ = 0;
  }

  // Causal padding frames held across all dilated layers.
  long padding_frames() const {
    long t = 0;
    for (const auto& st : stacks_)
      for (const auto& r : st.rings) t += r.history();
    return t;
  }

  std::size_t allocated_bytes() const {
    std::size_t b = enc_.allocated_bytes() + ola_.size() * sizeof(T) + (head0_.acc.size() + head1_.acc.size()) * 8;
    for (const auto& st : stacks_) {
      for (const auto& r : st.rings) b += r.allocated_bytes();
      for (const auto& n : st.norms) b += n.acc.size() * 8;
      b += st.in_norm.acc.size() * 8 + std::size_t(st.last_skip.size()) * sizeof(T);
    }
    return b;
  }

 private:
  struct Stack {
    int n = 0;
    std::vector<FrameRing<T>> rings;
    std::vector<int> dil;
    std::vector<NormState> norms;
    NormState in_norm;
    Mat<T> last_skip;
  };

  void conv1x1(const std::string& n, const Mat<T>& x, Mat<T>& y) {
    kern::cconv_window<T>(m_->blk(n), &(*m_)[n + ".b"], 1, 1, x, y);
  }
  void act_norm(const std::string& n, Mat<T>& x, NormState& ns) {
    const ModelConfig& c = config();
    kern::trelu<T>((*m_)[n + ".act"], c.shared_hri, x, x);
    kern::cnorm<T>((*m_)[n + ".norm"], c.norm_eps, x, ns.acc, ns.count, x);
  }

  std::shared_ptr<const CompiledModel<T>> m_;
  int F_ = 0, S_ = 0, Q_ = 0;
  FrameRing<T> enc_;
  std::vector<Stack> stacks_;
  NormState head0_, head1_;
  std::vector<T> ola_;
  long block_ = 0;
};

struct BlockTiming {
  double prebeam_ms = 0, nn_ms = 0, total_ms = 0;
};

// Full stream: mixture block in, separated block out.
template <typename T = float>
class Stream {
 public:
  Stream(std::shared_ptr<const CompiledModel<T>> m, const ArrayGeometry& g, double theta, const BeamParams& bp = {})
      : pre_(g, wrap_angle(theta), bp), net_(m) {
    require(g.size() == m->w.config.mics, Errc::config,
            "weights expect " + std::to_string(m->w.config.mics) + " mics, array has " + std::to_string(g.size()));
    const ModelConfig& c = m->w.config;
    x_ = Mat<T>(c.in_channels(), kBlockSize);
    pre_out_.resize(std::size_t(pre_.out_channels()) * kBlockSize);
  }

  // Samples between an input sample and the matching output sample.
  int delay_samples() const { return kBlockSize + net_.config().lookahead_samples(); }
  double theta() const { return pre_.theta(); }
  void set_theta(double theta) { pre_.set_theta(wrap_angle(theta)); }
  long blocks() const { return blocks_; }
  const BlockTiming& last_timing() const { return timing_; }
  const NetStream<T>& net() const { return net_; }
  const Prebeam& prebeam() const { return pre_; }

  // in[c] points at 128 samples of mic c; out receives 128 samples.
  void process_block(const double* const* in, T* out) {
    using clk = std::chrono::steady_clock;
    require(!poisoned_, Errc::poisoned, "stream was poisoned by non-finite input; reset it");
    for (int c = 0; c < pre_.mics(); ++c)
      for (int i = 0; i < kBlockSize; ++i)
        if (!std::isfinite(in[c][i])) {
          poisoned_ = true;
          throw Error(Errc::poisoned, "non-finite sample in input block " + std::to_string(blocks_));
        }
    auto t0 = clk::now();
    pre_.process_block(in, pre_out_.data());
    auto t1 = clk::now();
    // The prebeam's first block precedes time zero of its output; the
    // network starts with the second so it sees what the offline path sees.
    if (blocks_ == 0) {
      std::fill(out, out + kBlockSize, T(0));
    } else {
      const int r0 = network_first_row(net_.config());
      for (int r = 0; r < x_.rows(); ++r)
        for (int i = 0; i < kBlockSize; ++i) x_(r, i) = T(pre_out_[std::size_t(r0 + r) * kBlockSize + i]);
      net_.process(x_, out);
    }
    auto t2 = clk::now();
    timing_.prebeam_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    timing_.nn_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    ++blocks_;
  }

  std::vector<T> process_block(const MultichannelBuffer<double>& block) {
    require(int(block.channels()) == pre_.mics(), Errc::shape,
            "block has " + std::to_string(block.channels()) + " channels, stream expects " +
                std::to_string(pre_.mics()));
    require(block.samples() == std::size_t(kBlockSize), Errc::contract,
            "block must be exactly 128 samples per channel, got " + std::to_string(block.samples()));
    std::vector<const double*> in(block.channels());
    for (std::size_t c = 0; c < block.channels(); ++c) in[c] = block[c].data();
    std::vector<T> out(kBlockSize);
    process_block(in.data(), out.data());
    return out;
  }

  void reset() {
    pre_.reset();
    net_.reset();
    blocks_ = 0;
    poisoned_ = false;
  }

  std::size_t state_allocated_bytes() const { return net_.allocated_bytes(); }

 private:
  Prebeam pre_;
  NetStream<T> net_;
  Mat<T> x_;
  std::vector<double> pre_out_;
  BlockTiming timing_;
  long blocks_ = 0;
  bool poisoned_ = false;
};

template <typename T = float>
Stream<T> stream_create(const ModelWeights<T>& w, const ArrayGeometry& g, double theta, const BeamParams& bp = {}) {
  return Stream<T>(std::make_shared<const CompiledModel<T>>(w), g, theta, bp);
}

// Runs a whole signal through a stream (zero-padded tail) and removes the
// stream delay, so the result lines up with separate_offline.
template <typename T>
std::vector<T> separate_streaming(Stream<T>& st, const MultichannelBuffer<double>& mixture) {
  const std::size_t L = mixture.samples(), D = std::size_t(st.delay_samples());
  const std::size_t blocks = (L + D + kBlockSize - 1) / kBlockSize;
  std::vector<std::vector<double>> blk(mixture.channels(), std::vector<double>(kBlockSize));
  std::vector<const double*> in(mixture.channels());
  std::vector<T> out(blocks * kBlockSize);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t c = 0; c < mixture.channels(); ++c) {
      for (int i = 0; i < kBlockSize; ++i) {
        std::size_t t = b * kBlockSize + i;
        blk[c][i] = t < L ? mixture[c][t] : 0.0;
      }
      in[c] = blk[c].data();
    }
    st.process_block(in.data(), out.data() + b * kBlockSize);
  }
  return std::vector<T>(out.begin() + long(D), out.begin() + long(D + L));
}

// ---------------------------------------------------------------- accounting

// Bytes of causal padding a block has to carry forward, counted as if each
// layer's padding were copied once per block (complex float32 = 8 bytes).
struct StateBytes {
  long strided_frames = 0, plain_frames = 0;
  double strided_bytes = 0, plain_bytes = 0;
  double reduction() const { return plain_bytes > 0 ? 1.0 - strided_bytes / plain_bytes : 0.0; }
};

// The plain reference is a single-rate dilated TCN with the same receptive
// field and hidden width: its layers together pad receptive_field - 1 frames.
inline StateBytes state_bytes(const ModelConfig& c) {
  StateBytes r;
  r.strided_frames = total_padding_frames(c);
  r.plain_frames = receptive_field_frames(c) - 1;
  r.strided_bytes = double(r.strided_frames) * c.H * 8.0;
  r.plain_bytes = double(r.plain_frames) * c.H * 8.0;
  return r;
}

struct LatencyBudget {
  double buffer_ms = 1000.0 * kBlockSize / kSampleRate;
  double processing_ms = 0;
  double lookahead_ms = 1.5;
  double end_to_end_ms() const { return buffer_ms + processing_ms + lookahead_ms; }
  bool realtime() const { return processing_ms < buffer_ms; }
};

struct StageStats {
  std::string name;
  double mean_ms = 0, p95_ms = 0;
};

struct BenchReport {
  LatencyBudget budget;
  std::vector<StageStats> stages;  // beamformers, nn, overhead, total
  long blocks = 0;
  StateBytes cache;
};

inline StageStats stage_stats(const std::string& name, std::vector<double> v) {
  StageStats s{name, 0, 0};
  if (v.empty()) return s;
  for (double x : v) s.mean_ms += x;
  s.mean_ms /= double(v.size());
  std::size_t k = std::min(v.size() - 1, std::size_t(std::ceil(0.95 * double(v.size()))) - 1);
  std::nth_element(v.begin(), v.begin() + long(k), v.end());
  s.p95_ms = v[k];
  return s;
}

// Times process_block on white noise for `seconds` of audio.
template <typename T = float>
BenchReport bench(const ModelWeights<T>& w, const ArrayGeometry& g, double seconds, uint64_t seed = 1,
                  const BeamParams& bp = {}) {
  using clk = std::chrono::steady_clock;
  auto st = stream_create(w, g, 0.0, bp);
  const long blocks = std::max<long>(1, long(std::ceil(seconds * kSampleRate / kBlockSize)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 0.05);
  MultichannelBuffer<double> blk(g.size(), kBlockSize);
  std::vector<const double*> in(g.size());
  std::vector<T> out(kBlockSize);
  std::vector<double> pre, nn, over, tot;
  // one warm-up block keeps first-touch allocation out of the numbers
  for (long b = -1; b < blocks; ++b) {
    for (int c = 0; c < g.size(); ++c) {
      for (auto& v : blk[c]) v = N(rng);
      in[c] = blk[c].data();
    }
    auto t0 = clk::now();
    st.process_block(in.data(), out.data());
    double total = std::chrono::duration<double, std::milli>(clk::now() - t0).count();
    if (b < 0) continue;
    const auto& tm = st.last_timing();
    pre.push_back(tm.prebeam_ms);
    nn.push_back(tm.nn_ms);
    over.push_back(std::max(0.0, total - tm.prebeam_ms - tm.nn_ms));
    tot.push_back(total);
  }
  BenchReport r;
  r.blocks = blocks;
  r.stages = {stage_stats("beamformers", pre), stage_stats("nn", nn), stage_stats("overhead", over),
              stage_stats("total", tot)};
  r.budget.processing_ms = r.stages.back().mean_ms;
  r.budget.lookahead_ms = lookahead_ms(w.config);
  r.cache = state_bytes(w.config);
  return r;
}

}  // namespace dirhear
