// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <numbers>
#include <random>

#include "dirhear/engine/stream.hpp"
#include "scenarios.hpp"

using namespace dirhear;

namespace {

template <typename T>
ModelWeights<T> random_model(const ModelConfig& c, uint64_t seed) {
  ModelWeights<double> w(c);
  init_weights(w, seed);
  std::mt19937_64 rng(seed + 7);
  std::normal_distribution<double> N(0.0, 0.1);
  for (std::size_t i = 0; i < w.specs.size(); ++i) {
    auto k = w.specs[i].kind;
    if (k == TensorKind::trelu || k == TensorKind::norm || k == TensorKind::complex_bias)
      for (int r = 0; r < w.tensors[i].rows(); ++r)
        for (int q = 0; q < w.tensors[i].cols(); ++q) w.tensors[i](r, q) += N(rng);
  }
  return w.template cast<T>();
}

MultichannelBuffer<double> random_mixture(std::mt19937_64& rng, const ArrayGeometry& g, std::size_t n) {
  std::uniform_real_distribution<double> U(-std::numbers::pi, std::numbers::pi);
  auto a = scen::plane_wave(g, U(rng), scen::lowpass_noise(rng, n, 0.2));
  auto b = scen::plane_wave(g, U(rng), scen::white(rng, n, 0.05));
  for (int c = 0; c < g.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) a[c][i] += b[c][i];
  return a;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// A network that reproduces the MVDR input row: the encoder copies the
// current 8 samples into the real parts of 8 latent channels, the mask is
// tanh(20) ~ 1, and the decoder writes them back at the same instants.
ModelWeights<float> mvdr_passthrough(const ModelConfig& c) {
  ModelWeights<float> w(c);
  const int Cin = c.in_channels();
  for (int i = 0; i < c.enc_stride; ++i) {
    w["enc.w"](i, (c.lookahead_samples() + i) * Cin + 1) = 1.0f;
    w["dec.w"](kern::decoder_offset(c.enc_kernel, c.enc_stride) + i, i) = 1.0f;
  }
  w["head.mask.b"].topRows(c.C).setConstant(20.0f);
  return w;
}

}  // namespace

TEST(FrameRing, WindowHoldsHistoryThenNewest) {
  std::mt19937_64 rng(1);
  FrameRing<double> ring(3, 7, 4);
  std::deque<Mat<double>> ref(7, Mat<double>::Zero(3, 1));
  for (int step = 0; step < 50; ++step) {
    int n = 1 + step % 4;
    Mat<double> x = Mat<double>::Random(3, n);
    ring.push(x);
    for (int i = 0; i < n; ++i) ref.push_back(x.col(i));
    while (int(ref.size()) > 7 + n) ref.pop_front();
    auto w = ring.window(n);
    ASSERT_EQ(w.cols(), 7 + n);
    for (int i = 0; i < 7 + n; ++i) EXPECT_EQ(Mat<double>(w.col(i)), ref[i]);
  }
}

TEST(Stream, MatchesOfflineFloat) {
  std::mt19937_64 rng(2);
  auto g = circular_array(6, 0.05);
  for (auto c : {ModelConfig::toy(), ModelConfig::hybridbeam()}) {
    auto w = random_model<float>(c, 3);
    auto mix = random_mixture(rng, g, 16000 + 77);
    auto off = separate_offline(w, g, 0.4, BeamParams{}, mix);
    auto st = stream_create(w, g, 0.4);
    auto on = separate_streaming(st, mix);
    double peak = 0;
    for (float v : off) peak = std::max(peak, double(std::abs(v)));
    EXPECT_GT(peak, 1e-3);
    EXPECT_LT(max_abs_diff(off, on), 1e-4) << "N=" << c.N;
  }
}

TEST(Stream, MatchesOfflineDouble) {
  std::mt19937_64 rng(4);
  auto g = circular_array(6, 0.05);
  ModelConfig c = ModelConfig::toy();
  c.N = 3;
  auto w = random_model<double>(c, 5);
  auto mix = random_mixture(rng, g, 12000);
  auto off = separate_offline(w, g, -1.0, BeamParams{}, mix);
  auto st = stream_create(w, g, -1.0);
  EXPECT_LT(max_abs_diff(off, separate_streaming(st, mix)), 1e-9);
}

TEST(Stream, AblationFeedsOnlyAlignedRows) {
  std::mt19937_64 rng(6);
  auto g = circular_array(6, 0.05);
  ModelConfig c = ModelConfig::toy();
  c.use_beamformers = false;
  auto w = random_model<float>(c, 7);
  EXPECT_EQ(w["enc.w"].cols(), 6 * 32);
  auto mix = random_mixture(rng, g, 8000);
  auto st = stream_create(w, g, 2.0);
  EXPECT_LT(max_abs_diff(separate_offline(w, g, 2.0, BeamParams{}, mix), separate_streaming(st, mix)), 1e-4);
}

TEST(Stream, SilenceInSilenceOut) {
  auto g = circular_array(6, 0.05);
  auto st = stream_create(random_model<float>(ModelConfig::toy(), 8), g, 0.0);
  MultichannelBuffer<double> blk(6, kBlockSize);
  for (int b = 0; b < 40; ++b)
    for (float v : st.process_block(blk)) ASSERT_EQ(v, 0.0f);
}

TEST(Stream, BlockContractAndPoison) {
  auto g = circular_array(6, 0.05);
  auto st = stream_create(random_model<float>(ModelConfig::toy(), 9), g, 0.0);
  try {
    st.process_block(MultichannelBuffer<double>(6, 100));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::contract);
  }
  EXPECT_THROW(st.process_block(MultichannelBuffer<double>(5, kBlockSize)), Error);
  MultichannelBuffer<double> bad(6, kBlockSize);
  bad[3][17] = std::nan("");
  try {
    st.process_block(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::poisoned);
  }
  // stays poisoned until reset
  EXPECT_THROW(st.process_block(MultichannelBuffer<double>(6, kBlockSize)), Error);
  st.reset();
  EXPECT_NO_THROW(st.process_block(MultichannelBuffer<double>(6, kBlockSize)));
}

TEST(Stream, DeterministicAcrossInstancesAndReset) {
  std::mt19937_64 rng(10);
  auto g = circular_array(6, 0.05);
  auto w = random_model<float>(ModelConfig::toy(), 11);
  auto mix = random_mixture(rng, g, 6000);
  auto a = stream_create(w, g, 1.0), b = stream_create(w, g, 1.0);
  auto ya = separate_streaming(a, mix);
  EXPECT_EQ(ya, separate_streaming(b, mix));
  a.reset();
  EXPECT_EQ(ya, separate_streaming(a, mix));
}

TEST(Stream, StateSizeFixedAndMatchesPaddingTally) {
  std::mt19937_64 rng(12);
  auto g = circular_array(6, 0.05);
  for (auto c : {ModelConfig::hybridbeam(), ModelConfig::hybridbeam_plus()}) {
    ModelWeights<float> w(c);
    init_weights(w, 13);
    auto st = stream_create(w, g, 0.0);
    EXPECT_EQ(st.net().padding_frames(), total_padding_frames(c));
    // sum over layers of (kernel - 1) * dilation, walked directly
    long walk = 0;
    for (int s = 0; s < c.N; ++s)
      for (int m = 0, d = 1; m < c.M; ++m, d *= c.k) walk += (c.dilated_kernel() - 1) * d;
    EXPECT_EQ(st.net().padding_frames(), walk);
    std::size_t before = st.state_allocated_bytes();
    MultichannelBuffer<double> blk(6, kBlockSize);
    std::normal_distribution<double> N(0.0, 0.1);
    for (int b = 0; b < 300; ++b) {
      for (auto& ch : blk.data)
        for (auto& v : ch) v = N(rng);
      st.process_block(blk);
    }
    EXPECT_EQ(st.state_allocated_bytes(), before);
  }
}

TEST(Stream, ThetaSwitchChangesPassedSource) {
  std::mt19937_64 rng(14);
  auto g = circular_array(6, 0.05);
  const std::size_t n = 3 * kSampleRate;
  auto sa = scen::highpassed_white(rng, n, 0.1), sb = scen::highpassed_white(rng, n, 0.1);
  const double ta = 0.0, tb = std::numbers::pi / 2;
  auto mix = scen::plane_wave(g, ta, sa);
  auto pb = scen::plane_wave(g, tb, sb);
  for (int c = 0; c < 6; ++c)
    for (std::size_t i = 0; i < n; ++i) mix[c][i] += pb[c][i];
  auto st = stream_create(mvdr_passthrough(ModelConfig::toy()), g, ta);
  const std::size_t D = std::size_t(st.delay_samples());
  std::vector<double> out;
  MultichannelBuffer<double> blk(6, kBlockSize);
  for (std::size_t b = 0; b * kBlockSize + kBlockSize <= n; ++b) {
    if (b == n / 2 / kBlockSize) st.set_theta(tb);
    for (int c = 0; c < 6; ++c) std::copy_n(mix[c].begin() + long(b * kBlockSize), kBlockSize, blk[c].begin());
    for (float v : st.process_block(blk)) out.push_back(v);
  }
  std::vector<double> aligned(out.begin() + long(D), out.end());
  sa.resize(aligned.size());
  sb.resize(aligned.size());
  const std::size_t s = kSampleRate;
  double a1 = scen::si_sdr_db(aligned, sa, s / 2, 3 * s / 2 - 200), b1 = scen::si_sdr_db(aligned, sb, s / 2, 3 * s / 2 - 200);
  double a2 = scen::si_sdr_db(aligned, sa, 2 * s, aligned.size()), b2 = scen::si_sdr_db(aligned, sb, 2 * s, aligned.size());
  EXPECT_GT(a1, 10.0);
  EXPECT_LT(b1, -10.0);
  EXPECT_GT(b2, 10.0);
  EXPECT_LT(a2, -10.0);
}

TEST(StateBytes, StridedVersusPlain) {
  for (auto c : {ModelConfig::hybridbeam(), ModelConfig::hybridbeam_plus()}) {
    auto r = state_bytes(c);
    // layer-walk oracle for both designs
    long strided = 0;
    for (int s = 0; s < c.N; ++s)
      for (int m = 0, d = 1; m < c.M; ++m, d *= c.k) strided += (c.dilated_kernel() - 1) * d;
    EXPECT_DOUBLE_EQ(r.strided_bytes, double(strided) * c.H * 8);
    EXPECT_DOUBLE_EQ(r.plain_bytes, double(receptive_field_frames(c) - 1) * c.H * 8);
    EXPECT_GT(r.reduction(), 0.5);
  }
  ModelConfig one = ModelConfig::hybridbeam();
  one.N = 1;
  EXPECT_DOUBLE_EQ(state_bytes(one).reduction(), 0.0);
}

TEST(Bench, BudgetArithmeticAndBlockCount) {
  ModelWeights<float> w(ModelConfig::toy());
  init_weights(w, 15);
  auto r = bench(w, circular_array(6, 0.05), 1.0);
  EXPECT_GE(r.blocks, 125);
  EXPECT_DOUBLE_EQ(r.budget.buffer_ms, 8.0);
  EXPECT_DOUBLE_EQ(r.budget.lookahead_ms, 1.5);
  EXPECT_DOUBLE_EQ(r.budget.end_to_end_ms(), 8.0 + r.budget.processing_ms + 1.5);
  ASSERT_EQ(r.stages.size(), 4u);
  EXPECT_EQ(r.stages[0].name, "beamformers");
  for (const auto& s : r.stages) EXPECT_LE(s.mean_ms, s.p95_ms * 1.5 + 1e-9);
}
