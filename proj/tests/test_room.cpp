// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "dirhear/room/dataset.hpp"
#include "dirhear/room/rir.hpp"
#include "dirhear/room/scene.hpp"
#include "dirhear/room/speech.hpp"
#include "scenarios.hpp"

using namespace dirhear;

namespace {

// Distance that puts the direct path exactly k samples away.
double integer_distance(int k) { return 343.0 / kSampleRate * k; }

RoomSpec shoebox(double alpha, int order = -1) {
  RoomSpec r;
  r.dims = {4.0, 5.0, 3.0};
  r.absorption = alpha;
  r.max_order = order;
  return r;
}

Vec3 random_point(std::mt19937_64& rng, const Vec3& d, double margin) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  return {margin + (d.x - 2 * margin) * U(rng), margin + (d.y - 2 * margin) * U(rng),
          margin + (d.z - 2 * margin) * U(rng)};
}

std::size_t argmax_abs(const std::vector<double>& h) {
  return std::size_t(std::max_element(h.begin(), h.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) -
                     h.begin());
}

}  // namespace

TEST(Rir, DirectPathOnlyIsSingleTap) {
  RoomSpec r = shoebox(0.3, 0);
  Vec3 mic{1.0, 1.0, 1.5};
  Vec3 src = mic + Vec3{integer_distance(100), 0.0, 0.0};
  auto h = image_source_rir(r, src, mic);
  EXPECT_NEAR(h[100], 1.0 / integer_distance(100), 1e-12);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i == 100) continue;
    EXPECT_NEAR(h[i], 0.0, 1e-12) << i;
  }
}

TEST(Rir, DoublingDistanceHalvesDirectAmplitude) {
  RoomSpec r = shoebox(0.3, 0);
  Vec3 mic{1.0, 0.5, 1.5};
  auto h1 = image_source_rir(r, mic + Vec3{0, integer_distance(100), 0}, mic);
  auto h2 = image_source_rir(r, mic + Vec3{0, integer_distance(200), 0}, mic);
  EXPECT_NEAR(h2[200] / h1[100], 0.5, 1e-12);
}

TEST(Rir, FirstOrderImagesMatchMirrorGeometry) {
  RoomSpec r = shoebox(0.3, 1);
  Vec3 src{1.1, 3.2, 1.7}, mic{2.9, 1.4, 1.2};
  std::vector<double> lib;
  for_each_image(r, src, mic, 0.0, [&](const Vec3& p, int order) {
    if (order == 1) lib.push_back((p - mic).norm());
  });
  ASSERT_EQ(lib.size(), 6u);
  std::vector<double> ref;
  for (const auto& p : scen::first_order_mirrors(r.dims, src)) ref.push_back((p - mic).norm());
  std::sort(lib.begin(), lib.end());
  std::sort(ref.begin(), ref.end());
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(lib[i], ref[i], 1e-12);

  // Each mirror shows up as a tap within one sample of its geometric delay.
  auto h = image_source_rir(r, src, mic);
  for (double d : ref) {
    double tau = d / 343.0 * kSampleRate;
    long k = std::lround(tau);
    double best = 0;
    long at = -1;
    for (long j = k - 2; j <= k + 2; ++j)
      if (j >= 0 && j < long(h.size()) && std::abs(h[j]) > best) best = std::abs(h[j]), at = j;
    EXPECT_LE(std::abs(double(at) - tau), 1.0);
  }
}

TEST(Rir, SabineExample) {
  // 3 x 4 x 5: V = 60, S = 94
  auto a = absorption_for_rt60({3.0, 4.0, 5.0}, 0.5);
  EXPECT_NEAR(a.alpha, 0.161 * 60.0 / (94.0 * 0.5), 1e-12);
  EXPECT_NEAR(a.alpha, 0.2055, 5e-4);
  EXPECT_FALSE(a.near_anechoic);
}

TEST(Rir, LongRt60GivesVanishingAbsorption) {
  EXPECT_LE(absorption_for_rt60({3.0, 4.0, 5.0}, 1e9).alpha, 1e-6);
}

TEST(Rir, ShortRt60ClampsAndFlags) {
  auto a = absorption_for_rt60({3.0, 4.0, 5.0}, 0.01);
  EXPECT_EQ(a.alpha, 1.0);
  EXPECT_TRUE(a.near_anechoic);
  EXPECT_THROW(absorption_for_rt60({3.0, 4.0, 5.0}, 0.0), Error);
}

TEST(Rir, CoincidentSourceAndMicRejected) {
  RoomSpec r = shoebox(0.3, 2);
  EXPECT_THROW(image_source_rir(r, {1, 1, 1}, {1, 1, 1}), Error);
  EXPECT_THROW(image_source_rir(r, {5, 1, 1}, {1, 1, 1}), Error);
}

TEST(Rir, EnergyDecreasesWithAbsorption) {
  Vec3 src{1.1, 3.2, 1.7}, mic{2.9, 1.4, 1.2};
  double prev = 1e300;
  for (double a : {0.1, 0.2, 0.4, 0.6, 0.9}) {
    RoomSpec r = shoebox(a, 8);
    auto h = image_source_rir(r, src, mic);
    double e = 0;
    for (double v : h) e += v * v;
    EXPECT_LT(e, prev) << a;
    prev = e;
  }
}

TEST(Rir, Reciprocity) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    RoomSpec r = shoebox(0.35);
    Vec3 a = random_point(rng, r.dims, 0.2), b = random_point(rng, r.dims, 0.2);
    auto hab = image_source_rir(r, a, b), hba = image_source_rir(r, b, a);
    ASSERT_EQ(hab.size(), hba.size());
    double err = 0;
    for (std::size_t i = 0; i < hab.size(); ++i) err = std::max(err, std::abs(hab[i] - hba[i]));
    EXPECT_LT(err, 1e-10);
  }
}

TEST(Rir, DirectPathDelayWithinHalfSample) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    RoomSpec r = shoebox(0.3, 0);
    Vec3 a = random_point(rng, r.dims, 0.1), b = random_point(rng, r.dims, 0.1);
    auto h = image_source_rir(r, a, b);
    double tau = (a - b).norm() / 343.0 * kSampleRate;
    EXPECT_LE(std::abs(double(argmax_abs(h)) - tau), 0.5 + 1e-9);
  }
}

TEST(Rir, CalibratedRt60RoundTrip) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int t = 0; t < 6; ++t) {
    Vec3 d{3 + 5 * U(rng), 3 + 5 * U(rng), 2.5 + U(rng)};
    double rt = 0.2 + 0.3 * U(rng);
    auto a = calibrated_absorption(d, rt);
    ASSERT_FALSE(a.near_anechoic);
    RoomSpec r;
    r.dims = d;
    r.absorption = a.alpha;
    auto h = image_source_rir(r, random_point(rng, d, 0.5), random_point(rng, d, 0.5));
    double est = scen::schroeder_rt60_oracle(h);
    EXPECT_NEAR(est / rt, 1.0, 0.3) << "requested " << rt << " got " << est;
    EXPECT_NEAR(schroeder_rt60(h), est, 1e-6 + 1e-3 * est);
  }
}

TEST(Speech, Deterministic) {
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(synth_speech(a, 2.0), synth_speech(b, 2.0));
}

TEST(Speech, SpectralCentroidInSpeechBand) {
  std::mt19937_64 rng(6);
  auto x = synth_speech(rng, 8.0);
  x.resize(next_pow2(x.size()), 0.0);
  auto X = fft(x);
  double num = 0, den = 0;
  for (std::size_t k = 1; k < X.size() / 2; ++k) {
    double f = double(k) * kSampleRate / double(X.size());
    num += f * std::norm(X[k]);
    den += std::norm(X[k]);
  }
  double centroid = num / den;
  EXPECT_GT(centroid, 100.0);
  EXPECT_LT(centroid, 4000.0);
}

TEST(Speech, SilentGapInEveryFourSeconds) {
  std::mt19937_64 rng(7);
  auto x = synth_speech(rng, 12.0);
  const std::size_t win = 4 * kSampleRate, gap = kSampleRate / 10;
  for (std::size_t s = 0; s + win <= x.size(); s += kSampleRate / 2) {
    std::size_t run = 0, best = 0;
    for (std::size_t i = s; i < s + win; ++i) {
      run = x[i] == 0.0 ? run + 1 : 0;
      best = std::max(best, run);
    }
    EXPECT_GE(best, gap) << "window at " << s;
  }
}

namespace {

SceneConfig fast_cfg() {
  SceneConfig c;
  c.rt60_min = 0.15;
  c.rt60_max = 0.25;
  c.clip_seconds = 2.0;
  c.min_overlap = 0.5;
  return c;
}

bool same_scene(const SceneSpec& a, const SceneSpec& b) {
  if (a.sources.size() != b.sources.size()) return false;
  for (std::size_t i = 0; i < a.sources.size(); ++i) {
    const auto &p = a.sources[i], &q = b.sources[i];
    if ((p.position - q.position).norm() != 0 || p.signal != q.signal || p.gain_db != q.gain_db) return false;
  }
  return (a.room.dims - b.room.dims).norm() == 0 && a.room.absorption == b.room.absorption &&
         a.snr_db == b.snr_db && a.input_theta == b.input_theta && a.target_index == b.target_index;
}

}  // namespace

TEST(Scene, FixedSeedIsReproducible) {
  auto cfg = fast_cfg();
  std::mt19937_64 a(21), b(21);
  EXPECT_TRUE(same_scene(sample_scene(a, cfg), sample_scene(b, cfg)));
}

TEST(Scene, SourceCountHistogram) {
  SceneConfig cfg;
  cfg.geometry_only = true;
  std::mt19937_64 rng(22);
  std::array<int, 4> hist{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++hist[sample_scene(rng, cfg).sources.size() - 1];
  const double want[4] = {0.1, 0.4, 0.4, 0.1};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(hist[k] / double(n), want[k], 0.02) << k + 1 << " sources";
}

TEST(Scene, DrawsSatisfyInvariants) {
  SceneConfig cfg;
  cfg.geometry_only = true;
  std::mt19937_64 rng(23);
  for (int i = 0; i < 500; ++i) {
    auto sc = sample_scene(rng, cfg);
    EXPECT_NO_THROW(sc.validate(cfg));
    EXPECT_LT(std::abs(wrap_angle(sc.input_theta - sc.true_theta)), deg2rad(5.0));
    EXPECT_GE(sc.snr_db, 5.0);
    EXPECT_LE(sc.snr_db, 25.0);
    for (const auto& s : sc.sources) {
      EXPECT_GE(s.gain_db, -5.0);
      EXPECT_LE(s.gain_db, 0.0);
    }
  }
}

TEST(Scene, UnsatisfiableConstraintsRaise) {
  SceneConfig cfg;
  cfg.geometry_only = true;
  cfg.room_min = cfg.room_max = {1.2, 1.2, 2.5};
  std::mt19937_64 rng(24);
  EXPECT_THROW(sample_scene(rng, cfg), Error);
}

namespace {

// Hand-built scene in a 5 x 6 x 3 room with explicit sources.
SceneSpec manual_scene(std::vector<SceneSource> srcs, bool reverberant, bool noise) {
  SceneSpec sc;
  sc.room.dims = {5.0, 6.0, 3.0};
  sc.room.absorption = 0.35;
  sc.room.max_order = reverberant ? -1 : 0;
  sc.array = circular_array(6, 0.05);
  sc.array_center = {2.5, 3.0, 1.4};
  sc.sources = std::move(srcs);
  sc.noise_enabled = noise;
  sc.snr_db = 12.0;
  sc.target_index = 0;
  sc.true_theta = sc.input_theta = azimuth_from(sc.array_center, sc.sources[0].position);
  return sc;
}

SceneSource speech_source(uint64_t seed, const Vec3& p, std::size_t len, std::size_t from, std::size_t to,
                          double gain_db) {
  std::mt19937_64 rng(seed);
  SceneSource s;
  s.position = p;
  s.signal.assign(len, 0.0);
  auto u = synth_speech(rng, double(to - from) / kSampleRate);
  for (std::size_t i = 0; i < u.size() && from + i < to; ++i) s.signal[from + i] = u[i];
  s.start = from;
  s.end = to;
  s.gain_db = gain_db;
  return s;
}

}  // namespace

TEST(Render, AnechoicSingleSourceEqualsTarget) {
  const std::size_t L = 2 * kSampleRate;
  auto sc = manual_scene({speech_source(1, {4.0, 4.5, 1.5}, L, 0, L, -2.0)}, false, false);
  std::mt19937_64 rng(1);
  auto clip = render_clip(sc, rng);
  double err = 0;
  for (std::size_t t = 0; t < L; ++t) err = std::max(err, std::abs(clip.mixture[0][t] - clip.target_dry[t]));
  EXPECT_LT(err, 1e-6);
  EXPECT_EQ(clip.mixture.samples(), clip.target_dry.size());
}

TEST(Render, NoiseHitsRequestedSnr) {
  const std::size_t L = 2 * kSampleRate;
  auto sc = manual_scene({speech_source(2, {4.0, 4.5, 1.5}, L, 0, L, 0.0),
                          speech_source(3, {1.0, 1.5, 1.3}, L, 0, L, -3.0)},
                         true, true);
  for (double snr : {5.0, 12.0, 25.0}) {
    sc.snr_db = snr;
    std::mt19937_64 rng(2);
    ClipParts parts;
    auto clip = render_clip(sc, rng, &parts);
    double ps = 0, pn = 0;
    for (std::size_t m = 0; m < clip.mixture.channels(); ++m)
      for (std::size_t t = 0; t < L; ++t) {
        double n = clip.mixture[m][t] - parts.speech[m][t];
        ps += parts.speech[m][t] * parts.speech[m][t];
        pn += n * n;
      }
    EXPECT_NEAR(10.0 * std::log10(ps / pn), snr, 0.5);
  }
}

TEST(Render, DisjointSourcesStayInTheirIntervals) {
  const std::size_t L = 3 * kSampleRate, s = kSampleRate;
  auto a = speech_source(4, {4.0, 4.5, 1.5}, L, 0, s, 0.0);
  auto b = speech_source(5, {1.0, 1.5, 1.3}, L, 2 * s, 3 * s, 0.0);
  auto both = manual_scene({a, b}, false, false);
  auto only_a = manual_scene({a}, false, false);
  auto only_b = manual_scene({b}, false, false);
  std::mt19937_64 r1(1), r2(1), r3(1);
  auto m = render_clip(both, r1).mixture, ma = render_clip(only_a, r2).mixture, mb = render_clip(only_b, r3).mixture;
  const std::size_t guard = kSampleRate / 20;  // propagation plus sinc tails
  double ea = 0, eb = 0, gap = 0;
  for (std::size_t t = 0; t < L; ++t) {
    if (t < s) ea = std::max(ea, std::abs(m[0][t] - ma[0][t]));
    if (t >= 2 * s + guard) eb = std::max(eb, std::abs(m[0][t] - mb[0][t]));
    if (t >= s + guard && t < 2 * s) gap = std::max(gap, std::abs(m[0][t]));
  }
  EXPECT_LT(ea, 1e-9);
  EXPECT_LT(eb, 1e-9);
  EXPECT_LT(gap, 1e-9);
}

TEST(Render, SourceOrderDoesNotMatter) {
  const std::size_t L = 2 * kSampleRate;
  auto a = speech_source(6, {4.0, 4.5, 1.5}, L, 0, L, -1.0);
  auto b = speech_source(7, {1.0, 1.5, 1.3}, L, 0, L, -4.0);
  auto c = speech_source(8, {1.2, 5.0, 1.6}, L, 0, L, -2.5);
  auto s1 = manual_scene({a, b, c}, true, true);
  auto s2 = manual_scene({c, a, b}, true, true);
  s2.target_index = 1;
  std::mt19937_64 r1(9), r2(9);
  auto m1 = render_clip(s1, r1), m2 = render_clip(s2, r2);
  double err = 0;
  for (std::size_t ch = 0; ch < m1.mixture.channels(); ++ch)
    for (std::size_t t = 0; t < L; ++t) err = std::max(err, std::abs(m1.mixture[ch][t] - m2.mixture[ch][t]));
  EXPECT_LT(err, 1e-7);
  EXPECT_EQ(m1.target_dry, m2.target_dry);
}

TEST(Render, DiffuseNoiseCoherenceFollowsBessel) {
  // Horizontal isotropic field: coherence between mics d apart is J0(2 pi f d / c).
  ArrayGeometry g;
  g.positions = {{0, 0, 0}, {0.1, 0, 0}};
  std::mt19937_64 rng(31);
  auto n = diffuse_noise(rng, g, 1 << 18, 36);
  StftSpec spec{512, 256, WindowKind::sqrt_hann};
  auto X = stft(n, spec);
  for (int k : {16, 32, 48, 64}) {
    std::complex<double> cross = 0;
    double p0 = 0, p1 = 0;
    for (std::size_t f = 0; f < X[0].size(); ++f) {
      cross += X[0][f].bins[k] * std::conj(X[1][f].bins[k]);
      p0 += std::norm(X[0][f].bins[k]);
      p1 += std::norm(X[1][f].bins[k]);
    }
    double coh = cross.real() / std::sqrt(p0 * p1);
    double f = double(k) * kSampleRate / 512.0;
    EXPECT_NEAR(coh, std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi * f * 0.1 / 343.0), 0.1) << f << " Hz";
  }
}

TEST(Dataset, SameSeedIsByteIdentical) {
  auto cfg = fast_cfg();
  cfg.count_weights = {0.5, 0.5, 0.0, 0.0};
  auto root = std::filesystem::temp_directory_path() / "dirhear_test_dataset";
  std::filesystem::remove_all(root);
  auto m1 = write_dataset((root / "a").string(), cfg, 3, 77, "abc", 1);
  auto m2 = write_dataset((root / "b").string(), cfg, 3, 77, "abc", 2);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  };
  int files = 0;
  for (auto& e : std::filesystem::directory_iterator(root / "a")) {
    EXPECT_EQ(slurp(e.path()), slurp(root / "b" / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 3 * 3 + 1);
  auto idx = read_manifest((root / "a").string());
  EXPECT_EQ(idx.config_hash, "abc");
  ASSERT_EQ(idx.clips.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(idx.clips[i].seed, m1[i].seed);
    EXPECT_EQ(idx.clips[i].theta_input, m1[i].theta_input);
    auto meta = parse_meta(slurp(root / "a" / (clip_stem(i) + ".meta")));
    EXPECT_EQ(meta.source_count, m1[i].source_count);
    EXPECT_EQ(meta.rt60, m1[i].rt60);
    auto clip = load_clip(idx, idx.clips[i]);
    EXPECT_EQ(clip.mixture.channels(), 6u);
    EXPECT_EQ(clip.groundtruth.size(), clip.mixture.samples());
  }
  std::filesystem::remove_all(root);
}
