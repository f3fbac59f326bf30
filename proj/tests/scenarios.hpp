// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Simulation helpers shared by unit tests and the acceptance binary. These
// are independent of the library's room simulator: plane waves are delayed
// exactly in the frequency domain of one long FFT.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "dirhear/beamform/beamformers.hpp"
#include "dirhear/signal/fft.hpp"
#include "dirhear/signal/stft.hpp"

namespace scen {

using namespace dirhear;

// Band-limited delay of x by `delay` samples (may be fractional/negative),
// computed on a zero-padded circular buffer long enough to avoid wrap.
inline std::vector<double> exact_delay(const std::vector<double>& x, double delay) {
  std::size_t n = next_pow2(x.size() + 256);
  std::vector<std::complex<double>> X(n);
  for (std::size_t i = 0; i < x.size(); ++i) X[i] = x[i];
  Fft<double> f(n);
  f.forward(X.data());
  for (std::size_t k = 0; k < n; ++k) {
    double kk = k <= n / 2 ? double(k) : double(k) - double(n);
    double ph = -2.0 * std::numbers::pi * kk * delay / double(n);
    if (k == n / 2) ph = 0.0, X[k] *= std::cos(std::numbers::pi * delay);  // keep Nyquist real
    else X[k] *= std::complex<double>(std::cos(ph), std::sin(ph));
  }
  f.inverse(X.data());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = X[i].real();
  return y;
}

// Far-field plane wave from theta, time-referenced to mic 0.
inline MultichannelBuffer<double> plane_wave(const ArrayGeometry& g, double theta, const std::vector<double>& s) {
  MultichannelBuffer<double> y(g.size(), s.size());
  double t0 = toa(g, theta, 0);
  for (int i = 0; i < g.size(); ++i) {
    double d = (toa(g, theta, i) - t0) * kSampleRate;
    y[i] = exact_delay(s, d);
  }
  return y;
}

inline std::vector<double> white(std::mt19937_64& rng, std::size_t n, double sigma = 0.1) {
  std::normal_distribution<double> nd(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

// White noise with everything below `lo_hz` removed. A plane wave at DC
// reaches all mics in phase, so no spatial filter can reject it.
inline std::vector<double> highpassed_white(std::mt19937_64& rng, std::size_t n, double sigma, double lo_hz = 100.0) {
  auto x = white(rng, n, sigma);
  std::size_t N = next_pow2(n);
  std::vector<std::complex<double>> X(N);
  for (std::size_t i = 0; i < n; ++i) X[i] = x[i];
  Fft<double> f(N);
  f.forward(X.data());
  for (std::size_t k = 0; k < N; ++k) {
    double hz = double(std::min(k, N - k)) * kSampleRate / double(N);
    if (hz < lo_hz) X[k] = 0.0;
  }
  f.inverse(X.data());
  for (std::size_t i = 0; i < n; ++i) x[i] = X[i].real();
  return x;
}

// Speech-band source: white noise shaped by a one-pole low-pass.
inline std::vector<double> lowpass_noise(std::mt19937_64& rng, std::size_t n, double sigma = 0.1) {
  auto x = white(rng, n, sigma);
  double y = 0;
  for (auto& v : x) {
    y = 0.7 * y + 0.3 * v;
    v = y;
  }
  return x;
}

inline double si_sdr_db(const std::vector<double>& est, const std::vector<double>& ref, std::size_t from = 0,
                        std::size_t to = 0) {
  if (to == 0) to = ref.size();
  double er = 0, rr = 0;
  for (std::size_t i = from; i < to; ++i) er += est[i] * ref[i], rr += ref[i] * ref[i];
  double a = er / rr, t = 0, e = 0;
  for (std::size_t i = from; i < to; ++i) {
    double ti = a * ref[i];
    t += ti * ti;
    e += (est[i] - ti) * (est[i] - ti);
  }
  return 10.0 * std::log10(t / e);
}

struct MvdrAttenuation {
  double attenuation_db = 0;      // interferer power at mic 0 / after MVDR
  double max_distortion = 0;      // max |w^H d - 1| over bins and frames
};

// Target and one interferer as broadband (100 Hz - 8 kHz) plane waves, `sep` radians apart,
// interferer `inr_db` above the target. MVDR runs on the mixture; the
// per-frame weights are also applied to the interferer-only channels.
inline MvdrAttenuation mvdr_interferer_attenuation(const ArrayGeometry& g, double theta, double sep, double inr_db,
                                                   double seconds, uint64_t seed, const BeamParams& p = {}) {
  std::mt19937_64 rng(seed);
  const std::size_t L = std::size_t(seconds * kSampleRate);
  auto tgt = plane_wave(g, theta, highpassed_white(rng, L, 0.05));
  auto itf = plane_wave(g, theta + sep, highpassed_white(rng, L, 0.05 * std::pow(10.0, inr_db / 20.0)));
  StftSpec spec;
  std::vector<StftAnalyzer> am, ai;
  for (int i = 0; i < g.size(); ++i) am.emplace_back(spec), ai.emplace_back(spec);
  auto st = make_mvdr_state(g.size(), spec.fft_size, p);
  auto steer = steering_table(g, theta, spec.fft_size);
  const int K = spec.fft_size / 2 + 1;
  std::vector<Spectrum> ym(g.size(), Spectrum{std::vector<cd>(K), 0, spec.fft_size}), yi = ym;
  std::vector<double> blk(kBlockSize);
  double p_ref = 0, p_out = 0;
  MvdrAttenuation r;
  const std::size_t blocks = L / kBlockSize;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (int i = 0; i < g.size(); ++i) {
      for (int t = 0; t < kBlockSize; ++t) blk[t] = tgt[i][b * kBlockSize + t] + itf[i][b * kBlockSize + t];
      am[i].push(blk.data(), ym[i].bins.data());
      ai[i].push(itf[i].data() + b * kBlockSize, yi[i].bins.data());
    }
    if (st.frames_seen == 0) {
      mvdr_update(st, ym);
      continue;
    }
    auto w = mvdr_weights(st, steer);
    mvdr_update(st, ym);
    for (int k = 0; k < K; ++k) r.max_distortion = std::max(r.max_distortion, std::abs(dot_h(w[k], steer[k]) - 1.0));
    if (b * kBlockSize < std::size_t(kSampleRate)) continue;  // 1 s convergence
    for (int k = 0; k < K; ++k) {
      cd o = 0;
      for (int i = 0; i < g.size(); ++i) o += std::conj(w[k][i]) * yi[i].bins[k];
      p_out += std::norm(o);
      p_ref += std::norm(yi[0].bins[k]);
    }
  }
  r.attenuation_db = 10.0 * std::log10(p_ref / p_out);
  return r;
}

// Diffuse-noise gain w^H Gamma w of superdirective vs delay-and-sum per bin.
struct DiffuseGainCheck {
  int bins = 0;
  int violations = 0;
  double worst_margin = 0;  // max over bins of (sd - ds) / ds
  double max_distortion = 0;
};

inline DiffuseGainCheck superdirective_vs_ds(const ArrayGeometry& g, double theta, int fft_size, double eps) {
  DiffuseGainCheck r;
  auto sd = superdirective_design(g, theta, fft_size, eps);
  r.worst_margin = -1e300;
  for (int k = 0; k <= fft_size / 2; ++k) {
    double f = bin_frequency(k, fft_size);
    auto d = steering_vector(g, theta, f).d;
    CMat gam = diffuse_coherence(g, f);
    CVec ds(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) ds[i] = d[i] / double(d.size());
    double gs = quad_form(gam, sd.w[k]), gd = quad_form(gam, ds);
    r.worst_margin = std::max(r.worst_margin, (gs - gd) / gd);
    if (gs > gd * (1 + 1e-12)) ++r.violations;
    r.max_distortion = std::max(r.max_distortion, std::abs(dot_h(sd.w[k], d) - 1.0));
    ++r.bins;
  }
  return r;
}

// Decay time from Schroeder's backward-integrated energy curve: least-squares
// line through the -5..-35 dB portion, extrapolated to -60 dB.
inline double schroeder_rt60_oracle(const std::vector<double>& h) {
  const std::size_t n = h.size();
  std::vector<long double> tail(n + 1, 0.0L);
  for (std::size_t i = n; i > 0; --i) tail[i - 1] = tail[i] + (long double)h[i - 1] * h[i - 1];
  std::vector<double> t, y;
  for (std::size_t i = 0; i < n; ++i) {
    double db = 10.0 * std::log10(double(tail[i] / tail[0]));
    if (db <= -5.0 && db >= -35.0) t.push_back(double(i) / kSampleRate), y.push_back(db);
    if (db < -35.0) break;
  }
  if (t.size() < 2) return 0.0;
  double mt = 0, my = 0;
  for (std::size_t i = 0; i < t.size(); ++i) mt += t[i], my += y[i];
  mt /= double(t.size());
  my /= double(t.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < t.size(); ++i) num += (t[i] - mt) * (y[i] - my), den += (t[i] - mt) * (t[i] - mt);
  return -60.0 / (num / den);
}

// First-order mirror images of s in a shoebox [0,L]^3: one reflection across
// each of the six walls.
inline std::vector<Vec3> first_order_mirrors(const Vec3& L, const Vec3& s) {
  return {{-s.x, s.y, s.z}, {2 * L.x - s.x, s.y, s.z}, {s.x, -s.y, s.z},
          {s.x, 2 * L.y - s.y, s.z}, {s.x, s.y, -s.z}, {s.x, s.y, 2 * L.z - s.z}};
}

}  // namespace scen
