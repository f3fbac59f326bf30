// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Superdirective, online MVDR and nonlinear (delay-and-sum + power-ratio
// postfilter) beamformers on one STFT frame. All math is double precision.
// Superdirective and MVDR weights act on the raw (unaligned) spectra with
// steering d(f, theta); the nonlinear beamformer works on aligned spectra.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "dirhear/beamform/linalg.hpp"
#include "dirhear/geometry/array_geometry.hpp"
#include "dirhear/signal/buffer.hpp"

namespace dirhear {

struct BeamParams {
  double lambda = 0.99;         // MVDR forgetting factor
  double delta_rel = 1e-2;      // MVDR loading relative to trace(R)/c
  double delta_floor = 1e-10;   // absolute loading floor
  double sd_epsilon = 1e-2;     // superdirective loading
  double mask_floor = 0.1;
  double mask_eps = 1e-12;

  void validate() const {
    require(lambda > 0 && lambda <= 1, Errc::config, "mvdr lambda must be in (0, 1]");
    require(delta_rel >= 0 && delta_floor > 0, Errc::config, "mvdr loading must be positive");
    require(sd_epsilon > 0, Errc::config, "superdirective epsilon must be > 0");
    require(mask_floor >= 0 && mask_floor <= 1, Errc::config, "mask floor must be in [0, 1]");
    require(mask_eps > 0, Errc::config, "mask epsilon must be > 0");
  }
};

inline double bin_frequency(int bin, int fft_size) { return double(bin) * kSampleRate / fft_size; }

inline std::vector<CVec> steering_table(const ArrayGeometry& g, double theta, int fft_size) {
  std::vector<CVec> d(fft_size / 2 + 1);
  for (int k = 0; k <= fft_size / 2; ++k) d[k] = steering_vector(g, theta, bin_frequency(k, fft_size)).d;
  return d;
}

inline std::vector<Spectrum> align_channels(const std::vector<Spectrum>& y, const ArrayGeometry& g, double theta) {
  require(int(y.size()) == g.size(), Errc::shape, "align: channel count != mic count");
  std::vector<Spectrum> out = y;
  for (std::size_t i = 1; i < y.size(); ++i) {
    require(y[i].fft_size == y[0].fft_size, Errc::shape, "align: inconsistent fft size");
    double dt = toa(g, theta, int(i)) - toa(g, theta, 0);
    for (std::size_t k = 0; k < y[i].bins.size(); ++k) {
      double ph = 2.0 * std::numbers::pi * bin_frequency(int(k), y[i].fft_size) * dt;
      out[i].bins[k] *= cd(std::cos(ph), std::sin(ph));
    }
  }
  return out;
}

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

inline CMat diffuse_coherence(const ArrayGeometry& g, double frequency) {
  require(frequency >= 0, Errc::config, "frequency must be >= 0");
  CMat m(g.size());
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j) {
      double dist = (g.positions[i] - g.positions[j]).norm();
      m(i, j) = sinc(2.0 * std::numbers::pi * frequency * dist / g.speed_of_sound);
    }
  return m;
}

struct SuperdirectiveWeights {
  int fft_size = 0;
  double diagonal_loading = 0;
  std::vector<CVec> w;  // per bin
};

inline SuperdirectiveWeights superdirective_design(const ArrayGeometry& g, double theta, int fft_size,
                                                   double epsilon) {
  require(epsilon > 0, Errc::config, "superdirective epsilon must be > 0");
  SuperdirectiveWeights sw;
  sw.fft_size = fft_size;
  sw.diagonal_loading = epsilon;
  sw.w.resize(fft_size / 2 + 1);
  for (int k = 0; k <= fft_size / 2; ++k) {
    double f = bin_frequency(k, fft_size);
    CMat gam = diffuse_coherence(g, f);
    for (int i = 0; i < g.size(); ++i) gam(i, i) += epsilon;
    sw.w[k] = mvdr_solve(gam, steering_vector(g, theta, f).d);
  }
  return sw;
}

// out = w^H y per bin
inline Spectrum apply_weights(const std::vector<CVec>& w, const std::vector<Spectrum>& y) {
  Spectrum out;
  out.fft_size = y[0].fft_size;
  out.frame_index = y[0].frame_index;
  out.bins.assign(y[0].bins.size(), cd(0, 0));
  for (std::size_t k = 0; k < out.bins.size(); ++k)
    for (std::size_t i = 0; i < y.size(); ++i) out.bins[k] += std::conj(w[k][i]) * y[i].bins[k];
  return out;
}

struct MvdrState {
  int channels = 0;
  int fft_size = 0;
  std::vector<CMat> R;  // per bin
  double lambda = 0.99;
  double delta_rel = 1e-3;
  double delta_floor = 1e-10;
  long frames_seen = 0;
};

inline MvdrState make_mvdr_state(int channels, int fft_size, const BeamParams& p) {
  MvdrState s;
  s.channels = channels;
  s.fft_size = fft_size;
  s.R.assign(fft_size / 2 + 1, CMat(channels));
  s.lambda = p.lambda;
  s.delta_rel = p.delta_rel;
  s.delta_floor = p.delta_floor;
  return s;
}

// R <- lambda R + (1 - lambda) y y^H, written to keep R exactly Hermitian.
inline void mvdr_update(MvdrState& s, const std::vector<Spectrum>& y) {
  require(int(y.size()) == s.channels, Errc::shape, "mvdr_update: channel mismatch");
  const double a = s.lambda, b = 1.0 - s.lambda;
  const int c = s.channels;
  for (std::size_t k = 0; k < s.R.size(); ++k) {
    require(y[0].bins.size() == s.R.size(), Errc::shape, "mvdr_update: bin mismatch");
    CMat& R = s.R[k];
    for (int i = 0; i < c; ++i) {
      R(i, i) = cd(a * R(i, i).real() + b * std::norm(y[i].bins[k]), 0.0);
      for (int j = i + 1; j < c; ++j) {
        cd v = a * R(i, j) + b * y[i].bins[k] * std::conj(y[j].bins[k]);
        R(i, j) = v;
        R(j, i) = std::conj(v);
      }
    }
  }
  ++s.frames_seen;
}

inline double mvdr_loading(const MvdrState& s, const CMat& R) {
  return s.delta_rel * R.trace_real() / s.channels + s.delta_floor;
}

inline CVec mvdr_bin_weights(const MvdrState& s, int bin, const CVec& d) {
  CMat A = s.R[bin];
  double delta = mvdr_loading(s, A);
  for (int i = 0; i < A.n; ++i) A(i, i) += delta;
  return mvdr_solve(A, d);
}

inline std::vector<CVec> mvdr_weights(const MvdrState& s, const std::vector<CVec>& steer) {
  require(s.frames_seen >= 1, Errc::contract, "mvdr needs at least one frame");
  std::vector<CVec> w(s.R.size());
  for (std::size_t k = 0; k < s.R.size(); ++k) w[k] = mvdr_bin_weights(s, int(k), steer[k]);
  return w;
}

inline Spectrum mvdr_process(const MvdrState& s, const std::vector<Spectrum>& y, const ArrayGeometry& g,
                             double theta) {
  return apply_weights(mvdr_weights(s, steering_table(g, theta, s.fft_size)), y);
}

struct NonlinearResult {
  Spectrum out;
  std::vector<double> mask;
};

inline NonlinearResult nonlinear_process(const std::vector<Spectrum>& aligned, double mask_floor = 0.1,
                                         double mask_eps = 1e-12) {
  require(!aligned.empty(), Errc::shape, "nonlinear: no channels");
  const std::size_t K = aligned[0].bins.size();
  const double c = double(aligned.size());
  NonlinearResult r;
  r.out.fft_size = aligned[0].fft_size;
  r.out.frame_index = aligned[0].frame_index;
  r.out.bins.resize(K);
  r.mask.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    cd ds = 0;
    double pw = 0;
    for (auto& a : aligned) {
      ds += a.bins[k];
      pw += std::norm(a.bins[k]);
    }
    ds /= c;
    pw /= c;
    double m = std::clamp(std::norm(ds) / (pw + mask_eps), mask_floor, 1.0);
    r.mask[k] = m;
    r.out.bins[k] = m * ds;
  }
  return r;
}

}  // namespace dirhear
