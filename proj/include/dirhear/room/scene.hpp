// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Random reverberant multi-speaker scenes and their rendering to training
// clips: mixture at the array plus the dry target at mic 0.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dirhear/geometry/array_geometry.hpp"
#include "dirhear/room/rir.hpp"
#include "dirhear/room/speech.hpp"
#include "dirhear/signal/fft.hpp"

namespace dirhear {

struct SceneConfig {
  Vec3 room_min{3.0, 3.0, 2.5}, room_max{8.0, 8.0, 3.5};
  double rt60_min = 0.1, rt60_max = 0.5;
  std::array<double, 4> count_weights{0.1, 0.4, 0.4, 0.1};  // 1..4 sources
  double min_distance = 0.8;     // source to every mic, meters
  double min_separation_deg = 10.0;
  double theta_error_deg = 5.0;  // uniform in the open interval (-e, e)
  double gain_min_db = -5.0, gain_max_db = 0.0;
  double snr_min_db = 5.0, snr_max_db = 25.0;
  double clip_seconds = 4.0;
  double min_overlap = 1.0;      // seconds shared by two speakers when >= 2
  double height_jitter = 0.2;    // source height around the array plane
  double wall_margin = 0.3;
  bool calibrate_rt60 = true;
  bool geometry_only = false;    // skip absorption fitting and source signals
  ArrayGeometry array = circular_array(6, 0.05);
  std::vector<std::vector<double>> speech_pool;  // optional user signals; synthetic speech otherwise

  void validate() const {
    array.validate();
    require(room_min.x > 0 && room_min.y > 0 && room_min.z > 0, Errc::config, "room_min must be positive");
    require(room_max.x >= room_min.x && room_max.y >= room_min.y && room_max.z >= room_min.z, Errc::config,
            "room_max must be >= room_min");
    require(rt60_min > 0 && rt60_max >= rt60_min, Errc::config, "need 0 < rt60_min <= rt60_max");
    double total = 0;
    for (double w : count_weights) {
      require(w >= 0, Errc::config, "count weights must be non-negative");
      total += w;
    }
    require(total > 0, Errc::config, "count weights sum to zero");
    require(min_distance > 0, Errc::config, "min_distance must be positive");
    require(min_separation_deg >= 0 && min_separation_deg < 90, Errc::config, "min_separation_deg out of range");
    require(theta_error_deg >= 0, Errc::config, "theta_error_deg must be >= 0");
    require(gain_max_db >= gain_min_db && snr_max_db >= snr_min_db, Errc::config, "empty gain or snr range");
    require(clip_seconds > 0, Errc::config, "clip_seconds must be positive");
    require(min_overlap >= 0 && min_overlap < clip_seconds, Errc::config, "min_overlap must be < clip_seconds");
    require(height_jitter >= 0 && wall_margin > 0, Errc::config, "bad height_jitter or wall_margin");
  }
};

struct SceneSource {
  Vec3 position;
  std::vector<double> signal;  // clip length, zero outside [start, end)
  double gain_db = 0;
  double azimuth = 0;          // from the array centre, radians
  std::size_t start = 0, end = 0;
};

struct SceneSpec {
  RoomSpec room;
  double rt60 = 0;             // requested decay time
  bool near_anechoic = false;
  Vec3 array_center;
  ArrayGeometry array;
  std::vector<SceneSource> sources;
  bool noise_enabled = true;
  int noise_directions = 36;
  double snr_db = 15.0;
  int target_index = 0;
  double true_theta = 0, input_theta = 0;

  std::vector<Vec3> mic_positions() const {
    std::vector<Vec3> m;
    for (const auto& p : array.positions) m.push_back(array_center + p);
    return m;
  }

  // Checks the invariants of a sampled scene against the generating config.
  void validate(const SceneConfig& cfg) const {
    room.validate();
    require(!sources.empty(), Errc::contract, "scene has no sources");
    require(target_index >= 0 && target_index < int(sources.size()), Errc::contract, "target index out of range");
    for (const auto& m : mic_positions()) require(room.inside(m), Errc::contract, "mic outside the room");
    for (const auto& s : sources) {
      require(room.inside(s.position), Errc::contract, "source outside the room");
      for (const auto& m : mic_positions())
        require((s.position - m).norm() >= cfg.min_distance, Errc::contract, "source closer than min_distance");
      require(s.gain_db >= cfg.gain_min_db && s.gain_db <= cfg.gain_max_db, Errc::contract, "gain out of range");
    }
    for (std::size_t i = 0; i < sources.size(); ++i)
      for (std::size_t j = i + 1; j < sources.size(); ++j)
        require(std::abs(wrap_angle(sources[i].azimuth - sources[j].azimuth)) >= deg2rad(cfg.min_separation_deg),
                Errc::contract, "sources closer than the minimum DOA separation");
    require(std::abs(wrap_angle(input_theta - true_theta)) < deg2rad(cfg.theta_error_deg) ||
                cfg.theta_error_deg == 0,
            Errc::contract, "input direction error too large");
    require(!noise_enabled || (snr_db >= cfg.snr_min_db && snr_db <= cfg.snr_max_db), Errc::contract,
            "snr out of range");
    if (sources.size() >= 2) {
      double best = 0;
      for (std::size_t i = 0; i < sources.size(); ++i)
        for (std::size_t j = i + 1; j < sources.size(); ++j) {
          double lo = double(std::max(sources[i].start, sources[j].start));
          double hi = double(std::min(sources[i].end, sources[j].end));
          best = std::max(best, (hi - lo) / kSampleRate);
        }
      require(best >= cfg.min_overlap - 1e-9, Errc::contract, "no two utterances overlap long enough");
    }
  }
};

inline double azimuth_from(const Vec3& center, const Vec3& p) { return std::atan2(p.y - center.y, p.x - center.x); }

// Draws a scene. Placement failures resample the source (bounded), then the
// room; exhausting both raises a config error.
inline SceneSpec sample_scene(std::mt19937_64& rng, const SceneConfig& cfg) {
  cfg.validate();
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * U(rng); };
  const std::size_t L = std::size_t(cfg.clip_seconds * kSampleRate);
  std::discrete_distribution<int> count_dist(cfg.count_weights.begin(), cfg.count_weights.end());
  const int count = count_dist(rng) + 1;
  const double r_arr = cfg.array.max_radius();
  for (int room_try = 0; room_try < 50; ++room_try) {
    SceneSpec sc;
    sc.array = cfg.array;
    sc.room.dims = {uni(cfg.room_min.x, cfg.room_max.x), uni(cfg.room_min.y, cfg.room_max.y),
                    uni(cfg.room_min.z, cfg.room_max.z)};
    const Vec3 d = sc.room.dims;
    const double m = cfg.wall_margin + r_arr;
    if (d.x <= 2 * m || d.y <= 2 * m) continue;
    sc.array_center = {uni(m, d.x - m), uni(m, d.y - m), uni(std::min(1.0, d.z / 2), std::min(1.7, d.z - m))};
    bool ok = true;
    for (int s = 0; s < count && ok; ++s) {
      bool placed = false;
      for (int t = 0; t < 200 && !placed; ++t) {
        double z = sc.array_center.z + uni(-cfg.height_jitter, cfg.height_jitter);
        Vec3 p{uni(cfg.wall_margin, d.x - cfg.wall_margin), uni(cfg.wall_margin, d.y - cfg.wall_margin), z};
        if (!sc.room.inside(p) || z < cfg.wall_margin || z > d.z - cfg.wall_margin) continue;
        bool good = true;
        for (const auto& mp : sc.array.positions)
          if ((p - (sc.array_center + mp)).norm() < cfg.min_distance) good = false;
        double az = azimuth_from(sc.array_center, p);
        for (const auto& o : sc.sources)
          if (std::abs(wrap_angle(az - o.azimuth)) < deg2rad(cfg.min_separation_deg)) good = false;
        if (!good) continue;
        SceneSource src;
        src.position = p;
        src.azimuth = az;
        sc.sources.push_back(src);
        placed = true;
      }
      ok = placed;
    }
    if (!ok) continue;

    sc.rt60 = uni(cfg.rt60_min, cfg.rt60_max);
    AbsorptionResult a = cfg.calibrate_rt60 && !cfg.geometry_only ? calibrated_absorption(sc.room.dims, sc.rt60)
                                                                   : absorption_for_rt60(sc.room.dims, sc.rt60);
    sc.room.absorption = a.alpha;
    sc.near_anechoic = a.near_anechoic;

    // Utterance intervals no shorter than (clip + overlap) / 2, so any two of
    // them share at least min_overlap seconds.
    const double min_len = count >= 2 ? (cfg.clip_seconds + cfg.min_overlap) / 2.0 : 0.5 * cfg.clip_seconds;
    for (auto& src : sc.sources) {
      double len = uni(std::min(min_len, cfg.clip_seconds), cfg.clip_seconds);
      double start = uni(0.0, cfg.clip_seconds - len);
      src.start = std::size_t(start * kSampleRate);
      src.end = std::min(L, src.start + std::size_t(len * kSampleRate));
      src.gain_db = uni(cfg.gain_min_db, cfg.gain_max_db);
      if (cfg.geometry_only) continue;
      std::vector<double> utt;
      if (cfg.speech_pool.empty()) {
        utt = synth_speech(rng, double(src.end - src.start) / kSampleRate);
      } else {
        const auto& pool = cfg.speech_pool[std::size_t(U(rng) * cfg.speech_pool.size()) % cfg.speech_pool.size()];
        std::size_t off = pool.size() > (src.end - src.start) ? std::size_t(U(rng) * (pool.size() - (src.end - src.start))) : 0;
        utt.assign(pool.begin() + std::min(off, pool.size()), pool.end());
      }
      src.signal.assign(L, 0.0);
      for (std::size_t i = 0; i < src.end - src.start && i < utt.size(); ++i) src.signal[src.start + i] = utt[i];
    }
    sc.target_index = int(U(rng) * count) % count;
    sc.true_theta = sc.sources[sc.target_index].azimuth;
    double err = cfg.theta_error_deg > 0 ? uni(-1.0, 1.0) * deg2rad(cfg.theta_error_deg) : 0.0;
    if (std::abs(err) >= deg2rad(cfg.theta_error_deg) && cfg.theta_error_deg > 0) err = 0.0;
    sc.input_theta = wrap_angle(sc.true_theta + err);
    sc.snr_db = uni(cfg.snr_min_db, cfg.snr_max_db);
    sc.validate(cfg);
    return sc;
  }
  throw Error(Errc::config, "scene sampling failed: constraints unsatisfiable for the configured room ranges");
}

struct TrainingClip {
  MultichannelBuffer<double> mixture;  // c channels
  std::vector<double> target_dry;      // target at mic 0, direct path only
  double theta_input = 0;
};

struct ClipParts {
  MultichannelBuffer<double> speech;  // reverberant speech at each mic
  MultichannelBuffer<double> noise;   // scaled diffuse noise at each mic
};

// Isotropic noise from `directions` far-field azimuths, each an independent
// pink process, synthesised directly in the frequency domain. Unit power per
// mic on average.
inline MultichannelBuffer<double> diffuse_noise(std::mt19937_64& rng, const ArrayGeometry& g, std::size_t length,
                                                int directions = 36) {
  const std::size_t N = next_pow2(std::max<std::size_t>(length, 2));
  const std::size_t K = N / 2;
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<std::complex<double>>> spec(g.size(), std::vector<std::complex<double>>(N));
  for (int dir = 0; dir < directions; ++dir) {
    double az = 2.0 * std::numbers::pi * dir / directions;
    std::vector<double> tau(g.size());
    for (int i = 0; i < g.size(); ++i) tau[i] = toa(g, az, i);
    // per-mic phasor e^{-j 2 pi f tau}, advanced bin by bin and refreshed
    // exactly every 1024 bins
    std::vector<std::complex<double>> rot(g.size()), step(g.size());
    for (std::size_t k = 1; k <= K; ++k) {
      double f = double(k) * kSampleRate / double(N);
      if ((k - 1) % 1024 == 0)
        for (int i = 0; i < g.size(); ++i) {
          rot[i] = std::polar(1.0, -2.0 * std::numbers::pi * f * tau[i]);
          step[i] = std::polar(1.0, -2.0 * std::numbers::pi * (double(kSampleRate) / double(N)) * tau[i]);
        }
      std::complex<double> s(nd(rng), nd(rng));
      s /= std::sqrt(f);
      if (k == K) s = s.real();
      for (int i = 0; i < g.size(); ++i) {
        spec[i][k] += s * rot[i];
        rot[i] *= step[i];
      }
    }
  }
  MultichannelBuffer<double> out(g.size(), length);
  Fft<double> fft(N);
  double p = 0;
  for (int i = 0; i < g.size(); ++i) {
    auto& X = spec[i];
    for (std::size_t k = 1; k < K; ++k) X[N - k] = std::conj(X[k]);
    fft.inverse(X.data());
    for (std::size_t t = 0; t < length; ++t) out[i][t] = X[t].real(), p += X[t].real() * X[t].real();
  }
  p /= double(length * g.size());
  if (p > 0)
    for (auto& ch : out.data)
      for (auto& v : ch) v /= std::sqrt(p);
  return out;
}

// Mixture = sum of sources convolved with their RIRs + diffuse noise at
// snr_db (speech and noise powers averaged over mics). The rng only drives
// the noise, so source order does not matter.
inline TrainingClip render_clip(const SceneSpec& sc, std::mt19937_64& rng, ClipParts* parts = nullptr) {
  require(!sc.sources.empty(), Errc::contract, "scene has no sources");
  const std::size_t L = sc.sources[0].signal.size();
  for (const auto& s : sc.sources) require(s.signal.size() == L, Errc::shape, "source signals differ in length");
  const auto mics = sc.mic_positions();
  const int C = int(mics.size());
  std::vector<std::vector<std::vector<double>>> rirs;
  std::size_t hmax = 1;
  for (const auto& s : sc.sources) {
    rirs.push_back(image_source_rirs(sc.room, s.position, mics));
    for (const auto& h : rirs.back()) hmax = std::max(hmax, h.size());
  }
  const std::size_t N = next_pow2(L + hmax);
  Fft<double> fft(N);
  std::vector<std::vector<std::complex<double>>> acc(C, std::vector<std::complex<double>>(N));
  std::vector<std::complex<double>> S(N), H(N);
  for (std::size_t si = 0; si < sc.sources.size(); ++si) {
    const auto& s = sc.sources[si];
    double g = std::pow(10.0, s.gain_db / 20.0);
    std::fill(S.begin(), S.end(), 0.0);
    for (std::size_t t = 0; t < L; ++t) S[t] = g * s.signal[t];
    fft.forward(S.data());
    for (int m = 0; m < C; ++m) {
      std::fill(H.begin(), H.end(), 0.0);
      const auto& h = rirs[si][m];
      for (std::size_t t = 0; t < h.size(); ++t) H[t] = h[t];
      fft.forward(H.data());
      for (std::size_t k = 0; k < N; ++k) acc[m][k] += S[k] * H[k];
    }
  }
  MultichannelBuffer<double> speech(C, L);
  double ps = 0;
  for (int m = 0; m < C; ++m) {
    fft.inverse(acc[m].data());
    for (std::size_t t = 0; t < L; ++t) speech[m][t] = acc[m][t].real(), ps += speech[m][t] * speech[m][t];
  }
  ps /= double(L * C);

  MultichannelBuffer<double> noise(C, L);
  if (sc.noise_enabled && ps > 0) {
    noise = diffuse_noise(rng, sc.array, L, sc.noise_directions);
    double scale = std::sqrt(ps / std::pow(10.0, sc.snr_db / 10.0));
    for (auto& ch : noise.data)
      for (auto& v : ch) v *= scale;
  }

  TrainingClip clip;
  clip.mixture = MultichannelBuffer<double>(C, L);
  for (int m = 0; m < C; ++m)
    for (std::size_t t = 0; t < L; ++t) clip.mixture[m][t] = speech[m][t] + noise[m][t];

  const auto& tg = sc.sources[sc.target_index];
  RoomSpec direct = sc.room;
  direct.max_order = 0;
  auto h0 = image_source_rir(direct, tg.position, mics[0]);
  std::vector<double> dry(L);
  double g = std::pow(10.0, tg.gain_db / 20.0);
  for (std::size_t t = 0; t < L; ++t) dry[t] = g * tg.signal[t];
  auto y = fft_convolve(dry, h0);
  clip.target_dry.assign(y.begin(), y.begin() + L);
  clip.theta_input = sc.input_theta;
  if (parts) {
    parts->speech = std::move(speech);
    parts->noise = std::move(noise);
  }
  return clip;
}

}  // namespace dirhear
