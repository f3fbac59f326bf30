// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Shoebox image-source room impulse responses with frequency-independent
// absorption, plus RT60 helpers (Sabine inversion, Schroeder estimate).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "dirhear/geometry/array_geometry.hpp"
#include "dirhear/signal/buffer.hpp"

namespace dirhear {

struct RoomSpec {
  Vec3 dims{4.0, 5.0, 3.0};
  double absorption = 0.3;  // energy absorption per wall, (0, 1]
  // >= 0: keep images up to this reflection order. -1: keep every image that
  // arrives within max_time (auto: 1.6x the Sabine RT60 of the room).
  int max_order = -1;
  double max_time = 0.0;
  double speed_of_sound = 343.0;

  double volume() const { return dims.x * dims.y * dims.z; }
  double surface() const { return 2.0 * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z); }
  double reflection() const { return std::sqrt(1.0 - absorption); }

  bool inside(const Vec3& p) const {
    return p.x > 0 && p.y > 0 && p.z > 0 && p.x < dims.x && p.y < dims.y && p.z < dims.z;
  }

  void validate() const {
    require(dims.x > 0 && dims.y > 0 && dims.z > 0, Errc::config, "room dimensions must be positive");
    require(absorption > 0 && absorption <= 1, Errc::config, "absorption must be in (0, 1]");
    require(max_order >= -1, Errc::config, "max_order must be >= 0, or -1 for auto");
    require(speed_of_sound > 0, Errc::config, "speed of sound must be positive");
  }
};

inline double sabine_rt60(const Vec3& dims, double alpha) {
  RoomSpec r;
  r.dims = dims;
  return 0.161 * r.volume() / (r.surface() * alpha);
}

struct AbsorptionResult {
  double alpha = 1.0;
  bool near_anechoic = false;  // requested rt60 needed alpha > 1
};

// Sabine inversion alpha = 0.161 V / (S rt60), clamped to (0, 1].
inline AbsorptionResult absorption_for_rt60(const Vec3& dims, double rt60) {
  require(rt60 > 0, Errc::config, "rt60 must be positive");
  double a = 0.161 * dims.x * dims.y * dims.z / (2.0 * (dims.x * dims.y + dims.x * dims.z + dims.y * dims.z) * rt60);
  AbsorptionResult r;
  r.near_anechoic = a > 1.0;
  r.alpha = std::clamp(a, 1e-6, 1.0);
  return r;
}

inline double auto_max_time(const RoomSpec& room) {
  if (room.max_time > 0) return room.max_time;
  return std::clamp(1.6 * sabine_rt60(room.dims, room.absorption), 0.05, 3.0);
}

// Visits the mirror images of `src`: position and reflection order. Along
// each axis the image coordinate is (1 - 2q) s + 2 n L with |n - q| + |n|
// wall hits. With max_order < 0 only images within `radius` of `ref` are
// visited.
template <typename F>
void for_each_image(const RoomSpec& room, const Vec3& src, const Vec3& ref, double radius, F&& visit) {
  const bool by_order = room.max_order >= 0;
  const double L[3] = {room.dims.x, room.dims.y, room.dims.z};
  const double s[3] = {src.x, src.y, src.z};
  const double m[3] = {ref.x, ref.y, ref.z};
  int nmax[3];
  for (int a = 0; a < 3; ++a)
    nmax[a] = by_order ? (room.max_order + 1) / 2 + 1 : int(std::ceil(radius / (2.0 * L[a]))) + 1;
  const double r2 = radius * radius;
  for (int nx = -nmax[0]; nx <= nmax[0]; ++nx)
    for (int qx = 0; qx < 2; ++qx) {
      double ix = (1 - 2 * qx) * s[0] + 2.0 * nx * L[0];
      int ox = std::abs(nx - qx) + std::abs(nx);
      double dx = ix - m[0];
      if (by_order ? ox > room.max_order : dx * dx > r2) continue;
      for (int ny = -nmax[1]; ny <= nmax[1]; ++ny)
        for (int qy = 0; qy < 2; ++qy) {
          double iy = (1 - 2 * qy) * s[1] + 2.0 * ny * L[1];
          int oy = std::abs(ny - qy) + std::abs(ny);
          double dy = iy - m[1];
          if (by_order ? ox + oy > room.max_order : dx * dx + dy * dy > r2) continue;
          for (int nz = -nmax[2]; nz <= nmax[2]; ++nz)
            for (int qz = 0; qz < 2; ++qz) {
              double iz = (1 - 2 * qz) * s[2] + 2.0 * nz * L[2];
              int order = ox + oy + std::abs(nz - qz) + std::abs(nz);
              double dz = iz - m[2];
              if (by_order ? order > room.max_order : dx * dx + dy * dy + dz * dz > r2) continue;
              visit(Vec3{ix, iy, iz}, order);
            }
        }
    }
}

inline constexpr int kSincHalf = 8;  // 16-tap windowed sinc

// Adds amp * delta(t - tau) band-limited into h (Hann-windowed sinc). Along
// the taps sin(pi x) only flips sign and the window phase advances by pi/8,
// so one sin/cos pair per call suffices.
inline void add_fractional_tap(std::vector<double>& h, double tau, double amp) {
  const long base = long(std::floor(tau));
  const long first = base - kSincHalf + 1;
  double x = double(first) - tau;  // in (-8, -7]
  const double s_pi = std::sin(std::numbers::pi * x);
  double sign = 1.0;
  double wc = std::cos(std::numbers::pi * x / kSincHalf), ws = std::sin(std::numbers::pi * x / kSincHalf);
  const double c1 = std::cos(std::numbers::pi / kSincHalf), s1 = std::sin(std::numbers::pi / kSincHalf);
  for (long n = first; n <= base + kSincHalf; ++n, x += 1.0) {
    if (n >= 0 && n < long(h.size()) && std::abs(x) < kSincHalf) {
      double sinc = std::abs(x) < 1e-9 ? 1.0 : sign * s_pi / (std::numbers::pi * x);
      h[n] += amp * sinc * 0.5 * (1.0 + wc);
    }
    sign = -sign;
    double c = wc * c1 - ws * s1;
    ws = ws * c1 + wc * s1;
    wc = c;
  }
}

// Impulse responses from src to each mic at 16 kHz, sharing one image set.
// The direct path at 1 m has gain 1; responses start at t = 0, so they
// include the propagation delay.
inline std::vector<std::vector<double>> image_source_rirs(const RoomSpec& room, const Vec3& src,
                                                          const std::vector<Vec3>& mics) {
  room.validate();
  require(!mics.empty(), Errc::shape, "no microphones given");
  require(room.inside(src), Errc::config, "source is outside the room");
  for (const auto& m : mics) {
    require(room.inside(m), Errc::config, "microphone is outside the room");
    require((src - m).norm() > 1e-3, Errc::config, "source coincides with microphone");
  }
  const double fs = kSampleRate, c = room.speed_of_sound, beta = room.reflection();
  const double dmax = room.max_order >= 0 ? 0.0 : auto_max_time(room) * c;
  Vec3 ref = mics[0];
  double spread = 0;
  for (const auto& m : mics) spread = std::max(spread, (m - ref).norm());
  std::vector<std::pair<Vec3, int>> imgs;
  for_each_image(room, src, ref, dmax + spread, [&](const Vec3& p, int order) { imgs.emplace_back(p, order); });
  int max_ord = 0;
  for (auto& im : imgs) max_ord = std::max(max_ord, im.second);
  std::vector<double> bpow(max_ord + 1, 1.0);
  for (int k = 1; k <= max_ord; ++k) bpow[k] = bpow[k - 1] * beta;
  std::vector<std::vector<double>> out;
  for (const auto& m : mics) {
    double far = 0;
    for (auto& im : imgs) far = std::max(far, (im.first - m).norm());
    if (room.max_order < 0) far = std::min(far, dmax);
    std::vector<double> h(std::size_t(std::ceil(far / c * fs)) + kSincHalf + 1, 0.0);
    for (auto& im : imgs) {
      double d = (im.first - m).norm();
      if (room.max_order < 0 && d > dmax) continue;
      add_fractional_tap(h, d / c * fs, bpow[im.second] / d);
    }
    out.push_back(std::move(h));
  }
  return out;
}

inline std::vector<double> image_source_rir(const RoomSpec& room, const Vec3& src, const Vec3& mic) {
  return std::move(image_source_rirs(room, src, {mic})[0]);
}

// Schroeder backward integration, line fit of the decay curve between
// `hi_db` and `lo_db`, extrapolated to -60 dB. Returns 0 if the curve never
// reaches `lo_db`.
inline double schroeder_rt60(const std::vector<double>& h, double hi_db = -5.0, double lo_db = -35.0) {
  std::vector<double> edc(h.size());
  double acc = 0;
  for (std::size_t i = h.size(); i-- > 0;) edc[i] = (acc += h[i] * h[i]);
  if (acc <= 0) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long n = 0;
  bool reached = false;
  for (std::size_t i = 0; i < h.size(); ++i) {
    double db = 10.0 * std::log10(edc[i] / acc + 1e-300);
    if (db < lo_db) {
      reached = true;
      break;
    }
    if (db > hi_db) continue;
    double t = double(i) / kSampleRate;
    sx += t, sy += db, sxx += t * t, sxy += t * db;
    ++n;
  }
  if (!reached || n < 2) return 0.0;
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return slope < 0 ? -60.0 / slope : 0.0;
}

// Canonical probe pair for calibration: off-centre, away from walls.
inline std::pair<Vec3, Vec3> calibration_probe(const Vec3& dims) {
  return {{0.31 * dims.x, 0.37 * dims.y, 0.43 * dims.z}, {0.63 * dims.x, 0.58 * dims.y, 0.52 * dims.z}};
}

// Sabine inversion overestimates the decay time of the image-source model
// (all reflections share one sign, so low frequencies decay slowly). Starting
// from it, g = -ln(1 - alpha) is rescaled by (measured / requested) on a probe
// pair until the Schroeder RT60 of the rendered response is within `tol` of
// the request. Steps that leave the bracket seen so far are bisected instead.
inline AbsorptionResult calibrated_absorption(const Vec3& dims, double rt60, double tol = 0.05, int max_iter = 8) {
  AbsorptionResult r = absorption_for_rt60(dims, rt60);
  if (r.near_anechoic) return r;
  auto [src, mic] = calibration_probe(dims);
  RoomSpec room;
  room.dims = dims;
  room.max_time = 1.5 * rt60;
  const double g_cap = -std::log(1e-6);
  double g = -std::log1p(-std::min(r.alpha, 1.0 - 1e-6));
  double lo = 0.0, hi = g_cap;
  double best_g = g, best_err = 1e300;
  for (int it = 0; it < max_iter; ++it) {
    room.absorption = 1.0 - std::exp(-g);
    double est = schroeder_rt60(image_source_rir(room, src, mic));
    if (est <= 0) {
      hi = g;  // no measurable decay: too absorptive
      g = 0.5 * (lo + hi);
      continue;
    }
    double ratio = est / rt60;
    if (std::abs(ratio - 1.0) < best_err) best_err = std::abs(ratio - 1.0), best_g = g;
    if (std::abs(ratio - 1.0) <= tol) break;
    if (ratio > 1.0) lo = g;
    else hi = g;
    double next = g * ratio;
    g = next > lo && next < hi ? next : 0.5 * (lo + hi);
  }
  r.alpha = 1.0 - std::exp(-best_g);
  if (r.alpha > 1.0 - 1e-3) r.near_anechoic = true;
  return r;
}

}  // namespace dirhear
