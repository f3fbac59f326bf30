// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Direction convention: theta is the azimuth in radians, counterclockwise
// from +x in the horizontal plane. u(theta) points from the array toward the
// source. A far-field wavefront reaches mic i at t_i = -(p_i . u) / c, so an
// earlier arrival has a more negative TOA.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "dirhear/core/error.hpp"

namespace dirhear {

struct Vec3 {
  double x = 0, y = 0, z = 0;
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec3 direction(double theta) { return {std::cos(theta), std::sin(theta), 0.0}; }

// Wraps to [-pi, pi).
inline double wrap_angle(double theta) {
  const double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta + std::numbers::pi, two_pi);
  if (t < 0) t += two_pi;
  return t - std::numbers::pi;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

struct ArrayGeometry {
  std::vector<Vec3> positions;
  double speed_of_sound = 343.0;
  static constexpr int reference_index = 0;

  int size() const { return int(positions.size()); }

  void validate() const {
    require(!positions.empty(), Errc::config, "array needs at least one mic");
    require(positions.size() <= 8, Errc::config, "at most 8 mics are supported");
    require(speed_of_sound > 0, Errc::config, "speed of sound must be positive");
    for (auto& p : positions)
      require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z), Errc::config,
              "mic position is not finite");
  }

  double max_radius() const {
    double r = 0;
    for (auto& p : positions) r = std::max(r, p.norm());
    return r;
  }
};

inline ArrayGeometry circular_array(int n, double radius) {
  require(n >= 1, Errc::config, "circular array needs n >= 1");
  require(radius > 0, Errc::config, "circular array needs radius > 0");
  ArrayGeometry g;
  for (int i = 0; i < n; ++i) {
    double a = 2.0 * std::numbers::pi * i / n;
    g.positions.push_back({radius * std::cos(a), radius * std::sin(a), 0.0});
  }
  return g;
}

inline double toa(const ArrayGeometry& g, double theta, int mic) {
  require(mic >= 0 && mic < g.size(), Errc::shape, "mic index out of range");
  return -g.positions[mic].dot(direction(theta)) / g.speed_of_sound;
}

struct SteeringVector {
  double frequency = 0;
  std::vector<std::complex<double>> d;
};

inline SteeringVector steering_vector(const ArrayGeometry& g, double theta, double frequency) {
  SteeringVector s;
  s.frequency = frequency;
  s.d.resize(g.size());
  double t0 = toa(g, theta, 0);
  s.d[0] = {1.0, 0.0};
  for (int i = 1; i < g.size(); ++i) {
    double ph = -2.0 * std::numbers::pi * frequency * (toa(g, theta, i) - t0);
    s.d[i] = {std::cos(ph), std::sin(ph)};
  }
  return s;
}

}  // namespace dirhear
