// Copyright 2026 dirhear authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dirhear/geometry/array_geometry.hpp"

using namespace dirhear;

TEST(Geometry, CircularDegenerateAndSpacing) {
  auto g1 = circular_array(1, 0.05);
  ASSERT_EQ(g1.size(), 1);
  EXPECT_DOUBLE_EQ(g1.positions[0].x, 0.05);
  EXPECT_DOUBLE_EQ(g1.positions[0].y, 0.0);

  auto g6 = circular_array(6, 0.05);
  for (int i = 0; i < 6; ++i) {
    double chord = (g6.positions[i] - g6.positions[(i + 1) % 6]).norm();
    EXPECT_NEAR(chord, 2 * 0.05 * std::sin(std::numbers::pi / 6), 1e-15);
  }
  auto g4 = circular_array(4, 0.03);
  EXPECT_NEAR((g4.positions[0] - g4.positions[2]).norm(), 0.06, 1e-15);
  EXPECT_THROW(circular_array(0, 0.05), Error);
  EXPECT_THROW(circular_array(3, 0.0), Error);
}

TEST(Geometry, ToaExamples) {
  ArrayGeometry g;
  g.positions = {{0, 0, 0}, {0.05, 0, 0}, {0, 0.1, 0}, {0, -0.1, 0}};
  for (double th : {0.0, 1.0, -2.5}) EXPECT_EQ(toa(g, th, 0), 0.0);
  EXPECT_NEAR(toa(g, 0.0, 1), -0.05 / 343.0, 1e-18);
  EXPECT_NEAR(toa(g, 0.0, 1), -1.458e-4, 1e-7);
  // broadside to the y-pair
  EXPECT_NEAR(toa(g, 0.0, 2), toa(g, 0.0, 3), 1e-18);
}

TEST(Geometry, SteeringExamples) {
  ArrayGeometry g;
  g.positions = {{0, 0, 0}, {0.05, 0, 0}};
  auto dc = steering_vector(g, 0.3, 0.0);
  for (auto v : dc.d) EXPECT_EQ(v, std::complex<double>(1, 0));

  // broadside: equal path length
  auto bs = steering_vector(g, std::numbers::pi / 2, 3430.0);
  EXPECT_NEAR(std::abs(bs.d[1] - std::complex<double>(1, 0)), 0.0, 1e-12);

  // endfire, f = 1715 Hz: 2*pi*f*0.05/343 = pi/2
  auto ef = steering_vector(g, 0.0, 1715.0);
  double dphi = std::arg(ef.d[1]) - std::arg(ef.d[0]);
  EXPECT_NEAR(std::abs(dphi), std::numbers::pi / 2, 1e-12);
  // mic 1 hears first, so its phase leads
  EXPECT_NEAR(dphi, std::numbers::pi / 2, 1e-12);
}

TEST(Geometry, PropertyBoundsAndUnitMagnitude) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.2, 0.2), th(-4, 4), fr(0, 8000);
  for (int trial = 0; trial < 200; ++trial) {
    ArrayGeometry g;
    for (int i = 0; i < 5; ++i) g.positions.push_back({u(rng), u(rng), 0});
    double theta = th(rng);
    double bound = g.max_radius() / g.speed_of_sound;
    for (int i = 0; i < g.size(); ++i) EXPECT_LE(std::abs(toa(g, theta, i)), bound + 1e-18);
    auto s = steering_vector(g, theta, fr(rng));
    EXPECT_EQ(s.d[0], std::complex<double>(1, 0));
    for (auto v : s.d) EXPECT_NEAR(std::abs(v), 1.0, 1e-14);
  }
}

TEST(Geometry, RotationPermutesSteeringSet) {
  const int n = 6;
  auto g = circular_array(n, 0.05);
  for (double rot : {2 * std::numbers::pi / n, 0.37}) {
    ArrayGeometry r = g;
    for (auto& p : r.positions) {
      double x = p.x * std::cos(rot) - p.y * std::sin(rot), y = p.x * std::sin(rot) + p.y * std::cos(rot);
      p = {x, y, p.z};
    }
    for (double theta : {0.1, 1.3})
      for (double f : {500.0, 2500.0}) {
        auto a = steering_vector(g, theta, f);
        auto b = steering_vector(r, theta + rot, f);
        for (int i = 0; i < n; ++i) EXPECT_LT(std::abs(a.d[i] - b.d[i]), 1e-12);
      }
  }
  // a rotation by one mic step maps the layout onto itself
  const double step = 2 * std::numbers::pi / n;
  for (int i = 0; i < n; ++i) {
    auto p = g.positions[i];
    Vec3 q{p.x * std::cos(step) - p.y * std::sin(step), p.x * std::sin(step) + p.y * std::cos(step), 0};
    EXPECT_LT((q - g.positions[(i + 1) % n]).norm(), 1e-15);
  }
}

TEST(Geometry, WrapAngle) {
  EXPECT_NEAR(wrap_angle(3 * std::numbers::pi), -std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(-std::numbers::pi), -std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5), 0.5, 1e-15);
  EXPECT_NEAR(wrap_angle(2 * std::numbers::pi + 0.5), 0.5, 1e-12);
}
