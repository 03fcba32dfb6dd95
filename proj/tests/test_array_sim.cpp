// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <array>
#include <set>

#include "dafc/array_sim.hpp"
#include "dafc/baselines.hpp"
#include "dafc/config.hpp"
#include "dafc/error.hpp"
#include "doctest.h"

using namespace dafc;

TEST_CASE("steering vector phases") {
  ArrayGeometry g;
  const CVector a = steering_vector(deg2rad(30.0), g);
  CHECK(a.size() == 16);
  CHECK(std::abs(a(0) - cdouble(1.0, 0.0)) < 1e-15);
  // sin 30 deg = 1/2, so neighbouring sensors differ by a quarter turn.
  CHECK(std::abs(a(1) - cdouble(0.0, 1.0)) < 1e-15);
  for (Index l = 0; l < a.size(); ++l) CHECK(std::abs(std::abs(a(l)) - 1.0) < 1e-15);
  CHECK_THROWS_AS(steering_vector(deg2rad(90.0), g), InvalidArgument);
}

TEST_CASE("grid geometry") {
  const AngularGrid grid;
  CHECK(grid.size() == 121);
  CHECK(grid.point_deg(0) == doctest::Approx(-60.0));
  CHECK(grid.point_deg(120) == doctest::Approx(60.0));
  CHECK(grid.point_deg(grid.nearest_index(deg2rad(0.55))) == doctest::Approx(1.0));
  CHECK(grid.point_deg(grid.nearest_index(deg2rad(20.55))) == doctest::Approx(21.0));
  CHECK(grid.point_deg(grid.nearest_index(deg2rad(-0.4))) == doctest::Approx(0.0));
  CHECK(grid.contains(deg2rad(59.9)));
  CHECK_FALSE(grid.contains(deg2rad(61.0)));
  CHECK_THROWS(AngularGrid::from_degrees(10.0, -10.0, 1.0));
}

TEST_CASE("speckle covariance structure") {
  InterferenceParams p;
  p.rho = 0.8;
  p.theta_c = deg2rad(12.0);
  const CMatrix M = interference_covariance(p, 6);
  const double s = std::sin(p.theta_c);
  for (Index m = 0; m < 6; ++m) {
    for (Index l = 0; l < 6; ++l) {
      const double k = static_cast<double>(m - l);
      const cdouble want = std::pow(p.rho, std::abs(k)) * std::exp(cdouble(0.0, k * kPi * s));
      CHECK(std::abs(M(m, l) - want) < 1e-14);
    }
  }
  CHECK((M - M.adjoint()).norm() < 1e-14);
}

TEST_CASE("texture moments") {
  Rng rng(3);
  const int n = 200000;
  for (double nu : {0.2, 1.0}) {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = sample_texture(nu, rng);
      REQUIRE(t > 0.0);
      s += t;
      s2 += t * t;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(var == doctest::Approx(1.0 / nu).epsilon(0.1));
  }
}

TEST_CASE("interference power follows INR") {
  InterferenceParams p;
  p.nu = 1.0;
  p.inr_db = 10.0;
  Rng rng(5);
  const CMatrix X = sample_interference(p, 4, 100000, rng);
  const double power = X.squaredNorm() / static_cast<double>(X.size());
  CHECK(power == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("example generation labels and determinism") {
  ScenarioConfig s;
  s.source_doas = {deg2rad(-20.3), deg2rad(10.6)};
  s.source_powers = {1.0, 2.0};
  InterferenceParams ip;
  ip.theta_c = deg2rad(40.2);
  s.interference = ip;
  s.seed = 17;
  const SnapshotExample a = generate_example(s);
  const SnapshotExample b = generate_example(s);
  CHECK(a.X == b.X);
  CHECK(a.X.rows() == 16);
  CHECK(a.X.cols() == 16);
  std::set<Index> ones, occupied;
  for (std::size_t i = 0; i < a.y.size(); ++i) {
    if (a.y[i]) ones.insert(static_cast<Index>(i));
    if (a.occupied_mask[i]) occupied.insert(static_cast<Index>(i));
  }
  CHECK(ones == std::set<Index>{40, 71});
  CHECK(occupied == std::set<Index>{40, 71, 100});
  s.seed = 18;
  CHECK(generate_example(s).X != a.X);
}

TEST_CASE("noise-only covariance without interference") {
  ScenarioConfig s;
  s.geometry.num_sensors = 4;
  s.num_snapshots = 200000;
  s.source_doas = {deg2rad(20.0)};
  s.source_powers = {3.0};
  s.noise_power = 0.5;
  s.seed = 9;
  const SnapshotExample ex = generate_example(s);
  const CVector a = steering_vector(s.source_doas[0], s.geometry);
  const CMatrix want = 3.0 * a * a.adjoint() + 0.5 * CMatrix::Identity(4, 4);
  const CMatrix R = sample_covariance(ex.X).R;
  CHECK((R - want).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("invalid scenarios are rejected") {
  ScenarioConfig s;
  s.source_doas = {deg2rad(70.0)};
  s.source_powers = {1.0};
  CHECK_THROWS_AS(generate_example(s), InvalidArgument);
  s.source_doas = {0.1, 0.2};
  CHECK_THROWS_AS(generate_example(s), InvalidArgument);
  s.source_doas = {0.1};
  s.noise_power = 0.0;
  CHECK_THROWS_AS(generate_example(s), InvalidArgument);
  InterferenceParams bad;
  bad.rho = 1.0;
  CHECK_THROWS(bad.validate());
  bad.rho = 0.5;
  bad.nu = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("training policy mixture") {
  TrainingSetPolicy policy;
  Rng rng(21);
  const int n = 6000;
  int free = 0, near = 0, with = 0;
  std::array<int, 5> m_count{};
  for (int i = 0; i < n; ++i) {
    const DrawnScenario d = draw_scenario(policy, rng);
    const auto& c = d.config;
    const auto m = c.source_doas.size();
    REQUIRE(m >= 1);
    REQUIRE(m <= 4);
    ++m_count[m];
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < a; ++b) {
        CHECK(policy.grid.nearest_index(c.source_doas[a]) != policy.grid.nearest_index(c.source_doas[b]));
      }
    }
    if (d.kind == ScenarioKind::kInterferenceFree) {
      ++free;
      CHECK_FALSE(c.interference.has_value());
      continue;
    }
    ++with;
    REQUIRE(c.interference.has_value());
    const auto& ip = *c.interference;
    CHECK(ip.rho >= 0.7);
    CHECK(ip.rho <= 0.95);
    CHECK(ip.nu >= 0.1);
    CHECK(ip.nu <= 1.5);
    CHECK(ip.inr_db >= 0.0);
    CHECK(ip.inr_db <= 10.0);
    if (d.kind == ScenarioKind::kNearInterference) {
      ++near;
      for (double t : c.source_doas) CHECK(std::abs(t - ip.theta_c) <= deg2rad(8.0) + 1e-12);
    }
  }
  CHECK(free / double(n) == doctest::Approx(0.1).epsilon(0.15));
  CHECK(near / double(with) == doctest::Approx(0.1).epsilon(0.15));
  for (int m = 1; m <= 4; ++m) CHECK(m_count[static_cast<std::size_t>(m)] / double(n) == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("training batches are reproducible") {
  TrainingSetPolicy policy;
  const auto a = make_training_batch(policy, 8, 44);
  const auto b = make_training_batch(policy, 8, 44);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].X == b[i].X);
  CHECK(make_training_batch(policy, 8, 45)[0].X != a[0].X);
}

TEST_CASE("scenario from config") {
  const auto cfg = KeyValueConfig::parse_string(
      "source_doas_deg = -10, 15\nsource_sir_db = 0, 3\ninterference = true\ntheta_c_deg = 5\n");
  const ScenarioConfig s = scenario_from_config(cfg);
  REQUIRE(s.source_doas.size() == 2);
  CHECK(rad2deg(s.source_doas[1]) == doctest::Approx(15.0));
  CHECK(s.interference.has_value());
}
