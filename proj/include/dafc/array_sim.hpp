// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dafc/rng.hpp"
#include "dafc/types.hpp"

namespace dafc {

class KeyValueConfig;

// Half-wavelength uniform linear array.
struct ArrayGeometry {
  int num_sensors = 16;
  static constexpr double kSpacing = 0.5;  // in wavelengths

  void validate() const;
};

// Compound-Gaussian interference: sigma_c * sqrt(tau) * z with
// tau ~ Gamma(nu, rate nu) and z ~ CN(0, M(theta_c, rho)).
struct InterferenceParams {
  double nu = 0.2;
  double rho = 0.9;
  double theta_c = 0.0;  // radians
  double inr_db = 5.0;

  void validate() const;
};

// Evenly spaced angular grid over the field of view. Angles in radians.
class AngularGrid {
 public:
  AngularGrid() : AngularGrid(from_degrees(-60.0, 60.0, 1.0)) {}
  AngularGrid(double fov_min, double fov_max, double resolution);

  static AngularGrid from_degrees(double fov_min_deg, double fov_max_deg, double resolution_deg);

  Index size() const { return size_; }
  double fov_min() const { return fov_min_; }
  double fov_max() const { return fov_max_; }
  double resolution() const { return resolution_; }
  double point(Index i) const { return fov_min_ + static_cast<double>(i) * resolution_; }
  // Rounded to 1e-9 deg so grid labels print cleanly (0, not 5.6e-15).
  double point_deg(Index i) const { return std::round(rad2deg(point(i)) * 1e9) / 1e9 + 0.0; }
  std::vector<double> points() const;

  bool contains(double theta) const;

  // Index of the grid point nearest to theta; exact midpoints go to the lower
  // index. Angles outside the field of view clamp to the nearest end.
  Index nearest_index(double theta) const;

  friend bool operator==(const AngularGrid&, const AngularGrid&) = default;

 private:
  double fov_min_;
  double fov_max_;
  double resolution_;
  Index size_;
};

struct ScenarioConfig {
  ArrayGeometry geometry;
  int num_snapshots = 16;
  std::vector<double> source_doas;    // radians
  std::vector<double> source_powers;  // linear sigma_m^2
  double noise_power = 1.0;
  std::optional<InterferenceParams> interference;
  AngularGrid grid;
  std::uint64_t seed = 0;

  // sigma_c^2, zero when interference-free.
  double interference_power() const;
  void validate() const;
};

struct SnapshotExample {
  CMatrix X;                              // L x K
  std::vector<std::uint8_t> y;            // d, ones at source grid points
  std::vector<std::uint8_t> occupied_mask;  // d, source or interference
  ScenarioConfig meta;
};

CVector steering_vector(double theta, const ArrayGeometry& geometry);
CMatrix steering_matrix(std::span<const double> thetas, const ArrayGeometry& geometry);

// [M]_{m,l} = rho^{|m-l|} exp(j (m-l) pi sin theta_c)
CMatrix interference_covariance(const InterferenceParams& params, int num_sensors);

// Gamma(shape nu, rate nu): unit mean, variance 1/nu.
double sample_texture(double nu, Rng& rng);

// Standard circular complex normal, E|w|^2 = 1.
cdouble sample_complex_normal(Rng& rng);

// L x K matrix with columns sigma_c sqrt(tau_k) z_k. When taus is non-null it
// receives the texture draw of every column.
CMatrix sample_interference(const InterferenceParams& params, int num_sensors, int num_snapshots,
                            Rng& rng, std::vector<double>* taus = nullptr);

double power_from_db(double level_db, double reference_power);

SnapshotExample generate_example(const ScenarioConfig& config);

// Mixture used to synthesize training data.
struct TrainingSetPolicy {
  ArrayGeometry geometry;
  int num_snapshots = 16;
  AngularGrid grid;
  int max_sources = 4;
  double noise_power = 1.0;
  double interference_free_fraction = 0.1;
  double near_interference_fraction = 0.1;  // of the interference-containing part
  double near_halfwidth = deg2rad(8.0);
  double rho_min = 0.7, rho_max = 0.95;
  double nu_min = 0.1, nu_max = 1.5;
  double inr_min_db = 0.0, inr_max_db = 10.0;
  double level_min_db = -10.0, level_max_db = 10.0;  // SIR, or SNR when interference-free

  void validate() const;
};

enum class ScenarioKind { kInterferenceFree, kUniform, kNearInterference };

struct DrawnScenario {
  ScenarioConfig config;
  ScenarioKind kind;
};

DrawnScenario draw_scenario(const TrainingSetPolicy& policy, Rng& rng);

// n examples; example i is generated from the stream (seed, i) alone, so the
// batch is identical for any thread count.
std::vector<SnapshotExample> make_training_batch(const TrainingSetPolicy& policy, std::size_t n,
                                                 std::uint64_t seed);

ScenarioConfig scenario_from_config(const KeyValueConfig& cfg);
TrainingSetPolicy policy_from_config(const KeyValueConfig& cfg);

}  // namespace dafc
