// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/array_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dafc/config.hpp"
#include "dafc/error.hpp"

namespace dafc {
namespace {

constexpr double kAngleEps = 1e-12;

double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

// Uniform on (0, 1].
double open_uniform(Rng& rng) { return 1.0 - std::generate_canonical<double, 53>(rng); }

double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

// Marsaglia-Tsang for shape >= 1, unit rate.
double gamma_unit_rate(double shape, Rng& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = standard_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = open_uniform(rng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

void require_in_fov(const AngularGrid& grid, double theta, const char* what) {
  if (!grid.contains(theta)) {
    std::ostringstream msg;
    msg << what << " " << rad2deg(theta) << " deg outside the field of view [" << rad2deg(grid.fov_min())
        << ", " << rad2deg(grid.fov_max()) << "] deg";
    throw InvalidArgument(msg.str());
  }
}

}  // namespace

void ArrayGeometry::validate() const {
  if (num_sensors < 2) throw InvalidArgument("array needs at least 2 sensors, got " + std::to_string(num_sensors));
}

void InterferenceParams::validate() const {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidArgument("interference nu must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("interference rho must lie in [0, 1)");
  if (!(std::abs(theta_c) < kPi / 2)) throw InvalidArgument("interference DOA outside (-90, 90) deg");
  if (!std::isfinite(inr_db)) throw InvalidArgument("interference INR must be finite");
}

AngularGrid::AngularGrid(double fov_min, double fov_max, double resolution)
    : fov_min_(fov_min), fov_max_(fov_max), resolution_(resolution) {
  if (!(resolution > 0.0)) throw InvalidArgument("grid resolution must be positive");
  if (!(fov_max > fov_min)) throw InvalidArgument("grid field of view is empty");
  if (fov_min <= -kPi / 2 || fov_max >= kPi / 2) throw InvalidArgument("grid must lie inside (-90, 90) deg");
  const double steps = (fov_max - fov_min) / resolution;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-6) throw InvalidArgument("grid span is not a multiple of the resolution");
  size_ = static_cast<Index>(rounded) + 1;
}

AngularGrid AngularGrid::from_degrees(double fov_min_deg, double fov_max_deg, double resolution_deg) {
  return AngularGrid(deg2rad(fov_min_deg), deg2rad(fov_max_deg), deg2rad(resolution_deg));
}

std::vector<double> AngularGrid::points() const {
  std::vector<double> out(static_cast<std::size_t>(size_));
  for (Index i = 0; i < size_; ++i) out[static_cast<std::size_t>(i)] = point(i);
  return out;
}

bool AngularGrid::contains(double theta) const {
  return theta >= fov_min_ - kAngleEps && theta <= fov_max_ + kAngleEps;
}

Index AngularGrid::nearest_index(double theta) const {
  const double pos = (theta - fov_min_) / resolution_;
  // Work in units of 1e-9 grid steps so that values like 60.5 that arrive as
  // 60.49999999 still count as exact midpoints.
  const double snapped = std::round(pos * 1e9) / 1e9;
  double base = std::floor(snapped);
  if (snapped - base > 0.5) base += 1.0;
  return std::clamp(static_cast<Index>(base), Index{0}, size_ - 1);
}

double ScenarioConfig::interference_power() const {
  return interference ? power_from_db(interference->inr_db, noise_power) : 0.0;
}

void ScenarioConfig::validate() const {
  geometry.validate();
  if (num_snapshots < 1) throw InvalidArgument("num_snapshots must be positive");
  if (source_doas.size() != source_powers.size()) {
    throw InvalidArgument("source DOA and power lists differ in length");
  }
  if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
  for (std::size_t m = 0; m < source_doas.size(); ++m) {
    require_in_fov(grid, source_doas[m], "source DOA");
    if (!(source_powers[m] >= 0.0) || !std::isfinite(source_powers[m])) {
      throw InvalidArgument("source power must be finite and non-negative");
    }
    for (std::size_t n = 0; n < m; ++n) {
      if (source_doas[n] == source_doas[m]) throw InvalidArgument("source DOAs must be pairwise distinct");
    }
  }
  if (interference) {
    interference->validate();
    require_in_fov(grid, interference->theta_c, "interference DOA");
  }
}

CVector steering_vector(double theta, const ArrayGeometry& geometry) {
  if (!(std::abs(theta) < kPi / 2)) {
    throw InvalidArgument("steering angle " + std::to_string(rad2deg(theta)) + " deg outside (-90, 90) deg");
  }
  const double phase = 2.0 * kPi * ArrayGeometry::kSpacing * std::sin(theta);
  CVector a(geometry.num_sensors);
  for (int l = 0; l < geometry.num_sensors; ++l) a(l) = std::polar(1.0, phase * l);
  return a;
}

CMatrix steering_matrix(std::span<const double> thetas, const ArrayGeometry& geometry) {
  CMatrix A(geometry.num_sensors, static_cast<Index>(thetas.size()));
  for (std::size_t m = 0; m < thetas.size(); ++m) A.col(static_cast<Index>(m)) = steering_vector(thetas[m], geometry);
  return A;
}

CMatrix interference_covariance(const InterferenceParams& params, int num_sensors) {
  if (!(params.rho >= 0.0 && params.rho < 1.0)) throw InvalidArgument("interference rho must lie in [0, 1)");
  const double phase = kPi * std::sin(params.theta_c);
  CMatrix M(num_sensors, num_sensors);
  for (int m = 0; m < num_sensors; ++m) {
    for (int l = 0; l < num_sensors; ++l) {
      const int lag = m - l;
      // pow(0, 0) == 1 keeps the diagonal at one for rho == 0.
      M(m, l) = std::polar(std::pow(params.rho, std::abs(lag)), phase * lag);
    }
  }
  return M;
}

double sample_texture(double nu, Rng& rng) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw InvalidArgument("texture shape nu must be positive");
  double g = 0.0;
  if (nu >= 1.0) {
    g = gamma_unit_rate(nu, rng);
  } else {
    // Shape boost: Gamma(nu) = Gamma(nu + 1) * U^(1/nu).
    g = gamma_unit_rate(nu + 1.0, rng) * std::pow(open_uniform(rng), 1.0 / nu);
  }
  const double tau = g / nu;
  return tau > 0.0 ? tau : std::numeric_limits<double>::min();
}

cdouble sample_complex_normal(Rng& rng) {
  const double re = standard_normal(rng);
  const double im = standard_normal(rng);
  return {re * std::sqrt(0.5), im * std::sqrt(0.5)};
}

CMatrix sample_interference(const InterferenceParams& params, int num_sensors, int num_snapshots, Rng& rng,
                            std::vector<double>* taus) {
  params.validate();
  CMatrix M = interference_covariance(params, num_sensors);
  Eigen::LLT<CMatrix> llt(M);
  if (llt.info() != Eigen::Success) {
    M.diagonal().array() += 1e-12;
    llt.compute(M);
    if (llt.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(interference_covariance(params, num_sensors));
      const auto& ev = eig.eigenvalues();
      std::ostringstream msg;
      msg << "speckle covariance is not positive definite (rho=" << params.rho
          << ", eigenvalue range [" << ev.minCoeff() << ", " << ev.maxCoeff() << "])";
      throw NumericalError(msg.str());
    }
  }
  const CMatrix factor = llt.matrixL();
  const double sigma_c = std::sqrt(power_from_db(params.inr_db, 1.0));
  if (taus) taus->assign(static_cast<std::size_t>(num_snapshots), 0.0);

  CMatrix out(num_sensors, num_snapshots);
  CVector w(num_sensors);
  for (int k = 0; k < num_snapshots; ++k) {
    const double tau = sample_texture(params.nu, rng);
    if (taus) (*taus)[static_cast<std::size_t>(k)] = tau;
    for (int l = 0; l < num_sensors; ++l) w(l) = sample_complex_normal(rng);
    out.col(k) = (sigma_c * std::sqrt(tau)) * (factor * w);
  }
  return out;
}

double power_from_db(double level_db, double reference_power) {
  if (!(reference_power > 0.0)) throw InvalidArgument("reference power must be positive");
  return reference_power * std::pow(10.0, level_db / 10.0);
}

SnapshotExample generate_example(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int L = config.geometry.num_sensors;
  const int K = config.num_snapshots;
  const auto M = static_cast<Index>(config.source_doas.size());

  SnapshotExample ex;
  ex.meta = config;
  ex.X = CMatrix::Zero(L, K);

  if (M > 0) {
    const CMatrix A = steering_matrix(config.source_doas, config.geometry);
    CMatrix S(M, K);
    for (int k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m) {
        S(m, k) = std::sqrt(config.source_powers[static_cast<std::size_t>(m)]) * sample_complex_normal(rng);
      }
    }
    ex.X.noalias() += A * S;
  }
  if (config.interference) {
    InterferenceParams p = *config.interference;
    // sample_interference scales relative to unit noise power.
    p.inr_db += 10.0 * std::log10(config.noise_power);
    ex.X += sample_interference(p, L, K, rng);
  }
  const double sigma_n = std::sqrt(config.noise_power);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) ex.X(l, k) += sigma_n * sample_complex_normal(rng);
  }

  const auto d = static_cast<std::size_t>(config.grid.size());
  ex.y.assign(d, 0);
  ex.occupied_mask.assign(d, 0);
  for (double theta : config.source_doas) {
    const auto i = static_cast<std::size_t>(config.grid.nearest_index(theta));
    ex.y[i] = 1;
    ex.occupied_mask[i] = 1;
  }
  if (config.interference) {
    ex.occupied_mask[static_cast<std::size_t>(config.grid.nearest_index(config.interference->theta_c))] = 1;
  }
  return ex;
}

void TrainingSetPolicy::validate() const {
  geometry.validate();
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0, 1]");
  };
  if (num_snapshots < 1) throw InvalidArgument("num_snapshots must be positive");
  if (max_sources < 1) throw InvalidArgument("max_sources must be at least 1");
  if (static_cast<Index>(max_sources) * 2 > grid.size()) throw InvalidArgument("max_sources too large for grid");
  unit(interference_free_fraction, "interference_free_fraction");
  unit(near_interference_fraction, "near_interference_fraction");
  if (!(near_halfwidth > 0.0)) throw InvalidArgument("near_halfwidth must be positive");
  if (!(rho_min >= 0.0 && rho_min <= rho_max && rho_max < 1.0)) throw InvalidArgument("bad rho range");
  if (!(nu_min > 0.0 && nu_min <= nu_max)) throw InvalidArgument("bad nu range");
  if (!(inr_min_db <= inr_max_db)) throw InvalidArgument("bad INR range");
  if (!(level_min_db <= level_max_db)) throw InvalidArgument("bad SIR/SNR range");
  if (!(noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
}

DrawnScenario draw_scenario(const TrainingSetPolicy& policy, Rng& rng) {
  DrawnScenario out;
  ScenarioConfig& cfg = out.config;
  cfg.geometry = policy.geometry;
  cfg.num_snapshots = policy.num_snapshots;
  cfg.grid = policy.grid;
  cfg.noise_power = policy.noise_power;

  std::uniform_int_distribution<int> count_dist(1, policy.max_sources);
  const int M = count_dist(rng);

  const bool with_interference = uniform(rng, 0.0, 1.0) >= policy.interference_free_fraction;
  double lo = policy.grid.fov_min();
  double hi = policy.grid.fov_max();
  out.kind = ScenarioKind::kInterferenceFree;
  if (with_interference) {
    InterferenceParams ip;
    ip.theta_c = uniform(rng, policy.grid.fov_min(), policy.grid.fov_max());
    ip.rho = uniform(rng, policy.rho_min, policy.rho_max);
    ip.nu = uniform(rng, policy.nu_min, policy.nu_max);
    ip.inr_db = uniform(rng, policy.inr_min_db, policy.inr_max_db);
    cfg.interference = ip;
    out.kind = ScenarioKind::kUniform;
    if (uniform(rng, 0.0, 1.0) < policy.near_interference_fraction) {
      out.kind = ScenarioKind::kNearInterference;
      lo = std::max(lo, ip.theta_c - policy.near_halfwidth);
      hi = std::min(hi, ip.theta_c + policy.near_halfwidth);
    }
  }

  // Re-draw until all pairwise separations reach one grid step.
  const double min_sep = policy.grid.resolution();
  for (int attempt = 0;; ++attempt) {
    cfg.source_doas.clear();
    for (int m = 0; m < M; ++m) cfg.source_doas.push_back(uniform(rng, lo, hi));
    bool ok = true;
    for (int a = 0; a < M && ok; ++a) {
      for (int b = 0; b < a && ok; ++b) ok = std::abs(cfg.source_doas[a] - cfg.source_doas[b]) >= min_sep;
    }
    if (ok) break;
    if (attempt > 10000) throw InvalidArgument("cannot place distinct sources in the sampling interval");
  }

  const double reference = cfg.interference ? cfg.interference_power() : cfg.noise_power;
  for (int m = 0; m < M; ++m) {
    cfg.source_powers.push_back(power_from_db(uniform(rng, policy.level_min_db, policy.level_max_db), reference));
  }
  cfg.seed = rng();
  return out;
}

std::vector<SnapshotExample> make_training_batch(const TrainingSetPolicy& policy, std::size_t n,
                                                 std::uint64_t seed) {
  policy.validate();
  std::vector<SnapshotExample> out(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(i)});
    out[static_cast<std::size_t>(i)] = generate_example(draw_scenario(policy, rng).config);
  }
  return out;
}

ScenarioConfig scenario_from_config(const KeyValueConfig& cfg) {
  ScenarioConfig s;
  s.geometry.num_sensors = static_cast<int>(cfg.get_int("num_sensors", 16));
  s.num_snapshots = static_cast<int>(cfg.get_int("num_snapshots", 16));
  s.grid = AngularGrid::from_degrees(cfg.get_double("fov_min_deg", -60.0), cfg.get_double("fov_max_deg", 60.0),
                                     cfg.get_double("resolution_deg", 1.0));
  s.noise_power = cfg.get_double("noise_power", 1.0);
  s.seed = cfg.get_uint64("seed", 0);
  for (double deg : cfg.get_doubles("source_doas_deg", {})) s.source_doas.push_back(deg2rad(deg));

  if (cfg.get_bool("interference", cfg.has("theta_c_deg"))) {
    InterferenceParams ip;
    ip.nu = cfg.get_double("nu", ip.nu);
    ip.rho = cfg.get_double("rho", ip.rho);
    ip.theta_c = deg2rad(cfg.get_double("theta_c_deg", 0.0));
    ip.inr_db = cfg.get_double("inr_db", ip.inr_db);
    s.interference = ip;
  }
  const std::size_t M = s.source_doas.size();
  std::vector<double> levels;
  double reference = s.noise_power;
  if (cfg.has("source_sir_db")) {
    if (!s.interference) throw ConfigError(cfg.source() + ": source_sir_db requires interference");
    levels = cfg.get_doubles("source_sir_db");
    reference = s.interference_power();
  } else {
    levels = cfg.get_doubles("source_snr_db", std::vector<double>(M, 0.0));
  }
  if (levels.size() == 1 && M > 1) levels.assign(M, levels.front());
  if (levels.size() != M) throw ConfigError(cfg.source() + ": one power level per source DOA required");
  for (double db : levels) s.source_powers.push_back(power_from_db(db, reference));
  s.validate();
  return s;
}

TrainingSetPolicy policy_from_config(const KeyValueConfig& cfg) {
  TrainingSetPolicy p;
  p.geometry.num_sensors = static_cast<int>(cfg.get_int("num_sensors", 16));
  p.num_snapshots = static_cast<int>(cfg.get_int("num_snapshots", 16));
  p.grid = AngularGrid::from_degrees(cfg.get_double("fov_min_deg", -60.0), cfg.get_double("fov_max_deg", 60.0),
                                     cfg.get_double("resolution_deg", 1.0));
  p.max_sources = static_cast<int>(cfg.get_int("max_sources", p.max_sources));
  p.noise_power = cfg.get_double("noise_power", p.noise_power);
  p.interference_free_fraction = cfg.get_double("interference_free_fraction", p.interference_free_fraction);
  p.near_interference_fraction = cfg.get_double("near_interference_fraction", p.near_interference_fraction);
  p.near_halfwidth = deg2rad(cfg.get_double("near_halfwidth_deg", rad2deg(p.near_halfwidth)));
  p.rho_min = cfg.get_double("rho_min", p.rho_min);
  p.rho_max = cfg.get_double("rho_max", p.rho_max);
  p.nu_min = cfg.get_double("nu_min", p.nu_min);
  p.nu_max = cfg.get_double("nu_max", p.nu_max);
  p.inr_min_db = cfg.get_double("inr_min_db", p.inr_min_db);
  p.inr_max_db = cfg.get_double("inr_max_db", p.inr_max_db);
  p.level_min_db = cfg.get_double("level_min_db", p.level_min_db);
  p.level_max_db = cfg.get_double("level_max_db", p.level_max_db);
  p.validate();
  return p;
}

}  // namespace dafc
