// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>

#include <omp.h>

#include "dafc/checkpoint.hpp"
#include "dafc/config.hpp"
#include "dafc/dataset_io.hpp"
#include "dafc/error.hpp"
#include "dafc/rng.hpp"

namespace dafc {

DoaEstimate Estimator::estimate(const CMatrix& X) const {
  const CMatrix* one[] = {&X};
  return estimate_from_spectrum(spectra(one).front());
}

NetworkEstimator::NetworkEstimator(std::string name, Network net, AngularGrid grid, double threshold)
    : name_(std::move(name)), net_(std::move(net)), grid_(std::move(grid)), threshold_(threshold) {
  if (net_.spec().grid_size != grid_.size()) {
    throw ConfigError("network '" + name_ + "' outputs " + std::to_string(net_.spec().grid_size) +
                      " grid points but the evaluation grid has " + std::to_string(grid_.size()));
  }
}

std::vector<std::vector<double>> NetworkEstimator::spectra(std::span<const CMatrix* const> inputs) const {
  const Matrix p = net_.predict(inputs);
  std::vector<std::vector<double>> out(inputs.size());
  for (Index b = 0; b < p.rows(); ++b) out[static_cast<std::size_t>(b)].assign(p.row(b).begin(), p.row(b).end());
  return out;
}

DoaEstimate NetworkEstimator::estimate_from_spectrum(std::span<const double> spectrum) const {
  return estimate_doas(SpatialSpectrum{{spectrum.begin(), spectrum.end()}, grid_}, threshold_);
}

MvdrEstimator::MvdrEstimator(AngularGrid grid, ArrayGeometry geometry, double peak_fraction)
    : grid_(std::move(grid)), geometry_(geometry), peak_fraction_(peak_fraction) {
  if (!(peak_fraction >= 0.0 && peak_fraction <= 1.0)) throw ConfigError("mvdr_peak_fraction must lie in [0, 1]");
}

std::vector<std::vector<double>> MvdrEstimator::spectra(std::span<const CMatrix* const> inputs) const {
  std::vector<std::vector<double>> out(inputs.size());
  const auto n = static_cast<std::ptrdiff_t>(inputs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const SampleCovariance cov = sample_covariance(*inputs[static_cast<std::size_t>(i)]);
    out[static_cast<std::size_t>(i)] = mvdr_spectrum(cov, grid_, default_loading(cov), geometry_);
  }
  return out;
}

DoaEstimate MvdrEstimator::estimate_from_spectrum(std::span<const double> spectrum) const {
  return mvdr_estimate(spectrum, grid_, peak_fraction_);
}

std::vector<double> MvdrEstimator::display_spectrum(std::vector<double> spectrum) const {
  const double top = *std::max_element(spectrum.begin(), spectrum.end());
  for (double& v : spectrum) v /= top;
  return spectrum;
}

MeanSe mean_se(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of an empty sample");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

MeanSe rmsd_se(std::span<const EvalRecord> records, double empty_penalty) {
  std::vector<double> sq;
  sq.reserve(records.size());
  for (const auto& r : records) {
    const double d = record_distance(r, empty_penalty);
    sq.push_back(d * d);
  }
  const MeanSe m = mean_se(sq);
  const double root = std::sqrt(m.mean);
  return {root, root > 0.0 ? m.se / (2.0 * root) : 0.0};
}

MeanSe p_res_se(std::span<const EvalRecord> records) {
  const double p = p_res(records);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(records.size()))};
}

namespace {

namespace fs = std::filesystem;

// Per-command seed-path tags keep the trial streams of different
// experiments apart even under one base seed.
enum : std::uint64_t {
  kTagSingle = 11,
  kTagSingleSir = 12,
  kTagTwo = 21,
  kTagMulti = 31,
  kTagEnum = 41,
  kTagAblation = 51,
  kTagSpectrum = 61,
  kTagData = 71,
};

constexpr std::size_t kChunk = 64;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path), path_(path) {
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

// Settings shared by every evaluation command.
struct EvalEnv {
  ArrayGeometry geometry;
  int num_snapshots = 16;
  AngularGrid grid;
  double noise_power = 1.0;
  InterferenceParams interference;
  int trials = 500;
  std::uint64_t seed = 1;
  double empty_penalty = kEmptySetPenalty;
  double mvdr_peak_fraction = kMvdrPeakFraction;
  double threshold = 0.5;
  std::vector<std::string> estimators;
  std::map<std::string, std::string> checkpoints;  // config key -> path
};

EvalEnv parse_env(const KeyValueConfig& cfg, const std::vector<std::string>& default_estimators) {
  EvalEnv e;
  e.geometry.num_sensors = static_cast<int>(cfg.get_int("num_sensors", 16));
  e.num_snapshots = static_cast<int>(cfg.get_int("num_snapshots", 16));
  e.grid = AngularGrid::from_degrees(cfg.get_double("fov_min_deg", -60.0), cfg.get_double("fov_max_deg", 60.0),
                                     cfg.get_double("resolution_deg", 1.0));
  e.noise_power = cfg.get_double("noise_power", 1.0);
  e.interference.nu = cfg.get_double("nu", 0.2);
  e.interference.rho = cfg.get_double("rho", 0.9);
  e.interference.inr_db = cfg.get_double("inr_db", 5.0);
  e.trials = static_cast<int>(cfg.get_int("trials", 500));
  e.seed = cfg.get_uint64("seed", 1);
  e.empty_penalty = deg2rad(cfg.get_double("empty_penalty_deg", 120.0));
  e.mvdr_peak_fraction = cfg.get_double("mvdr_peak_fraction", kMvdrPeakFraction);
  e.threshold = cfg.get_double("threshold", 0.5);
  e.estimators = cfg.get_strings("estimators", default_estimators);
  for (const auto& [key, value] : cfg.entries()) {
    if (key.find("_checkpoint") != std::string::npos) e.checkpoints[key] = cfg.get_string(key);
  }
  e.geometry.validate();
  e.interference.validate();
  if (e.trials < 1) throw ConfigError(cfg.source() + ": key 'trials' must be at least 1");
  if (e.num_snapshots < 1) throw ConfigError(cfg.source() + ": key 'num_snapshots' must be at least 1");
  if (e.estimators.empty()) throw ConfigError(cfg.source() + ": key 'estimators' is empty");
  return e;
}

Network load_network_for(const EvalEnv& env, const std::string& name, int K) {
  std::string key = name + "_checkpoint_k" + std::to_string(K);
  if (!env.checkpoints.contains(key) && K == env.num_snapshots) key = name + "_checkpoint";
  const auto it = env.checkpoints.find(key);
  if (it == env.checkpoints.end()) {
    throw ConfigError("estimator '" + name + "' needs a checkpoint: set '" + key + "' (or pass --checkpoint " + name +
                      "=PATH)");
  }
  if (!fs::exists(it->second)) throw ConfigError("checkpoint '" + it->second + "' for '" + key + "' does not exist");
  Network net = load_checkpoint(it->second);
  const NetworkSpec& s = net.spec();
  if (s.num_snapshots != K || s.num_sensors != env.geometry.num_sensors || s.grid_size != env.grid.size()) {
    throw ConfigError("checkpoint '" + it->second + "' was built for K=" + std::to_string(s.num_snapshots) +
                      ", L=" + std::to_string(s.num_sensors) + ", d=" + std::to_string(s.grid_size) +
                      " but the experiment uses K=" + std::to_string(K) + ", L=" +
                      std::to_string(env.geometry.num_sensors) + ", d=" + std::to_string(env.grid.size()));
  }
  return net;
}

std::vector<std::unique_ptr<Estimator>> make_estimators(const EvalEnv& env, const std::vector<std::string>& names,
                                                        int K) {
  std::vector<std::unique_ptr<Estimator>> out;
  for (const auto& name : names) {
    if (name == "mvdr") {
      out.push_back(std::make_unique<MvdrEstimator>(env.grid, env.geometry, env.mvdr_peak_fraction));
    } else if (name == "dafc" || name == "fc") {
      Network net = load_network_for(env, name, K);
      const Architecture want = name == "dafc" ? Architecture::kDafc : Architecture::kFc;
      if (net.spec().arch != want) {
        throw ConfigError("checkpoint given for '" + name + "' holds a " +
                          std::string(architecture_name(net.spec().arch)) + " network");
      }
      out.push_back(std::make_unique<NetworkEstimator>(name, std::move(net), env.grid, env.threshold));
    } else {
      throw ConfigError("unknown estimator '" + name + "' (expected dafc, fc or mvdr)");
    }
  }
  return out;
}

// Builds the scenario of one trial from its private stream.
using TrialMaker = std::function<ScenarioConfig(Rng&)>;

ScenarioConfig base_scenario(const EvalEnv& env, int K) {
  ScenarioConfig s;
  s.geometry = env.geometry;
  s.num_snapshots = K;
  s.grid = env.grid;
  s.noise_power = env.noise_power;
  return s;
}

double interference_power(const EvalEnv& env) {
  return env.noise_power * std::pow(10.0, env.interference.inr_db / 10.0);
}

// Sources at `doas` with per-source SIR levels against the configured
// interference at theta_c.
ScenarioConfig interference_scenario(const EvalEnv& env, int K, std::vector<double> doas, std::vector<double> sir_db,
                                     double theta_c) {
  ScenarioConfig s = base_scenario(env, K);
  InterferenceParams ip = env.interference;
  ip.theta_c = theta_c;
  s.interference = ip;
  s.source_doas = std::move(doas);
  for (double level : sir_db) s.source_powers.push_back(power_from_db(level, interference_power(env)));
  return s;
}

ScenarioConfig awgn_scenario(const EvalEnv& env, int K, std::vector<double> doas, std::vector<double> snr_db) {
  ScenarioConfig s = base_scenario(env, K);
  s.source_doas = std::move(doas);
  for (double level : snr_db) s.source_powers.push_back(power_from_db(level, env.noise_power));
  return s;
}

SnapshotExample make_trial(const TrialMaker& maker, std::uint64_t stream) {
  Rng rng(stream);
  ScenarioConfig cfg = maker(rng);
  cfg.seed = rng();
  return generate_example(cfg);
}

std::vector<SnapshotExample> make_chunk(const TrialMaker& maker, std::uint64_t seed,
                                        std::initializer_list<std::uint64_t> path, std::size_t begin,
                                        std::size_t count) {
  std::vector<SnapshotExample> out(count);
  std::vector<std::uint64_t> base(path);
  const std::uint64_t prefix = [&] {
    std::uint64_t s = seed;
    for (auto p : base) s = stream_seed(s, {p});
    return s;
  }();
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        make_trial(maker, stream_seed(prefix, {static_cast<std::uint64_t>(begin + static_cast<std::size_t>(i))}));
  }
  return out;
}

std::vector<const CMatrix*> inputs_of(const std::vector<SnapshotExample>& chunk) {
  std::vector<const CMatrix*> out;
  out.reserve(chunk.size());
  for (const auto& ex : chunk) out.push_back(&ex.X);
  return out;
}

// Records of every estimator over `trials` trials of one sweep point.
std::vector<std::vector<EvalRecord>> evaluate_point(const std::vector<std::unique_ptr<Estimator>>& estimators,
                                                    const TrialMaker& maker, int trials, std::uint64_t seed,
                                                    std::initializer_list<std::uint64_t> path) {
  std::vector<std::vector<EvalRecord>> records(estimators.size());
  for (auto& r : records) r.reserve(static_cast<std::size_t>(trials));
  for (std::size_t begin = 0; begin < static_cast<std::size_t>(trials); begin += kChunk) {
    const std::size_t n = std::min(kChunk, static_cast<std::size_t>(trials) - begin);
    const auto chunk = make_chunk(maker, seed, path, begin, n);
    const auto inputs = inputs_of(chunk);
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      const auto spectra = estimators[e]->spectra(inputs);
      for (std::size_t i = 0; i < n; ++i) {
        records[e].push_back({chunk[i].meta.source_doas, estimators[e]->estimate_from_spectrum(spectra[i]).angles});
      }
    }
  }
  return records;
}

// Mean and standard deviation of the display spectrum of every estimator.
void dump_spectrum(const fs::path& path, const std::vector<std::unique_ptr<Estimator>>& estimators,
                   const AngularGrid& grid, const TrialMaker& maker, int trials, std::uint64_t seed,
                   std::initializer_list<std::uint64_t> tag) {
  const auto d = static_cast<std::size_t>(grid.size());
  std::vector<std::vector<double>> sum(estimators.size(), std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> sum_sq = sum;
  for (std::size_t begin = 0; begin < static_cast<std::size_t>(trials); begin += kChunk) {
    const std::size_t n = std::min(kChunk, static_cast<std::size_t>(trials) - begin);
    const auto chunk = make_chunk(maker, seed, tag, begin, n);
    const auto inputs = inputs_of(chunk);
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      auto spectra = estimators[e]->spectra(inputs);
      for (auto& s : spectra) {
        const auto shown = estimators[e]->display_spectrum(std::move(s));
        for (std::size_t i = 0; i < d; ++i) {
          sum[e][i] += shown[i];
          sum_sq[e][i] += shown[i] * shown[i];
        }
      }
    }
  }
  std::vector<std::string> header = {"angle_deg"};
  for (const auto& est : estimators) {
    header.push_back(est->name() + "_mean");
    header.push_back(est->name() + "_std");
  }
  Csv csv(path, header);
  const double n = static_cast<double>(trials);
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<std::string> row = {fmt(grid.point_deg(static_cast<Index>(i)))};
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      const double mean = sum[e][i] / n;
      const double var = std::max(0.0, sum_sq[e][i] / n - mean * mean);
      row.push_back(fmt(mean));
      row.push_back(fmt(std::sqrt(var)));
    }
    csv.row(row);
  }
}

std::vector<std::string> metric_cells(std::span<const EvalRecord> records, double empty_penalty) {
  const MeanSe p = p_res_se(records);
  const MeanSe r = rmsd_se(records, empty_penalty);
  return {fmt(p.mean), fmt(p.se), fmt(rad2deg(r.mean)), fmt(rad2deg(r.se)), std::to_string(records.size())};
}

const std::vector<std::string> kMetricHeader = {"p_res", "p_res_se", "rmsd_deg", "rmsd_se_deg", "n_trials"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void print_resolved(const KeyValueConfig& cfg) { std::cout << cfg.dump_resolved(); }

const std::vector<double> kDefaultSirSweep = {-10.0, -7.5, -5.0, -2.5, 0.0, 2.5, 5.0, 7.5, 10.0};
const std::vector<double> kDefaultDthetaC = {1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30};
const std::vector<double> kDefaultDtheta = {2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 25, 30};

// ---------------------------------------------------------------- eval-single

void run_single(const KeyValueConfig& cfg, const fs::path& out, bool dry_run) {
  const EvalEnv env = parse_env(cfg, {"dafc", "fc", "mvdr"});
  const double source = deg2rad(cfg.get_double("source_deg", 0.55));
  const auto sir_curves = cfg.get_doubles("sir_db", {-5.0, 0.0});
  const auto dthetas = cfg.get_doubles("dtheta_c_deg", kDefaultDthetaC);
  const auto rmsd_sirs = cfg.get_doubles("rmsd_sir_db", kDefaultSirSweep);
  const auto rmsd_dthetas = cfg.get_doubles("rmsd_dtheta_c_deg", {5.0, 30.0});
  const int spectrum_trials = static_cast<int>(cfg.get_int("spectrum_trials", 0));
  const double spectrum_sir = cfg.get_double("spectrum_sir_db", 0.0);
  const double spectrum_dtheta = cfg.get_double("spectrum_dtheta_c_deg", 20.0);
  cfg.reject_unused();
  if (dry_run) return print_resolved(cfg);

  const auto estimators = make_estimators(env, env.estimators, env.num_snapshots);
  auto maker_for = [&](double sir, double dtheta_c) -> TrialMaker {
    return [&env, source, sir, dtheta_c](Rng&) {
      return interference_scenario(env, env.num_snapshots, {source}, {sir}, source + deg2rad(dtheta_c));
    };
  };

  std::vector<std::vector<std::string>> rows;
  for (std::size_t c = 0; c < sir_curves.size(); ++c) {
    for (std::size_t p = 0; p < dthetas.size(); ++p) {
      const auto rec = evaluate_point(estimators, maker_for(sir_curves[c], dthetas[p]), env.trials, env.seed,
                                      {kTagSingle, c, p});
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        rows.push_back(concat({estimators[e]->name(), fmt(sir_curves[c]), fmt(dthetas[p])},
                              metric_cells(rec[e], env.empty_penalty)));
      }
    }
  }
  Csv a(out / "single_vs_dtheta_c.csv", concat({"estimator", "sir_db", "dtheta_c_deg"}, kMetricHeader));
  for (const auto& r : rows) a.row(r);

  rows.clear();
  for (std::size_t c = 0; c < rmsd_dthetas.size(); ++c) {
    for (std::size_t p = 0; p < rmsd_sirs.size(); ++p) {
      const auto rec = evaluate_point(estimators, maker_for(rmsd_sirs[p], rmsd_dthetas[c]), env.trials, env.seed,
                                      {kTagSingleSir, c, p});
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        rows.push_back(concat({estimators[e]->name(), fmt(rmsd_dthetas[c]), fmt(rmsd_sirs[p])},
                              metric_cells(rec[e], env.empty_penalty)));
      }
    }
  }
  Csv b(out / "single_vs_sir.csv", concat({"estimator", "dtheta_c_deg", "sir_db"}, kMetricHeader));
  for (const auto& r : rows) b.row(r);

  if (spectrum_trials > 0) {
    dump_spectrum(out / "spectrum_single.csv", estimators, env.grid, maker_for(spectrum_sir, spectrum_dtheta),
                  spectrum_trials, env.seed, {kTagSpectrum, kTagSingle});
  }
}

// ------------------------------------------------------------------- eval-two

void run_two(const KeyValueConfig& cfg, const fs::path& out, bool dry_run) {
  const EvalEnv env = parse_env(cfg, {"dafc", "fc", "mvdr"});
  const double theta_c = deg2rad(cfg.get_double("theta_c_deg", 0.55));
  const auto variants = cfg.get_strings("variants", {"equal", "unequal", "awgn"});
  const auto dthetas = cfg.get_doubles("dtheta_deg", kDefaultDtheta);
  const auto sirs = cfg.get_doubles("sir_db", {0.0, -5.0});
  const auto snrs = cfg.get_doubles("snr_db", {0.0, -5.0});
  const double offset = cfg.get_double("unequal_offset_db", 10.0);
  const auto snapshots = cfg.get_doubles("snapshots", {4, 8, 16, 32, 64});
  const double snapshots_dtheta = cfg.get_double("snapshots_dtheta_deg", 12.0);
  const int spectrum_trials = static_cast<int>(cfg.get_int("spectrum_trials", 0));
  const double spectrum_dtheta = cfg.get_double("spectrum_dtheta_deg", 12.0);
  const double spectrum_sir = cfg.get_double("spectrum_sir_db", -5.0);
  cfg.reject_unused();
  for (const auto& v : variants) {
    if (v != "equal" && v != "unequal" && v != "awgn" && v != "snapshots") {
      throw ConfigError(cfg.source() + ": key 'variants': unknown variant '" + v +
                        "' (expected equal, unequal, awgn, snapshots)");
    }
  }
  if (dry_run) return print_resolved(cfg);

  auto pair_at = [theta_c](double dtheta) {
    const double h = deg2rad(dtheta) / 2.0;
    return std::vector<double>{theta_c - h, theta_c + h};
  };
  auto maker = [&](const std::string& variant, double level, double dtheta, int K) -> TrialMaker {
    return [&env, variant, level, dtheta, K, theta_c, offset, pair_at](Rng&) {
      if (variant == "awgn") return awgn_scenario(env, K, pair_at(dtheta), {level, level});
      const double second = variant == "unequal" ? level + offset : level;
      return interference_scenario(env, K, pair_at(dtheta), {level, second}, theta_c);
    };
  };

  Csv csv(out / "two_source.csv",
          concat({"estimator", "variant", "level_db", "snapshots", "dtheta_deg"}, kMetricHeader));
  std::map<int, std::vector<std::unique_ptr<Estimator>>> by_k;
  auto estimators_for = [&](int K) -> const std::vector<std::unique_ptr<Estimator>>& {
    auto it = by_k.find(K);
    if (it == by_k.end()) it = by_k.emplace(K, make_estimators(env, env.estimators, K)).first;
    return it->second;
  };
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const std::string& variant = variants[v];
    const auto& levels = variant == "awgn" ? snrs : sirs;
    const bool k_sweep = variant == "snapshots";
    const std::vector<double> xs = k_sweep ? snapshots : dthetas;
    for (std::size_t c = 0; c < levels.size(); ++c) {
      for (std::size_t p = 0; p < xs.size(); ++p) {
        const int K = k_sweep ? static_cast<int>(xs[p]) : env.num_snapshots;
        const double dtheta = k_sweep ? snapshots_dtheta : xs[p];
        const auto& ests = estimators_for(K);
        const std::string vname = k_sweep ? "equal" : variant;
        const auto rec = evaluate_point(ests, maker(vname, levels[c], dtheta, K), env.trials, env.seed,
                                        {kTagTwo, v, c, p});
        for (std::size_t e = 0; e < ests.size(); ++e) {
          csv.row(concat({ests[e]->name(), variant, fmt(levels[c]), std::to_string(K), fmt(dtheta)},
                         metric_cells(rec[e], env.empty_penalty)));
        }
      }
    }
  }
  if (spectrum_trials > 0) {
    dump_spectrum(out / "spectrum_two.csv", estimators_for(env.num_snapshots), env.grid,
                  maker("equal", spectrum_sir, spectrum_dtheta, env.num_snapshots), spectrum_trials, env.seed,
                  {kTagSpectrum, kTagTwo});
  }
}

// ----------------------------------------------------------------- eval-multi

std::vector<double> offsets_doas(double theta_c, double dtheta, std::span<const double> offsets, int m) {
  std::vector<double> out;
  for (int i = 0; i < m; ++i) out.push_back(theta_c + offsets[static_cast<std::size_t>(i)] * dtheta);
  return out;
}

void run_multi(const KeyValueConfig& cfg, const fs::path& out, bool dry_run) {
  const EvalEnv env = parse_env(cfg, {"dafc", "fc", "mvdr"});
  const auto dthetas = cfg.get_doubles("dtheta_deg", {5.0, 20.0});
  const auto sirs = cfg.get_doubles("sir_db", kDefaultSirSweep);
  const double range = deg2rad(cfg.get_double("theta_c_range_deg", 15.0));
  const auto offsets = cfg.get_doubles("offsets", {-2.0, -1.0, 1.0, 2.0});
  const int spectrum_trials = static_cast<int>(cfg.get_int("spectrum_trials", 2000));
  const double spectrum_dtheta = cfg.get_double("spectrum_dtheta_deg", 20.0);
  const double spectrum_sir = cfg.get_double("spectrum_sir_db", 0.0);
  const double spectrum_theta_c = deg2rad(cfg.get_double("spectrum_theta_c_deg", 0.51));
  cfg.reject_unused();
  if (offsets.empty()) throw ConfigError(cfg.source() + ": key 'offsets' is empty");
  if (dry_run) return print_resolved(cfg);

  const auto estimators = make_estimators(env, env.estimators, env.num_snapshots);
  const int m = static_cast<int>(offsets.size());
  auto random_c = [&](double sir, double dtheta) -> TrialMaker {
    return [&env, &offsets, range, sir, dtheta, m](Rng& rng) {
      const double theta_c = std::uniform_real_distribution<double>(-range, range)(rng);
      return interference_scenario(env, env.num_snapshots, offsets_doas(theta_c, deg2rad(dtheta), offsets, m),
                                   std::vector<double>(static_cast<std::size_t>(m), sir), theta_c);
    };
  };
  Csv csv(out / "multi_source.csv", concat({"estimator", "dtheta_deg", "sir_db"}, kMetricHeader));
  for (std::size_t c = 0; c < dthetas.size(); ++c) {
    for (std::size_t p = 0; p < sirs.size(); ++p) {
      const auto rec = evaluate_point(estimators, random_c(sirs[p], dthetas[c]), env.trials, env.seed,
                                      {kTagMulti, c, p});
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        csv.row(concat({estimators[e]->name(), fmt(dthetas[c]), fmt(sirs[p])},
                       metric_cells(rec[e], env.empty_penalty)));
      }
    }
  }
  if (spectrum_trials > 0) {
    const TrialMaker fixed = [&env, &offsets, spectrum_theta_c, spectrum_dtheta, spectrum_sir, m](Rng&) {
      return interference_scenario(env, env.num_snapshots,
                                   offsets_doas(spectrum_theta_c, deg2rad(spectrum_dtheta), offsets, m),
                                   std::vector<double>(static_cast<std::size_t>(m), spectrum_sir), spectrum_theta_c);
    };
    dump_spectrum(out / "spectrum_multi.csv", estimators, env.grid, fixed, spectrum_trials, env.seed,
                  {kTagSpectrum, kTagMulti});
  }
}

// ------------------------------------------------------------------ eval-enum

void run_enum(const KeyValueConfig& cfg, const fs::path& out, bool dry_run) {
  const EvalEnv env = parse_env(cfg, {"dafc", "mdl", "aic"});
  const double dtheta = deg2rad(cfg.get_double("dtheta_deg", 15.0));
  const double sir = cfg.get_double("sir_db", 0.0);
  const double range = deg2rad(cfg.get_double("theta_c_range_deg", 15.0));
  // Selection order: the first M offsets give the DOAs of an M-source trial.
  const auto offsets = cfg.get_doubles("offsets", {1.0, -1.0, -2.0, 2.0});
  cfg.reject_unused();
  const int max_m = static_cast<int>(offsets.size());
  if (max_m < 1) throw ConfigError(cfg.source() + ": key 'offsets' is empty");
  if (dry_run) return print_resolved(cfg);

  std::vector<std::string> spectral;
  for (const auto& name : env.estimators) {
    if (name != "mdl" && name != "aic") spectral.push_back(name);
  }
  const auto estimators = make_estimators(env, spectral, env.num_snapshots);

  // predicted[method][M-1][trial]
  std::vector<std::vector<std::vector<int>>> predicted(env.estimators.size());
  for (int M = 1; M <= max_m; ++M) {
    const TrialMaker maker = [&env, &offsets, range, dtheta, sir, M](Rng& rng) {
      const double theta_c = std::uniform_real_distribution<double>(-range, range)(rng);
      return interference_scenario(env, env.num_snapshots, offsets_doas(theta_c, dtheta, offsets, M),
                                   std::vector<double>(static_cast<std::size_t>(M), sir), theta_c);
    };
    for (auto& p : predicted) p.emplace_back();
    for (std::size_t begin = 0; begin < static_cast<std::size_t>(env.trials); begin += kChunk) {
      const std::size_t n = std::min(kChunk, static_cast<std::size_t>(env.trials) - begin);
      const auto chunk = make_chunk(maker, env.seed, {kTagEnum, static_cast<std::uint64_t>(M)}, begin, n);
      const auto inputs = inputs_of(chunk);
      std::size_t spectral_index = 0;
      for (std::size_t e = 0; e < env.estimators.size(); ++e) {
        const std::string& name = env.estimators[e];
        auto& dst = predicted[e].back();
        if (name == "mdl" || name == "aic") {
          const InfoCriterion c = name == "mdl" ? InfoCriterion::kMdl : InfoCriterion::kAic;
          std::vector<int> counts(n);
          const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
          for (std::ptrdiff_t i = 0; i < nn; ++i) {
            const auto& X = chunk[static_cast<std::size_t>(i)].X;
            counts[static_cast<std::size_t>(i)] = enumerate_mdl_aic(sample_covariance(X), X.cols(), c);
          }
          dst.insert(dst.end(), counts.begin(), counts.end());
        } else {
          const Estimator& est = *estimators[spectral_index++];
          for (const auto& s : est.spectra(inputs)) {
            dst.push_back(static_cast<int>(est.estimate_from_spectrum(s).count()));
          }
        }
      }
    }
  }

  Csv records(out / "enumeration.csv", {"estimator", "trial", "true_M", "predicted_M"});
  for (std::size_t e = 0; e < env.estimators.size(); ++e) {
    int top = max_m + 1;
    for (const auto& row : predicted[e]) {
      for (int v : row) top = std::max(top, v);
    }
    ConfusionMatrix cm(max_m, top);
    for (int M = 1; M <= max_m; ++M) {
      const auto& row = predicted[e][static_cast<std::size_t>(M - 1)];
      for (std::size_t t = 0; t < row.size(); ++t) {
        cm.add(M, row[t]);
        records.row({env.estimators[e], std::to_string(t), std::to_string(M), std::to_string(row[t])});
      }
    }
    std::ofstream(out / ("confusion_" + env.estimators[e] + ".csv")) << cm.to_csv(false);
    std::ofstream(out / ("confusion_" + env.estimators[e] + "_freq.csv")) << cm.to_csv(true);
  }
}

// -------------------------------------------------------------- eval-ablation

void run_ablation(const KeyValueConfig& cfg, const fs::path& out, bool dry_run) {
  EvalEnv env = parse_env(cfg, {"dafc"});
  const auto sets = cfg.get_strings("beta_sets", {"b0", "standard", "b1"});
  const double source = deg2rad(cfg.get_double("source_deg", 0.55));
  const double sir = cfg.get_double("sir_db", -5.0);
  const auto dthetas = cfg.get_doubles("dtheta_c_deg", kDefaultDthetaC);
  const int guard = static_cast<int>(cfg.get_int("guard_points", 5));
  cfg.reject_unused();
  if (guard < 0) throw ConfigError(cfg.source() + ": key 'guard_points' must be non-negative");
  if (dry_run) return print_resolved(cfg);

  std::vector<std::unique_ptr<Estimator>> nets;
  for (const auto& set : sets) {
    Network net = load_network_for(env, set, env.num_snapshots);
    nets.push_back(std::make_unique<NetworkEstimator>(set, std::move(net), env.grid, env.threshold));
  }
  const Index src_idx = env.grid.nearest_index(source);
  Csv csv(out / "loss_weight_ablation.csv", {"beta_set", "dtheta_c_deg", "p1", "p1_se", "p0", "p0_se", "n_trials"});
  for (std::size_t p = 0; p < dthetas.size(); ++p) {
    const double dtheta_c = dthetas[p];
    const TrialMaker maker = [&env, source, sir, dtheta_c](Rng&) {
      return interference_scenario(env, env.num_snapshots, {source}, {sir}, source + deg2rad(dtheta_c));
    };
    std::vector<std::vector<double>> p1(nets.size()), p0(nets.size());
    for (std::size_t begin = 0; begin < static_cast<std::size_t>(env.trials); begin += kChunk) {
      const std::size_t n = std::min(kChunk, static_cast<std::size_t>(env.trials) - begin);
      const auto chunk = make_chunk(maker, env.seed, {kTagAblation, p}, begin, n);
      const auto inputs = inputs_of(chunk);
      for (std::size_t e = 0; e < nets.size(); ++e) {
        for (const auto& s : nets[e]->spectra(inputs)) {
          p1[e].push_back(s[static_cast<std::size_t>(src_idx)]);
          double best = 0.0;
          for (Index i = 0; i < env.grid.size(); ++i) {
            if (std::abs(i - src_idx) <= guard) continue;
            best = std::max(best, s[static_cast<std::size_t>(i)]);
          }
          p0[e].push_back(best);
        }
      }
    }
    for (std::size_t e = 0; e < nets.size(); ++e) {
      const MeanSe a = mean_se(p1[e]);
      const MeanSe b = mean_se(p0[e]);
      csv.row({sets[e], fmt(dtheta_c), fmt(a.mean), fmt(a.se), fmt(b.mean), fmt(b.se), std::to_string(env.trials)});
    }
  }
}

// ------------------------------------------------------------------- gen-data

void run_gen_data(const KeyValueConfig& cfg, const fs::path& out, bool dry_run) {
  const std::string source = cfg.get_string("source", "policy");
  const auto count = static_cast<std::size_t>(cfg.get_int("count", 1000));
  const std::uint64_t seed = cfg.get_uint64("seed", 1);
  const std::string file = cfg.get_string("output", "dataset.bin");
  if (count == 0) throw ConfigError(cfg.source() + ": key 'count' must be positive");
  std::vector<SnapshotExample> examples;
  if (source == "policy") {
    const TrainingSetPolicy policy = policy_from_config(cfg);
    cfg.reject_unused();
    if (dry_run) return print_resolved(cfg);
    examples = make_training_batch(policy, count, stream_seed(seed, {kTagData}));
  } else if (source == "scenario") {
    const ScenarioConfig scenario = scenario_from_config(cfg);
    cfg.reject_unused();
    if (dry_run) return print_resolved(cfg);
    examples.resize(count);
    const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      ScenarioConfig s = scenario;
      s.seed = stream_seed(seed, {kTagData, static_cast<std::uint64_t>(i)});
      examples[static_cast<std::size_t>(i)] = generate_example(s);
    }
  } else {
    throw ConfigError(cfg.source() + ": key 'source': expected policy or scenario, got '" + source + "'");
  }
  write_dataset(out / file, examples);
}

}  // namespace

const std::vector<std::string>& experiment_commands() {
  static const std::vector<std::string> names = {"eval-single", "eval-two",      "eval-multi",
                                                 "eval-enum",   "eval-ablation", "gen-data"};
  return names;
}

RunManifest make_manifest(const std::string& command, const KeyValueConfig& cfg, const std::filesystem::path& out_dir,
                          double wall_seconds, const std::string& started_utc) {
  RunManifest m;
  m.command = command;
  m.config_text = cfg.dump();
  m.config_hash = hex64(fnv1a64(m.config_text.data(), m.config_text.size()));
  m.seed = cfg.has("seed") ? cfg.get_uint64("seed", 0) : 0;
  m.threads = omp_get_max_threads();
  m.version = DAFC_VERSION;
  for (const auto& [key, value] : cfg.entries()) {
    if (key.find("_checkpoint") != std::string::npos) m.checkpoints.push_back(key + "=" + value);
  }
  m.started_utc = started_utc;
  m.wall_seconds = wall_seconds;
  m.collect_outputs(out_dir);
  return m;
}

std::vector<std::string> rerun_from_manifest(const RunManifest& m, const std::filesystem::path& out_dir) {
  if (m.command == "train") throw ConfigError("re-running training from a manifest is not supported");
  const KeyValueConfig cfg = KeyValueConfig::parse_string(m.config_text, "manifest:config");
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  try {
    run_experiment(m.command, cfg, out_dir);
  } catch (...) {
    omp_set_num_threads(threads);
    throw;
  }
  omp_set_num_threads(threads);
  std::vector<std::string> bad;
  for (const auto& o : m.outputs) {
    const fs::path p = out_dir / o.path;
    if (!fs::exists(p) || hex64(fnv1a64_file(p)) != o.fnv1a64) bad.push_back(o.path);
  }
  return bad;
}

void run_experiment(const std::string& command, const KeyValueConfig& cfg, const std::filesystem::path& out_dir,
                    bool dry_run) {
  if (!dry_run) std::filesystem::create_directories(out_dir);
  if (command == "eval-single") return run_single(cfg, out_dir, dry_run);
  if (command == "eval-two") return run_two(cfg, out_dir, dry_run);
  if (command == "eval-multi") return run_multi(cfg, out_dir, dry_run);
  if (command == "eval-enum") return run_enum(cfg, out_dir, dry_run);
  if (command == "eval-ablation") return run_ablation(cfg, out_dir, dry_run);
  if (command == "gen-data") return run_gen_data(cfg, out_dir, dry_run);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace dafc
