// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. The trend and suppression checks need the CI-profile
// checkpoints (models/ci/{dafc,fc}/best.ckpt by default).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "dafc/array_sim.hpp"
#include "dafc/baselines.hpp"
#include "dafc/config.hpp"
#include "dafc/dafc_net.hpp"
#include "dafc/error.hpp"
#include "dafc/experiments.hpp"
#include "dafc/manifest.hpp"
#include "dafc/metrics.hpp"
#include "dafc/training.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dafc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string str(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// Rows of a CSV file as column-name -> text maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  std::string line;
  std::getline(in, line);
  const auto header = split(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

Outcome parameter_counts() {
  const std::vector<std::size_t> table = {9536, 139904, 558336, 541248, 132368, 32964, 525312, 262400, 31097};
  const Network net = build_network(16, 16, 121);
  const Network fc = build_network(NetworkSpec::fc_baseline(16, 16, 121), 0);
  const bool stages = net.stage_parameter_counts() == table;
  const bool pass = stages && net.parameter_count() == 2233165 && fc.parameter_count() == 2787449;
  return {pass, str("dafc total %zu, stages %s, fc total %zu", net.parameter_count(), stages ? "match" : "differ",
                    fc.parameter_count())};
}

Outcome interference_fidelity() {
  InterferenceParams p;
  p.nu = 0.2;
  p.rho = 0.9;
  p.theta_c = 0.0;
  p.inr_db = 5.0;
  const int L = 16;
  const int total = 1'000'000;
  const int chunk = 10'000;
  Rng rng(20260301);
  CMatrix R = CMatrix::Zero(L, L);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> taus;
  for (int done = 0; done < total; done += chunk) {
    const CMatrix X = sample_interference(p, L, chunk, rng, &taus);
    R.noalias() += X * X.adjoint();
    for (double t : taus) {
      sum += t;
      sum_sq += t * t;
    }
  }
  R /= static_cast<double>(total);
  const CMatrix expected = power_from_db(p.inr_db, 1.0) * interference_covariance(p, L);
  double worst = 0.0;
  for (Index i = 0; i < L; ++i) {
    for (Index j = 0; j < L; ++j) worst = std::max(worst, std::abs(R(i, j) - expected(i, j)) / std::abs(expected(i, j)));
  }
  const double n = total;
  const double mean = sum / n;
  const double var = (sum_sq - n * mean * mean) / (n - 1.0);
  const bool pass = worst < 0.02 && std::abs(mean - 1.0) <= 0.01 && std::abs(var - 1.0 / p.nu) <= 0.05 / p.nu;
  return {pass, str("max entrywise rel. error %.4f, E[tau] %.4f, Var[tau] %.4f (target %.1f)", worst, mean, var,
                    1.0 / p.nu)};
}

Outcome gradient_check() {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0, uncovered = 0;
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    const auto r = oracle::finite_difference_check(4, 4, 9, 1000 + draw, 2);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
    uncovered += r.uncovered.size();
  }
  return {worst < 1e-6 && uncovered == 0,
          str("max relative error %.3g over %zu layer directions in 10 draws (%zu discarded at ReLU kinks, "
              "%zu layer checks without a direction)",
              worst, checked, skipped, uncovered)};
}

Outcome mvdr_sanity() {
  const AngularGrid grid;
  ArrayGeometry geo;
  SampleCovariance identity{CMatrix::Identity(16, 16), 16};
  const auto flat = mvdr_spectrum(identity, grid, 0.0, geo);
  double flat_err = 0.0;
  for (double v : flat) flat_err = std::max(flat_err, std::abs(v - 1.0 / 16.0));

  const int trials = 1000;
  int hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (int t = 0; t < trials; ++t) {
    Rng rng(stream_seed(404, {static_cast<std::uint64_t>(t)}));
    ScenarioConfig s;
    s.num_snapshots = 256;
    s.source_doas = {deg2rad(std::uniform_real_distribution<double>(-55.0, 55.0)(rng))};
    s.source_powers = {power_from_db(20.0, 1.0)};
    s.seed = rng();
    const SnapshotExample ex = generate_example(s);
    const auto cov = sample_covariance(ex.X);
    const auto spec = mvdr_spectrum(cov, grid, default_loading(cov), geo);
    const auto top = std::max_element(spec.begin(), spec.end()) - spec.begin();
    if (std::abs(grid.point(top) - s.source_doas[0]) <= deg2rad(1.0)) ++hits;
  }
  const double rate = hits / static_cast<double>(trials);
  return {flat_err < 1e-15 && rate >= 0.99,
          str("identity spectrum max |P-1/L| %.2g; argmax within 1 deg in %.1f%% of %d trials", flat_err, 100 * rate,
              trials)};
}

Outcome metric_oracles() {
  Rng rng(77);
  std::uniform_int_distribution<int> size(0, 6);
  std::uniform_real_distribution<double> angle(-kPi / 3, kPi / 3);
  int mismatches = 0;
  for (int i = 0; i < 10'000; ++i) {
    std::vector<double> a(static_cast<std::size_t>(size(rng))), b(static_cast<std::size_t>(size(rng)));
    for (double& v : a) v = angle(rng);
    for (double& v : b) v = angle(rng);
    if (hausdorff(a, b) != oracle::hausdorff_brute(a, b, kEmptySetPenalty)) ++mismatches;
  }
  const bool hand = oracle::metric_hand_cases();
  return {mismatches == 0 && hand,
          str("%d/10000 Hausdorff mismatches; hand cases %s", mismatches, hand ? "exact" : "differ")};
}

Outcome mdl_behaviour() {
  const int trials = 1000;
  int zero = 0, one = 0;
#pragma omp parallel for reduction(+ : zero, one) schedule(static)
  for (int t = 0; t < trials; ++t) {
    ScenarioConfig s;
    s.geometry.num_sensors = 8;
    s.num_snapshots = 10'000;
    s.seed = stream_seed(505, {0, static_cast<std::uint64_t>(t)});
    const SnapshotExample noise = generate_example(s);
    if (enumerate_mdl_aic(sample_covariance(noise.X), s.num_snapshots, InfoCriterion::kMdl) == 0) ++zero;
    Rng rng(stream_seed(505, {1, static_cast<std::uint64_t>(t)}));
    s.source_doas = {deg2rad(std::uniform_real_distribution<double>(-55.0, 55.0)(rng))};
    s.source_powers = {power_from_db(20.0, 1.0)};
    s.seed = rng();
    const SnapshotExample src = generate_example(s);
    if (enumerate_mdl_aic(sample_covariance(src.X), s.num_snapshots, InfoCriterion::kMdl) == 1) ++one;
  }
  const double a = zero / static_cast<double>(trials), b = one / static_cast<double>(trials);
  return {a >= 0.99 && b >= 0.99, str("noise only: M=0 in %.1f%%; one 20 dB source: M=1 in %.1f%%", 100 * a, 100 * b)};
}

struct Models {
  fs::path dafc;
  fs::path fc;
};

Outcome trend_check(const Models& m, const fs::path& work) {
  if (!fs::exists(m.dafc) || !fs::exists(m.fc)) {
    return {false, "missing checkpoint " + (fs::exists(m.dafc) ? m.fc : m.dafc).string()};
  }
  KeyValueConfig cfg;
  cfg.set("estimators", "dafc, fc, mvdr");
  cfg.set("dafc_checkpoint", m.dafc.string());
  cfg.set("fc_checkpoint", m.fc.string());
  cfg.set("variants", "equal");
  cfg.set("sir_db", "-5");
  cfg.set("dtheta_deg", "12");
  cfg.set("trials", "500");
  cfg.set("seed", "2026");
  const fs::path out = work / "trend";
  run_experiment("eval-two", cfg, out);
  std::map<std::string, double> p;
  for (const auto& row : read_csv(out / "two_source.csv")) p[row.at("estimator")] = std::stod(row.at("p_res"));
  const bool pass = p["dafc"] >= p["mvdr"] + 0.15 && p["dafc"] > p["fc"];
  return {pass, str("P_res dafc %.3f, fc %.3f, mvdr %.3f (500 trials)", p["dafc"], p["fc"], p["mvdr"])};
}

Outcome suppression(const Models& m, const fs::path& work) {
  if (!fs::exists(m.dafc)) return {false, "missing checkpoint " + m.dafc.string()};
  KeyValueConfig cfg;
  cfg.set("estimators", "dafc");
  cfg.set("dafc_checkpoint", m.dafc.string());
  cfg.set("sir_db", "0");
  cfg.set("dtheta_c_deg", "20");
  cfg.set("rmsd_sir_db", "0");
  cfg.set("rmsd_dtheta_c_deg", "20");
  cfg.set("trials", "1");
  cfg.set("spectrum_trials", "2000");
  cfg.set("spectrum_sir_db", "0");
  cfg.set("spectrum_dtheta_c_deg", "20");
  cfg.set("seed", "2027");
  const fs::path out = work / "suppression";
  run_experiment("eval-single", cfg, out);
  const AngularGrid grid;
  const Index src = grid.nearest_index(deg2rad(0.55));
  const Index intf = grid.nearest_index(deg2rad(20.55));
  const auto rows = read_csv(out / "spectrum_single.csv");
  const double at_src = std::stod(rows.at(static_cast<std::size_t>(src)).at("dafc_mean"));
  const double at_intf = std::stod(rows.at(static_cast<std::size_t>(intf)).at("dafc_mean"));
  return {at_intf < 0.5 && at_src > 0.5,
          str("mean spectrum %.3f at interference (%.0f deg), %.3f at source (%.0f deg), 2000 trials", at_intf,
              grid.point_deg(intf), at_src, grid.point_deg(src))};
}

Outcome loss_schedule() {
  TrainingSetPolicy policy;
  const auto batch = make_training_batch(policy, 256, 99);
  LossWeightState s;
  s.betas = kStandardBetas;
  std::tie(s.e0, s.e1) = init_weight_factors(batch);
  bool increasing = true, ratio_down = true;
  double e1 = s.e1, ratio = s.w_occupied() / s.w_else();
  for (int l = 1; l <= s.num_updates(); ++l) {
    std::tie(s.e0, s.e1) = update_weight_factors(s, l);
    s.updates_done = l;
    increasing = increasing && s.e1 > e1;
    ratio_down = ratio_down && s.w_occupied() / s.w_else() < ratio;
    e1 = s.e1;
    ratio = s.w_occupied() / s.w_else();
  }
  LossWeightState fixed;
  fixed.e0 = fixed.e1 = 1.0;
  bool exact = update_weight_factors(fixed, 3) == std::pair{1.0, 1.0};
  LossWeightState one;
  one.betas = {1.0};
  one.e0 = 0.97;
  one.e1 = 0.03;
  exact = exact && update_weight_factors(one, 1) == std::pair{1.0, 1.0};
  LossWeightState zero;
  zero.betas = {0.0};
  zero.e0 = 0.97;
  zero.e1 = 0.03;
  exact = exact && update_weight_factors(zero, 1) == std::pair{0.97, 0.03};
  return {increasing && ratio_down && exact,
          str("e1 increasing: %s, weight ratio decreasing: %s, fixed point/identity cases: %s (final e1 %.4f)",
              increasing ? "yes" : "no", ratio_down ? "yes" : "no", exact ? "exact" : "differ", s.e1)};
}

Outcome determinism(const Models& m, const fs::path& work) {
  KeyValueConfig cfg;
  std::string estimators = "mvdr";
  if (fs::exists(m.dafc)) {
    estimators = "dafc, mvdr";
    cfg.set("dafc_checkpoint", m.dafc.string());
  }
  cfg.set("estimators", estimators);
  cfg.set("dtheta_deg", "5, 20");
  cfg.set("sir_db", "-10, 0, 10");
  cfg.set("trials", "100");
  cfg.set("spectrum_trials", "200");
  cfg.set("seed", "31337");
  const fs::path first = work / "determinism_a";
  const fs::path second = work / "determinism_b";
  run_experiment("eval-multi", cfg, first);
  const RunManifest manifest = make_manifest("eval-multi", cfg, first, 0.0, utc_timestamp());
  manifest.save(first / "manifest.json");
  const auto bad = rerun_from_manifest(RunManifest::load(first / "manifest.json"), second);
  return {bad.empty() && !manifest.outputs.empty(),
          str("%zu/%zu outputs byte-identical after single-threaded re-run (%s)", manifest.outputs.size() - bad.size(),
              manifest.outputs.size(), estimators.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string models = DAFC_MODELS_DIR;
  std::string work = (fs::temp_directory_path() / "dafc_acceptance").string();
  app.add_option("--models", models, "directory holding dafc/best.ckpt and fc/best.ckpt")->capture_default_str();
  app.add_option("--work-dir", work, "scratch directory for experiment outputs")->capture_default_str();
  std::vector<std::size_t> only;
  app.add_option("--only", only, "run only these criteria (1-based)");
  CLI11_PARSE(app, argc, argv);

  const Models m{fs::path(models) / "dafc" / "best.ckpt", fs::path(models) / "fc" / "best.ckpt"};
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"parameter-count exactness", parameter_counts},
      {"interference-model fidelity", interference_fidelity},
      {"gradient correctness", gradient_check},
      {"MVDR sanity", mvdr_sanity},
      {"metric oracles", metric_oracles},
      {"MDL/AIC behaviour", mdl_behaviour},
      {"qualitative trend (two sources, 12 deg, SIR -5 dB)", [&] { return trend_check(m, work); }},
      {"interference suppression (mean spectrum)", [&] { return suppression(m, work); }},
      {"loss-schedule behaviour", loss_schedule},
      {"determinism (manifest re-run)", [&] { return determinism(m, work); }},
  };
  int failed = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  [%2zu] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%zu/%zu criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
