// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dafc/checkpoint.hpp"
#include "dafc/config.hpp"
#include "dafc/dataset_io.hpp"
#include "dafc/error.hpp"
#include "dafc/experiments.hpp"
#include "doctest.h"

using namespace dafc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dafc_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
  return out;
}

KeyValueConfig cfg_of(const std::string& text) { return KeyValueConfig::parse_string(text, "test.cfg"); }

}  // namespace

TEST_CASE("single-source sweep rows and schema") {
  const fs::path out = scratch("single");
  run_experiment("eval-single",
                 cfg_of("estimators = mvdr\nsir_db = -5, 0\ndtheta_c_deg = 5, 30\nrmsd_sir_db = 0, 10\n"
                        "rmsd_dtheta_c_deg = 30\ntrials = 40\nseed = 1\n"),
                 out);
  const auto a = lines(out / "single_vs_dtheta_c.csv");
  REQUIRE(a.size() == 1 + 2 * 2);
  CHECK(a[0] == "estimator,sir_db,dtheta_c_deg,p_res,p_res_se,rmsd_deg,rmsd_se_deg,n_trials");
  const auto b = lines(out / "single_vs_sir.csv");
  REQUIRE(b.size() == 1 + 2);
  CHECK(b[0] == "estimator,dtheta_c_deg,sir_db,p_res,p_res_se,rmsd_deg,rmsd_se_deg,n_trials");
  // Strong source, far interference: MVDR keeps the interference peak, so
  // its Hausdorff error sits near the 30 deg separation.
  const auto row = cells(b[2]);
  CHECK(row[2] == "10");
  CHECK(std::stod(row[5]) == doctest::Approx(30.0).epsilon(0.1));
  CHECK(row[7] == "40");
}

TEST_CASE("identical seeds give identical files") {
  const std::string text = "estimators = mvdr\nvariants = equal, unequal, awgn\ndtheta_deg = 4, 12\ntrials = 30\nseed = 5\n";
  const fs::path a = scratch("two_a"), b = scratch("two_b"), c = scratch("two_c");
  run_experiment("eval-two", cfg_of(text), a);
  run_experiment("eval-two", cfg_of(text), b);
  std::string other = text;
  other.replace(other.find("seed = 5"), 8, "seed = 6");
  run_experiment("eval-two", cfg_of(other), c);
  CHECK(slurp(a / "two_source.csv") == slurp(b / "two_source.csv"));
  CHECK(slurp(a / "two_source.csv") != slurp(c / "two_source.csv"));
  const auto rows = lines(a / "two_source.csv");
  CHECK(rows.size() == 1 + 3 * 2 * 2);
  CHECK(rows[0] == "estimator,variant,level_db,snapshots,dtheta_deg,p_res,p_res_se,rmsd_deg,rmsd_se_deg,n_trials");
}

TEST_CASE("multi-source spectrum dump") {
  const fs::path out = scratch("multi");
  run_experiment("eval-multi", cfg_of("estimators = mvdr\nsir_db = 0\ntrials = 20\nspectrum_trials = 50\n"), out);
  const auto spec = lines(out / "spectrum_multi.csv");
  REQUIRE(spec.size() == 1 + 121);
  CHECK(spec[0] == "angle_deg,mvdr_mean,mvdr_std");
  double top = 0.0;
  for (std::size_t i = 1; i < spec.size(); ++i) top = std::max(top, std::stod(cells(spec[i])[1]));
  CHECK(top <= 1.0);
  CHECK(lines(out / "multi_source.csv").size() == 1 + 2);
}

TEST_CASE("enumeration tables") {
  const fs::path out = scratch("enum");
  run_experiment("eval-enum", cfg_of("estimators = mdl, aic\ntrials = 25\n"), out);
  for (const char* name : {"mdl", "aic"}) {
    const auto t = lines(out / (std::string("confusion_") + name + ".csv"));
    REQUIRE(t.size() == 5);
    for (std::size_t r = 1; r < t.size(); ++r) {
      const auto c = cells(t[r]);
      long long sum = 0;
      for (std::size_t i = 1; i + 1 < c.size(); ++i) sum += std::stoll(c[i]);
      CHECK(sum == 25);
      CHECK(c.back() == "25");
    }
  }
  CHECK(lines(out / "enumeration.csv").size() == 1 + 2 * 4 * 25);
}

TEST_CASE("configuration errors") {
  const fs::path out = scratch("errors");
  CHECK_THROWS_AS(run_experiment("eval-single", cfg_of("estimators = dafc\n"), out), ConfigError);
  CHECK_THROWS_AS(run_experiment("eval-single", cfg_of("estimators = mvdr\ntrails = 3\n"), out), ConfigError);
  CHECK_THROWS_AS(run_experiment("eval-single", cfg_of("estimators = music\n"), out), ConfigError);
  CHECK_THROWS_AS(run_experiment("eval-two", cfg_of("variants = odd\n"), out), ConfigError);
  CHECK_THROWS_AS(run_experiment("eval-single", cfg_of("trials = 0\n"), out), ConfigError);
  CHECK_THROWS_AS(run_experiment("eval-fly", cfg_of(""), out), ConfigError);
  CHECK_THROWS_AS(
      run_experiment("eval-single", cfg_of("estimators = dafc\ndafc_checkpoint = /nonexistent.ckpt\n"), out),
      ConfigError);
  // A checkpoint built for other dimensions is refused.
  fs::create_directories(out);
  save_checkpoint(out / "k8.ckpt", build_network(NetworkSpec::fc_baseline(8, 16, 121), 1));
  CHECK_THROWS_AS(run_experiment("eval-single",
                                 cfg_of("estimators = fc\nfc_checkpoint = " + (out / "k8.ckpt").string() + "\n"), out),
                  ConfigError);
  // An FC checkpoint passed as the DAFC one is refused.
  save_checkpoint(out / "fc.ckpt", build_network(NetworkSpec::fc_baseline(16, 16, 121), 1));
  CHECK_THROWS_AS(run_experiment("eval-single",
                                 cfg_of("estimators = dafc\ndafc_checkpoint = " + (out / "fc.ckpt").string() + "\n"),
                                 out),
                  ConfigError);
}

TEST_CASE("network estimators run through the same record path") {
  const fs::path out = scratch("nets");
  fs::create_directories(out);
  save_checkpoint(out / "fc.ckpt", build_network(NetworkSpec::fc_baseline(16, 16, 121), 3));
  run_experiment("eval-single",
                 cfg_of("estimators = fc, mvdr\nfc_checkpoint = " + (out / "fc.ckpt").string() +
                        "\nsir_db = 0\ndtheta_c_deg = 10\nrmsd_sir_db = 0\nrmsd_dtheta_c_deg = 10\ntrials = 70\n"
                        "spectrum_trials = 10\n"),
                 out);
  const auto rows = lines(out / "single_vs_dtheta_c.csv");
  REQUIRE(rows.size() == 3);
  CHECK(cells(rows[1])[0] == "fc");
  CHECK(cells(rows[2])[0] == "mvdr");
  CHECK(lines(out / "spectrum_single.csv")[0] == "angle_deg,fc_mean,fc_std,mvdr_mean,mvdr_std");
}

TEST_CASE("loss-weight ablation output") {
  const fs::path out = scratch("ablation");
  fs::create_directories(out);
  std::string text = "dtheta_c_deg = 3, 20\ntrials = 10\n";
  for (const char* set : {"b0", "standard", "b1"}) {
    const fs::path p = out / (std::string(set) + ".ckpt");
    save_checkpoint(p, build_network(16, 16, 121, 1));
    text += std::string(set) + "_checkpoint = " + p.string() + "\n";
  }
  run_experiment("eval-ablation", cfg_of(text), out);
  const auto rows = lines(out / "loss_weight_ablation.csv");
  REQUIRE(rows.size() == 1 + 3 * 2);
  CHECK(rows[0] == "beta_set,dtheta_c_deg,p1,p1_se,p0,p0_se,n_trials");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto c = cells(rows[i]);
    CHECK(std::stod(c[2]) >= 0.0);
    CHECK(std::stod(c[2]) <= 1.0);
    CHECK(std::stod(c[4]) >= 0.0);
    CHECK(std::stod(c[4]) <= 1.0);
  }
}

TEST_CASE("dataset export") {
  const fs::path out = scratch("gen");
  run_experiment("gen-data", cfg_of("count = 12\nseed = 4\n"), out);
  CHECK(read_dataset(out / "dataset.bin").size() == 12);
  run_experiment("gen-data",
                 cfg_of("source = scenario\ncount = 3\nsource_doas_deg = 10\nsource_snr_db = 5\noutput = s.bin\n"),
                 out);
  const auto s = read_dataset(out / "s.bin");
  REQUIRE(s.size() == 3);
  CHECK(s[0].X != s[1].X);
  CHECK_FALSE(s[0].has_interference);
}

TEST_CASE("manifest re-run reproduces outputs") {
  const fs::path first = scratch("det_a"), second = scratch("det_b");
  const auto cfg = cfg_of("estimators = mvdr\ndtheta_deg = 5\nsir_db = -5, 5\ntrials = 30\nspectrum_trials = 40\nseed = 9\n");
  run_experiment("eval-multi", cfg, first);
  const RunManifest m = make_manifest("eval-multi", cfg, first, 0.0, "");
  CHECK(m.outputs.size() == 2);
  CHECK(rerun_from_manifest(m, second).empty());
  std::ofstream(second / "multi_source.csv", std::ios::app) << "tampered\n";
  CHECK(hex64(fnv1a64_file(second / "multi_source.csv")) != m.outputs[0].fnv1a64);
}

TEST_CASE("standard errors") {
  const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
  const MeanSe m = mean_se(v);
  CHECK(m.mean == 2.5);
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  const std::vector<EvalRecord> rec = {{{0.0}, {0.0}}, {{0.0}, {1.0}}};
  const MeanSe p = p_res_se(rec);
  CHECK(p.mean == 0.5);
  CHECK(p.se == doctest::Approx(0.5 / std::sqrt(2.0)));
  const MeanSe r = rmsd_se(rec);
  CHECK(r.mean == doctest::Approx(std::sqrt(0.5)));
}
