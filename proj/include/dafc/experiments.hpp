// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dafc/array_sim.hpp"
#include "dafc/baselines.hpp"
#include "dafc/dafc_net.hpp"
#include "dafc/manifest.hpp"
#include "dafc/metrics.hpp"

namespace dafc {

class KeyValueConfig;

// Common interface of the spectrum-based DOA methods under evaluation.
// Implementations are immutable after construction.
class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual std::string name() const = 0;
  // One spectrum per input: probabilities for the networks, power for MVDR.
  virtual std::vector<std::vector<double>> spectra(std::span<const CMatrix* const> inputs) const = 0;
  virtual DoaEstimate estimate_from_spectrum(std::span<const double> spectrum) const = 0;
  // Spectrum scaled for averaging across trials (identity for probabilities).
  virtual std::vector<double> display_spectrum(std::vector<double> spectrum) const { return spectrum; }

  DoaEstimate estimate(const CMatrix& X) const;
};

class NetworkEstimator final : public Estimator {
 public:
  NetworkEstimator(std::string name, Network net, AngularGrid grid, double threshold = 0.5);
  std::string name() const override { return name_; }
  std::vector<std::vector<double>> spectra(std::span<const CMatrix* const> inputs) const override;
  DoaEstimate estimate_from_spectrum(std::span<const double> spectrum) const override;
  const Network& network() const { return net_; }

 private:
  std::string name_;
  Network net_;
  AngularGrid grid_;
  double threshold_;
};

class MvdrEstimator final : public Estimator {
 public:
  explicit MvdrEstimator(AngularGrid grid, ArrayGeometry geometry = {}, double peak_fraction = kMvdrPeakFraction);
  std::string name() const override { return "mvdr"; }
  std::vector<std::vector<double>> spectra(std::span<const CMatrix* const> inputs) const override;
  DoaEstimate estimate_from_spectrum(std::span<const double> spectrum) const override;
  // Normalized to a unit maximum per trial.
  std::vector<double> display_spectrum(std::vector<double> spectrum) const override;

 private:
  AngularGrid grid_;
  ArrayGeometry geometry_;
  double peak_fraction_;
};

// Mean and Monte-Carlo standard error of a per-trial quantity.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(std::span<const double> values);

// RMSD over records with a delta-method standard error.
MeanSe rmsd_se(std::span<const EvalRecord> records, double empty_penalty = kEmptySetPenalty);
// P_res with the binomial standard error.
MeanSe p_res_se(std::span<const EvalRecord> records);

// Runs one evaluation subcommand (eval-single, eval-two, eval-multi,
// eval-enum, eval-ablation, gen-data) with the given configuration and
// writes its CSV/binary outputs into out_dir. Every key of cfg must be
// consumed; unknown keys raise ConfigError. With dry_run the resolved
// configuration is printed to stdout and nothing runs.
void run_experiment(const std::string& command, const KeyValueConfig& cfg, const std::filesystem::path& out_dir,
                    bool dry_run = false);

// Names of the commands run_experiment accepts.
const std::vector<std::string>& experiment_commands();

// Manifest of a finished run: resolved config, checkpoints named in it and
// checksums of everything under out_dir.
RunManifest make_manifest(const std::string& command, const KeyValueConfig& cfg, const std::filesystem::path& out_dir,
                          double wall_seconds, const std::string& started_utc);

// Repeats the evaluation recorded in `m` single-threaded into out_dir and
// returns the recorded outputs whose checksum differs (or that are missing).
std::vector<std::string> rerun_from_manifest(const RunManifest& m, const std::filesystem::path& out_dir);

}  // namespace dafc
