// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dafc/array_sim.hpp"
#include "dafc/autodiff.hpp"
#include "dafc/dafc_net.hpp"

namespace dafc {

class KeyValueConfig;

// Loss-weight update factors. The published schedule, and the two comparison
// sets used by the ablation (closer to 0, closer to 1).
inline const std::vector<double> kStandardBetas = {1e-5, 7.25e-5, 5.25e-4, 3.8e-3, 2.78e-2, 0.2};
inline const std::vector<double> kBetasB0 = {1e-6, 3.98e-6, 1.58e-5, 6.31e-5, 2.51e-4, 1e-3};
inline const std::vector<double> kBetasB1 = {1e-3, 3.98e-3, 0.0158, 0.063, 0.25, 1.0};

// Smallest value either weight factor may take.
inline constexpr double kWeightFactorFloor = 1e-6;
// Predictions are clamped into [kBceClamp, 1 - kBceClamp] before the logs.
inline constexpr double kBceClamp = 1e-7;

// Per-grid-point loss weights: 1/e1 on points holding a source or the
// interference, 1/e0 elsewhere. The factors move towards 1 at epochs
// l * delta_t, l = 1..N_w, and are frozen afterwards.
struct LossWeightState {
  double e0 = 1.0;
  double e1 = 1.0;
  std::vector<double> betas = kStandardBetas;
  int delta_t = 25;
  int updates_done = 0;

  double w_occupied() const { return 1.0 / e1; }
  double w_else() const { return 1.0 / e0; }
  int num_updates() const { return static_cast<int>(betas.size()); }

  // Applies update l = updates_done + 1 if `epoch` is its scheduled epoch.
  bool maybe_update(int epoch);
};

// (e0, e1) from the fraction of occupied grid points over the whole batch.
std::pair<double, double> init_weight_factors(std::span<const SnapshotExample> batch);

// e_q <- (1 - beta_l) e_q + beta_l for q = 0, 1; l is 1-based.
std::pair<double, double> update_weight_factors(const LossWeightState& state, int l);

// (1/d) sum_i w_i BCE(y_i, yhat_i) for one example.
double weighted_bce_loss(std::span<const std::uint8_t> y, std::span<const double> yhat, double w_occupied,
                         double w_else, std::span<const std::uint8_t> occupied_mask);
double weighted_bce_loss(std::span<const std::uint8_t> y, std::span<const double> yhat, const LossWeightState& state,
                         std::span<const std::uint8_t> occupied_mask);

// Sum over the rows of `probs` of the per-example loss, times `scale`. When
// grad_logits is non-null it receives d(scaled loss)/d(pre-sigmoid logits),
// i.e. scale * w_i (yhat_i - y_i) / d.
double weighted_bce_batch(const Matrix& probs, std::span<const SnapshotExample* const> examples, double w_occupied,
                          double w_else, double scale, Matrix* grad_logits);

struct TrainConfig {
  Architecture arch = Architecture::kDafc;
  int epochs = 500;
  int batch_size = 512;
  int micro_batch = 32;  // examples per forward/backward; gradients accumulate to batch_size
  int n_train = 10000;
  double lr = 1e-3;
  double lr_decay = 0.905;
  int lr_patience = 10;
  int early_stop_window = 200;
  std::vector<double> betas = kStandardBetas;
  int delta_t = 25;
  int val_size = 2000;
  std::uint64_t seed = 1;
  std::uint64_t val_seed = 0x5eed5eedull;
  int checkpoint_every = 10;
  // Stop after this many optimizer steps in an epoch (0 = full epoch).
  int max_steps_per_epoch = 0;

  void validate() const;
};

TrainConfig train_config_from(const KeyValueConfig& cfg);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double e0 = 0.0;
  double e1 = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Network best;
  Network last;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  double best_val = 0.0;
  bool stopped_early = false;
};

class Trainer {
 public:
  Trainer(TrainConfig config, TrainingSetPolicy policy, Network initial);

  // Train on these examples every epoch instead of regenerating.
  void set_fixed_training_set(std::vector<SnapshotExample> examples);
  void set_validation_set(std::vector<SnapshotExample> examples);
  // Enables train_log.csv, periodic/best checkpoints and the resumable state.
  void set_output_dir(std::filesystem::path dir);
  void resume(const std::filesystem::path& state_file);
  // Called after every epoch, e.g. for progress output.
  void set_epoch_callback(std::function<void(const EpochLog&)> fn) { on_epoch_ = std::move(fn); }

  TrainResult run();

  // One optimizer step over `batch` (gradients accumulated per micro-batch).
  // Returns the mean loss of the batch.
  double train_step(std::span<const SnapshotExample* const> batch);
  double evaluate(std::span<const SnapshotExample> examples) const;

  Network& network() { return net_; }
  const LossWeightState& weights() const { return weights_; }
  const LrScheduler& scheduler() const { return scheduler_; }
  int next_epoch() const { return next_epoch_; }

 private:
  void save_state(const std::filesystem::path& path) const;
  void append_log(const EpochLog& row) const;

  TrainConfig config_;
  TrainingSetPolicy policy_;
  Network net_;
  Network best_;
  std::vector<AffineLayer*> params_;
  AdamState adam_;
  LrScheduler scheduler_;
  LossWeightState weights_;
  std::optional<std::vector<SnapshotExample>> fixed_train_;
  std::vector<SnapshotExample> validation_;
  std::optional<std::filesystem::path> out_dir_;
  std::function<void(const EpochLog&)> on_epoch_;
  int next_epoch_ = 0;
  bool factors_initialized_ = false;
  bool scheduler_seeded_ = false;
  double best_val_ = 0.0;
  int best_epoch_ = -1;
  int epochs_since_best_ = 0;
};

TrainResult train(const TrainConfig& config, const TrainingSetPolicy& policy);

// Keeps large activation buffers on the heap between passes (glibc only).
void tune_allocator();

}  // namespace dafc
