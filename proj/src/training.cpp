// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include "dafc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "dafc/checkpoint.hpp"
#include "dafc/config.hpp"
#include "dafc/error.hpp"

namespace dafc {
namespace {

constexpr char kStateMagic[8] = {'D', 'A', 'F', 'C', 'S', 'T', 'A', 'T'};
constexpr std::uint32_t kStateVersion = 1;

double bce(std::uint8_t y, double p) {
  const double pc = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
  return y ? -std::log(pc) : -std::log(1.0 - pc);
}

std::vector<const SnapshotExample*> pointers(std::span<const SnapshotExample> examples) {
  std::vector<const SnapshotExample*> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(&e);
  return out;
}

}  // namespace

void tune_allocator() {
#if defined(__GLIBC__)
  // Activations are tens of MB per micro-batch. Left to the defaults, glibc
  // maps and unmaps them on every pass and the page faults cost ~20%.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

bool LossWeightState::maybe_update(int epoch) {
  if (updates_done >= num_updates()) return false;
  const int l = updates_done + 1;
  if (epoch != l * delta_t) return false;
  std::tie(e0, e1) = update_weight_factors(*this, l);
  updates_done = l;
  return true;
}

std::pair<double, double> init_weight_factors(std::span<const SnapshotExample> batch) {
  if (batch.empty()) throw InvalidArgument("cannot derive loss weights from an empty batch");
  std::size_t occupied = 0;
  std::size_t total = 0;
  for (const auto& ex : batch) {
    total += ex.occupied_mask.size();
    occupied += static_cast<std::size_t>(std::count(ex.occupied_mask.begin(), ex.occupied_mask.end(), 1));
  }
  if (occupied == 0) throw InvalidArgument("degenerate batch: no occupied grid points");
  const double e1 = static_cast<double>(occupied) / static_cast<double>(total);
  const double e0 = std::max(1.0 - e1, kWeightFactorFloor);
  return {e0, e1};
}

std::pair<double, double> update_weight_factors(const LossWeightState& state, int l) {
  if (l < 1 || l > state.num_updates()) {
    throw InvalidArgument("weight update index " + std::to_string(l) + " outside 1.." +
                          std::to_string(state.num_updates()));
  }
  const double beta = state.betas[static_cast<std::size_t>(l - 1)];
  return {(1.0 - beta) * state.e0 + beta, (1.0 - beta) * state.e1 + beta};
}

double weighted_bce_loss(std::span<const std::uint8_t> y, std::span<const double> yhat, double w_occupied,
                         double w_else, std::span<const std::uint8_t> occupied_mask) {
  if (y.size() != yhat.size() || y.size() != occupied_mask.size() || y.empty()) {
    throw DimensionError("loss operands must share one non-zero length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(yhat[i])) throw NumericalError("non-finite prediction in loss");
    sum += (occupied_mask[i] ? w_occupied : w_else) * bce(y[i], yhat[i]);
  }
  const double loss = sum / static_cast<double>(y.size());
  if (!std::isfinite(loss)) throw NumericalError("non-finite loss");
  return loss;
}

double weighted_bce_loss(std::span<const std::uint8_t> y, std::span<const double> yhat, const LossWeightState& state,
                         std::span<const std::uint8_t> occupied_mask) {
  return weighted_bce_loss(y, yhat, state.w_occupied(), state.w_else(), occupied_mask);
}

double weighted_bce_batch(const Matrix& probs, std::span<const SnapshotExample* const> examples, double w_occupied,
                          double w_else, double scale, Matrix* grad_logits) {
  if (probs.rows() != static_cast<Index>(examples.size())) throw DimensionError("one prediction row per example");
  const Index d = probs.cols();
  if (grad_logits) grad_logits->resize(probs.rows(), d);
  double total = 0.0;
  for (Index b = 0; b < probs.rows(); ++b) {
    const SnapshotExample& ex = *examples[static_cast<std::size_t>(b)];
    if (static_cast<Index>(ex.y.size()) != d) throw DimensionError("label length does not match the output");
    std::span<const double> row(probs.row(b).data(), static_cast<std::size_t>(d));
    total += weighted_bce_loss(ex.y, row, w_occupied, w_else, ex.occupied_mask);
    if (grad_logits) {
      for (Index i = 0; i < d; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double w = ex.occupied_mask[k] ? w_occupied : w_else;
        (*grad_logits)(b, i) = scale * w * (probs(b, i) - static_cast<double>(ex.y[k])) / static_cast<double>(d);
      }
    }
  }
  return scale * total;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1 || micro_batch < 1 || n_train < 1) throw ConfigError("batch sizes must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw ConfigError("lr_decay must lie in (0, 1)");
  if (lr_patience < 1 || early_stop_window < 1) throw ConfigError("patience values must be positive");
  if (delta_t < 1) throw ConfigError("weight_update_every must be positive");
  if (val_size < 1) throw ConfigError("val_size must be positive");
  if (checkpoint_every < 0 || max_steps_per_epoch < 0) throw ConfigError("negative step counts");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] >= 0.0 && betas[i] <= 1.0)) throw ConfigError("loss weight betas must lie in [0, 1]");
    if (i > 0 && betas[i] < betas[i - 1]) throw ConfigError("loss weight betas must be ascending");
  }
}

TrainConfig train_config_from(const KeyValueConfig& cfg) {
  TrainConfig c;
  const std::string arch = cfg.get_string("arch", "dafc");
  if (arch == "dafc") {
    c.arch = Architecture::kDafc;
  } else if (arch == "fc") {
    c.arch = Architecture::kFc;
  } else {
    throw ConfigError(cfg.source() + ": key 'arch': expected dafc or fc, got '" + arch + "'");
  }
  c.epochs = static_cast<int>(cfg.get_int("epochs", c.epochs));
  c.batch_size = static_cast<int>(cfg.get_int("batch_size", c.batch_size));
  c.micro_batch = static_cast<int>(cfg.get_int("micro_batch", c.micro_batch));
  c.n_train = static_cast<int>(cfg.get_int("n_train", c.n_train));
  c.lr = cfg.get_double("lr", c.lr);
  c.lr_decay = cfg.get_double("lr_decay", c.lr_decay);
  c.lr_patience = static_cast<int>(cfg.get_int("lr_patience", c.lr_patience));
  c.early_stop_window = static_cast<int>(cfg.get_int("early_stop_window", c.early_stop_window));
  const std::string preset = cfg.get_string("betas_preset", "standard");
  if (preset == "standard") {
    c.betas = kStandardBetas;
  } else if (preset == "b0") {
    c.betas = kBetasB0;
  } else if (preset == "b1") {
    c.betas = kBetasB1;
  } else {
    throw ConfigError(cfg.source() + ": key 'betas_preset': expected standard, b0 or b1");
  }
  c.betas = cfg.get_doubles("betas", c.betas);
  c.delta_t = static_cast<int>(cfg.get_int("weight_update_every", c.delta_t));
  c.val_size = static_cast<int>(cfg.get_int("val_size", c.val_size));
  c.seed = cfg.get_uint64("seed", c.seed);
  c.val_seed = cfg.get_uint64("val_seed", c.val_seed);
  c.checkpoint_every = static_cast<int>(cfg.get_int("checkpoint_every", c.checkpoint_every));
  c.max_steps_per_epoch = static_cast<int>(cfg.get_int("max_steps_per_epoch", c.max_steps_per_epoch));
  c.validate();
  return c;
}

Trainer::Trainer(TrainConfig config, TrainingSetPolicy policy, Network initial)
    : config_(std::move(config)),
      policy_(std::move(policy)),
      net_(std::move(initial)),
      scheduler_(config_.lr, config_.lr_patience, config_.lr_decay) {
  config_.validate();
  policy_.validate();
  tune_allocator();
  if (net_.spec().num_snapshots != policy_.num_snapshots || net_.spec().num_sensors != policy_.geometry.num_sensors ||
      net_.spec().grid_size != policy_.grid.size()) {
    throw ConfigError("network dimensions do not match the training policy");
  }
  params_ = net_.layers();
  adam_ = AdamState(params_, config_.lr);
  weights_.betas = config_.betas;
  weights_.delta_t = config_.delta_t;
  best_ = net_;
}

void Trainer::set_fixed_training_set(std::vector<SnapshotExample> examples) {
  if (examples.empty()) throw InvalidArgument("fixed training set is empty");
  fixed_train_ = std::move(examples);
}

void Trainer::set_validation_set(std::vector<SnapshotExample> examples) {
  if (examples.empty()) throw InvalidArgument("validation set is empty");
  validation_ = std::move(examples);
}

void Trainer::set_output_dir(std::filesystem::path dir) {
  std::filesystem::create_directories(dir);
  out_dir_ = std::move(dir);
}

double Trainer::train_step(std::span<const SnapshotExample* const> batch) {
  if (batch.empty()) throw InvalidArgument("empty training batch");
  net_.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (std::size_t start = 0; start < batch.size(); start += static_cast<std::size_t>(config_.micro_batch)) {
    const std::size_t n = std::min(batch.size() - start, static_cast<std::size_t>(config_.micro_batch));
    const auto chunk = batch.subspan(start, n);
    std::vector<const CMatrix*> inputs;
    inputs.reserve(n);
    for (const auto* ex : chunk) inputs.push_back(&ex->X);
    Graph graph;
    const auto out = net_.forward(graph, net_.encode(inputs), static_cast<Index>(n));
    Matrix grad;
    loss += weighted_bce_batch(graph.value(out), chunk, weights_.w_occupied(), weights_.w_else(), scale, &grad);
    graph.backward(out, grad, Graph::Seed::kPreActivation);
  }
  if (!std::isfinite(loss)) throw NumericalError("training loss diverged");
  adam_.lr = scheduler_.lr();
  adam_step(params_, adam_);
  return loss;
}

double Trainer::evaluate(std::span<const SnapshotExample> examples) const {
  if (examples.empty()) throw InvalidArgument("cannot evaluate on an empty set");
  const auto ptrs = pointers(examples);
  double total = 0.0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < ptrs.size(); start += kChunk) {
    const std::size_t n = std::min(ptrs.size() - start, kChunk);
    const std::span<const SnapshotExample* const> chunk(ptrs.data() + start, n);
    std::vector<const CMatrix*> inputs;
    for (const auto* ex : chunk) inputs.push_back(&ex->X);
    const Matrix probs = net_.predict(inputs);
    total += weighted_bce_batch(probs, chunk, weights_.w_occupied(), weights_.w_else(), 1.0, nullptr);
  }
  return total / static_cast<double>(examples.size());
}

void Trainer::append_log(const EpochLog& row) const {
  if (!out_dir_) return;
  const auto path = *out_dir_ / "train_log.csv";
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  if (fresh) out << "epoch,train_loss,val_loss,lr,e0,e1,wall_seconds\n";
  out << std::setprecision(10) << row.epoch << ',' << row.train_loss << ',' << row.val_loss << ',' << row.lr << ','
      << row.e0 << ',' << row.e1 << ',' << std::setprecision(6) << row.wall_seconds << '\n';
}

void Trainer::save_state(const std::filesystem::path& path) const {
  const auto tmp = path.string() + ".tmp";
  {
    BinaryWriter w(tmp);
    w.bytes(kStateMagic, sizeof kStateMagic);
    w.u32(kStateVersion);
    w.u32(static_cast<std::uint32_t>(next_epoch_));
    w.u8(factors_initialized_ ? 1 : 0);
    w.u8(scheduler_seeded_ ? 1 : 0);
    w.f64(scheduler_.lr());
    w.f64(scheduler_.best());
    w.u32(static_cast<std::uint32_t>(scheduler_.bad_epochs()));
    w.u32(static_cast<std::uint32_t>(scheduler_.reductions()));
    w.f64(weights_.e0);
    w.f64(weights_.e1);
    w.u32(static_cast<std::uint32_t>(weights_.updates_done));
    w.f64(best_val_);
    w.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(best_epoch_)));
    w.u32(static_cast<std::uint32_t>(epochs_since_best_));
    w.u64(adam_.t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      w.f64_array(adam_.m_W[i].data(), static_cast<std::size_t>(adam_.m_W[i].size()));
      w.f64_array(adam_.v_W[i].data(), static_cast<std::size_t>(adam_.v_W[i].size()));
      w.f64_array(adam_.m_b[i].data(), static_cast<std::size_t>(adam_.m_b[i].size()));
      w.f64_array(adam_.v_b[i].data(), static_cast<std::size_t>(adam_.v_b[i].size()));
    }
    write_network(w, net_);
    write_network(w, best_);
    w.close();
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::resume(const std::filesystem::path& state_file) {
  BinaryReader r(state_file);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kStateMagic, sizeof magic) != 0) {
    throw ConfigError("'" + state_file.string() + "' is not a training state file");
  }
  if (r.u32() != kStateVersion) throw ConfigError("'" + state_file.string() + "': unsupported state version");
  next_epoch_ = static_cast<int>(r.u32());
  factors_initialized_ = r.u8() != 0;
  scheduler_seeded_ = r.u8() != 0;
  const double lr = r.f64();
  const double best = r.f64();
  const int bad = static_cast<int>(r.u32());
  const int reductions = static_cast<int>(r.u32());
  scheduler_.restore(lr, best, bad, reductions);
  weights_.e0 = r.f64();
  weights_.e1 = r.f64();
  weights_.updates_done = static_cast<int>(r.u32());
  best_val_ = r.f64();
  best_epoch_ = static_cast<int>(static_cast<std::int64_t>(r.u64()));
  epochs_since_best_ = static_cast<int>(r.u32());
  adam_.t = r.u64();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    r.f64_array(adam_.m_W[i].data(), static_cast<std::size_t>(adam_.m_W[i].size()));
    r.f64_array(adam_.v_W[i].data(), static_cast<std::size_t>(adam_.v_W[i].size()));
    r.f64_array(adam_.m_b[i].data(), static_cast<std::size_t>(adam_.m_b[i].size()));
    r.f64_array(adam_.v_b[i].data(), static_cast<std::size_t>(adam_.v_b[i].size()));
  }
  Network current = read_network(r);
  Network best_net = read_network(r);
  const auto src = current.layers();
  if (src.size() != params_.size()) throw ConfigError("training state does not match the network");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i]->W.rows() != params_[i]->W.rows() || src[i]->W.cols() != params_[i]->W.cols()) {
      throw ConfigError("training state does not match the network");
    }
    params_[i]->W = src[i]->W;
    params_[i]->b = src[i]->b;
  }
  best_ = std::move(best_net);
}

TrainResult Trainer::run() {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  if (validation_.empty()) {
    validation_ = make_training_batch(policy_, static_cast<std::size_t>(config_.val_size), config_.val_seed);
  }

  TrainResult result;
  bool stopped = false;
  try {
    for (int epoch = next_epoch_; epoch < config_.epochs; ++epoch) {
      std::vector<SnapshotExample> generated;
      if (!fixed_train_) {
        generated = make_training_batch(policy_, static_cast<std::size_t>(config_.n_train),
                                        stream_seed(config_.seed, {static_cast<std::uint64_t>(epoch)}));
      }
      const std::vector<SnapshotExample>& train_set = fixed_train_ ? *fixed_train_ : generated;

      if (!factors_initialized_) {
        std::tie(weights_.e0, weights_.e1) = init_weight_factors(train_set);
        factors_initialized_ = true;
      }
      const bool weights_changed = weights_.maybe_update(epoch);
      if (!scheduler_seeded_ || weights_changed) {
        // The objective is new: restart best-model tracking under it.
        const double baseline = evaluate(validation_);
        if (!scheduler_seeded_) scheduler_.restore(scheduler_.lr(), baseline, 0, scheduler_.reductions());
        scheduler_seeded_ = true;
        best_val_ = baseline;
        best_epoch_ = epoch - 1;
        best_ = net_;
        epochs_since_best_ = 0;
      }

      const auto ptrs = pointers(train_set);
      double loss_sum = 0.0;
      std::size_t seen = 0;
      int steps = 0;
      for (std::size_t start = 0; start < ptrs.size(); start += static_cast<std::size_t>(config_.batch_size)) {
        if (config_.max_steps_per_epoch > 0 && steps >= config_.max_steps_per_epoch) break;
        const std::size_t n = std::min(ptrs.size() - start, static_cast<std::size_t>(config_.batch_size));
        const double loss = train_step(std::span<const SnapshotExample* const>(ptrs.data() + start, n));
        loss_sum += loss * static_cast<double>(n);
        seen += n;
        ++steps;
      }

      EpochLog row;
      row.epoch = epoch;
      row.train_loss = loss_sum / static_cast<double>(seen);
      row.val_loss = evaluate(validation_);
      row.lr = scheduler_.lr();
      row.e0 = weights_.e0;
      row.e1 = weights_.e1;
      row.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      result.log.push_back(row);
      append_log(row);
      if (on_epoch_) on_epoch_(row);
      scheduler_.step(row.val_loss);

      if (row.val_loss < best_val_) {
        best_val_ = row.val_loss;
        best_epoch_ = epoch;
        best_ = net_;
        epochs_since_best_ = 0;
        if (out_dir_) save_checkpoint(*out_dir_ / "best.ckpt", best_);
      } else {
        ++epochs_since_best_;
      }
      next_epoch_ = epoch + 1;
      if (out_dir_ && config_.checkpoint_every > 0 && next_epoch_ % config_.checkpoint_every == 0) {
        save_checkpoint(*out_dir_ / ("epoch_" + std::to_string(next_epoch_) + ".ckpt"), net_);
      }
      if (out_dir_) save_state(*out_dir_ / "train_state.bin");
      if (epochs_since_best_ >= config_.early_stop_window) {
        stopped = true;
        break;
      }
    }
  } catch (const NumericalError&) {
    // Parameters are only modified after a finite step, so net_ is still
    // the last finite state.
    if (out_dir_) save_checkpoint(*out_dir_ / "last_finite.ckpt", net_);
    throw;
  }

  result.best = best_epoch_ >= 0 || !result.log.empty() ? best_ : net_;
  result.last = net_;
  result.best_epoch = best_epoch_;
  result.best_val = best_val_;
  result.stopped_early = stopped;
  if (out_dir_) {
    save_checkpoint(*out_dir_ / "best.ckpt", result.best);
    save_checkpoint(*out_dir_ / "last.ckpt", net_);
  }
  return result;
}

TrainResult train(const TrainConfig& config, const TrainingSetPolicy& policy) {
  const NetworkSpec spec = config.arch == Architecture::kDafc
                               ? NetworkSpec::dafc_standard(policy.num_snapshots, policy.geometry.num_sensors,
                                                         policy.grid.size())
                               : NetworkSpec::fc_baseline(policy.num_snapshots, policy.geometry.num_sensors,
                                                          policy.grid.size());
  Trainer trainer(config, policy, build_network(spec, config.seed));
  return trainer.run();
}

}  // namespace dafc
