// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: training, evaluation sweeps, dataset export,
// checkpoint inspection and manifest re-runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "dafc/checkpoint.hpp"
#include "dafc/config.hpp"
#include "dafc/error.hpp"
#include "dafc/experiments.hpp"
#include "dafc/manifest.hpp"
#include "dafc/training.hpp"

namespace fs = std::filesystem;
using namespace dafc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> checkpoints;
  std::string out_dir = "out";
  long long seed = -1;
  int trials = 0;
  int threads = 0;
  bool dry_run = false;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool evaluation) {
  cmd->add_option("--config", a.config, "key = value configuration file");
  cmd->add_option("--set", a.sets, "override one key, as key=value (repeatable)");
  cmd->add_option("--out-dir", a.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--seed", a.seed, "override the configured seed");
  cmd->add_option("--threads", a.threads, "OpenMP threads (0 = runtime default)");
  cmd->add_flag("--dry-run", a.dry_run, "print the resolved configuration and exit");
  if (evaluation) {
    cmd->add_option("--checkpoint", a.checkpoints,
                    "network checkpoint, as name=path (dafc, fc, b0, standard, b1) or a bare path for dafc");
    cmd->add_option("--trials", a.trials, "override trials per sweep point");
  }
}

KeyValueConfig load_config(const CommonArgs& a) {
  KeyValueConfig cfg = a.config.empty() ? KeyValueConfig{} : KeyValueConfig::parse_file(a.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& c : a.checkpoints) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) {
      cfg.set("dafc_checkpoint", c);
    } else {
      cfg.set(c.substr(0, eq) + "_checkpoint", c.substr(eq + 1));
    }
  }
  if (a.seed >= 0) cfg.set("seed", std::to_string(a.seed));
  if (a.trials > 0) cfg.set("trials", std::to_string(a.trials));
  return cfg;
}

void write_manifest(const std::string& command, const KeyValueConfig& cfg, const fs::path& out_dir,
                    std::chrono::steady_clock::time_point t0, const std::string& started) {
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  make_manifest(command, cfg, out_dir, wall, started).save(out_dir / "manifest.json");
}

int run_train(const CommonArgs& a) {
  KeyValueConfig cfg = load_config(a);
  const TrainConfig tc = train_config_from(cfg);
  const TrainingSetPolicy policy = policy_from_config(cfg);
  cfg.reject_unused();
  if (a.dry_run) {
    std::cout << cfg.dump_resolved();
    return kExitOk;
  }
  const fs::path out = a.out_dir;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_timestamp();
  const NetworkSpec spec =
      tc.arch == Architecture::kDafc
          ? NetworkSpec::dafc_standard(policy.num_snapshots, policy.geometry.num_sensors, policy.grid.size())
          : NetworkSpec::fc_baseline(policy.num_snapshots, policy.geometry.num_sensors, policy.grid.size());
  Trainer trainer(tc, policy, build_network(spec, tc.seed));
  const fs::path state = out / "train_state.bin";
  if (a.resume) {
    if (!fs::exists(state)) throw ConfigError("cannot resume: '" + state.string() + "' does not exist");
    trainer.resume(state);
    std::fprintf(stderr, "resuming at epoch %d\n", trainer.next_epoch());
  } else if (fs::exists(out / "train_log.csv")) {
    throw ConfigError("'" + out.string() + "' already holds a training run; use --resume or another --out-dir");
  }
  trainer.set_output_dir(out);
  {
    std::ofstream resolved(out / "config.resolved");
    resolved << cfg.dump_resolved();
  }
  trainer.set_epoch_callback([](const EpochLog& e) {
    std::fprintf(stderr, "epoch %4d  train %.5f  val %.5f  lr %.3g  e0 %.4f  e1 %.4f  %.0fs\n", e.epoch,
                 e.train_loss, e.val_loss, e.lr, e.e0, e.e1, e.wall_seconds);
  });
  const TrainResult r = trainer.run();
  std::fprintf(stderr, "best epoch %d, validation loss %.6f%s\n", r.best_epoch, r.best_val,
               r.stopped_early ? " (stopped early)" : "");
  write_manifest("train", cfg, out, t0, started);
  return kExitOk;
}

int run_eval(const std::string& command, const CommonArgs& a) {
  const KeyValueConfig cfg = load_config(a);
  if (a.dry_run) {
    run_experiment(command, cfg, a.out_dir, true);
    return kExitOk;
  }
  const fs::path out = a.out_dir;
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_timestamp();
  run_experiment(command, cfg, out);
  write_manifest(command, cfg, out, t0, started);
  return kExitOk;
}

int run_inspect(const std::string& path) {
  const Network net = load_checkpoint(path);
  const NetworkSpec& s = net.spec();
  std::cout << "architecture " << architecture_name(s.arch) << "  K=" << s.num_snapshots << " L=" << s.num_sensors
            << " d=" << s.grid_size << "\n";
  std::size_t i = 0;
  const auto counts = net.stage_parameter_counts();
  for (const auto& b : net.blocks()) {
    std::cout << "  block " << i + 1 << "  out " << b.out_rows() << "x" << b.out_cols() << "  params " << counts[i]
              << "\n";
    ++i;
  }
  for (const auto& d : net.dense()) {
    std::cout << "  " << d.name << "  " << d.in_dim() << " -> " << d.out_dim() << " " << activation_name(d.activation)
              << "  params " << counts[i++] << "\n";
  }
  std::cout << "total parameters " << net.parameter_count() << "\n";
  return kExitOk;
}

int run_rerun(const std::string& manifest_path, const std::string& out_dir, bool verify) {
  const RunManifest m = RunManifest::load(manifest_path);
  fs::create_directories(out_dir);
  const auto bad = rerun_from_manifest(m, out_dir);
  if (!verify) return kExitOk;
  for (const auto& p : bad) std::cerr << "mismatch " << p << "\n";
  std::cout << (bad.empty() ? "identical" : "differs") << ": " << m.outputs.size() - bad.size() << "/"
            << m.outputs.size() << " outputs match\n";
  return bad.empty() ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep-learning DOA estimation under compound-Gaussian interference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(DAFC_VERSION));

  CommonArgs train_args;
  auto* train = app.add_subcommand("train", "train a DAFC or FC network");
  add_common(train, train_args, false);
  train->add_flag("--resume", train_args.resume, "continue from <out-dir>/train_state.bin");

  std::vector<std::pair<std::string, CommonArgs>> evals;
  evals.reserve(experiment_commands().size());
  std::vector<CLI::App*> eval_cmds;
  for (const auto& name : experiment_commands()) {
    evals.emplace_back(name, CommonArgs{});
    auto* cmd = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(cmd, evals.back().second, true);
    eval_cmds.push_back(cmd);
  }

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-checkpoint", "print the layer table of a checkpoint");
  inspect->add_option("--checkpoint,checkpoint", inspect_path, "checkpoint file")->required();

  std::string manifest_path, rerun_out = "rerun";
  bool verify = false;
  auto* rerun = app.add_subcommand("rerun-from-manifest", "repeat an evaluation single-threaded from its manifest");
  rerun->add_option("--manifest,manifest", manifest_path, "manifest.json of the original run")->required();
  rerun->add_option("--out-dir", rerun_out, "output directory")->capture_default_str();
  rerun->add_flag("--verify", verify, "compare output checksums against the manifest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (train_args.threads > 0) omp_set_num_threads(train_args.threads);
      return run_train(train_args);
    }
    for (std::size_t i = 0; i < eval_cmds.size(); ++i) {
      if (!eval_cmds[i]->parsed()) continue;
      if (evals[i].second.threads > 0) omp_set_num_threads(evals[i].second.threads);
      return run_eval(evals[i].first, evals[i].second);
    }
    if (inspect->parsed()) return run_inspect(inspect_path);
    if (rerun->parsed()) return run_rerun(manifest_path, rerun_out, verify);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
