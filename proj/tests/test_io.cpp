// Copyright 2026 The DAFC-DOA Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include "dafc/checkpoint.hpp"
#include "dafc/config.hpp"
#include "dafc/dataset_io.hpp"
#include "dafc/error.hpp"
#include "dafc/manifest.hpp"
#include "doctest.h"

using namespace dafc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dafc_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config parsing and errors") {
  const auto cfg = KeyValueConfig::parse_string("# comment\na = 1.5\n\nlist = 1, 2,3  # trailing\nname = x\n", "t.cfg");
  CHECK(cfg.get_double("a") == 1.5);
  CHECK(cfg.get_doubles("list") == std::vector<double>{1, 2, 3});
  CHECK(cfg.get_string("name") == "x");
  CHECK(cfg.get_int("missing", 4) == 4);

  CHECK(error_of([] { KeyValueConfig::parse_string("a = 1\nbroken line\n", "f.cfg"); }).find("f.cfg:2") !=
        std::string::npos);
  CHECK(error_of([] { KeyValueConfig::parse_string("a = 1\na = 2\n", "f.cfg"); }).find("duplicate key 'a'") !=
        std::string::npos);
  const auto typo = KeyValueConfig::parse_string("epochs = 3\nepoch = 4\n", "g.cfg");
  typo.get_int("epochs", 1);
  const std::string msg = error_of([&] { typo.reject_unused(); });
  CHECK(msg.find("g.cfg:2") != std::string::npos);
  CHECK(msg.find("'epoch'") != std::string::npos);
  const auto bad = KeyValueConfig::parse_string("x = abc\n", "h.cfg");
  CHECK(error_of([&] { bad.get_double("x"); }).find("h.cfg:1: key 'x'") != std::string::npos);
  CHECK_THROWS_AS(KeyValueConfig::parse_file("/nonexistent/dir/cfg.txt"), ConfigError);
  CHECK(error_of([] { KeyValueConfig::parse_file("/nonexistent/dir/cfg.txt"); }).find("/nonexistent/dir/cfg.txt") !=
        std::string::npos);
}

TEST_CASE("resolved config lists defaults") {
  const auto cfg = KeyValueConfig::parse_string("a = 2\n");
  cfg.get_int("a", 1);
  cfg.get_double("b", 0.25);
  cfg.get_strings("c", {"x", "y"});
  CHECK(cfg.dump_resolved() == "a = 2\nb = 0.25  # default\nc = x, y  # default\n");
}

TEST_CASE("checkpoint round trip is bit exact") {
  const fs::path dir = scratch("ckpt");
  for (const NetworkSpec& spec : {NetworkSpec::dafc_standard(16, 16, 121), NetworkSpec::fc_baseline(8, 4, 61)}) {
    const Network net = build_network(spec, 11);
    save_checkpoint(dir / "n.ckpt", net);
    const Network back = load_checkpoint(dir / "n.ckpt");
    CHECK(back.spec().arch == spec.arch);
    CHECK(back.spec().num_snapshots == spec.num_snapshots);
    CHECK(back.spec().grid_size == spec.grid_size);
    const auto a = net.layers(), b = back.layers();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i]->W == b[i]->W);
      CHECK(a[i]->b == b[i]->b);
      CHECK(a[i]->activation == b[i]->activation);
    }
  }
  {
    std::ofstream junk(dir / "junk.ckpt", std::ios::binary);
    junk << "NOTACHECKPOINT";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), ConfigError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), ConfigError);
  // Truncated file.
  const auto size = fs::file_size(dir / "n.ckpt");
  fs::resize_file(dir / "n.ckpt", size / 2);
  CHECK_THROWS(load_checkpoint(dir / "n.ckpt"));
}

TEST_CASE("dataset round trip") {
  const fs::path dir = scratch("data");
  TrainingSetPolicy policy;
  const auto examples = make_training_batch(policy, 5, 8);
  write_dataset(dir / "d.bin", examples);
  const auto back = read_dataset(dir / "d.bin");
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[i].X == examples[i].X);
    CHECK(back[i].y == examples[i].y);
    CHECK(back[i].occupied_mask == examples[i].occupied_mask);
    CHECK(back[i].source_doas == examples[i].meta.source_doas);
    CHECK(back[i].has_interference == examples[i].meta.interference.has_value());
  }
  {
    std::ofstream extra(dir / "d.bin", std::ios::binary | std::ios::app);
    extra << 'x';
  }
  CHECK_THROWS(read_dataset(dir / "d.bin"));
}

TEST_CASE("manifest") {
  CHECK(hex64(fnv1a64("a", 1)) == "af63dc4c8601ec8c");
  CHECK(hex64(fnv1a64("", 0)) == "cbf29ce484222325");
  const fs::path dir = scratch("manifest");
  fs::create_directories(dir / "sub");
  std::ofstream(dir / "b.csv") << "x,y\n1,2\n";
  std::ofstream(dir / "sub" / "a.csv") << "z\n";
  RunManifest m;
  m.command = "eval-single";
  m.config_text = "seed = 3\n";
  m.seed = 3;
  m.collect_outputs(dir);
  REQUIRE(m.outputs.size() == 2);
  CHECK(m.outputs[0].path == "b.csv");
  CHECK(m.outputs[1].path == "sub/a.csv");
  CHECK(m.outputs[0].bytes == 8);
  m.save(dir / "manifest.json");
  const RunManifest back = RunManifest::load(dir / "manifest.json");
  CHECK(back.command == m.command);
  CHECK(back.config_text == m.config_text);
  CHECK(back.outputs[1].fnv1a64 == m.outputs[1].fnv1a64);
  m.collect_outputs(dir);
  CHECK(m.outputs.size() == 2);
  std::ofstream(dir / "bad.json") << "{\"command\": 3";
  CHECK_THROWS_AS(RunManifest::load(dir / "bad.json"), ConfigError);
}
