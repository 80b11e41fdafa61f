// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "svf/checkpoint.hpp"
#include "svf/config.hpp"
#include "svf/extractor.hpp"
#include "svf/ops.hpp"
#include "svf/optim.hpp"
#include "svf/rng.hpp"

using namespace svf;

namespace {

std::string tmp_path(const std::string& leaf) {
  return (std::filesystem::temp_directory_path() / leaf).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  return std::vector<char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

SpeakerConfig tiny_cfg() {
  SpeakerConfig cfg;
  cfg.resnet.width_multiplier = 0.125;
  cfg.resnet.blocks = {1, 1, 1, 1};
  cfg.n_speakers = 3;
  return cfg;
}

// One real optimizer step so momentum slots exist and differ from zero.
void populate_slots(ParamStore& ps, Optimizer& opt, uint64_t seed) {
  Rng r(seed);
  for (auto& [name, p] : ps.params()) {
    p->ensure_grad();
    for (int64_t i = 0; i < p->numel(); ++i) p->grad[i] = 0.1 * r.normal();
  }
  opt.step(ps.params());
}

}  // namespace

TEST_CASE("checkpoint round-trip is byte-identical and restores every value") {
  ParamStore ps(501);
  SpeakerModel model(ps, tiny_cfg());
  OptimizerConfig oc;
  oc.kind = "adam";
  auto opt = make_optimizer(oc);
  populate_slots(ps, *opt, 77);

  CheckpointData extra;
  extra.meta["config"] = "model.width_mult = 0.125";
  extra.meta["rng_state"] = "deadbeef00112233";
  Eigen::ArrayXd hist(4);
  hist << 2.0, 1.5, 1.1, 0.9;
  extra.series["loss/train"] = hist;

  const std::string p1 = tmp_path("svf_ckpt_a.bin");
  const std::string p2 = tmp_path("svf_ckpt_b.bin");
  save_checkpoint(p1, ps, opt.get(), extra);

  // Fresh identically-shaped model under a different seed: every parameter,
  // buffer, and slot must come back bit for bit.
  ParamStore ps2(999);
  SpeakerModel model2(ps2, tiny_cfg());
  auto opt2 = make_optimizer(oc);
  const CheckpointData back = load_checkpoint(p1, ps2, opt2.get());

  for (const auto& [name, t] : ps.params()) {
    const auto t2 = ps2.params().at(name);
    REQUIRE(t2->shape == t->shape);
    for (int64_t i = 0; i < t->numel(); ++i) CHECK(t2->data[i] == t->data[i]);
  }
  for (const auto& [name, t] : ps.buffers()) {
    const auto t2 = ps2.buffers().at(name);
    for (int64_t i = 0; i < t->numel(); ++i) CHECK(t2->data[i] == t->data[i]);
  }
  REQUIRE(opt2->slots().size() == opt->slots().size());
  for (const auto& [name, a] : opt->slots()) {
    const auto& a2 = opt2->slots().at(name);
    REQUIRE(a2.size() == a.size());
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a2[i] == a[i]);
  }
  CHECK(back.meta.at("config") == extra.meta.at("config"));
  CHECK(back.meta.at("rng_state") == extra.meta.at("rng_state"));
  REQUIRE(back.series.at("loss/train").size() == 4);
  CHECK(back.series.at("loss/train")[3] == 0.9);

  // save -> load -> save: byte-identical files.
  save_checkpoint(p2, ps2, opt2.get(), back);
  CHECK(slurp(p1) == slurp(p2));

  CHECK(read_checkpoint_meta(p1).at("rng_state") == "deadbeef00112233");

  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("checkpoint refuses corrupted and mismatched files") {
  ParamStore ps(502);
  SpeakerModel model(ps, tiny_cfg());
  const std::string path = tmp_path("svf_ckpt_c.bin");
  save_checkpoint(path, ps);

  SUBCASE("truncated payload") {
    auto bytes = slurp(path);
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 64));
    f.close();
    ParamStore ps2(503);
    SpeakerModel m2(ps2, tiny_cfg());
    CHECK_THROWS_AS(load_checkpoint(path, ps2), std::runtime_error);
  }
  SUBCASE("corrupt magic") {
    auto bytes = slurp(path);
    bytes[0] = 'X';
    std::ofstream f(path, std::ios::binary);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    ParamStore ps2(503);
    SpeakerModel m2(ps2, tiny_cfg());
    CHECK_THROWS_AS(load_checkpoint(path, ps2), std::runtime_error);
  }
  SUBCASE("shape mismatch against a different model") {
    ParamStore ps2(503);
    SpeakerConfig other = tiny_cfg();
    other.resnet.width_multiplier = 0.25;  // all channel extents change
    SpeakerModel m2(ps2, other);
    CHECK_THROWS_AS(load_checkpoint(path, ps2), std::runtime_error);
  }
  SUBCASE("missing parameter in the model") {
    ParamStore ps2(503);
    SpeakerConfig other = tiny_cfg();
    other.use_se = true;  // model now expects enhancement weights too
    SpeakerModel m2(ps2, other);
    CHECK_THROWS_AS(load_checkpoint(path, ps2), std::runtime_error);
  }
  SUBCASE("nonexistent path") {
    ParamStore ps2(503);
    SpeakerModel m2(ps2, tiny_cfg());
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin", ps2), std::runtime_error);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint restores mutated parameters to their saved values") {
  ParamStore ps(504);
  SpeakerModel model(ps, tiny_cfg());
  const std::string path = tmp_path("svf_ckpt_d.bin");
  save_checkpoint(path, ps);

  const std::string some = ps.params().begin()->first;
  const double saved = ps.param(some)->data[0];
  ps.param(some)->data[0] = saved + 42.0;
  load_checkpoint(path, ps);
  CHECK(ps.param(some)->data[0] == saved);
  std::filesystem::remove(path);
}

TEST_CASE("config starts from defaults and rejects unknown keys by name") {
  Config cfg;
  CHECK(cfg.get_int("train.epochs") == 10);
  CHECK(cfg.get_double("train.lr_s") == 0.1);
  CHECK(cfg.get("model.pool") == "sap");
  CHECK(cfg.get_bool("model.use_fpm"));
  CHECK_FALSE(cfg.get_bool("model.use_se"));
  CHECK(cfg.get_u64("seed") == 7);

  try {
    cfg.set("train.eopchs", "3");
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("train.eopchs") != std::string::npos);
  }
  CHECK_THROWS_AS(cfg.get("no.such.key"), std::invalid_argument);
}

TEST_CASE("config loads INI sections, comments, and overrides") {
  const std::string path = tmp_path("svf_cfg_test.ini");
  {
    std::ofstream f(path);
    f << "# top comment\n";
    f << "seed = 99\n";
    f << "\n[train]\n";
    f << "epochs = 4   # trailing comment\n";
    f << "lr_s = 0.025\n";
    f << "[model]\n";
    f << "pool = asp\n";
  }
  Config cfg;
  cfg.load_file(path);
  CHECK(cfg.get_u64("seed") == 99);
  CHECK(cfg.get_int("train.epochs") == 4);
  CHECK(cfg.get_double("train.lr_s") == 0.025);
  CHECK(cfg.get("model.pool") == "asp");
  // Untouched keys keep their defaults.
  CHECK(cfg.get_int("train.batch") == 64);

  cfg.apply_override("train.epochs=6");
  CHECK(cfg.get_int("train.epochs") == 6);
  CHECK_THROWS_AS(cfg.apply_override("no-equals-sign"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply_override("=value"), std::invalid_argument);
  CHECK_THROWS_AS(cfg.apply_override("bogus.key=1"), std::invalid_argument);

  {
    std::ofstream f(path);
    f << "[train\n";  // unterminated section
  }
  Config cfg2;
  CHECK_THROWS_AS(cfg2.load_file(path), std::invalid_argument);
  {
    std::ofstream f(path);
    f << "keyonly\n";
  }
  CHECK_THROWS_AS(cfg2.load_file(path), std::invalid_argument);
  {
    std::ofstream f(path);
    f << "[train]\nbogus = 1\n";
  }
  CHECK_THROWS_AS(cfg2.load_file(path), std::invalid_argument);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(cfg2.load_file("/nonexistent/c.ini"), std::runtime_error);
}

TEST_CASE("typed getters reject malformed values") {
  Config cfg;
  cfg.set("train.epochs", "4x");
  CHECK_THROWS_AS(cfg.get_int("train.epochs"), std::invalid_argument);
  cfg.set("train.lr_s", "fast");
  CHECK_THROWS_AS(cfg.get_double("train.lr_s"), std::invalid_argument);
  cfg.set("model.use_se", "maybe");
  CHECK_THROWS_AS(cfg.get_bool("model.use_se"), std::invalid_argument);
  cfg.set("seed", "-3");
  CHECK_THROWS_AS(cfg.get_u64("seed"), std::invalid_argument);
}

TEST_CASE("resolved config dump reloads to an identical state") {
  Config cfg;
  cfg.set("train.epochs", "12");
  cfg.set("model.pool", "gap");
  const std::string path = tmp_path("svf_cfg_resolved.ini");
  cfg.write_resolved(path);

  Config back;
  back.load_file(path);
  CHECK(back.entries() == cfg.entries());
  std::filesystem::remove(path);
}

TEST_CASE("condition lists parse the compact notation") {
  const auto one = parse_conditions("S4-N0");
  REQUIRE(one.size() == 1);
  CHECK(one[0].S == 4);
  CHECK(one[0].N == 0);
  CHECK(std::isinf(one[0].snr_db));
  CHECK(one[0].distortion == "none");

  const auto many = parse_conditions("S4-N2; S1-N6:10:white ;S2-N2:clean:reverb");
  REQUIRE(many.size() == 3);
  CHECK(many[0].name() == "S4-N2");
  CHECK(many[1].S == 1);
  CHECK(many[1].N == 6);
  CHECK(many[1].snr_db == 10.0);
  CHECK(many[1].distortion == "white");
  CHECK(std::isinf(many[2].snr_db));
  CHECK(many[2].distortion == "reverb");

  CHECK_THROWS_AS(parse_conditions(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_conditions("T4-N0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_conditions("S4-N0:loud"), std::invalid_argument);
  CHECK_THROWS_AS(parse_conditions("S4-N0:5:gargle"), std::invalid_argument);
  CHECK_THROWS_AS(parse_conditions("S4-N0:5:white:extra"), std::invalid_argument);
}
