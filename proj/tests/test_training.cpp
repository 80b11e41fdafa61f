// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0
//
// Focal loss against hand-computed values, pseudo-label selection, the
// combined objective, and the joint trainer: the neutral-configuration
// bitwise identity, determinism, loss descent, gradient isolation between the
// two parameter groups, and the self-adaptive path end to end.

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "svf/extractor.hpp"
#include "svf/ops.hpp"
#include "svf/rng.hpp"
#include "svf/training.hpp"
#include "svf/vad.hpp"

using namespace svf;

namespace {

// Synthetic utterances in the mean-normalized feature domain the trainer
// expects: each speaker oscillates a different half of the channels, so the
// classes separate on the spatial pattern of temporal variance.
std::vector<TrainUtterance> offset_corpus(int n_speakers, int per_speaker, int64_t T,
                                          uint64_t seed) {
  Rng r(seed);
  std::vector<TrainUtterance> data;
  for (int s = 0; s < n_speakers; ++s)
    for (int u = 0; u < per_speaker; ++u) {
      TrainUtterance tu;
      tu.utt_id = "s" + std::to_string(s) + "u" + std::to_string(u);
      tu.speaker = s;
      tu.feats = Eigen::MatrixXd(64, T);
      for (int64_t t = 0; t < T; ++t)
        for (int64_t f = 0; f < 64; ++f) {
          const bool live = (s % 2 == 0) == (f < 32);
          const double wave = (t / 2) % 2 == 0 ? 1.5 : -1.5;
          tu.feats(f, t) = (live ? wave : 0.0) + 0.3 * r.normal();
        }
      tu.feats.colwise() -= tu.feats.rowwise().mean();
      data.push_back(std::move(tu));
    }
  return data;
}

std::map<std::string, Eigen::ArrayXd> snapshot(const ParamStore& ps) {
  std::map<std::string, Eigen::ArrayXd> out;
  for (const auto& [name, p] : ps.params()) out[name] = p->data;
  return out;
}

}  // namespace

TEST_CASE("focal loss matches hand-computed values") {
  CHECK(focal_loss_value(0.5, 1, 0.0) == doctest::Approx(0.693147).epsilon(1e-5));
  CHECK(focal_loss_value(0.9, 1, 2.0) == doctest::Approx(0.00105361).epsilon(1e-4));
  CHECK(focal_loss_value(0.2, -1, 0.5) == doctest::Approx(0.0997938).epsilon(1e-5));
  // the tensor route agrees with the scalar route on singleton input
  for (double p : {0.1, 0.4, 0.85}) {
    for (int y : {1, -1}) {
      auto t = focal_loss(Tensor::from({1}, {p}), {y}, 0.7);
      CHECK(t->value() == doctest::Approx(focal_loss_value(p, y, 0.7)).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero focusing parameter reduces to cross-entropy bit for bit") {
  Rng r(800);
  for (int i = 0; i < 1000; ++i) {
    const double p = 0.001 + 0.998 * r.uniform();
    const int y = r.uniform() < 0.5 ? 1 : -1;
    const double pt = y == 1 ? p : 1.0 - p;
    auto t = focal_loss(Tensor::from({1}, {p}), {y}, 0.0);
    CHECK(t->value() == -std::log(pt));
  }
}

TEST_CASE("focal loss is strictly decreasing in the true-class posterior") {
  for (double gamma : {0.0, 0.5, 2.0}) {
    double prev = 1e30;
    for (double p = 0.05; p < 0.96; p += 0.05) {
      const double v = focal_loss_value(p, 1, gamma);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("focal loss rejects boundary posteriors and malformed arguments") {
  CHECK_THROWS_AS(focal_loss_value(0.0, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(focal_loss_value(1.0, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(focal_loss_value(-0.1, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(focal_loss_value(0.5, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(focal_loss_value(0.5, 1, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(focal_loss(Tensor::from({2}, {0.5, 0.5}), {1}, 0.5), std::invalid_argument);
}

TEST_CASE("pseudo-label selection keeps only confident frames") {
  Eigen::ArrayXd q(3);
  q << 0.9, 0.5, 0.1;
  auto sel = sp_da_select(q, 0.7);
  REQUIRE(sel.idx.size() == 2);
  CHECK(sel.idx[0] == 0);
  CHECK(sel.labels[0] == 1);
  CHECK(sel.idx[1] == 2);
  CHECK(sel.labels[1] == -1);

  Eigen::ArrayXd mid = Eigen::ArrayXd::Constant(10, 0.6);
  CHECK(sp_da_select(mid, 0.7).idx.empty());

  CHECK_THROWS_AS(sp_da_select(q, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(sp_da_select(q, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(sp_da_select(q, 0.3), std::invalid_argument);
}

TEST_CASE("selection is consistent with the threshold on random posteriors") {
  Rng r(801);
  Eigen::ArrayXd q(500);
  for (int i = 0; i < 500; ++i) q[i] = r.uniform();
  auto sel = sp_da_select(q, 0.8);
  std::map<int64_t, int> got;
  for (size_t i = 0; i < sel.idx.size(); ++i) got[sel.idx[i]] = sel.labels[i];
  for (int64_t t = 0; t < 500; ++t) {
    if (q[t] > 0.8) {
      REQUIRE(got.count(t) == 1);
      CHECK(got[t] == 1);
    } else if (1.0 - q[t] > 0.8) {
      REQUIRE(got.count(t) == 1);
      CHECK(got[t] == -1);
    } else {
      CHECK(got.count(t) == 0);
    }
  }
}

TEST_CASE("selection rate on uniform posteriors approaches the analytic fraction") {
  // P(q > .7) + P(q < .3) = 0.6 for uniform q
  Rng r(802);
  Eigen::ArrayXd q(20000);
  for (int i = 0; i < 20000; ++i) q[i] = r.uniform();
  auto sel = sp_da_select(q, 0.7);
  const double frac = static_cast<double>(sel.idx.size()) / 20000.0;
  CHECK(frac == doctest::Approx(0.6).epsilon(0.035));
}

TEST_CASE("combined objective arithmetic and finiteness guard") {
  CHECK(combined_vad_loss(1.5, 0.25, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(combined_vad_loss(0.7, 123.0, 0.0) == 0.7);
  CHECK(combined_vad_loss(0.1, 0.2, 4.0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK_THROWS_AS(combined_vad_loss(std::nan(""), 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(combined_vad_loss(0.0, 1e300 * 1e300, 1.0), std::invalid_argument);
}

TEST_CASE("neutral gating configuration reproduces the plain trainer bit for bit") {
  // Run A: no enhancement, no posterior path. Run B: enhancement forced to an
  // exact all-ones mask, posteriors forced to exact all-ones, lambda = 0. The
  // speaker-side parameters must then follow identical trajectories, and the
  // gating-side parameters must not move at all.
  auto data = offset_corpus(2, 3, 24, 810);
  JointTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 4;
  cfg.micro_batch = 2;
  cfg.segment = 16;
  cfg.lr_s = 0.005;
  cfg.lr_v = 1e-3;
  cfg.lambda = 0.0;
  cfg.seed = 11;

  SpeakerConfig mc;
  mc.resnet.width_multiplier = 0.125;
  mc.n_speakers = 2;

  ParamStore psA(99);
  SpeakerModel mA(psA, mc);
  JointTrainer ta(psA, mA, nullptr, nullptr, cfg);
  ta.train(data, nullptr);

  ParamStore psB(99);
  SpeakerConfig mcB = mc;
  mcB.use_se = true;
  SpeakerModel mB(psB, mcB);
  VadNet vad(psB, "vad.", VadConfig{});
  Synchronizer sync(psB, "sync.");
  auto before = snapshot(psB);
  mB.mask_net()->force_ones = true;
  JointTrainer tb(psB, mB, &vad, &sync, cfg);
  tb.force_q_ones = true;
  tb.train(data, nullptr);

  REQUIRE(ta.history().size() == tb.history().size());
  for (size_t i = 0; i < ta.history().size(); ++i) {
    CHECK(ta.history()[i].jl == tb.history()[i].jl);
    CHECK(tb.history()[i].sp == 0.0);
  }
  int64_t compared = 0;
  for (const auto& [name, p] : psA.params()) {
    auto q = psB.param(name);
    REQUIRE(q->numel() == p->numel());
    for (int64_t i = 0; i < p->numel(); ++i) CHECK(p->data[i] == q->data[i]);
    ++compared;
  }
  CHECK(compared > 50);
  // gating-side parameters: untouched by construction (lambda = 0, forced q)
  for (const auto& [name, p] : psB.params()) {
    if (name.rfind("vad.", 0) == 0 || name.rfind("sync.", 0) == 0 ||
        name.rfind("se.", 0) == 0) {
      const auto& b = before.at(name);
      for (int64_t i = 0; i < p->numel(); ++i) CHECK(p->data[i] == b[i]);
    }
  }
}

TEST_CASE("training replays bit-identically from the same seed") {
  auto data = offset_corpus(2, 3, 20, 820);
  JointTrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 3;
  cfg.micro_batch = 3;
  cfg.segment = 12;
  cfg.lr_s = 0.005;
  cfg.seed = 21;
  SpeakerConfig mc;
  mc.resnet.width_multiplier = 0.125;
  mc.n_speakers = 2;

  auto run = [&](std::vector<StepLosses>& hist) {
    ParamStore ps(55);
    SpeakerModel m(ps, mc);
    JointTrainer t(ps, m, nullptr, nullptr, cfg);
    t.train(data, nullptr);
    hist = t.history();
    return snapshot(ps);
  };
  std::vector<StepLosses> h1, h2;
  auto p1 = run(h1);
  auto p2 = run(h2);
  REQUIRE(h1.size() == h2.size());
  for (size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].jl == h2[i].jl);
    CHECK(h1[i].v == h2[i].v);
  }
  for (const auto& [name, a] : p1) {
    const auto& b = p2.at(name);
    for (int64_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("classification loss descends on a separable corpus") {
  auto data = offset_corpus(2, 4, 40, 830);
  JointTrainConfig cfg;
  cfg.epochs = 24;  // the schedule drops the rate at half and three quarters
  cfg.batch = 4;
  cfg.micro_batch = 2;
  cfg.segment = 24;
  cfg.lr_s = 0.002;  // desk-scale batches need a desk-scale rate
  cfg.seed = 31;
  SpeakerConfig mc;
  mc.resnet.width_multiplier = 0.125;
  mc.n_speakers = 2;
  ParamStore ps(66);
  SpeakerModel m(ps, mc);
  JointTrainer t(ps, m, nullptr, nullptr, cfg);
  std::ostringstream log;
  t.train(data, &log);
  const auto& h = t.history();
  REQUIRE(h.size() == 48);  // 8 utterances, batches of 4, 24 epochs
  const double first = (h[0].jl + h[1].jl) / 2.0;
  const double last = (h[46].jl + h[47].jl) / 2.0;
  CHECK(first > last);
  CHECK(last < 0.1);

  // log format: header plus one row per step
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,L_JL,L_SP,L_v,lr_s,lr_v");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 48);
}

TEST_CASE("trainer validates corpus shape and configuration") {
  SpeakerConfig mc;
  mc.resnet.width_multiplier = 0.125;
  mc.n_speakers = 2;
  JointTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 2;
  cfg.micro_batch = 2;
  cfg.segment = 16;

  {  // single speaker cannot drive the classification loss
    ParamStore ps(67);
    SpeakerModel m(ps, mc);
    JointTrainer t(ps, m, nullptr, nullptr, cfg);
    auto data = offset_corpus(1, 3, 20, 840);
    CHECK_THROWS_AS(t.train(data, nullptr), std::invalid_argument);
  }
  {  // an utterance shorter than the trunk's minimum is rejected
    ParamStore ps(68);
    SpeakerModel m(ps, mc);
    JointTrainer t(ps, m, nullptr, nullptr, cfg);
    auto data = offset_corpus(2, 2, 20, 841);
    data[0].feats = Eigen::MatrixXd::Zero(64, 6);
    CHECK_THROWS_AS(t.train(data, nullptr), std::invalid_argument);
  }
  {  // utterances shorter than the segment length must not mix lengths
    ParamStore ps(69);
    SpeakerModel m(ps, mc);
    JointTrainer t(ps, m, nullptr, nullptr, cfg);
    auto data = offset_corpus(2, 1, 10, 842);  // both utterances 10 < segment
    data[1].feats = Eigen::MatrixXd::Zero(64, 12);
    std::vector<int64_t> batch{0, 1};
    CHECK_THROWS_AS(t.step(data, batch, 0), std::invalid_argument);
  }
  {  // bad config values
    JointTrainConfig bad = cfg;
    bad.delta = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.segment = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.lambda = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("self-adaptive path: confident posteriors produce a live secondary loss") {
  auto data = offset_corpus(2, 2, 30, 850);
  JointTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 4;
  cfg.micro_batch = 2;
  cfg.segment = 16;
  cfg.lr_s = 0.01;
  cfg.lr_v = 1e-3;
  cfg.lambda = 2.0;
  cfg.delta = 0.7;
  cfg.seed = 41;
  SpeakerConfig mc;
  mc.resnet.width_multiplier = 0.125;
  mc.n_speakers = 2;
  ParamStore ps(77);
  SpeakerModel m(ps, mc);
  VadNet vad(ps, "vad.", VadConfig{});
  Synchronizer sync(ps, "sync.");
  // push the posterior head well past the confidence threshold
  ps.param("vad.out.b")->data[0] = 2.0;
  auto before = snapshot(ps);
  JointTrainer t(ps, m, &vad, &sync, cfg);
  t.train(data, nullptr);
  REQUIRE(t.history().size() == 1);
  const auto& s = t.history()[0];
  CHECK(s.sp > 0.0);
  CHECK(s.v == doctest::Approx(combined_vad_loss(s.jl, s.sp, cfg.lambda)).epsilon(1e-12));
  // both parameter groups moved
  bool vad_moved = false, spk_moved = false;
  for (const auto& [name, p] : ps.params()) {
    const auto& b = before.at(name);
    for (int64_t i = 0; i < p->numel(); ++i)
      if (p->data[i] != b[i]) {
        (name.rfind("vad.", 0) == 0 || name.rfind("sync.", 0) == 0 ? vad_moved : spk_moved) =
            true;
        break;
      }
  }
  CHECK(vad_moved);
  CHECK(spk_moved);
}

TEST_CASE("zero adaptation rate freezes the posterior network exactly") {
  auto data = offset_corpus(2, 2, 24, 860);
  JointTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 4;
  cfg.micro_batch = 2;
  cfg.segment = 16;
  cfg.lr_s = 0.005;
  cfg.lr_v = 0.0;
  cfg.lambda = 2.0;
  cfg.seed = 51;
  SpeakerConfig mc;
  mc.resnet.width_multiplier = 0.125;
  mc.n_speakers = 2;
  ParamStore ps(88);
  SpeakerModel m(ps, mc);
  VadNet vad(ps, "vad.", VadConfig{});
  Synchronizer sync(ps, "sync.");
  auto before = snapshot(ps);
  JointTrainer t(ps, m, &vad, &sync, cfg);
  t.train(data, nullptr);
  bool spk_moved = false;
  for (const auto& [name, p] : ps.params()) {
    const auto& b = before.at(name);
    const bool gate = name.rfind("vad.", 0) == 0 || name.rfind("sync.", 0) == 0;
    for (int64_t i = 0; i < p->numel(); ++i) {
      if (gate)
        CHECK(p->data[i] == b[i]);
      else if (p->data[i] != b[i])
        spk_moved = true;
    }
  }
  CHECK(spk_moved);
}

TEST_CASE("pretraining requires frame labels and logs one row per step") {
  ParamStore ps(90);
  VadConfig vc;
  vc.feat_dim = 6;
  vc.context = 3;
  vc.dnn_hidden = 8;
  VadNet net(ps, "vad.", vc);
  std::vector<TrainUtterance> data(1);
  data[0].utt_id = "u0";
  data[0].feats = Eigen::MatrixXd::Zero(6, 30);
  VadPretrainConfig pc;
  pc.epochs = 1;
  pc.batch_frames = 16;
  CHECK_THROWS_AS(pretrain_vad(net, ps, "vad.", data, pc, nullptr), std::invalid_argument);

  Rng r(901);
  data[0].frame_labels.assign(30, 1);
  for (int t = 0; t < 30; t += 2) data[0].frame_labels[static_cast<size_t>(t)] = 0;
  for (int t = 0; t < 30; ++t)
    for (int f = 0; f < 6; ++f) data[0].feats(f, t) = r.normal();
  std::ostringstream log;
  auto losses = pretrain_vad(net, ps, "vad.", data, pc, &log);
  CHECK(losses.size() == 1);
  std::istringstream in(log.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,loss");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 1);
}
