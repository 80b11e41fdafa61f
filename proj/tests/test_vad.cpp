// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0
//
// Voice-activity networks: posterior ranges, parameter budgets against
// independent closed-form counts, the energy baseline, hard filtering, the
// synchronizer length chain against the trunk's stage extents, and soft
// posterior application.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "svf/dsp.hpp"
#include "svf/extractor.hpp"
#include "svf/gradcheck.hpp"
#include "svf/ops.hpp"
#include "svf/rng.hpp"
#include "svf/training.hpp"
#include "svf/vad.hpp"

using namespace svf;

namespace {

TensorPtr rand_t(Shape s, uint64_t seed, bool rg = true, double sd = 1.0) {
  Rng r(seed);
  return Tensor::randn(std::move(s), r, sd, rg);
}

const FwdCtx kTrain{true, true};
const FwdCtx kEval{false, false};

double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace

TEST_CASE("all three architectures emit one posterior per frame, strictly in (0,1)") {
  for (const char* arch : {"dnn", "lstm", "cldnn"}) {
    CAPTURE(arch);
    ParamStore ps(60);
    VadConfig cfg;
    cfg.arch = arch;
    VadNet net(ps, "vad.", cfg);
    auto X = rand_t({1, 1, 64, 40}, 600, false);
    auto q = net.forward(X, kTrain);
    REQUIRE(q->shape == Shape{1, 40});
    for (int64_t t = 0; t < 40; ++t) {
      CHECK(q->data[t] > 0.0);
      CHECK(q->data[t] < 1.0);
    }
    auto q2 = net.forward(X, kEval);
    auto q3 = net.forward(X, kEval);
    for (int64_t t = 0; t < 40; ++t) CHECK(q2->data[t] == q3->data[t]);
  }
}

TEST_CASE("parameter budgets match independent closed-form counts") {
  // Each count is rebuilt here from the layer dimensions, not copied from the
  // constructor's bookkeeping.
  VadConfig cfg;
  const int64_t d = cfg.feat_dim, ctx = cfg.context, hid = cfg.dnn_hidden;
  const int64_t H = cfg.lstm_hidden, G = 4 * H, F = cfg.cldnn_filters;
  {
    ParamStore ps(61);
    VadNet net(ps, "vad.", cfg);
    const int64_t in = d * ctx;
    CHECK(net.parameter_count() == (in * hid + hid) + (hid * hid + hid) + (hid + 1));
    CHECK(net.parameter_count() == 49345);
  }
  {
    ParamStore ps(62);
    VadConfig c2 = cfg;
    c2.arch = "lstm";
    VadNet net(ps, "vad.", c2);
    CHECK(net.parameter_count() == (d + H + 1) * G + 2 * (H + H + 1) * G + (H + 1));
    CHECK(net.parameter_count() == 46579);
  }
  {
    ParamStore ps(63);
    VadConfig c3 = cfg;
    c3.arch = "cldnn";
    VadNet net(ps, "vad.", c3);
    const int64_t bins = d / 3;
    CHECK(net.parameter_count() ==
          (F * 8 + F) + (F * bins + H + 1) * G + (H * H + H) + (H + 1));
    CHECK(net.parameter_count() == 157627);
  }
}

TEST_CASE("recurrent state detaching changes gradients only, never values") {
  for (const char* arch : {"lstm", "cldnn"}) {
    CAPTURE(arch);
    ParamStore ps(64);
    VadConfig cfg;
    cfg.arch = arch;
    VadNet net(ps, "vad.", cfg);
    auto X = rand_t({1, 1, 64, 23}, 640, false);
    auto a = net.forward(X, kEval, 0);
    auto b = net.forward(X, kEval, 5);
    for (int64_t t = 0; t < 23; ++t) CHECK(a->data[t] == b->data[t]);
  }
}

TEST_CASE("network rejects misdimensioned inputs") {
  ParamStore ps(65);
  VadNet net(ps, "vad.", VadConfig{});
  CHECK_THROWS_AS(net.forward(rand_t({1, 1, 32, 40}, 1, false), kEval), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(rand_t({2, 1, 64, 40}, 2, false), kEval), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(rand_t({64, 40}, 3, false), kEval), std::invalid_argument);
}

TEST_CASE("energy baseline: degenerate and synthetic cases") {
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(4, 10, 0.3);
  auto lab = energy_vad(flat, 40.0);
  REQUIRE(lab.size() == 10);
  for (int v : lab) CHECK(v == 1);  // every frame reaches its own percentile

  Rng r(660);
  Eigen::MatrixXd m(8, 60);
  std::vector<int> truth(60);
  for (int t = 0; t < 60; ++t) {
    const bool speech = t >= 15 && t < 45;
    truth[static_cast<size_t>(t)] = speech ? 1 : 0;
    for (int f = 0; f < 8; ++f) m(f, t) = (speech ? 4.0 : 0.0) + 0.1 * r.normal();
  }
  auto pred = energy_vad(m, 50.0);
  int agree = 0;
  for (int t = 0; t < 60; ++t) agree += pred[static_cast<size_t>(t)] == truth[static_cast<size_t>(t)];
  CHECK(static_cast<double>(agree) / 60.0 > 0.95);

  auto all = energy_vad(m, 0.0);
  for (int v : all) CHECK(v == 1);
}

TEST_CASE("hard filter keeps exactly the frames clearing the threshold") {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  Eigen::ArrayXd q(3);
  q << 0.9, 0.1, 0.8;
  auto kept = hard_vad_filter(m, q, 0.5);
  REQUIRE(kept.cols() == 2);
  CHECK(kept(0, 0) == 1);
  CHECK(kept(1, 0) == 4);
  CHECK(kept(0, 1) == 3);
  CHECK(kept(1, 1) == 6);

  Eigen::ArrayXd ones = Eigen::ArrayXd::Constant(3, 1.0);
  auto idm = hard_vad_filter(m, ones, 0.5);
  CHECK(idm == m);

  Eigen::ArrayXd zeros = Eigen::ArrayXd::Constant(3, 0.0);
  CHECK_THROWS_AS(hard_vad_filter(m, zeros, 0.5), std::runtime_error);
  CHECK_THROWS_AS(hard_vad_filter(m, q, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(hard_vad_filter(m, q, 1.0), std::invalid_argument);

  // retained count is monotone non-increasing in the threshold
  Rng r(661);
  Eigen::ArrayXd rq(40);
  for (int i = 0; i < 40; ++i) rq[i] = r.uniform();
  Eigen::MatrixXd feats = Eigen::MatrixXd::Random(3, 40);
  int64_t prev = 41;
  for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    int64_t n = 0;
    try {
      n = hard_vad_filter(feats, rq, thr).cols();
    } catch (const std::runtime_error&) {
      n = 0;
    }
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("synchronizer halves three times and stays inside (0,1)") {
  ParamStore ps(66);
  Synchronizer sync(ps, "sync.");
  auto q = rand_t({1, 200}, 662, false, 0.2);
  auto out = sync.forward(sigmoid(q), kTrain);
  CHECK(out[0]->shape == Shape{1, 200});
  CHECK(out[1]->shape == Shape{1, 100});
  CHECK(out[2]->shape == Shape{1, 50});
  CHECK(out[3]->shape == Shape{1, 25});
  for (int l = 1; l < 4; ++l)
    for (int64_t t = 0; t < out[static_cast<size_t>(l)]->numel(); ++t) {
      CHECK(out[static_cast<size_t>(l)]->data[t] > 0.0);
      CHECK(out[static_cast<size_t>(l)]->data[t] < 1.0);
    }
  auto tiny = sync.forward(Tensor::full({1, 8}, 0.5), kTrain);
  CHECK(tiny[1]->dim(1) == 4);
  CHECK(tiny[2]->dim(1) == 2);
  CHECK(tiny[3]->dim(1) == 1);
  CHECK_THROWS_AS(sync.forward(Tensor::full({1, 7}, 0.5), kTrain), std::invalid_argument);

  // closed-form parameter count per block: two unbiased 1x3 convolutions with
  // their batchnorms plus a biased 1x1 tap
  int64_t expect = 0, cin = 1;
  for (int64_t ch : {16, 32, 64}) {
    expect += cin * ch * 3 + 2 * ch + ch * ch * 3 + 2 * ch + ch + 1;
    cin = ch;
  }
  CHECK(sync.parameter_count() == expect);
}

TEST_CASE("synchronizer lengths equal trunk stage extents for every frame count") {
  ParamStore ps(67);
  ResNetConfig rcfg;
  rcfg.width_multiplier = 0.125;
  ResNet net(ps, "extractor.", rcfg);
  Synchronizer sync(ps, "sync.");
  const FwdCtx frozen{true, false};  // batch statistics; no stats accumulated yet
  for (int64_t T : {8, 9, 15, 16, 17, 31, 64, 99, 200, 255, 256, 511, 1024}) {
    CAPTURE(T);
    auto C = net.forward(rand_t({1, 1, 64, T}, 6000 + static_cast<uint64_t>(T), false), frozen);
    auto qs = sync.forward(Tensor::full({1, T}, 0.5), frozen);
    std::vector<TensorPtr> maps, posts;
    for (int i = 0; i < 4; ++i) {
      CHECK(qs[static_cast<size_t>(i)]->dim(1) == C[static_cast<size_t>(i)]->dim(3));
      maps.push_back(C[static_cast<size_t>(i)]);
      posts.push_back(qs[static_cast<size_t>(i)]);
    }
    auto H = soft_vad_apply(maps, posts);  // must compose without size errors
    for (int i = 0; i < 4; ++i) CHECK(H[static_cast<size_t>(i)]->shape == maps[static_cast<size_t>(i)]->shape);
  }
}

TEST_CASE("soft application: all-ones is the identity, all-zeros annihilates") {
  auto P = rand_t({2, 3, 4, 6}, 670, false);
  auto H1 = soft_vad_apply({P}, {Tensor::full({2, 6}, 1.0)});
  for (int64_t i = 0; i < P->numel(); ++i) CHECK(H1[0]->data[i] == P->data[i]);
  auto H0 = soft_vad_apply({P}, {Tensor::full({2, 6}, 0.0)});
  for (int64_t i = 0; i < P->numel(); ++i) CHECK(H0[0]->data[i] == 0.0);
}

TEST_CASE("soft application matches the position-wise oracle bit for bit") {
  auto P = rand_t({2, 3, 4, 5}, 671, false);
  auto q = sigmoid(rand_t({2, 5}, 672, false));
  auto H = soft_vad_apply({P}, {q});
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t f = 0; f < 4; ++f)
        for (int64_t t = 0; t < 5; ++t) {
          const int64_t at = ((n * 3 + c) * 4 + f) * 5 + t;
          CHECK(H[0]->data[at] == P->data[at] * q->data[n * 5 + t]);
        }
  CHECK_THROWS_AS(soft_vad_apply({P}, {q, q}), std::invalid_argument);
}

TEST_CASE("all-ones posteriors leave the embedding bit-identical to no gating") {
  ParamStore ps(68);
  SpeakerConfig cfg;
  cfg.resnet.width_multiplier = 0.125;
  cfg.n_speakers = 2;
  SpeakerModel m(ps, cfg);
  const FwdCtx frozen{true, false};
  auto x = rand_t({1, 1, 64, 24}, 680, false);
  auto maps = m.stage_maps(x, frozen);
  std::vector<TensorPtr> ones;
  for (const auto& p : maps) ones.push_back(Tensor::full({p->dim(0), p->dim(3)}, 1.0));
  auto za = m.embed_from_maps(maps);
  auto zb = m.embed_from_maps(soft_vad_apply(maps, ones));
  for (int64_t i = 0; i < za->numel(); ++i) CHECK(za->data[i] == zb->data[i]);
}

TEST_CASE("a small separable task trains to high ranking accuracy") {
  ParamStore ps(69);
  VadConfig cfg;
  cfg.arch = "dnn";
  cfg.feat_dim = 6;
  cfg.context = 3;
  cfg.dnn_hidden = 8;
  VadNet net(ps, "vad.", cfg);

  Rng gen(690);
  std::vector<TrainUtterance> data;
  for (int u = 0; u < 4; ++u) {
    TrainUtterance tu;
    tu.utt_id = "u" + std::to_string(u);
    tu.speaker = 0;
    tu.feats = Eigen::MatrixXd(6, 120);
    tu.frame_labels.resize(120);
    for (int t = 0; t < 120; ++t) {
      const bool speech = (t / 20) % 2 == 0;
      tu.frame_labels[static_cast<size_t>(t)] = speech ? 1 : 0;
      for (int f = 0; f < 6; ++f) tu.feats(f, t) = (speech ? 2.0 : 0.0) + gen.normal();
    }
    data.push_back(std::move(tu));
  }

  VadPretrainConfig pc;
  pc.epochs = 8;
  pc.batch_frames = 96;
  pc.seed = 691;
  auto losses = pretrain_vad(net, ps, "vad.", data, pc, nullptr);
  CHECK(!losses.empty());

  std::vector<double> pos, neg;
  for (const auto& tu : data) {
    auto X = feature_tensor(FeatureMatrix{"fbank64", tu.feats});
    auto q = net.forward(X, kEval);
    for (int t = 0; t < 120; ++t)
      (tu.frame_labels[static_cast<size_t>(t)] ? pos : neg).push_back(q->data[t]);
  }
  CHECK(pairwise_auc(pos, neg) > 0.9);
}

TEST_CASE("frame-label export writes one row per frame") {
  const std::string path = "/tmp/svf_test_labels.csv";
  write_frame_labels(path, "utt7", {1, 0, 1});
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "utt_id,frame_index,label");
  std::getline(in, line);
  CHECK(line == "utt7,0,1");
  std::getline(in, line);
  CHECK(line == "utt7,1,0");
  std::getline(in, line);
  CHECK(line == "utt7,2,1");
  CHECK(!std::getline(in, line));
  std::remove(path.c_str());
}

TEST_CASE("composite gradient fragment: synchronizer chain") {
  ParamStore ps(70);
  Synchronizer sync(ps, "sync.");
  auto logits_in = rand_t({2, 16}, 700, true, 0.5);
  std::vector<Eigen::ArrayXd> Ws;
  for (int l = 0; l < 4; ++l) {
    Rng wr(710 + static_cast<uint64_t>(l));
    Eigen::ArrayXd W(2 * (16 >> l));
    for (int64_t j = 0; j < W.size(); ++j) W[j] = wr.normal();
    Ws.push_back(W);
  }
  ParamMap pm = ps.params();
  pm["in"] = logits_in;
  FdOptions opt;
  opt.max_indices_per_param = 4;
  const FwdCtx frozen{true, false};
  auto rep = finite_difference_check(
      pm,
      [&] {
        auto out = sync.forward(sigmoid(logits_in), frozen);
        TensorPtr loss;
        for (int l = 0; l < 4; ++l) {
          auto term = sum_all(mul_const(out[static_cast<size_t>(l)], Ws[static_cast<size_t>(l)]));
          loss = loss ? add(loss, term) : term;
        }
        return loss;
      },
      opt);
  INFO("worst: ", rep.worst_param, "[", rep.worst_index, "]");
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(rep.checked > 0);
}

TEST_CASE("gradient check: the three posterior networks") {
  for (const char* arch : {"dnn", "lstm", "cldnn"}) {
    CAPTURE(arch);
    ParamStore ps(71);
    VadConfig cfg;
    cfg.arch = arch;
    cfg.feat_dim = 6;
    cfg.context = 3;
    cfg.dnn_hidden = 5;
    cfg.lstm_hidden = 4;
    cfg.cldnn_filters = 4;
    VadNet net(ps, "vad.", cfg);
    // Nudge every parameter off its initialization first. Freshly zeroed
    // biases put relu inputs exactly on the kink whenever a whole hidden layer
    // is dead at a frame, and a central difference across the kink reports the
    // half-slope no matter how small the step; at a generic point the check is
    // exact.
    Rng jitter(722);
    for (auto& [name, p] : ps.params())
      for (int64_t i = 0; i < p->numel(); ++i) p->data[i] += 0.05 * jitter.normal();
    auto X = rand_t({1, 1, 6, 9}, 720, true, 0.5);
    Rng wr(721);
    Eigen::ArrayXd W(9);
    for (int64_t j = 0; j < 9; ++j) W[j] = wr.normal();
    ParamMap pm = ps.params();
    pm["in"] = X;
    FdOptions opt;
    opt.max_indices_per_param = 5;
    auto rep = finite_difference_check(
        pm, [&] { return sum_all(mul_const(net.forward(X, kEval), W)); }, opt);
    INFO(arch, " worst: ", rep.worst_param, "[", rep.worst_index, "]");
    CHECK(rep.max_rel_err < 1e-4);
    CHECK(rep.checked > 0);
  }
}
