// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <stdexcept>

#include "svf/dsp.hpp"
#include "svf/ops.hpp"

namespace svf {
namespace {

TensorPtr feats_leaf(const Eigen::MatrixXd& m) {
  return feature_tensor(FeatureMatrix{"", m});
}

void check_prob_interior(const Eigen::ArrayXd& p) {
  for (int64_t i = 0; i < p.size(); ++i)
    if (!(p[i] > 0.0 && p[i] < 1.0))
      throw std::invalid_argument("focal_loss: probability " + std::to_string(p[i]) +
                                  " outside (0,1)");
}

}  // namespace

TensorPtr focal_loss(const TensorPtr& p, const std::vector<int>& y, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
  const int64_t K = p->numel();
  if (static_cast<int64_t>(y.size()) != K)
    throw std::invalid_argument("focal_loss: " + std::to_string(y.size()) + " labels for " +
                                std::to_string(K) + " probabilities");
  check_prob_interior(p->data);
  Eigen::ArrayXd pos(K), negm(K);
  for (int64_t i = 0; i < K; ++i) {
    if (y[static_cast<size_t>(i)] != 1 && y[static_cast<size_t>(i)] != -1)
      throw std::invalid_argument("focal_loss: labels must be +1 or -1");
    pos[i] = y[static_cast<size_t>(i)] == 1 ? 1.0 : 0.0;
    negm[i] = 1.0 - pos[i];
  }
  // p_t = p for speech frames, 1-p for non-speech frames
  auto pt = add(mul_const(p, pos), mul_const(add_scalar(neg(p), 1.0), negm));
  // -(1 - p_t)^gamma * ln(p_t); gamma = 0 makes the factor an exact one
  auto fl = neg(mul(pow_scalar(add_scalar(neg(pt), 1.0), gamma), log_op(pt)));
  return mean_all(fl);
}

double focal_loss_value(double p, int y, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("focal_loss: gamma must be >= 0");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("focal_loss: probability outside (0,1)");
  if (y != 1 && y != -1) throw std::invalid_argument("focal_loss: labels must be +1 or -1");
  const double pt = y == 1 ? p : 1.0 - p;
  return std::pow(1.0 - pt, gamma) * -std::log(pt);
}

SpSelection sp_da_select(const Eigen::ArrayXd& q, double delta) {
  if (!(delta > 0.5 && delta < 1.0))
    throw std::invalid_argument("sp_da_select: delta must lie in (0.5, 1)");
  SpSelection sel;
  for (int64_t t = 0; t < q.size(); ++t) {
    if (q[t] > delta) {
      sel.idx.push_back(t);
      sel.labels.push_back(1);
    } else if (1.0 - q[t] > delta) {
      sel.idx.push_back(t);
      sel.labels.push_back(-1);
    }
  }
  return sel;
}

double combined_vad_loss(double jl, double sp, double lambda) {
  if (!(std::isfinite(jl) && std::isfinite(sp) && std::isfinite(lambda)))
    throw std::invalid_argument("combined_vad_loss: non-finite input");
  return jl + lambda * sp;
}

std::vector<double> pretrain_vad(VadNet& net, ParamStore& ps, const std::string& prefix,
                                 const std::vector<TrainUtterance>& data,
                                 const VadPretrainConfig& cfg, std::ostream* log) {
  if (data.empty()) throw std::invalid_argument("pretrain_vad: no training utterances");
  for (const auto& u : data)
    if (static_cast<int64_t>(u.frame_labels.size()) != u.feats.cols())
      throw std::invalid_argument("pretrain_vad: utterance " + u.utt_id +
                                  " lacks per-frame labels");
  OptimizerConfig oc;
  oc.kind = "adam";
  oc.learning_rate = cfg.learning_rate;
  oc.weight_decay = 0.0;
  auto opt = make_optimizer(oc);
  auto params = ps.with_prefix(prefix);
  const bool recurrent = net.config().arch != "dnn";
  Rng root(cfg.seed);
  std::vector<double> losses;
  FwdCtx ctx{true, true};
  if (log) *log << std::setprecision(17) << "step,loss\n";
  for (int e = 0; e < cfg.epochs; ++e) {
    std::vector<int64_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    root.substream("shuffle", static_cast<uint64_t>(e)).shuffle(order);
    for (size_t i = 0; i < order.size(); ++i) {
      const auto& u = data[static_cast<size_t>(order[i])];
      const int64_t T = u.feats.cols();
      zero_grads(params);
      Tape tape;
      auto q = net.forward(feats_leaf(u.feats), ctx, recurrent ? cfg.bptt : 0);
      std::vector<int64_t> idx(static_cast<size_t>(T));
      std::iota(idx.begin(), idx.end(), 0);
      if (!recurrent && T > cfg.batch_frames) {
        // frame-wise net: one random frame batch per step
        root.substream("frames", static_cast<uint64_t>(e), static_cast<uint64_t>(order[i]))
            .shuffle(idx);
        idx.resize(static_cast<size_t>(cfg.batch_frames));
      }
      std::vector<int> yl;
      yl.reserve(idx.size());
      for (int64_t t : idx) yl.push_back(u.frame_labels[static_cast<size_t>(t)] ? 1 : -1);
      auto qsel = gather_rows(reshape(q, {T, 1}), idx);
      auto loss = focal_loss(qsel, yl, 0.0);  // plain cross-entropy
      const double lv = loss->value();
      tape.backward(loss, /*free_graph=*/true);
      opt->step(params);
      losses.push_back(lv);
      if (log) *log << losses.size() << "," << lv << "\n";
    }
  }
  return losses;
}

void JointTrainConfig::validate() const {
  if (epochs < 1 || batch < 1 || micro_batch < 1)
    throw std::invalid_argument("JointTrainConfig: epochs/batch sizes must be positive");
  if (segment < 8) throw std::invalid_argument("JointTrainConfig: segment must be >= 8 frames");
  if (!(delta > 0.5 && delta < 1.0))
    throw std::invalid_argument("JointTrainConfig: delta must lie in (0.5, 1)");
  if (lambda < 0.0) throw std::invalid_argument("JointTrainConfig: lambda must be >= 0");
  if (gamma < 0.0) throw std::invalid_argument("JointTrainConfig: gamma must be >= 0");
  if (lr_s <= 0.0 || lr_v < 0.0)
    throw std::invalid_argument("JointTrainConfig: learning rates out of range");
  if (bptt < 1) throw std::invalid_argument("JointTrainConfig: bptt must be positive");
}

JointTrainer::JointTrainer(ParamStore& ps, SpeakerModel& model, VadNet* vad,
                           Synchronizer* sync, const JointTrainConfig& cfg)
    : ps_(ps), model_(model), vad_(vad), sync_(sync), cfg_(cfg) {
  cfg_.validate();
  if ((vad_ == nullptr) != (sync_ == nullptr))
    throw std::invalid_argument("JointTrainer: vad and synchronizer must come together");
  OptimizerConfig so;
  so.kind = "sgd-momentum";
  so.learning_rate = cfg_.lr_s;
  so.momentum = cfg_.momentum;
  so.weight_decay = cfg_.weight_decay;
  opt_s_ = make_optimizer(so);
  OptimizerConfig vo = so;
  vo.learning_rate = cfg_.lr_v;
  opt_v_ = make_optimizer(vo);
}

ParamMap JointTrainer::speaker_params() const {
  ParamMap out;
  for (const auto& [name, t] : ps_.params())
    if (name.rfind("vad.", 0) != 0 && name.rfind("sync.", 0) != 0) out[name] = t;
  return out;
}

ParamMap JointTrainer::vad_params() const {
  ParamMap out = ps_.with_prefix("vad.");
  for (auto& [name, t] : ps_.with_prefix("sync.")) out[name] = t;
  return out;
}

StepLosses JointTrainer::step(const std::vector<TrainUtterance>& data,
                              const std::vector<int64_t>& batch, int epoch) {
  const int64_t B = static_cast<int64_t>(batch.size());
  if (B < 1) throw std::invalid_argument("JointTrainer: empty batch");
  auto spar = speaker_params();
  auto vpar = vad_params();
  zero_grads(spar);
  zero_grads(vpar);
  FwdCtx ctx{true, true};
  Rng root(cfg_.seed);
  const bool with_vad = vad_ != nullptr || force_q_ones;
  const int64_t d = model_.config().resnet.feat_dim();
  StepLosses out;

  for (int64_t mstart = 0; mstart < B; mstart += cfg_.micro_batch) {
    const int64_t m = std::min<int64_t>(cfg_.micro_batch, B - mstart);
    Tape tape;
    std::vector<TensorPtr> seg_parts, qseg_parts;
    std::vector<int64_t> labels;
    TensorPtr sp_sum;  // sum over utterances of per-utterance focal means
    int64_t seg_len = -1;
    for (int64_t k = 0; k < m; ++k) {
      const int64_t ui = batch[static_cast<size_t>(mstart + k)];
      const auto& utt = data[static_cast<size_t>(ui)];
      const int64_t T = utt.feats.cols();
      const int64_t L = std::min<int64_t>(cfg_.segment, T);
      if (seg_len < 0) seg_len = L;
      if (L != seg_len)
        throw std::invalid_argument(
            "JointTrainer: utterances shorter than the segment length must share one length "
            "within a batch");
      int64_t s0 = 0;
      if (T > L)
        s0 = root.substream("sample", static_cast<uint64_t>(epoch), static_cast<uint64_t>(ui))
                 .uniform_int(0, T - L);
      auto X = feats_leaf(utt.feats);
      auto Xh = model_.enhance(X, ctx);
      seg_parts.push_back(reshape(slice_axis(Xh, 3, s0, L), {1, d * L}));
      labels.push_back(utt.speaker);
      if (with_vad) {
        if (force_q_ones) {
          qseg_parts.push_back(Tensor::full({1, L}, 1.0));
        } else {
          auto qfull = vad_->forward(Xh, ctx, cfg_.bptt);
          qseg_parts.push_back(slice_axis(qfull, 1, s0, L));
          if (cfg_.lambda > 0.0) {
            // shadow pass over detached features: the pseudo-label loss must
            // reach the vad parameters but never the speaker-side networks
            auto qsp = vad_->forward(Xh->detach(), ctx, cfg_.bptt);
            auto sel = sp_da_select(qsp->data, cfg_.delta);
            if (!sel.idx.empty()) {
              auto qs = gather_rows(reshape(qsp, {T, 1}), sel.idx);
              auto lsp = focal_loss(qs, sel.labels, cfg_.gamma);
              out.sp += lsp->value() / static_cast<double>(B);
              sp_sum = sp_sum ? add(sp_sum, lsp) : lsp;
            }
          }
        }
      }
    }
    auto Xb = reshape(concat_lastdim(seg_parts), {m, 1, d, seg_len});
    auto maps = model_.stage_maps(Xb, ctx);
    if (with_vad) {
      std::vector<TensorPtr> qsel;
      if (force_q_ones) {
        for (const auto& mp : maps) qsel.push_back(Tensor::full({m, mp->dim(3)}, 1.0));
      } else {
        auto qb = reshape(concat_lastdim(qseg_parts), {m, seg_len});
        auto qlv = sync_->forward(qb, ctx);
        for (int s : model_.config().stages) qsel.push_back(qlv[static_cast<size_t>(s - 2)]);
      }
      maps = soft_vad_apply(maps, qsel);
    }
    auto lg = model_.logits(model_.embed_from_maps(maps));
    auto jl_sum = softmax_xent_sum(lg, labels);
    out.jl += jl_sum->value() / static_cast<double>(B);
    auto loss = mul_scalar(jl_sum, 1.0 / static_cast<double>(B));
    if (sp_sum) loss = add(loss, mul_scalar(sp_sum, cfg_.lambda / static_cast<double>(B)));
    tape.backward(loss, /*free_graph=*/true);
  }

  opt_s_->config().learning_rate = scheduled_lr(cfg_.lr_s, epoch, cfg_.epochs);
  opt_v_->config().learning_rate = scheduled_lr(cfg_.lr_v, epoch, cfg_.epochs);
  opt_s_->step(spar);
  if (vad_ != nullptr) opt_v_->step(vpar);
  out.v = combined_vad_loss(out.jl, out.sp, cfg_.lambda);  // throws if diverged
  history_.push_back(out);
  ++step_count_;
  return out;
}

void JointTrainer::train(const std::vector<TrainUtterance>& data, std::ostream* log) {
  std::set<int64_t> speakers;
  for (const auto& u : data) {
    speakers.insert(u.speaker);
    if (u.feats.cols() < 8)
      throw std::invalid_argument("JointTrainer: utterance " + u.utt_id +
                                  " has fewer than 8 frames");
  }
  if (speakers.size() < 2)
    throw std::invalid_argument("JointTrainer: classification needs at least 2 speakers, got " +
                                std::to_string(speakers.size()));
  Rng root(cfg_.seed);
  if (log && step_count_ == 0) *log << std::setprecision(17) << "step,L_JL,L_SP,L_v,lr_s,lr_v\n";
  for (int e = 0; e < cfg_.epochs; ++e) {
    std::vector<int64_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    root.substream("shuffle", static_cast<uint64_t>(e)).shuffle(order);
    for (size_t s = 0; s < order.size(); s += static_cast<size_t>(cfg_.batch)) {
      const size_t hi = std::min(order.size(), s + static_cast<size_t>(cfg_.batch));
      std::vector<int64_t> bt(order.begin() + static_cast<int64_t>(s),
                              order.begin() + static_cast<int64_t>(hi));
      auto l = step(data, bt, e);
      if (log)
        *log << step_count_ << "," << l.jl << "," << l.sp << "," << l.v << ","
             << opt_s_->config().learning_rate << "," << opt_v_->config().learning_rate << "\n";
    }
  }
}

}  // namespace svf
