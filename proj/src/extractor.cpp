// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "svf/ops.hpp"

namespace svf {
namespace {

// crop the trailing cell of any odd strided axis so a 1x1 stride-2 shortcut
// lands on floor(L/2) like the padded 3x3 branch does
TensorPtr crop_even(const TensorPtr& x, bool crop_f, bool crop_t) {
  TensorPtr s = x;
  if (crop_f && s->dim(2) % 2 != 0) s = slice_axis(s, 2, 0, s->dim(2) - 1);
  if (crop_t && s->dim(3) % 2 != 0) s = slice_axis(s, 3, 0, s->dim(3) - 1);
  return s;
}

}  // namespace

int64_t ResNetConfig::ch(int64_t base) const {
  return static_cast<int64_t>(std::llround(base * width_multiplier));
}

void ResNetConfig::validate() const {
  if (variant != "2d" && variant != "1d")
    throw std::invalid_argument("ResNetConfig: variant must be 2d or 1d, got " + variant);
  if (input_kind != "fbank64" && input_kind != "spec160")
    throw std::invalid_argument("ResNetConfig: input_kind must be fbank64 or spec160, got " +
                                input_kind);
  if (ch(32) < 4)
    throw std::invalid_argument("ResNetConfig: width_multiplier too small, 32*wm must be >= 4");
  for (int64_t b : blocks)
    if (b < 1) throw std::invalid_argument("ResNetConfig: each stage needs at least one block");
}

BasicBlock::BasicBlock(ParamStore& ps, const std::string& path, int64_t cin,
                       int64_t cout, bool strided, bool two_d)
    : strided_(strided), two_d_(two_d) {
  const int64_t kf = two_d ? 3 : 1;
  ConvSpec s1;
  if (two_d) {
    s1.plf = 1;
    s1.phf = strided ? 0 : 1;
    s1.sf = strided ? 2 : 1;
  }
  s1.plt = 1;
  s1.pht = strided ? 0 : 1;
  s1.st = strided ? 2 : 1;
  c1_ = Conv2d(ps, path + ".c1", cin, cout, kf, 3, s1, false);
  b1_ = BatchNorm(ps, path + ".bn1", cout);

  ConvSpec s2;
  if (two_d) s2.plf = s2.phf = 1;
  s2.plt = s2.pht = 1;
  c2_ = Conv2d(ps, path + ".c2", cout, cout, kf, 3, s2, false);
  b2_ = BatchNorm(ps, path + ".bn2", cout);

  has_shortcut_ = strided || cin != cout;
  if (has_shortcut_) {
    ConvSpec ss;
    if (strided) {
      ss.st = 2;
      if (two_d) ss.sf = 2;
    }
    sc_ = Conv2d(ps, path + ".sc", cin, cout, 1, 1, ss, false);
    sb_ = BatchNorm(ps, path + ".sbn", cout);
  }
}

TensorPtr BasicBlock::forward(const TensorPtr& x, const FwdCtx& ctx) const {
  TensorPtr h = relu(b1_.forward(c1_.forward(x), ctx));
  h = b2_.forward(c2_.forward(h), ctx);
  TensorPtr s = x;
  if (has_shortcut_) {
    if (strided_) s = crop_even(s, two_d_, true);
    s = sb_.forward(sc_.forward(s), ctx);
  }
  return relu(add(h, s));
}

ResNet::ResNet(ParamStore& ps, const std::string& prefix, const ResNetConfig& cfg)
    : cfg_(cfg) {
  cfg_.validate();
  const bool two_d = cfg_.variant == "2d";
  const int64_t c0 = cfg_.ch(32);
  if (two_d) {
    ConvSpec s;
    s.plf = s.phf = s.plt = s.pht = 3;
    if (cfg_.input_kind == "spec160") {
      s.sf = 2;  // frequency stride 2, then the pool below takes it to d/4
      pool160_ = true;
    }
    conv1_ = Conv2d(ps, prefix + "conv1", 1, c0, 7, 7, s, false);
  } else {
    ConvSpec s;
    s.plt = s.pht = 3;  // full-height kernel collapses the feature axis
    conv1_ = Conv2d(ps, prefix + "conv1", 1, c0, cfg_.feat_dim(), 7, s, false);
  }
  bn1_ = BatchNorm(ps, prefix + "bn1", c0);

  const std::array<int64_t, 4> chs{cfg_.ch(32), cfg_.ch(64), cfg_.ch(128), cfg_.ch(256)};
  int64_t cin = c0;
  for (int st = 0; st < 4; ++st) {
    std::vector<BasicBlock> blocks;
    for (int64_t b = 0; b < cfg_.blocks[st]; ++b) {
      const bool strided = st > 0 && b == 0;
      blocks.emplace_back(ps,
                          prefix + "s" + std::to_string(st + 1) + ".b" + std::to_string(b),
                          b == 0 ? cin : chs[st], chs[st], strided, two_d);
    }
    stages_.push_back(std::move(blocks));
    cin = chs[st];
  }
}

std::array<int64_t, 4> ResNet::stage_channels() const {
  return {cfg_.ch(32), cfg_.ch(64), cfg_.ch(128), cfg_.ch(256)};
}

std::array<TensorPtr, 4> ResNet::forward(const TensorPtr& x, const FwdCtx& ctx) const {
  if (x->rank() != 4 || x->dim(1) != 1)
    throw std::invalid_argument("ResNet: input must be [N,1,F,T], got " + shape_str(x->shape));
  if (x->dim(2) != cfg_.feat_dim())
    throw std::invalid_argument("ResNet: expected " + std::to_string(cfg_.feat_dim()) +
                                " feature bins, got " + std::to_string(x->dim(2)));
  if (x->dim(3) < 8)
    throw std::invalid_argument("ResNet: needs at least 8 frames, got " +
                                std::to_string(x->dim(3)) + " (the top stage would be empty)");
  TensorPtr h = relu(bn1_.forward(conv1_.forward(x), ctx));
  if (pool160_) h = maxpool2d(h, 2, 2, 2, 1, 0, 0, 0, 1);
  std::array<TensorPtr, 4> C;
  for (int st = 0; st < 4; ++st) {
    for (const auto& blk : stages_[st]) h = blk.forward(h, ctx);
    C[st] = h;
  }
  return C;
}

Fpm::Fpm(ParamStore& ps, const std::string& prefix, const std::array<int64_t, 4>& cdims,
         int64_t mid, bool two_d) {
  for (int i = 0; i < 4; ++i) {
    const std::string lvl = std::to_string(i + 2);
    lat_.emplace_back(ps, prefix + "lat" + lvl, cdims[i], mid, 1, 1, ConvSpec{}, true);
    mix_.emplace_back(ps, prefix + "mix" + lvl, mid, mid, 1, 1, ConvSpec{}, true);
    ConvSpec s3;
    s3.plt = s3.pht = 1;
    if (two_d) s3.plf = s3.phf = 1;
    out_.emplace_back(ps, prefix + "out" + lvl, mid, cdims[i], two_d ? 3 : 1, 3, s3, true);
    if (i < 3)
      up_.emplace_back(ps, prefix + "up" + lvl, mid, mid, two_d ? 2 : 1, 2,
                       two_d ? 2 : 1, 2, true);
  }
}

std::array<TensorPtr, 4> Fpm::forward(const std::array<TensorPtr, 4>& C) const {
  std::array<TensorPtr, 4> M;
  M[3] = lat_[3].forward(C[3]);
  for (int i = 2; i >= 0; --i) {
    TensorPtr l = lat_[i].forward(C[i]);
    TensorPtr u = up_[i].forward(M[i + 1]);
    const int64_t pf = l->dim(2) - u->dim(2);
    const int64_t pt = l->dim(3) - u->dim(3);
    // odd lateral extents exceed the doubled map by one trailing cell
    if (pf != 0 || pt != 0) u = pad_end(u, pf, pt);
    M[i] = add(l, u);
  }
  std::array<TensorPtr, 4> P;
  for (int i = 0; i < 4; ++i) P[i] = out_[i].forward(mix_[i].forward(M[i]));
  return P;
}

StagePool::StagePool(ParamStore& ps, const std::string& prefix, const std::string& kind,
                     const std::vector<int64_t>& channels, const std::vector<int>& stages)
    : kind_(kind), ch_(channels) {
  if (kind_ != "gap" && kind_ != "sp" && kind_ != "sap" && kind_ != "asp")
    throw std::invalid_argument("StagePool: unknown kind " + kind_);
  if (channels.size() != stages.size())
    throw std::invalid_argument("StagePool: channel list does not match stage list");
  if (kind_ == "sap" || kind_ == "asp") {
    for (size_t i = 0; i < stages.size(); ++i) {
      const std::string base = prefix + "s" + std::to_string(stages[i]);
      const int64_t c = channels[i];
      W_.push_back(ps.weight(base + ".W", {c, c}, c));
      b_.push_back(ps.constant_param(base + ".b", {c}, 0.0));
      v_.push_back(ps.weight(base + ".v", {c, 1}, c));
    }
  }
}

int64_t StagePool::out_dim(int slot) const {
  const int64_t c = ch_.at(slot);
  return (kind_ == "sp" || kind_ == "asp") ? 2 * c : c;
}

TensorPtr StagePool::forward(int slot, const TensorPtr& H) const {
  auto rows = channels_last_rows(H);  // [N,K,C]
  const int64_t N = rows->dim(0), K = rows->dim(1), C = rows->dim(2);
  if (K < 1) throw std::invalid_argument("StagePool: empty feature map");
  if (C != ch_.at(slot))
    throw std::invalid_argument("StagePool: stage has " + std::to_string(C) +
                                " channels, expected " + std::to_string(ch_.at(slot)));
  TensorPtr alpha;
  if (kind_ == "sap" || kind_ == "asp") {
    auto flat = reshape(rows, {N * K, C});
    auto e = matmul(tanh_op(affine(flat, W_[slot], b_[slot])), v_[slot]);
    alpha = softmax_lastdim(reshape(e, {N, K}));
  } else {
    alpha = Tensor::full({N, K}, 1.0 / static_cast<double>(K));
  }
  auto mean = weighted_rowsum(alpha, rows);
  if (kind_ == "gap" || kind_ == "sap") return mean;
  auto ex2 = weighted_rowsum(alpha, mul(rows, rows));
  auto var = clamp_min(sub(ex2, mul(mean, mean)), 1e-10);
  return concat_lastdim({mean, sqrt_op(var)});
}

void SpeakerConfig::validate() const {
  resnet.validate();
  if (stages.empty()) throw std::invalid_argument("SpeakerConfig: no aggregation stages selected");
  std::set<int> seen;
  for (int s : stages) {
    if (s < 2 || s > 5)
      throw std::invalid_argument("SpeakerConfig: stage " + std::to_string(s) +
                                  " out of range [2,5]");
    if (!seen.insert(s).second)
      throw std::invalid_argument("SpeakerConfig: duplicate stage " + std::to_string(s));
  }
  if (n_speakers < 1) throw std::invalid_argument("SpeakerConfig: n_speakers must be >= 1");
  if (embed_dim < 1) throw std::invalid_argument("SpeakerConfig: embed_dim must be >= 1");
}

SpeakerModel::SpeakerModel(ParamStore& ps, const SpeakerConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.use_se) se_ = std::make_unique<MaskNet>(ps, "se.");
  resnet_ = ResNet(ps, "extractor.", cfg_.resnet);
  const auto chs = resnet_.stage_channels();
  std::vector<int64_t> sel_ch;
  for (int s : cfg_.stages) sel_ch.push_back(chs[s - 2]);
  if (cfg_.use_fpm)
    fpm_ = std::make_unique<Fpm>(ps, "fpm.", chs, cfg_.resnet.ch(32),
                                 cfg_.resnet.variant == "2d");
  pool_ = StagePool(ps, "pool.", cfg_.pool, sel_ch, cfg_.stages);
  fc1_in_ = 0;
  for (size_t i = 0; i < sel_ch.size(); ++i) fc1_in_ += pool_.out_dim(static_cast<int>(i));
  fc1_ = Linear(ps, "fc1", fc1_in_, cfg_.embed_dim);
  fc2_ = Linear(ps, "fc2", cfg_.embed_dim, cfg_.n_speakers);
}

TensorPtr SpeakerModel::enhance(const TensorPtr& x, const FwdCtx& ctx) const {
  if (!se_) return x;
  return mask_apply(x, se_->forward(x, ctx));
}

std::vector<TensorPtr> SpeakerModel::stage_maps(const TensorPtr& xhat, const FwdCtx& ctx) const {
  auto C = resnet_.forward(xhat, ctx);
  std::array<TensorPtr, 4> maps = cfg_.use_fpm ? fpm_->forward(C) : C;
  std::vector<TensorPtr> sel;
  for (int s : cfg_.stages) sel.push_back(maps[s - 2]);
  return sel;
}

TensorPtr SpeakerModel::embed_from_maps(const std::vector<TensorPtr>& maps) const {
  if (maps.size() != cfg_.stages.size())
    throw std::invalid_argument("SpeakerModel: expected " + std::to_string(cfg_.stages.size()) +
                                " stage maps, got " + std::to_string(maps.size()));
  std::vector<TensorPtr> pooled;
  for (size_t i = 0; i < maps.size(); ++i)
    pooled.push_back(pool_.forward(static_cast<int>(i), maps[i]));
  TensorPtr cat = pooled.size() == 1 ? pooled[0] : concat_lastdim(pooled);
  return fc1_.forward(cat);
}

TensorPtr SpeakerModel::embed(const TensorPtr& x, const FwdCtx& ctx) const {
  return embed_from_maps(stage_maps(enhance(x, ctx), ctx));
}

TensorPtr SpeakerModel::logits(const TensorPtr& z) const { return fc2_.forward(z); }

TensorPtr SpeakerModel::softmax_loss(const TensorPtr& lg,
                                     const std::vector<int64_t>& labels) const {
  auto total = softmax_xent_sum(lg, labels);
  return mul_scalar(total, 1.0 / static_cast<double>(lg->dim(0)));
}

}  // namespace svf
