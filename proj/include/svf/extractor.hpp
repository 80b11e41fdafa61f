// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_EXTRACTOR_HPP
#define SVF_EXTRACTOR_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "svf/enhancement.hpp"
#include "svf/layers.hpp"
#include "svf/tensor.hpp"

namespace svf {

// ResNet-34 trunk configuration. The width multiplier scales the per-stage
// channel counts 32/64/128/256 uniformly so desk-scale runs keep every shape
// relationship of the full-width network.
struct ResNetConfig {
  std::string variant = "2d";          // "2d" | "1d"
  double width_multiplier = 1.0;
  std::array<int64_t, 4> blocks{3, 4, 6, 3};
  std::string input_kind = "fbank64";  // "fbank64" | "spec160"

  int64_t feat_dim() const { return input_kind == "spec160" ? 160 : 64; }
  int64_t ch(int64_t base) const;  // base * width_multiplier, rounded
  void validate() const;
};

// Two 3x3 convolutions with batchnorm, plus a projection shortcut when the
// block changes resolution or channel count. Stride-2 convolutions pad (1,0)
// on the strided axis so output lengths follow floor(L/2) for both parities;
// the 1x1 shortcut first crops its input to even length to land on the same
// grid.
class BasicBlock {
 public:
  BasicBlock() = default;
  BasicBlock(ParamStore& ps, const std::string& path, int64_t cin, int64_t cout,
             bool strided, bool two_d);
  TensorPtr forward(const TensorPtr& x, const FwdCtx& ctx) const;

 private:
  Conv2d c1_, c2_, sc_;
  BatchNorm b1_, b2_, sb_;
  bool has_shortcut_ = false;
  bool strided_ = false;
  bool two_d_ = true;
};

// ResNet-34 speaker trunk. Emits the four stage outputs C2..C5 with time
// extents (T, floor(T/2), floor(T/4), floor(T/8)). The 2d variant also halves
// frequency at stages 2-4; the 1d variant collapses the feature axis in conv1
// and downsamples time only.
class ResNet {
 public:
  ResNet() = default;
  ResNet(ParamStore& ps, const std::string& prefix, const ResNetConfig& cfg);
  std::array<TensorPtr, 4> forward(const TensorPtr& x, const FwdCtx& ctx) const;

  const ResNetConfig& config() const { return cfg_; }
  // channel counts of C2..C5
  std::array<int64_t, 4> stage_channels() const;

 private:
  ResNetConfig cfg_;
  Conv2d conv1_;
  BatchNorm bn1_;
  bool pool160_ = false;
  std::vector<std::vector<BasicBlock>> stages_;
};

// Feature pyramid: 1x1 laterals to a shared mid width, transposed-conv
// top-down upsampling merged by addition, then 1x1 + 3x3 smoothing that
// restores each level to its bottom-up channel count. Odd-length merges
// zero-extend the upsampled map by one trailing cell so every P_i keeps
// exactly C_i's spatial extent.
class Fpm {
 public:
  Fpm() = default;
  Fpm(ParamStore& ps, const std::string& prefix,
      const std::array<int64_t, 4>& cdims, int64_t mid, bool two_d);
  std::array<TensorPtr, 4> forward(const std::array<TensorPtr, 4>& C) const;

 private:
  std::vector<Conv2d> lat_, mix_, out_;
  std::vector<TConv2d> up_;
};

// Per-stage pooling over feature-map positions. gap/sap emit the (attention-)
// weighted mean; sp/asp append the weighted standard deviation. gap/sp use a
// uniform weight 1/K computed by the same division the softmax of all-zero
// scores produces, so sap with zeroed parameters reproduces gap bit for bit.
class StagePool {
 public:
  StagePool() = default;
  StagePool(ParamStore& ps, const std::string& prefix, const std::string& kind,
            const std::vector<int64_t>& channels, const std::vector<int>& stages);
  // slot indexes the selected-stage list; H is that stage's map [N,C,F,T]
  TensorPtr forward(int slot, const TensorPtr& H) const;
  int64_t out_dim(int slot) const;
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
  std::vector<int64_t> ch_;
  std::vector<TensorPtr> W_, b_, v_;
};

struct SpeakerConfig {
  ResNetConfig resnet;
  std::string pool = "sap";           // gap | sp | sap | asp
  std::vector<int> stages{2, 3, 4, 5};  // aggregation stages; {5} = single-scale
  bool use_fpm = true;
  bool use_se = false;
  int64_t n_speakers = 1;
  int64_t embed_dim = 128;
  void validate() const;
};

// The full speaker network: optional enhancement mask, ResNet trunk, optional
// feature pyramid, per-stage pooling, FC1 embedding and FC2 classifier. The
// stages are exposed separately so the trainer can weight the pyramid maps by
// voice posteriors before pooling.
class SpeakerModel {
 public:
  SpeakerModel(ParamStore& ps, const SpeakerConfig& cfg);

  TensorPtr enhance(const TensorPtr& x, const FwdCtx& ctx) const;
  // maps of the configured stages, in cfg.stages order (pyramid outputs when
  // use_fpm, raw stage outputs otherwise)
  std::vector<TensorPtr> stage_maps(const TensorPtr& xhat, const FwdCtx& ctx) const;
  TensorPtr embed_from_maps(const std::vector<TensorPtr>& maps) const;  // [N,128]
  TensorPtr embed(const TensorPtr& x, const FwdCtx& ctx) const;
  TensorPtr logits(const TensorPtr& z) const;
  // mean softmax cross-entropy over the batch
  TensorPtr softmax_loss(const TensorPtr& lg, const std::vector<int64_t>& labels) const;

  const SpeakerConfig& config() const { return cfg_; }
  MaskNet* mask_net() { return se_.get(); }  // null without enhancement
  const ResNet& trunk() const { return resnet_; }
  int64_t fc1_in() const { return fc1_in_; }

 private:
  SpeakerConfig cfg_;
  std::unique_ptr<MaskNet> se_;
  ResNet resnet_;
  std::unique_ptr<Fpm> fpm_;
  StagePool pool_;
  Linear fc1_, fc2_;
  int64_t fc1_in_ = 0;
};

}  // namespace svf

#endif
