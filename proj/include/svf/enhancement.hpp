// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_ENHANCEMENT_HPP
#define SVF_ENHANCEMENT_HPP

#include <string>
#include <vector>

#include "svf/layers.hpp"
#include "svf/tensor.hpp"

namespace svf {

// Ratio-mask enhancement network: 10 dilated 3x3 convolution layers (dilation
// 2 on both axes, 16 channels, batchnorm + ReLU) followed by a 1x1 sigmoid
// projection. Every layer preserves the d x T extent, so the mask multiplies
// the input feature map element-wise. Receptive field per mask cell is 41
// frames (1 + 10 * 4).
class MaskNet {
 public:
  MaskNet() = default;
  MaskNet(ParamStore& ps, const std::string& prefix, int64_t channels = 16);

  // X [N,1,F,T] -> mask [N,1,F,T] with entries strictly inside (0,1).
  // With force_ones set the network is bypassed and an exact all-ones
  // constant is returned, which makes the enhanced pipeline reproduce the
  // enhancement-free pipeline bit for bit.
  TensorPtr forward(const TensorPtr& X, const FwdCtx& ctx) const;

  bool force_ones = false;

 private:
  std::vector<Conv2d> convs_;
  std::vector<BatchNorm> bns_;
  Conv2d head_;
};

// X_hat = X .* M; shapes must match exactly.
TensorPtr mask_apply(const TensorPtr& X, const TensorPtr& M);

}  // namespace svf

#endif
