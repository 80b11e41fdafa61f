// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/enhancement.hpp"

#include <stdexcept>

#include "svf/ops.hpp"

namespace svf {

MaskNet::MaskNet(ParamStore& ps, const std::string& prefix, int64_t channels) {
  // Dilation 2 with kernel 3 needs pad 2 per side to preserve the extent.
  ConvSpec dil;
  dil.df = dil.dt = 2;
  dil.plf = dil.phf = dil.plt = dil.pht = 2;
  int64_t cin = 1;
  for (int i = 1; i <= 10; ++i) {
    const std::string base = prefix + "l" + std::to_string(i);
    convs_.emplace_back(ps, base, cin, channels, 3, 3, dil, /*with_bias=*/false);
    bns_.emplace_back(ps, base + ".bn", channels);
    cin = channels;
  }
  head_ = Conv2d(ps, prefix + "l11", channels, 1, 1, 1, ConvSpec{}, /*with_bias=*/true);
}

TensorPtr MaskNet::forward(const TensorPtr& X, const FwdCtx& ctx) const {
  if (X->rank() != 4 || X->dim(1) != 1)
    throw std::invalid_argument("MaskNet: input must be [N,1,F,T], got " + shape_str(X->shape));
  if (force_ones) return Tensor::full(X->shape, 1.0);
  TensorPtr h = X;
  for (size_t i = 0; i < convs_.size(); ++i)
    h = relu(bns_[i].forward(convs_[i].forward(h), ctx));
  return sigmoid(head_.forward(h));
}

TensorPtr mask_apply(const TensorPtr& X, const TensorPtr& M) {
  if (X->shape != M->shape)
    throw std::invalid_argument("mask_apply: shape mismatch " + shape_str(X->shape) + " vs " +
                                shape_str(M->shape));
  return mul(X, M);
}

}  // namespace svf
