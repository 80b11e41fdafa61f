// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_LAYERS_HPP
#define SVF_LAYERS_HPP

#include <cstdint>
#include <string>
#include <utility>

#include "svf/ops.hpp"
#include "svf/optim.hpp"
#include "svf/rng.hpp"
#include "svf/tensor.hpp"

namespace svf {

// Per-call forward switches. `train` selects batch statistics in batchnorm;
// `bn_update_running` additionally folds them into the running buffers, so a
// train-mode forward can be replayed bit-identically by leaving it off.
struct FwdCtx {
  bool train = false;
  bool bn_update_running = false;
};

// Owner of every learnable parameter and persistent buffer, keyed by full
// dotted path. Creation order does not matter: each parameter is initialized
// from its own named substream of the store seed.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  // Kaiming fan-in init: normal with stddev sqrt(2/fan_in).
  TensorPtr weight(const std::string& name, Shape s, int64_t fan_in);
  TensorPtr constant_param(const std::string& name, Shape s, double fill);
  TensorPtr buffer(const std::string& name, Shape s, double fill = 0.0);

  TensorPtr param(const std::string& name) const;  // throws if absent
  bool has_param(const std::string& name) const;

  ParamMap& params() { return params_; }
  const ParamMap& params() const { return params_; }
  ParamMap& buffers() { return buffers_; }
  const ParamMap& buffers() const { return buffers_; }

  // learnable parameters whose path starts with `prefix`
  ParamMap with_prefix(const std::string& prefix) const;

  int64_t count_with_prefix(const std::string& prefix) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  ParamMap params_;
  ParamMap buffers_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& path, int64_t cin, int64_t cout,
         int64_t kf, int64_t kt, ConvSpec spec, bool with_bias);
  TensorPtr forward(const TensorPtr& x) const { return conv2d(x, w, b, spec); }

  TensorPtr w, b;  // b null when bias disabled
  ConvSpec spec;
};

class TConv2d {
 public:
  TConv2d() = default;
  TConv2d(ParamStore& ps, const std::string& path, int64_t cin, int64_t cout,
          int64_t kf, int64_t kt, int64_t sf, int64_t st, bool with_bias);
  TensorPtr forward(const TensorPtr& x) const { return tconv2d(x, w, b, sf_, st_); }

  TensorPtr w, b;

 private:
  int64_t sf_ = 1, st_ = 1;
};

class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParamStore& ps, const std::string& path, int64_t channels);
  TensorPtr forward(const TensorPtr& x, const FwdCtx& ctx) const {
    return batchnorm(x, gamma, beta, rmean, rvar, rcount, ctx.train,
                     ctx.train && ctx.bn_update_running);
  }

  TensorPtr gamma, beta, rmean, rvar, rcount;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, const std::string& path, int64_t in, int64_t out);
  TensorPtr forward(const TensorPtr& x) const { return affine(x, w, b); }

  TensorPtr w, b;
};

// Single unidirectional LSTM layer, composed from tensor primitives so the
// tape differentiates through time. Gate layout along the 4H axis: input,
// forget, candidate, output.
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(ParamStore& ps, const std::string& path, int64_t in, int64_t hidden);

  // One recurrence step; x_t [1,in], h and c [1,H].
  std::pair<TensorPtr, TensorPtr> step(const TensorPtr& x_t, const TensorPtr& h,
                                       const TensorPtr& c) const;

  // Full sequence [T,in] -> hidden sequence [T,H]. Null h0/c0 start at zero.
  // When h_out/c_out are given they receive the live final state (callers
  // detach them at truncation boundaries).
  TensorPtr forward(const TensorPtr& x, TensorPtr h0 = nullptr,
                    TensorPtr c0 = nullptr, TensorPtr* h_out = nullptr,
                    TensorPtr* c_out = nullptr) const;

  int64_t hidden = 0;
  TensorPtr wx, wh, b;
};

}  // namespace svf

#endif
