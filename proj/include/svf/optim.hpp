// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_OPTIM_HPP
#define SVF_OPTIM_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "svf/tensor.hpp"

namespace svf {

using ParamMap = std::map<std::string, TensorPtr>;

struct OptimizerConfig {
  std::string kind = "sgd-momentum";  // sgd-momentum | adam
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  double beta1 = 0.9;    // adam
  double beta2 = 0.999;  // adam
  double eps = 1e-8;     // adam
};

// Base carries the slot store so checkpoints can serialize optimizer state
// next to the parameters they belong to.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}
  virtual ~Optimizer() = default;

  // One update from the gradients currently held by the parameters.
  virtual void step(const ParamMap& params) = 0;

  OptimizerConfig& config() { return cfg_; }
  const OptimizerConfig& config() const { return cfg_; }

  // name -> slot buffer, flattened for serialization ("<param>.v", "t", ...)
  std::map<std::string, Eigen::ArrayXd>& slots() { return slots_; }
  const std::map<std::string, Eigen::ArrayXd>& slots() const { return slots_; }

 protected:
  OptimizerConfig cfg_;
  std::map<std::string, Eigen::ArrayXd> slots_;
};

// v <- momentum*v + (g + weight_decay*theta); theta <- theta - lr*v
class SgdMomentum : public Optimizer {
 public:
  explicit SgdMomentum(OptimizerConfig cfg) : Optimizer(std::move(cfg)) {}
  void step(const ParamMap& params) override;
};

// Bias-corrected Adam with optional decoupled-free (classic) weight decay
// folded into the gradient.
class Adam : public Optimizer {
 public:
  explicit Adam(OptimizerConfig cfg) : Optimizer(std::move(cfg)) {}
  void step(const ParamMap& params) override;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg);

void zero_grads(const ParamMap& params);

// Piecewise-constant decay: x0.1 once half the epoch budget is spent and
// x0.01 from three quarters on (integer-floor thresholds).
double scheduled_lr(double base, int64_t epoch, int64_t total_epochs);

}  // namespace svf

#endif
