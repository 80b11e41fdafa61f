// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace svf {

void SgdMomentum::step(const ParamMap& params) {
  for (const auto& [name, p] : params) {
    if (!p->grad.size()) continue;  // parameter untouched by this loss
    auto& v = slots_[name + ".v"];
    if (v.size() != p->numel()) v = Eigen::ArrayXd::Zero(p->numel());
    Eigen::ArrayXd g = p->grad;
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p->data;
    v = cfg_.momentum * v + g;
    p->data -= cfg_.learning_rate * v;
  }
}

void Adam::step(const ParamMap& params) {
  auto& tslot = slots_["t"];
  if (tslot.size() != 1) {
    tslot = Eigen::ArrayXd::Zero(1);
  }
  tslot[0] += 1.0;
  const double t = tslot[0];
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
  for (const auto& [name, p] : params) {
    if (!p->grad.size()) continue;
    auto& m = slots_[name + ".m"];
    auto& v = slots_[name + ".vv"];
    if (m.size() != p->numel()) m = Eigen::ArrayXd::Zero(p->numel());
    if (v.size() != p->numel()) v = Eigen::ArrayXd::Zero(p->numel());
    Eigen::ArrayXd g = p->grad;
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p->data;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.square();
    p->data -= cfg_.learning_rate * (m / bc1) / ((v / bc2).sqrt() + cfg_.eps);
  }
}

std::unique_ptr<Optimizer> make_optimizer(const OptimizerConfig& cfg) {
  if (cfg.kind == "sgd-momentum") return std::make_unique<SgdMomentum>(cfg);
  if (cfg.kind == "adam") return std::make_unique<Adam>(cfg);
  throw std::invalid_argument("unknown optimizer kind: " + cfg.kind);
}

void zero_grads(const ParamMap& params) {
  for (const auto& [name, p] : params) {
    (void)name;
    p->zero_grad();
  }
}

double scheduled_lr(double base, int64_t epoch, int64_t total_epochs) {
  if (total_epochs <= 0) return base;
  if (epoch >= (3 * total_epochs) / 4) return base * 0.01;
  if (epoch >= total_epochs / 2) return base * 0.1;
  return base;
}

}  // namespace svf
