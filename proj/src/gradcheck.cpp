// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace svf {

FdReport finite_difference_check(const ParamMap& params,
                                 const std::function<TensorPtr()>& build_loss,
                                 const FdOptions& opt) {
  // Determinism gate: the same parameters must give the same loss bit for bit.
  double probe1, probe2;
  {
    NoGrad ng;
    probe1 = build_loss()->value();
    probe2 = build_loss()->value();
  }
  if (probe1 != probe2)
    throw std::logic_error(
        "finite_difference_check: loss fragment is stateful or nondeterministic "
        "(values " + std::to_string(probe1) + " vs " + std::to_string(probe2) + ")");

  // Analytic pass.
  zero_grads(params);
  {
    Tape tape;
    auto loss = build_loss();
    tape.backward(loss);
  }
  std::map<std::string, Eigen::ArrayXd> analytic;
  for (const auto& [name, p] : params)
    analytic[name] = p->grad.size() ? p->grad : Eigen::ArrayXd::Zero(p->numel());

  FdReport rep;
  rep.tol = opt.tol;
  Rng rng(opt.seed);
  NoGrad ng;
  for (const auto& [name, p] : params) {
    std::vector<int64_t> idx(static_cast<size_t>(p->numel()));
    std::iota(idx.begin(), idx.end(), 0);
    if (opt.max_indices_per_param > 0 &&
        p->numel() > opt.max_indices_per_param) {
      Rng sub = rng.substream(name);
      sub.shuffle(idx);
      idx.resize(static_cast<size_t>(opt.max_indices_per_param));
    }
    for (int64_t i : idx) {
      const double saved = p->data[i];
      p->data[i] = saved + opt.step;
      const double fp = build_loss()->value();
      p->data[i] = saved - opt.step;
      const double fm = build_loss()->value();
      p->data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * opt.step);
      const double a = analytic[name][i];
      ++rep.checked;
      if (std::abs(a) < opt.dead_zone && std::abs(numeric) < opt.dead_zone) continue;
      const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = name;
        rep.worst_index = i;
        rep.worst_analytic = a;
        rep.worst_numeric = numeric;
      }
    }
  }
  rep.pass = rep.max_rel_err < opt.tol;
  return rep;
}

}  // namespace svf
