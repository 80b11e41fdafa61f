// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_GRADCHECK_HPP
#define SVF_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <string>

#include "svf/optim.hpp"
#include "svf/tensor.hpp"

namespace svf {

struct FdOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // 0 = every entry; otherwise this many deterministically sampled entries per
  // parameter
  int64_t max_indices_per_param = 0;
  uint64_t seed = 0xfd5eed;
  // entries where both analytic and numeric gradients are below this magnitude
  // count as agreeing (avoids 0/0 noise on structurally dead coordinates)
  double dead_zone = 1e-7;
};

struct FdReport {
  double max_rel_err = 0.0;
  int64_t checked = 0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool pass = true;
  double tol = 0.0;
};

// Central-difference check of d(loss)/d(param) for every listed parameter.
// `build_loss` must rebuild the scalar loss from current parameter values and
// must be deterministic; the harness evaluates it twice up front and rejects
// fragments whose value drifts (e.g. batchnorm left in running-update mode).
FdReport finite_difference_check(const ParamMap& params,
                                 const std::function<TensorPtr()>& build_loss,
                                 const FdOptions& opt = {});

}  // namespace svf

#endif
