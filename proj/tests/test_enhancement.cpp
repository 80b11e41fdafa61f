// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0
//
// Ratio-mask network: range/shape contracts, the 41-frame receptive field,
// exact mask-apply semantics and gradients, and the all-ones bypass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "svf/enhancement.hpp"
#include "svf/gradcheck.hpp"
#include "svf/ops.hpp"
#include "svf/rng.hpp"

using namespace svf;

namespace {

TensorPtr rand_t(Shape s, uint64_t seed, bool rg = true, double sd = 1.0) {
  Rng r(seed);
  return Tensor::randn(std::move(s), r, sd, rg);
}

void expect_fd(const ParamMap& params, const std::function<TensorPtr()>& build,
               double tol = 1e-4) {
  FdOptions opt;
  opt.tol = tol;
  auto rep = finite_difference_check(params, build, opt);
  INFO("worst: ", rep.worst_param, "[", rep.worst_index, "] analytic ",
       rep.worst_analytic, " numeric ", rep.worst_numeric);
  CHECK(rep.max_rel_err < tol);
  CHECK(rep.checked > 0);
}

}  // namespace

TEST_CASE("mask values lie strictly inside (0,1) and keep the input shape") {
  for (int64_t d : {64, 160}) {
    ParamStore ps(11);
    MaskNet net(ps, "se.");
    auto X = rand_t({1, 1, d, 20}, 100 + static_cast<uint64_t>(d), false);
    FwdCtx ctx{true, true};
    auto M = net.forward(X, ctx);
    REQUIRE(M->shape == X->shape);
    for (int64_t i = 0; i < M->numel(); ++i) {
      CHECK(M->data[i] > 0.0);
      CHECK(M->data[i] < 1.0);
    }
  }
}

TEST_CASE("mask network rejects inputs that are not [N,1,F,T]") {
  ParamStore ps(12);
  MaskNet net(ps, "se.");
  FwdCtx ctx{true, true};
  CHECK_THROWS_AS(net.forward(rand_t({1, 2, 8, 8}, 1, false), ctx), std::invalid_argument);
  CHECK_THROWS_AS(net.forward(rand_t({8, 8}, 2, false), ctx), std::invalid_argument);
}

TEST_CASE("receptive field per mask cell spans exactly 41 frames") {
  // One stride-1 layer plus ten dilation-2 3x3 layers: 1 + 10*4 = 41. The
  // batchnorm layers couple positions through batch statistics, so the probe
  // runs in eval mode after one statistics-gathering pass.
  ParamStore ps(13);
  MaskNet net(ps, "se.");
  const int64_t T = 64, mid = 32;
  auto X = rand_t({1, 1, 8, T}, 77, true, 1.0);
  {
    NoGrad ng;
    FwdCtx warm{true, true};
    (void)net.forward(X, warm);
  }
  Tape tape;
  FwdCtx ev{false, false};
  auto M = net.forward(X, ev);
  auto cell = slice_axis(slice_axis(M, 3, mid, 1), 2, 3, 1);  // one mask entry
  tape.backward(sum_all(cell));
  std::vector<int> touched(static_cast<size_t>(T), 0);
  for (int64_t f = 0; f < 8; ++f)
    for (int64_t t = 0; t < T; ++t)
      if (X->grad[f * T + t] != 0.0) touched[static_cast<size_t>(t)] = 1;
  // inside the field: both endpoints and the center respond
  CHECK(touched[static_cast<size_t>(mid - 20)] == 1);
  CHECK(touched[static_cast<size_t>(mid)] == 1);
  CHECK(touched[static_cast<size_t>(mid + 20)] == 1);
  // outside: structurally impossible to respond
  for (int64_t t = 0; t < T; ++t)
    if (t < mid - 20 || t > mid + 20) CHECK(touched[static_cast<size_t>(t)] == 0);
  int64_t first = T, last = -1;
  for (int64_t t = 0; t < T; ++t)
    if (touched[static_cast<size_t>(t)]) {
      first = std::min(first, t);
      last = std::max(last, t);
    }
  CHECK(last - first + 1 == 41);
  // a dilation-2 stack reaches even offsets only, 21 lattice points in the span
  int count = 0;
  for (int v : touched) count += v;
  CHECK(count == 21);
  for (int64_t t = mid - 19; t <= mid + 19; t += 2) CHECK(touched[static_cast<size_t>(t)] == 0);
}

TEST_CASE("mask_apply: identity, annihilator, and scalar-loop oracle") {
  auto X = rand_t({1, 1, 5, 9}, 31, false);
  auto ones = Tensor::full(X->shape, 1.0);
  auto zeros = Tensor::zeros(X->shape);
  auto id = mask_apply(X, ones);
  auto z = mask_apply(X, zeros);
  for (int64_t i = 0; i < X->numel(); ++i) {
    CHECK(id->data[i] == X->data[i]);
    CHECK(z->data[i] == 0.0);
  }
  auto M = rand_t(X->shape, 32, false);
  auto Y = mask_apply(X, M);
  for (int64_t i = 0; i < X->numel(); ++i) CHECK(Y->data[i] == X->data[i] * M->data[i]);
}

TEST_CASE("mask_apply rejects mismatched shapes") {
  CHECK_THROWS_AS(mask_apply(rand_t({1, 1, 4, 5}, 1, false), rand_t({1, 1, 4, 6}, 2, false)),
                  std::invalid_argument);
}

TEST_CASE("gradient through mask_apply w.r.t. M is X times the upstream gradient") {
  auto X = rand_t({1, 1, 3, 7}, 41, false);
  auto M = rand_t(X->shape, 42, true);
  Rng wr(43);
  Eigen::ArrayXd W(X->numel());
  for (int64_t i = 0; i < X->numel(); ++i) W[i] = wr.normal();
  Tape tape;
  tape.backward(sum_all(mul_const(mask_apply(X, M), W)));
  for (int64_t i = 0; i < X->numel(); ++i)
    CHECK(M->grad[i] == doctest::Approx(X->data[i] * W[i]).epsilon(1e-12));

  ParamMap pm{{"M", M}};
  expect_fd(pm, [&] { return sum_all(mul_const(mask_apply(X, M), W)); });
}

TEST_CASE("composite gradient fragment: masking net end to end") {
  ParamStore ps(17);
  MaskNet net(ps, "se.");
  auto X = rand_t({1, 1, 6, 12}, 55, true, 0.5);
  Rng wr(56);
  Eigen::ArrayXd W(X->numel());
  for (int64_t i = 0; i < X->numel(); ++i) W[i] = wr.normal();
  ParamMap pm = ps.params();
  pm["input"] = X;
  FdOptions opt;
  opt.max_indices_per_param = 6;
  FwdCtx ctx{true, false};  // batch statistics, no running update: replayable
  auto rep = finite_difference_check(
      pm, [&] { return sum_all(mul_const(mask_apply(X, net.forward(X, ctx)), W)); }, opt);
  INFO("worst: ", rep.worst_param, "[", rep.worst_index, "] analytic ", rep.worst_analytic,
       " numeric ", rep.worst_numeric);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK(rep.checked > 0);
}

TEST_CASE("forced all-ones mask reproduces the mask-free computation exactly") {
  ParamStore ps(19);
  MaskNet net(ps, "se.");
  net.force_ones = true;
  auto X = rand_t({2, 1, 4, 10}, 60, false);
  FwdCtx ctx{true, true};
  auto M = net.forward(X, ctx);
  for (int64_t i = 0; i < M->numel(); ++i) CHECK(M->data[i] == 1.0);
  auto Y = mask_apply(X, M);
  for (int64_t i = 0; i < X->numel(); ++i) CHECK(Y->data[i] == X->data[i]);
}
