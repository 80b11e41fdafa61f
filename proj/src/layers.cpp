// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace svf {

TensorPtr ParamStore::weight(const std::string& name, Shape s, int64_t fan_in) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    if (it->second->shape != s)
      throw std::logic_error("parameter " + name + " re-registered with different shape");
    return it->second;
  }
  Rng sub = Rng(seed_).substream("init/" + name);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  auto t = Tensor::randn(std::move(s), sub, stddev, true);
  params_[name] = t;
  return t;
}

TensorPtr ParamStore::constant_param(const std::string& name, Shape s, double fill) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    if (it->second->shape != s)
      throw std::logic_error("parameter " + name + " re-registered with different shape");
    return it->second;
  }
  auto t = Tensor::full(std::move(s), fill, true);
  params_[name] = t;
  return t;
}

TensorPtr ParamStore::buffer(const std::string& name, Shape s, double fill) {
  auto it = buffers_.find(name);
  if (it != buffers_.end()) {
    if (it->second->shape != s)
      throw std::logic_error("buffer " + name + " re-registered with different shape");
    return it->second;
  }
  auto t = Tensor::full(std::move(s), fill, false);
  buffers_[name] = t;
  return t;
}

TensorPtr ParamStore::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::invalid_argument("no such parameter: " + name);
  return it->second;
}

bool ParamStore::has_param(const std::string& name) const {
  return params_.count(name) != 0;
}

ParamMap ParamStore::with_prefix(const std::string& prefix) const {
  ParamMap out;
  for (const auto& [name, p] : params_)
    if (name.rfind(prefix, 0) == 0) out[name] = p;
  return out;
}

int64_t ParamStore::count_with_prefix(const std::string& prefix) const {
  int64_t n = 0;
  for (const auto& [name, p] : params_)
    if (name.rfind(prefix, 0) == 0) n += p->numel();
  return n;
}

Conv2d::Conv2d(ParamStore& ps, const std::string& path, int64_t cin, int64_t cout,
               int64_t kf, int64_t kt, ConvSpec spec_, bool with_bias)
    : spec(spec_) {
  w = ps.weight(path + ".w", {cout, cin, kf, kt}, cin * kf * kt);
  if (with_bias) b = ps.constant_param(path + ".b", {cout}, 0.0);
}

TConv2d::TConv2d(ParamStore& ps, const std::string& path, int64_t cin, int64_t cout,
                 int64_t kf, int64_t kt, int64_t sf, int64_t st, bool with_bias)
    : sf_(sf), st_(st) {
  w = ps.weight(path + ".w", {cout, cin, kf, kt}, cin * kf * kt);
  if (with_bias) b = ps.constant_param(path + ".b", {cout}, 0.0);
}

BatchNorm::BatchNorm(ParamStore& ps, const std::string& path, int64_t channels) {
  gamma = ps.constant_param(path + ".gamma", {channels}, 1.0);
  beta = ps.constant_param(path + ".beta", {channels}, 0.0);
  rmean = ps.buffer(path + ".running_mean", {channels}, 0.0);
  rvar = ps.buffer(path + ".running_var", {channels}, 1.0);
  rcount = ps.buffer(path + ".running_count", {1}, 0.0);
}

Linear::Linear(ParamStore& ps, const std::string& path, int64_t in, int64_t out) {
  w = ps.weight(path + ".w", {in, out}, in);
  b = ps.constant_param(path + ".b", {out}, 0.0);
}

LstmLayer::LstmLayer(ParamStore& ps, const std::string& path, int64_t in, int64_t hidden_)
    : hidden(hidden_) {
  wx = ps.weight(path + ".wx", {in, 4 * hidden}, in);
  wh = ps.weight(path + ".wh", {hidden, 4 * hidden}, hidden);
  b = ps.constant_param(path + ".b", {4 * hidden}, 0.0);
}

std::pair<TensorPtr, TensorPtr> LstmLayer::step(const TensorPtr& x_t,
                                                const TensorPtr& h,
                                                const TensorPtr& c) const {
  if (h->shape != Shape{1, hidden} || c->shape != Shape{1, hidden})
    throw std::invalid_argument("lstm step: state must be [1," + std::to_string(hidden) +
                                "], got h" + shape_str(h->shape) + " c" + shape_str(c->shape));
  auto gates = add(affine(x_t, wx, b), matmul(h, wh));  // [1, 4H]
  auto i = sigmoid(slice_axis(gates, 1, 0, hidden));
  auto f = sigmoid(slice_axis(gates, 1, hidden, hidden));
  auto g = tanh_op(slice_axis(gates, 1, 2 * hidden, hidden));
  auto o = sigmoid(slice_axis(gates, 1, 3 * hidden, hidden));
  auto c2 = add(mul(f, c), mul(i, g));
  auto h2 = mul(o, tanh_op(c2));
  return {h2, c2};
}

TensorPtr LstmLayer::forward(const TensorPtr& x, TensorPtr h0, TensorPtr c0,
                             TensorPtr* h_out, TensorPtr* c_out) const {
  if (x->rank() != 2 || x->dim(1) != wx->dim(0))
    throw std::invalid_argument("lstm forward: expected [T," + std::to_string(wx->dim(0)) +
                                "], got " + shape_str(x->shape));
  const int64_t T = x->dim(0);
  TensorPtr h = h0 ? h0 : Tensor::zeros({1, hidden});
  TensorPtr c = c0 ? c0 : Tensor::zeros({1, hidden});
  std::vector<TensorPtr> rows;
  rows.reserve(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    auto [h2, c2] = step(slice_axis(x, 0, t, 1), h, c);
    h = h2;
    c = c2;
    rows.push_back(reshape(h, {hidden}));
  }
  if (h_out) *h_out = h;
  if (c_out) *c_out = c;
  return reshape(concat_lastdim(rows), {T, hidden});
}

}  // namespace svf
