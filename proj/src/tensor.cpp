// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace svf {

namespace {
thread_local Tape* g_tape = nullptr;
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d <= 0) throw std::invalid_argument("shape dims must be positive, got " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
  data = Eigen::ArrayXd::Zero(shape_numel(shape));
}

int64_t Tensor::dim(int i) const {
  int r = rank();
  if (i < 0) i += r;
  if (i < 0 || i >= r)
    throw std::invalid_argument("dim index out of range for " + shape_str(shape));
  return shape[static_cast<size_t>(i)];
}

void Tensor::ensure_grad() {
  if (grad.size() != data.size()) grad = Eigen::ArrayXd::Zero(data.size());
}

void Tensor::zero_grad() {
  if (grad.size()) grad.setZero();
}

void Tensor::accum_grad(const Eigen::ArrayXd& g) {
  if (g.size() != data.size())
    throw std::logic_error("gradient size mismatch: tensor " + shape_str(shape));
  ensure_grad();
  grad += g;
}

double Tensor::value() const {
  if (numel() != 1)
    throw std::invalid_argument("value() requires a one-element tensor, got " + shape_str(shape));
  return data[0];
}

TensorPtr Tensor::create(Shape s, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(s));
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::zeros(Shape s, bool requires_grad) { return create(std::move(s), requires_grad); }

TensorPtr Tensor::full(Shape s, double v, bool requires_grad) {
  auto t = create(std::move(s), requires_grad);
  t->data.setConstant(v);
  return t;
}

TensorPtr Tensor::from(Shape s, std::initializer_list<double> v, bool requires_grad) {
  auto t = create(std::move(s), requires_grad);
  if (static_cast<int64_t>(v.size()) != t->numel())
    throw std::invalid_argument("from(): value count does not match shape");
  int64_t i = 0;
  for (double x : v) t->data[i++] = x;
  return t;
}

TensorPtr Tensor::from_vec(Shape s, const std::vector<double>& v, bool requires_grad) {
  auto t = create(std::move(s), requires_grad);
  if (static_cast<int64_t>(v.size()) != t->numel())
    throw std::invalid_argument("from_vec(): value count does not match shape");
  for (int64_t i = 0; i < t->numel(); ++i) t->data[i] = v[static_cast<size_t>(i)];
  return t;
}

TensorPtr Tensor::randn(Shape s, Rng& rng, double stddev, bool requires_grad) {
  auto t = create(std::move(s), requires_grad);
  for (int64_t i = 0; i < t->numel(); ++i) t->data[i] = stddev * rng.normal();
  return t;
}

TensorPtr Tensor::detach() const {
  auto t = create(shape, false);
  t->data = data;
  return t;
}

Tape::Tape() : prev_(g_tape) { g_tape = this; }

Tape::~Tape() { g_tape = prev_; }

Tape* Tape::current() { return g_tape; }

void Tape::record(TensorPtr t) { nodes_.push_back(std::move(t)); }

void Tape::backward(const TensorPtr& loss, bool free_graph) {
  if (!loss) throw std::invalid_argument("backward: null loss");
  if (loss->numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
  // Intermediates restart from zero each call; leaves keep accumulating.
  for (auto& n : nodes_) {
    if (!n->is_leaf()) {
      n->ensure_grad();
      n->zero_grad();
    }
  }
  loss->ensure_grad();
  loss->grad[0] += 1.0;
  for (size_t i = nodes_.size(); i-- > 0;) {
    Tensor& n = *nodes_[i];
    if (n.backward_fn) n.backward_fn(n);
    if (free_graph) {
      n.backward_fn = nullptr;
      n.parents.clear();
      n.grad.resize(0);
    }
  }
  if (free_graph) nodes_.clear();
}

NoGrad::NoGrad() : saved_(g_tape) { g_tape = nullptr; }

NoGrad::~NoGrad() { g_tape = saved_; }

bool grad_enabled() { return g_tape != nullptr; }

void wire(const TensorPtr& out, std::vector<TensorPtr> parents,
          std::function<void(Tensor&)> fn) {
  Tape* t = Tape::current();
  if (!t) return;
  bool any = false;
  for (const auto& p : parents)
    if (p->requires_grad) any = true;
  if (!any) return;
  out->requires_grad = true;
  out->parents = std::move(parents);
  out->backward_fn = std::move(fn);
  t->record(out);
}

}  // namespace svf
