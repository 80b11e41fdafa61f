// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_TENSOR_HPP
#define SVF_TENSOR_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "svf/rng.hpp"

namespace svf {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense n-dimensional array of 64-bit floats with reverse-mode autodiff
// wiring. `data` is row-major; `grad` is lazily allocated and always matches
// `data` in length once present.
//
// A Tensor is a leaf when it has no backward function (parameters, inputs,
// constants). Non-leaf tensors are op outputs recorded on the active tape;
// their backward functions read this tensor's grad and accumulate into the
// parents' grads.
class Tensor {
 public:
  Shape shape;
  Eigen::ArrayXd data;
  Eigen::ArrayXd grad;  // size 0 until first needed
  bool requires_grad = false;

  std::vector<TensorPtr> parents;
  std::function<void(Tensor&)> backward_fn;

  explicit Tensor(Shape s);

  int64_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  // negative indices count from the back
  int64_t dim(int i) const;
  bool is_leaf() const { return !backward_fn; }

  void ensure_grad();
  void zero_grad();
  void accum_grad(const Eigen::ArrayXd& g);

  // value of a one-element tensor
  double value() const;

  static TensorPtr create(Shape s, bool requires_grad = false);
  static TensorPtr zeros(Shape s, bool requires_grad = false);
  static TensorPtr full(Shape s, double v, bool requires_grad = false);
  static TensorPtr from(Shape s, std::initializer_list<double> v,
                        bool requires_grad = false);
  static TensorPtr from_vec(Shape s, const std::vector<double>& v,
                            bool requires_grad = false);
  static TensorPtr randn(Shape s, Rng& rng, double stddev = 1.0,
                         bool requires_grad = false);

  // same data, detached from the graph
  TensorPtr detach() const;
};

// Ordered record of executed operations. Replaying the records in reverse
// visits every recorded node exactly once; gradients of leaves accumulate
// additively across backward calls, gradients of recorded intermediates are
// reset at the start of each backward.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(TensorPtr t);
  // Seeds d(loss)=1 and replays adjoints in reverse. `free_graph` releases
  // each node's closure and grad as soon as it has been consumed (training
  // mode); leave it false to keep the tape replayable.
  void backward(const TensorPtr& loss, bool free_graph = false);
  size_t size() const { return nodes_.size(); }

  static Tape* current();

 private:
  std::vector<TensorPtr> nodes_;
  Tape* prev_;
};

// Suspends recording for its scope (inference and labeling passes).
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;

 private:
  Tape* saved_;
};

bool grad_enabled();

// Records `out` on the active tape if grad flows through any parent.
// `fn` must add into the parents' grads via accum_grad.
void wire(const TensorPtr& out, std::vector<TensorPtr> parents,
          std::function<void(Tensor&)> fn);

}  // namespace svf

#endif
