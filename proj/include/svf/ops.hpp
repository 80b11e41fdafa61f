// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_OPS_HPP
#define SVF_OPS_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "svf/tensor.hpp"

namespace svf {

// ---- elementwise ----
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr neg(const TensorPtr& a);
TensorPtr add_scalar(const TensorPtr& a, double s);
TensorPtr mul_scalar(const TensorPtr& a, double s);
// elementwise product with a constant (not differentiated through the constant)
TensorPtr mul_const(const TensorPtr& a, const Eigen::ArrayXd& c);
// x^p for real p; caller guarantees x > 0 unless p is a non-negative integer
TensorPtr pow_scalar(const TensorPtr& a, double p);
TensorPtr log_op(const TensorPtr& a);   // x > 0
TensorPtr exp_op(const TensorPtr& a);
TensorPtr sqrt_op(const TensorPtr& a);  // x > 0 for a finite gradient
TensorPtr clamp_min(const TensorPtr& a, double m);  // subgradient 0 where clamped

// ---- activations ----
TensorPtr relu(const TensorPtr& a);
TensorPtr tanh_op(const TensorPtr& a);
TensorPtr sigmoid(const TensorPtr& a);
// softmax along the last axis; rows sum to 1 within 1e-12
TensorPtr softmax_lastdim(const TensorPtr& a);

// ---- reductions ----
TensorPtr sum_all(const TensorPtr& a);
TensorPtr mean_all(const TensorPtr& a);

// ---- linear algebra ----
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);  // [m,k]x[k,n]
// x [n,in] * W [in,out] + b [out] broadcast over rows
TensorPtr affine(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b);

// ---- shape plumbing ----
TensorPtr reshape(const TensorPtr& a, Shape s);
TensorPtr concat_lastdim(const std::vector<TensorPtr>& parts);
TensorPtr slice_axis(const TensorPtr& a, int axis, int64_t start, int64_t len);
// select rows (axis 0) by index; indices may repeat
TensorPtr gather_rows(const TensorPtr& a, std::vector<int64_t> idx);
// [N,C,F,T] -> [N, F*T, C]; feature-map positions become row vectors
TensorPtr channels_last_rows(const TensorPtr& a);
// [1,C,F,T] -> [T, context*C*F]; per-frame vectors with +-(context/2) neighbor
// frames stacked around each frame, edges replicated. context must be odd.
TensorPtr time_rows(const TensorPtr& a, int context = 1);

// ---- weighted pooling pieces ----
// out[n,c] = sum_k alpha[n,k] * H[n,k,c]
TensorPtr weighted_rowsum(const TensorPtr& alpha, const TensorPtr& H);
// out[n,c,f,t] = P[n,c,f,t] * q[n,t]
TensorPtr scale_time(const TensorPtr& P, const TensorPtr& q);
// zero-extend the trailing end of the F and T axes of a [N,C,F,T] map
TensorPtr pad_end(const TensorPtr& a, int64_t pf, int64_t pt);

// ---- losses ----
// sum over rows of (logsumexp(row) - row[label]); labels in [0, K)
TensorPtr softmax_xent_sum(const TensorPtr& logits, std::vector<int64_t> labels);

// ---- normalization ----
// Per-channel batch normalization over (N, F, T) of a [N,C,F,T] map.
// train=true uses batch statistics and, when update_running is set, folds them
// into the running buffers (momentum-weighted); train=false uses the running
// buffers and throws if none have been written yet.
TensorPtr batchnorm(const TensorPtr& x, const TensorPtr& gamma,
                    const TensorPtr& beta, const TensorPtr& running_mean,
                    const TensorPtr& running_var, const TensorPtr& running_count,
                    bool train, bool update_running, double momentum = 0.1,
                    double eps = 1e-5);

// ---- convolution family (see conv.cpp) ----
struct ConvSpec {
  int64_t sf = 1, st = 1;    // stride, axes (F, T)
  int64_t df = 1, dt = 1;    // dilation
  int64_t plf = 0, phf = 0;  // padding lo/hi on F
  int64_t plt = 0, pht = 0;  // padding lo/hi on T
};

// x [N,Ci,F,T], w [Co,Ci,kf,kt], optional bias [Co]
TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 const ConvSpec& spec);
// transposed convolution, zero padding; out spatial = (in-1)*stride + k
TensorPtr tconv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                  int64_t sf, int64_t st);
// max pooling with implicit -inf padding; every window must cover at least one
// real input cell
TensorPtr maxpool2d(const TensorPtr& x, int64_t kf, int64_t kt, int64_t sf,
                    int64_t st, int64_t plf = 0, int64_t phf = 0,
                    int64_t plt = 0, int64_t pht = 0);

// output spatial size of a padded/dilated/strided convolution axis
int64_t conv_out_len(int64_t in, int64_t k, int64_t stride, int64_t dil,
                     int64_t pad_lo, int64_t pad_hi);

}  // namespace svf

#endif
