// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0
//
// Convolution family: direct conv (im2col + GEMM), transposed conv
// (per-offset GEMM scatter), max pooling. One path serves every rank:
// 1-D networks run with F=1 and do all their striding on the T axis.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "svf/ops.hpp"

namespace svf {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;
using StrideDD = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;
using CMapStride = Eigen::Map<const MatRM, 0, StrideDD>;
using MapStride = Eigen::Map<MatRM, 0, StrideDD>;

void need(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Unrolls one sample's receptive fields into col (Ci*kf*kt rows by OF*OT
// columns, row-major). Out-of-range taps read as zero.
void im2col(const double* xn, int64_t Ci, int64_t F, int64_t T, int64_t kf,
            int64_t kt, const ConvSpec& s, int64_t OF, int64_t OT, double* col) {
  const int64_t Q = OF * OT;
  int64_t r = 0;
  for (int64_t ci = 0; ci < Ci; ++ci)
    for (int64_t i = 0; i < kf; ++i)
      for (int64_t j = 0; j < kt; ++j, ++r) {
        double* crow = col + r * Q;
        for (int64_t of = 0; of < OF; ++of) {
          const int64_t in_f = of * s.sf - s.plf + i * s.df;
          if (in_f < 0 || in_f >= F) {
            std::fill(crow + of * OT, crow + (of + 1) * OT, 0.0);
            continue;
          }
          const double* xrow = xn + (ci * F + in_f) * T;
          for (int64_t ot = 0; ot < OT; ++ot) {
            const int64_t in_t = ot * s.st - s.plt + j * s.dt;
            crow[of * OT + ot] = (in_t >= 0 && in_t < T) ? xrow[in_t] : 0.0;
          }
        }
      }
}

// Adjoint of im2col: scatter-adds col entries back onto the input layout.
void col2im_add(const double* col, int64_t Ci, int64_t F, int64_t T, int64_t kf,
                int64_t kt, const ConvSpec& s, int64_t OF, int64_t OT, double* dxn) {
  const int64_t Q = OF * OT;
  int64_t r = 0;
  for (int64_t ci = 0; ci < Ci; ++ci)
    for (int64_t i = 0; i < kf; ++i)
      for (int64_t j = 0; j < kt; ++j, ++r) {
        const double* crow = col + r * Q;
        for (int64_t of = 0; of < OF; ++of) {
          const int64_t in_f = of * s.sf - s.plf + i * s.df;
          if (in_f < 0 || in_f >= F) continue;
          double* xrow = dxn + (ci * F + in_f) * T;
          for (int64_t ot = 0; ot < OT; ++ot) {
            const int64_t in_t = ot * s.st - s.plt + j * s.dt;
            if (in_t >= 0 && in_t < T) xrow[in_t] += crow[of * OT + ot];
          }
        }
      }
}

}  // namespace

int64_t conv_out_len(int64_t in, int64_t k, int64_t stride, int64_t dil,
                     int64_t pad_lo, int64_t pad_hi) {
  need(in >= 1 && k >= 1 && stride >= 1 && dil >= 1 && pad_lo >= 0 && pad_hi >= 0,
       "conv_out_len: invalid geometry");
  const int64_t span = in + pad_lo + pad_hi - (dil * (k - 1) + 1);
  if (span < 0)
    throw std::invalid_argument(
        "convolution window (k=" + std::to_string(k) + ", dil=" + std::to_string(dil) +
        ") exceeds padded input of length " + std::to_string(in + pad_lo + pad_hi));
  return span / stride + 1;
}

TensorPtr conv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                 const ConvSpec& spec) {
  need(x->rank() == 4 && w->rank() == 4,
       "conv2d: x[N,Ci,F,T] and w[Co,Ci,kf,kt] required, got " + shape_str(x->shape) +
           " and " + shape_str(w->shape));
  const int64_t N = x->dim(0), Ci = x->dim(1), F = x->dim(2), T = x->dim(3);
  const int64_t Co = w->dim(0), kf = w->dim(2), kt = w->dim(3);
  need(w->dim(1) == Ci, "conv2d: input has " + std::to_string(Ci) + " channels but kernel expects " +
                            std::to_string(w->dim(1)));
  if (bias) need(bias->numel() == Co, "conv2d: bias size " + std::to_string(bias->numel()) +
                                          " != out channels " + std::to_string(Co));
  const int64_t OF = conv_out_len(F, kf, spec.sf, spec.df, spec.plf, spec.phf);
  const int64_t OT = conv_out_len(T, kt, spec.st, spec.dt, spec.plt, spec.pht);
  const int64_t K = Ci * kf * kt, Q = OF * OT;

  auto out = Tensor::create({N, Co, OF, OT});
  {
    MatRM col(K, Q);
    CMapRM W(w->data.data(), Co, K);
    for (int64_t n = 0; n < N; ++n) {
      im2col(x->data.data() + n * Ci * F * T, Ci, F, T, kf, kt, spec, OF, OT, col.data());
      MapRM O(out->data.data() + n * Co * Q, Co, Q);
      O.noalias() = W * col;
      if (bias)
        for (int64_t co = 0; co < Co; ++co) O.row(co).array() += bias->data[co];
    }
  }

  std::vector<TensorPtr> parents = {x, w};
  if (bias) parents.push_back(bias);
  wire(out, std::move(parents),
       [x, w, bias, spec, N, Ci, F, T, Co, kf, kt, OF, OT, K, Q](Tensor& n_) {
         MatRM col(K, Q), dcol(K, Q);
         CMapRM W(w->data.data(), Co, K);
         if (x->requires_grad) x->ensure_grad();
         if (w->requires_grad) w->ensure_grad();
         if (bias && bias->requires_grad) bias->ensure_grad();
         for (int64_t n = 0; n < N; ++n) {
           CMapRM G(n_.grad.data() + n * Co * Q, Co, Q);
           if (w->requires_grad) {
             im2col(x->data.data() + n * Ci * F * T, Ci, F, T, kf, kt, spec, OF, OT, col.data());
             MapRM(w->grad.data(), Co, K).noalias() += G * col.transpose();
           }
           if (x->requires_grad) {
             dcol.noalias() = W.transpose() * G;
             col2im_add(dcol.data(), Ci, F, T, kf, kt, spec, OF, OT,
                        x->grad.data() + n * Ci * F * T);
           }
           if (bias && bias->requires_grad)
             Eigen::Map<Eigen::VectorXd>(bias->grad.data(), Co) += G.rowwise().sum();
         }
       });
  return out;
}

TensorPtr tconv2d(const TensorPtr& x, const TensorPtr& w, const TensorPtr& bias,
                  int64_t sf, int64_t st) {
  need(x->rank() == 4 && w->rank() == 4,
       "tconv2d: x[N,Ci,F,T] and w[Co,Ci,kf,kt] required, got " + shape_str(x->shape) +
           " and " + shape_str(w->shape));
  need(sf >= 1 && st >= 1, "tconv2d: strides must be >= 1");
  const int64_t N = x->dim(0), Ci = x->dim(1), F = x->dim(2), T = x->dim(3);
  const int64_t Co = w->dim(0), kf = w->dim(2), kt = w->dim(3);
  need(w->dim(1) == Ci, "tconv2d: input has " + std::to_string(Ci) + " channels but kernel expects " +
                            std::to_string(w->dim(1)));
  if (bias) need(bias->numel() == Co, "tconv2d: bias size mismatch");
  const int64_t OF = (F - 1) * sf + kf;
  const int64_t OT = (T - 1) * st + kt;
  const int64_t P = F * T;

  auto out = Tensor::create({N, Co, OF, OT});
  {
    MatRM tmp(Co, P);
    for (int64_t n = 0; n < N; ++n) {
      CMapRM Xn(x->data.data() + n * Ci * P, Ci, P);
      double* on = out->data.data() + n * Co * OF * OT;
      for (int64_t i = 0; i < kf; ++i)
        for (int64_t j = 0; j < kt; ++j) {
          CMapStride Wij(w->data.data() + i * kt + j, Co, Ci, StrideDD(Ci * kf * kt, kf * kt));
          tmp.noalias() = Wij * Xn;
          for (int64_t co = 0; co < Co; ++co)
            for (int64_t f = 0; f < F; ++f) {
              const double* src = tmp.data() + (co * F + f) * T;
              double* dst = on + (co * OF + f * sf + i) * OT + j;
              for (int64_t t = 0; t < T; ++t) dst[t * st] += src[t];
            }
        }
      if (bias)
        for (int64_t co = 0; co < Co; ++co)
          Eigen::Map<Eigen::ArrayXd>(on + co * OF * OT, OF * OT) += bias->data[co];
    }
  }

  std::vector<TensorPtr> parents = {x, w};
  if (bias) parents.push_back(bias);
  wire(out, std::move(parents),
       [x, w, bias, sf, st, N, Ci, F, T, Co, kf, kt, OF, OT, P](Tensor& n_) {
         MatRM gij(Co, P);
         if (x->requires_grad) x->ensure_grad();
         if (w->requires_grad) w->ensure_grad();
         if (bias && bias->requires_grad) bias->ensure_grad();
         for (int64_t n = 0; n < N; ++n) {
           CMapRM Xn(x->data.data() + n * Ci * P, Ci, P);
           const double* gn = n_.grad.data() + n * Co * OF * OT;
           for (int64_t i = 0; i < kf; ++i)
             for (int64_t j = 0; j < kt; ++j) {
               for (int64_t co = 0; co < Co; ++co)
                 for (int64_t f = 0; f < F; ++f) {
                   double* dst = gij.data() + (co * F + f) * T;
                   const double* src = gn + (co * OF + f * sf + i) * OT + j;
                   for (int64_t t = 0; t < T; ++t) dst[t] = src[t * st];
                 }
               if (x->requires_grad) {
                 CMapStride Wij(w->data.data() + i * kt + j, Co, Ci, StrideDD(Ci * kf * kt, kf * kt));
                 MapRM(x->grad.data() + n * Ci * P, Ci, P).noalias() += Wij.transpose() * gij;
               }
               if (w->requires_grad) {
                 MapStride dWij(w->grad.data() + i * kt + j, Co, Ci, StrideDD(Ci * kf * kt, kf * kt));
                 dWij.noalias() += gij * Xn.transpose();
               }
             }
           if (bias && bias->requires_grad)
             for (int64_t co = 0; co < Co; ++co)
               bias->grad[co] += Eigen::Map<const Eigen::ArrayXd>(gn + co * OF * OT, OF * OT).sum();
         }
       });
  return out;
}

TensorPtr maxpool2d(const TensorPtr& x, int64_t kf, int64_t kt, int64_t sf,
                    int64_t st, int64_t plf, int64_t phf, int64_t plt, int64_t pht) {
  need(x->rank() == 4, "maxpool2d: [N,C,F,T] required, got " + shape_str(x->shape));
  const int64_t N = x->dim(0), C = x->dim(1), F = x->dim(2), T = x->dim(3);
  const int64_t OF = conv_out_len(F, kf, sf, 1, plf, phf);
  const int64_t OT = conv_out_len(T, kt, st, 1, plt, pht);
  auto out = Tensor::create({N, C, OF, OT});
  auto amax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * C * OF * OT));
  int64_t o = 0;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const double* xc = x->data.data() + (n * C + c) * F * T;
      for (int64_t of = 0; of < OF; ++of)
        for (int64_t ot = 0; ot < OT; ++ot, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t arg = -1;
          for (int64_t i = 0; i < kf; ++i) {
            const int64_t in_f = of * sf - plf + i;
            if (in_f < 0 || in_f >= F) continue;
            for (int64_t j = 0; j < kt; ++j) {
              const int64_t in_t = ot * st - plt + j;
              if (in_t < 0 || in_t >= T) continue;
              const double v = xc[in_f * T + in_t];
              if (v > best) {
                best = v;
                arg = (n * C + c) * F * T + in_f * T + in_t;
              }
            }
          }
          if (arg < 0)
            throw std::invalid_argument("maxpool2d: a pooling window covers only padding");
          out->data[o] = best;
          (*amax)[static_cast<size_t>(o)] = arg;
        }
    }
  wire(out, {x}, [x, amax](Tensor& n_) {
    x->ensure_grad();
    for (int64_t i = 0; i < n_.grad.size(); ++i)
      x->grad[(*amax)[static_cast<size_t>(i)]] += n_.grad[i];
  });
  return out;
}

}  // namespace svf
