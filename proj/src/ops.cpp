// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace svf {

namespace {

void need(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void need_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->shape != b->shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->shape) + " vs " + shape_str(b->shape));
}

}  // namespace

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  need_same_shape(a, b, "add");
  auto out = Tensor::create(a->shape);
  out->data = a->data + b->data;
  wire(out, {a, b}, [a, b](Tensor& n) {
    if (a->requires_grad) a->accum_grad(n.grad);
    if (b->requires_grad) b->accum_grad(n.grad);
  });
  return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  need_same_shape(a, b, "sub");
  auto out = Tensor::create(a->shape);
  out->data = a->data - b->data;
  wire(out, {a, b}, [a, b](Tensor& n) {
    if (a->requires_grad) a->accum_grad(n.grad);
    if (b->requires_grad) b->accum_grad(-n.grad);
  });
  return out;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  need_same_shape(a, b, "mul");
  auto out = Tensor::create(a->shape);
  out->data = a->data * b->data;
  wire(out, {a, b}, [a, b](Tensor& n) {
    if (a->requires_grad) a->accum_grad(n.grad * b->data);
    if (b->requires_grad) b->accum_grad(n.grad * a->data);
  });
  return out;
}

TensorPtr neg(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  out->data = -a->data;
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(-n.grad); });
  return out;
}

TensorPtr add_scalar(const TensorPtr& a, double s) {
  auto out = Tensor::create(a->shape);
  out->data = a->data + s;
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(n.grad); });
  return out;
}

TensorPtr mul_scalar(const TensorPtr& a, double s) {
  auto out = Tensor::create(a->shape);
  out->data = a->data * s;
  wire(out, {a}, [a, s](Tensor& n) { a->accum_grad(n.grad * s); });
  return out;
}

TensorPtr mul_const(const TensorPtr& a, const Eigen::ArrayXd& c) {
  need(c.size() == a->numel(), "mul_const: constant size mismatch for " + shape_str(a->shape));
  auto out = Tensor::create(a->shape);
  out->data = a->data * c;
  wire(out, {a}, [a, c](Tensor& n) { a->accum_grad(n.grad * c); });
  return out;
}

TensorPtr pow_scalar(const TensorPtr& a, double p) {
  auto out = Tensor::create(a->shape);
  if (p == 0.0) {
    // exact neutral exponent: x^0 == 1 bit for bit, zero gradient
    out->data.setOnes();
    wire(out, {a}, [a](Tensor&) {});
    return out;
  }
  if (p == 1.0) {
    out->data = a->data;
  } else {
    out->data = a->data.pow(p);
  }
  wire(out, {a}, [a, p](Tensor& n) {
    if (p == 1.0) {
      a->accum_grad(n.grad);
    } else {
      a->accum_grad(n.grad * p * a->data.pow(p - 1.0));
    }
  });
  return out;
}

TensorPtr log_op(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  out->data = a->data.log();
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(n.grad / a->data); });
  return out;
}

TensorPtr exp_op(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  out->data = a->data.exp();
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(n.grad * n.data); });
  return out;
}

TensorPtr sqrt_op(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  out->data = a->data.sqrt();
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(n.grad * 0.5 / n.data); });
  return out;
}

TensorPtr clamp_min(const TensorPtr& a, double m) {
  auto out = Tensor::create(a->shape);
  out->data = a->data.max(m);
  wire(out, {a}, [a, m](Tensor& n) {
    a->accum_grad(n.grad * (a->data > m).cast<double>());
  });
  return out;
}

TensorPtr relu(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  out->data = a->data.max(0.0);
  wire(out, {a}, [a](Tensor& n) {
    a->accum_grad(n.grad * (a->data > 0.0).cast<double>());
  });
  return out;
}

TensorPtr tanh_op(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  out->data = a->data.tanh();
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(n.grad * (1.0 - n.data.square())); });
  return out;
}

TensorPtr sigmoid(const TensorPtr& a) {
  auto out = Tensor::create(a->shape);
  // branch on sign so neither exp() overflows
  Eigen::ArrayXd en = (-a->data.abs()).exp();
  out->data = (a->data >= 0.0).select(1.0 / (1.0 + en), en / (1.0 + en));
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(n.grad * n.data * (1.0 - n.data)); });
  return out;
}

TensorPtr softmax_lastdim(const TensorPtr& a) {
  const int64_t L = a->dim(-1);
  const int64_t R = a->numel() / L;
  auto out = Tensor::create(a->shape);
  for (int64_t r = 0; r < R; ++r) {
    auto seg = a->data.segment(r * L, L);
    Eigen::ArrayXd e = (seg - seg.maxCoeff()).exp();
    out->data.segment(r * L, L) = e / e.sum();
  }
  wire(out, {a}, [a, L, R](Tensor& n) {
    Eigen::ArrayXd da(n.data.size());
    for (int64_t r = 0; r < R; ++r) {
      auto y = n.data.segment(r * L, L);
      auto gy = n.grad.segment(r * L, L);
      double dot = (gy * y).sum();
      da.segment(r * L, L) = y * (gy - dot);
    }
    a->accum_grad(da);
  });
  return out;
}

TensorPtr sum_all(const TensorPtr& a) {
  auto out = Tensor::create({1});
  out->data[0] = a->data.sum();
  wire(out, {a}, [a](Tensor& n) {
    a->ensure_grad();
    a->grad += n.grad[0];
  });
  return out;
}

TensorPtr mean_all(const TensorPtr& a) {
  auto out = Tensor::create({1});
  const double inv = 1.0 / static_cast<double>(a->numel());
  out->data[0] = a->data.sum() * inv;
  wire(out, {a, }, [a, inv](Tensor& n) {
    a->ensure_grad();
    a->grad += n.grad[0] * inv;
  });
  return out;
}

namespace {
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;
}  // namespace

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  need(a->rank() == 2 && b->rank() == 2,
       "matmul: rank-2 operands required, got " + shape_str(a->shape) + " x " + shape_str(b->shape));
  const int64_t m = a->dim(0), k = a->dim(1), n_ = b->dim(1);
  need(b->dim(0) == k,
       "matmul: inner dims differ, " + shape_str(a->shape) + " x " + shape_str(b->shape));
  auto out = Tensor::create({m, n_});
  CMapRM A(a->data.data(), m, k), B(b->data.data(), k, n_);
  MapRM(out->data.data(), m, n_).noalias() = A * B;
  wire(out, {a, b}, [a, b, m, k, n_](Tensor& n) {
    CMapRM A(a->data.data(), m, k), B(b->data.data(), k, n_);
    CMapRM G(n.grad.data(), m, n_);
    if (a->requires_grad) {
      a->ensure_grad();
      MapRM(a->grad.data(), m, k).noalias() += G * B.transpose();
    }
    if (b->requires_grad) {
      b->ensure_grad();
      MapRM(b->grad.data(), k, n_).noalias() += A.transpose() * G;
    }
  });
  return out;
}

TensorPtr affine(const TensorPtr& x, const TensorPtr& W, const TensorPtr& b) {
  need(x->rank() == 2 && W->rank() == 2 && b->rank() == 1,
       "affine: expected x[n,in], W[in,out], b[out]");
  const int64_t n_ = x->dim(0), in = x->dim(1), outf = W->dim(1);
  need(W->dim(0) == in && b->dim(0) == outf,
       "affine: shape mismatch x" + shape_str(x->shape) + " W" + shape_str(W->shape) +
           " b" + shape_str(b->shape));
  auto out = Tensor::create({n_, outf});
  CMapRM X(x->data.data(), n_, in), Wm(W->data.data(), in, outf);
  MapRM O(out->data.data(), n_, outf);
  O.noalias() = X * Wm;
  O.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b->data.data(), outf);
  wire(out, {x, W, b}, [x, W, b, n_, in, outf](Tensor& n) {
    CMapRM X(x->data.data(), n_, in), Wm(W->data.data(), in, outf);
    CMapRM G(n.grad.data(), n_, outf);
    if (x->requires_grad) {
      x->ensure_grad();
      MapRM(x->grad.data(), n_, in).noalias() += G * Wm.transpose();
    }
    if (W->requires_grad) {
      W->ensure_grad();
      MapRM(W->grad.data(), in, outf).noalias() += X.transpose() * G;
    }
    if (b->requires_grad) {
      b->ensure_grad();
      Eigen::Map<Eigen::RowVectorXd>(b->grad.data(), outf) += G.colwise().sum();
    }
  });
  return out;
}

TensorPtr reshape(const TensorPtr& a, Shape s) {
  need(shape_numel(s) == a->numel(),
       "reshape: element count mismatch " + shape_str(a->shape) + " -> " + shape_str(s));
  auto out = Tensor::create(std::move(s));
  out->data = a->data;
  wire(out, {a}, [a](Tensor& n) { a->accum_grad(n.grad); });
  return out;
}

TensorPtr concat_lastdim(const std::vector<TensorPtr>& parts) {
  need(!parts.empty(), "concat_lastdim: no operands");
  const int r = parts[0]->rank();
  int64_t Lsum = 0;
  for (const auto& p : parts) {
    need(p->rank() == r, "concat_lastdim: rank mismatch");
    for (int i = 0; i < r - 1; ++i)
      need(p->dim(i) == parts[0]->dim(i), "concat_lastdim: leading dims differ");
    Lsum += p->dim(-1);
  }
  Shape os = parts[0]->shape;
  os.back() = Lsum;
  auto out = Tensor::create(os);
  const int64_t R = out->numel() / Lsum;
  int64_t off = 0;
  for (const auto& p : parts) {
    const int64_t L = p->dim(-1);
    for (int64_t row = 0; row < R; ++row)
      out->data.segment(row * Lsum + off, L) = p->data.segment(row * L, L);
    off += L;
  }
  std::vector<TensorPtr> ps(parts.begin(), parts.end());
  wire(out, ps, [ps, R, Lsum](Tensor& n) {
    int64_t off = 0;
    for (const auto& p : ps) {
      const int64_t L = p->dim(-1);
      if (p->requires_grad) {
        p->ensure_grad();
        for (int64_t row = 0; row < R; ++row)
          p->grad.segment(row * L, L) += n.grad.segment(row * Lsum + off, L);
      }
      off += L;
    }
  });
  return out;
}

TensorPtr slice_axis(const TensorPtr& a, int axis, int64_t start, int64_t len) {
  const int r = a->rank();
  if (axis < 0) axis += r;
  need(axis >= 0 && axis < r, "slice_axis: axis out of range for " + shape_str(a->shape));
  const int64_t alen = a->shape[static_cast<size_t>(axis)];
  need(start >= 0 && len >= 1 && start + len <= alen,
       "slice_axis: window [" + std::to_string(start) + "," + std::to_string(start + len) +
           ") exceeds axis of size " + std::to_string(alen));
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a->shape[static_cast<size_t>(i)];
  for (int i = axis + 1; i < r; ++i) inner *= a->shape[static_cast<size_t>(i)];
  Shape os = a->shape;
  os[static_cast<size_t>(axis)] = len;
  auto out = Tensor::create(os);
  for (int64_t o = 0; o < outer; ++o)
    out->data.segment(o * len * inner, len * inner) =
        a->data.segment((o * alen + start) * inner, len * inner);
  wire(out, {a}, [a, outer, inner, alen, start, len](Tensor& n) {
    a->ensure_grad();
    for (int64_t o = 0; o < outer; ++o)
      a->grad.segment((o * alen + start) * inner, len * inner) +=
          n.grad.segment(o * len * inner, len * inner);
  });
  return out;
}

TensorPtr gather_rows(const TensorPtr& a, std::vector<int64_t> idx) {
  need(a->rank() >= 1, "gather_rows: rank >= 1 required");
  const int64_t rows = a->dim(0);
  const int64_t rest = a->numel() / rows;
  for (int64_t i : idx)
    need(i >= 0 && i < rows,
         "gather_rows: index " + std::to_string(i) + " out of range [0," + std::to_string(rows) + ")");
  Shape os = a->shape;
  os[0] = static_cast<int64_t>(idx.size());
  need(!idx.empty(), "gather_rows: empty index list");
  auto out = Tensor::create(os);
  for (size_t i = 0; i < idx.size(); ++i)
    out->data.segment(static_cast<int64_t>(i) * rest, rest) = a->data.segment(idx[i] * rest, rest);
  wire(out, {a}, [a, idx = std::move(idx), rest](Tensor& n) {
    a->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      a->grad.segment(idx[i] * rest, rest) += n.grad.segment(static_cast<int64_t>(i) * rest, rest);
  });
  return out;
}

TensorPtr channels_last_rows(const TensorPtr& a) {
  need(a->rank() == 4, "channels_last_rows: [N,C,F,T] required, got " + shape_str(a->shape));
  const int64_t N = a->dim(0), C = a->dim(1), F = a->dim(2), T = a->dim(3);
  const int64_t K = F * T;
  auto out = Tensor::create({N, K, C});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t k = 0; k < K; ++k)
        out->data[(n * K + k) * C + c] = a->data[(n * C + c) * K + k];
  wire(out, {a}, [a, N, C, K](Tensor& n_) {
    a->ensure_grad();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t k = 0; k < K; ++k)
          a->grad[(n * C + c) * K + k] += n_.grad[(n * K + k) * C + c];
  });
  return out;
}

TensorPtr time_rows(const TensorPtr& a, int context) {
  need(a->rank() == 4 && a->dim(0) == 1,
       "time_rows: [1,C,F,T] required, got " + shape_str(a->shape));
  need(context >= 1 && context % 2 == 1, "time_rows: context must be odd");
  const int64_t C = a->dim(1), F = a->dim(2), T = a->dim(3);
  const int64_t D = C * F;
  const int64_t half = context / 2;
  auto out = Tensor::create({T, static_cast<int64_t>(context) * D});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t k = 0; k < context; ++k) {
      const int64_t tt = std::clamp<int64_t>(t + k - half, 0, T - 1);
      for (int64_t d = 0; d < D; ++d)
        out->data[t * context * D + k * D + d] = a->data[d * T + tt];
    }
  wire(out, {a}, [a, C, F, T, D, half, context](Tensor& n) {
    (void)C; (void)F;
    a->ensure_grad();
    for (int64_t t = 0; t < T; ++t)
      for (int64_t k = 0; k < context; ++k) {
        const int64_t tt = std::clamp<int64_t>(t + k - half, 0, T - 1);
        for (int64_t d = 0; d < D; ++d)
          a->grad[d * T + tt] += n.grad[t * context * D + k * D + d];
      }
  });
  return out;
}

TensorPtr weighted_rowsum(const TensorPtr& alpha, const TensorPtr& H) {
  need(alpha->rank() == 2 && H->rank() == 3,
       "weighted_rowsum: alpha[N,K], H[N,K,C] required");
  const int64_t N = H->dim(0), K = H->dim(1), C = H->dim(2);
  need(alpha->dim(0) == N && alpha->dim(1) == K,
       "weighted_rowsum: alpha " + shape_str(alpha->shape) + " does not match H " + shape_str(H->shape));
  auto out = Tensor::create({N, C});
  for (int64_t n = 0; n < N; ++n) {
    CMapRM Hn(H->data.data() + n * K * C, K, C);
    Eigen::Map<const Eigen::VectorXd> an(alpha->data.data() + n * K, K);
    Eigen::Map<Eigen::VectorXd>(out->data.data() + n * C, C).noalias() = Hn.transpose() * an;
  }
  wire(out, {alpha, H}, [alpha, H, N, K, C](Tensor& n_) {
    for (int64_t n = 0; n < N; ++n) {
      CMapRM Hn(H->data.data() + n * K * C, K, C);
      Eigen::Map<const Eigen::VectorXd> an(alpha->data.data() + n * K, K);
      Eigen::Map<const Eigen::VectorXd> gn(n_.grad.data() + n * C, C);
      if (alpha->requires_grad) {
        alpha->ensure_grad();
        Eigen::Map<Eigen::VectorXd>(alpha->grad.data() + n * K, K).noalias() += Hn * gn;
      }
      if (H->requires_grad) {
        H->ensure_grad();
        MapRM(H->grad.data() + n * K * C, K, C).noalias() += an * gn.transpose();
      }
    }
  });
  return out;
}

TensorPtr scale_time(const TensorPtr& P, const TensorPtr& q) {
  need(P->rank() == 4 && q->rank() == 2, "scale_time: P[N,C,F,T], q[N,T] required");
  const int64_t N = P->dim(0), C = P->dim(1), F = P->dim(2), T = P->dim(3);
  need(q->dim(0) == N && q->dim(1) == T,
       "scale_time: q " + shape_str(q->shape) + " does not match P " + shape_str(P->shape));
  auto out = Tensor::create(P->shape);
  for (int64_t n = 0; n < N; ++n) {
    auto qn = q->data.segment(n * T, T);
    for (int64_t cf = 0; cf < C * F; ++cf)
      out->data.segment((n * C * F + cf) * T, T) = P->data.segment((n * C * F + cf) * T, T) * qn;
  }
  wire(out, {P, q}, [P, q, N, C, F, T](Tensor& n_) {
    for (int64_t n = 0; n < N; ++n) {
      auto qn = q->data.segment(n * T, T);
      if (P->requires_grad) {
        P->ensure_grad();
        for (int64_t cf = 0; cf < C * F; ++cf)
          P->grad.segment((n * C * F + cf) * T, T) += n_.grad.segment((n * C * F + cf) * T, T) * qn;
      }
      if (q->requires_grad) {
        q->ensure_grad();
        for (int64_t cf = 0; cf < C * F; ++cf)
          q->grad.segment(n * T, T) +=
              n_.grad.segment((n * C * F + cf) * T, T) * P->data.segment((n * C * F + cf) * T, T);
      }
    }
  });
  return out;
}

TensorPtr pad_end(const TensorPtr& a, int64_t pf, int64_t pt) {
  need(a->rank() == 4, "pad_end: [N,C,F,T] required, got " + shape_str(a->shape));
  need(pf >= 0 && pt >= 0, "pad_end: negative padding");
  const int64_t N = a->dim(0), C = a->dim(1), F = a->dim(2), T = a->dim(3);
  const int64_t OF = F + pf, OT = T + pt;
  auto out = Tensor::zeros({N, C, OF, OT});
  for (int64_t nc = 0; nc < N * C; ++nc)
    for (int64_t f = 0; f < F; ++f)
      out->data.segment((nc * OF + f) * OT, T) = a->data.segment((nc * F + f) * T, T);
  wire(out, {a}, [a, N, C, F, T, OF, OT](Tensor& n_) {
    if (!a->requires_grad) return;
    a->ensure_grad();
    for (int64_t nc = 0; nc < N * C; ++nc)
      for (int64_t f = 0; f < F; ++f)
        a->grad.segment((nc * F + f) * T, T) += n_.grad.segment((nc * OF + f) * OT, T);
  });
  return out;
}

TensorPtr softmax_xent_sum(const TensorPtr& logits, std::vector<int64_t> labels) {
  need(logits->rank() == 2, "softmax_xent_sum: logits [N,K] required");
  const int64_t N = logits->dim(0), K = logits->dim(1);
  need(static_cast<int64_t>(labels.size()) == N,
       "softmax_xent_sum: " + std::to_string(labels.size()) + " labels for " + std::to_string(N) + " rows");
  for (int64_t y : labels)
    need(y >= 0 && y < K, "softmax_xent_sum: label " + std::to_string(y) + " out of range");
  Eigen::ArrayXd probs(N * K);
  double total = 0.0;
  for (int64_t r = 0; r < N; ++r) {
    auto seg = logits->data.segment(r * K, K);
    const double m = seg.maxCoeff();
    Eigen::ArrayXd e = (seg - m).exp();
    const double s = e.sum();
    probs.segment(r * K, K) = e / s;
    total += m + std::log(s) - seg[labels[static_cast<size_t>(r)]];
  }
  auto out = Tensor::create({1});
  out->data[0] = total;
  wire(out, {logits}, [logits, probs = std::move(probs), labels = std::move(labels), N, K](Tensor& n) {
    logits->ensure_grad();
    const double g = n.grad[0];
    for (int64_t r = 0; r < N; ++r) {
      logits->grad.segment(r * K, K) += g * probs.segment(r * K, K);
      logits->grad[r * K + labels[static_cast<size_t>(r)]] -= g;
    }
  });
  return out;
}

TensorPtr batchnorm(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta,
                    const TensorPtr& running_mean, const TensorPtr& running_var,
                    const TensorPtr& running_count, bool train, bool update_running,
                    double momentum, double eps) {
  need(x->rank() == 4, "batchnorm: [N,C,F,T] required, got " + shape_str(x->shape));
  const int64_t N = x->dim(0), C = x->dim(1), F = x->dim(2), T = x->dim(3);
  need(gamma->numel() == C && beta->numel() == C && running_mean->numel() == C &&
           running_var->numel() == C && running_count->numel() == 1,
       "batchnorm: parameter sizes do not match C=" + std::to_string(C));
  const int64_t sp = F * T;
  const int64_t m = N * sp;
  Eigen::ArrayXd mean(C), var(C);
  if (train) {
    for (int64_t c = 0; c < C; ++c) {
      double s = 0.0, s2 = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        auto seg = x->data.segment((n * C + c) * sp, sp);
        s += seg.sum();
        s2 += seg.square().sum();
      }
      mean[c] = s / static_cast<double>(m);
      var[c] = std::max(0.0, s2 / static_cast<double>(m) - mean[c] * mean[c]);
    }
    if (update_running) {
      Eigen::ArrayXd unb = var;
      if (m > 1) unb *= static_cast<double>(m) / static_cast<double>(m - 1);
      running_mean->data = (1.0 - momentum) * running_mean->data + momentum * mean;
      running_var->data = (1.0 - momentum) * running_var->data + momentum * unb;
      running_count->data[0] += 1.0;
    }
  } else {
    if (running_count->data[0] <= 0.0)
      throw std::runtime_error("batchnorm: inference requested before any running statistics were accumulated");
    mean = running_mean->data;
    var = running_var->data;
  }
  Eigen::ArrayXd inv = (var + eps).sqrt().inverse();
  Eigen::ArrayXd xhat(x->numel());
  auto out = Tensor::create(x->shape);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      auto xs = x->data.segment((n * C + c) * sp, sp);
      auto hs = xhat.segment((n * C + c) * sp, sp);
      hs = (xs - mean[c]) * inv[c];
      out->data.segment((n * C + c) * sp, sp) = gamma->data[c] * hs + beta->data[c];
    }
  wire(out, {x, gamma, beta},
       [x, gamma, beta, xhat = std::move(xhat), inv = std::move(inv), N, C, sp, m, train](Tensor& n_) {
         const double invm = 1.0 / static_cast<double>(m);
         for (int64_t c = 0; c < C; ++c) {
           double sg = 0.0, sgx = 0.0;
           for (int64_t n = 0; n < N; ++n) {
             auto gs = n_.grad.segment((n * C + c) * sp, sp);
             auto hs = xhat.segment((n * C + c) * sp, sp);
             sg += gs.sum();
             sgx += (gs * hs).sum();
           }
           if (beta->requires_grad) {
             beta->ensure_grad();
             beta->grad[c] += sg;
           }
           if (gamma->requires_grad) {
             gamma->ensure_grad();
             gamma->grad[c] += sgx;
           }
           if (x->requires_grad) {
             x->ensure_grad();
             const double k = gamma->data[c] * inv[c];
             for (int64_t n = 0; n < N; ++n) {
               auto gs = n_.grad.segment((n * C + c) * sp, sp);
               auto hs = xhat.segment((n * C + c) * sp, sp);
               if (train) {
                 x->grad.segment((n * C + c) * sp, sp) += k * (gs - sg * invm - hs * (sgx * invm));
               } else {
                 x->grad.segment((n * C + c) * sp, sp) += k * gs;
               }
             }
           }
         }
       });
  return out;
}

}  // namespace svf
