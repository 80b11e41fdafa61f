// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/vad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "svf/ops.hpp"

namespace svf {
namespace {

// Run a stacked LSTM over row-vectors [T,in] -> [T,H], detaching the carried
// state every detach_every frames (0 = never, whole-sequence gradient).
TensorPtr run_lstm_stack(const std::vector<LstmLayer>& stack, const TensorPtr& rows,
                         int detach_every) {
  const int64_t T = rows->dim(0);
  const int64_t chunk = detach_every > 0 ? detach_every : T;
  const int64_t H = stack.back().hidden;
  std::vector<TensorPtr> h(stack.size()), c(stack.size());
  std::vector<TensorPtr> outs;
  for (int64_t s = 0; s < T; s += chunk) {
    const int64_t len = std::min<int64_t>(chunk, T - s);
    TensorPtr x = slice_axis(rows, 0, s, len);
    for (size_t l = 0; l < stack.size(); ++l) {
      TensorPtr ho, co;
      x = stack[l].forward(x, h[l], c[l], &ho, &co);
      h[l] = ho->detach();
      c[l] = co->detach();
    }
    outs.push_back(reshape(x, {1, len * H}));
  }
  TensorPtr cat = outs.size() == 1 ? outs[0] : concat_lastdim(outs);
  return reshape(cat, {T, H});
}

}  // namespace

void VadConfig::validate() const {
  if (arch != "dnn" && arch != "lstm" && arch != "cldnn")
    throw std::invalid_argument("VadConfig: arch must be dnn, lstm or cldnn, got " + arch);
  if (feat_dim < 3) throw std::invalid_argument("VadConfig: feat_dim must be >= 3");
  if (context < 1 || context % 2 == 0)
    throw std::invalid_argument("VadConfig: context must be odd and positive");
  if (dnn_hidden < 1 || lstm_hidden < 1 || cldnn_filters < 1)
    throw std::invalid_argument("VadConfig: layer widths must be positive");
}

VadNet::VadNet(ParamStore& ps, const std::string& prefix, const VadConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.arch == "dnn") {
    d1_ = Linear(ps, prefix + "fc1", cfg_.context * cfg_.feat_dim, cfg_.dnn_hidden);
    d2_ = Linear(ps, prefix + "fc2", cfg_.dnn_hidden, cfg_.dnn_hidden);
    d3_ = Linear(ps, prefix + "out", cfg_.dnn_hidden, 1);
  } else if (cfg_.arch == "lstm") {
    int64_t in = cfg_.feat_dim;
    for (int l = 0; l < 3; ++l) {
      lstm_.emplace_back(ps, prefix + "lstm" + std::to_string(l), in, cfg_.lstm_hidden);
      in = cfg_.lstm_hidden;
    }
    head_ = Linear(ps, prefix + "out", cfg_.lstm_hidden, 1);
  } else {
    // kernel 8 padded (3,4) keeps all feat_dim bins before the 1x3 pool
    ConvSpec s;
    s.plf = 3;
    s.phf = 4;
    cconv_ = Conv2d(ps, prefix + "conv", 1, cfg_.cldnn_filters, 8, 1, s, true);
    const int64_t bins = cfg_.feat_dim / 3;
    lstm_.emplace_back(ps, prefix + "lstm0", cfg_.cldnn_filters * bins, cfg_.lstm_hidden);
    cfc_ = Linear(ps, prefix + "fc", cfg_.lstm_hidden, cfg_.lstm_hidden);
    head_ = Linear(ps, prefix + "out", cfg_.lstm_hidden, 1);
  }
  n_params_ = ps.count_with_prefix(prefix);
}

TensorPtr VadNet::forward(const TensorPtr& X, const FwdCtx& ctx, int detach_every) const {
  (void)ctx;  // none of the three configurations carries batchnorm
  if (X->rank() != 4 || X->dim(0) != 1 || X->dim(1) != 1)
    throw std::invalid_argument("VadNet: input must be [1,1,d,T], got " + shape_str(X->shape));
  if (X->dim(2) != cfg_.feat_dim)
    throw std::invalid_argument("VadNet: expected " + std::to_string(cfg_.feat_dim) +
                                " feature bins, got " + std::to_string(X->dim(2)));
  const int64_t T = X->dim(3);
  if (cfg_.arch == "dnn") {
    auto rows = time_rows(X, cfg_.context);
    auto hv = relu(d2_.forward(relu(d1_.forward(rows))));
    return reshape(sigmoid(d3_.forward(hv)), {1, T});
  }
  if (cfg_.arch == "lstm") {
    auto rows = time_rows(X, 1);
    auto hs = run_lstm_stack(lstm_, rows, detach_every);
    return reshape(sigmoid(head_.forward(hs)), {1, T});
  }
  auto fm = maxpool2d(relu(cconv_.forward(X)), 3, 1, 3, 1);
  auto rows = time_rows(fm, 1);
  auto hs = run_lstm_stack(lstm_, rows, detach_every);
  auto hv = relu(cfc_.forward(hs));
  return reshape(sigmoid(head_.forward(hv)), {1, T});
}

std::vector<int> energy_vad(const Eigen::MatrixXd& feats, double percentile) {
  if (percentile < 0.0 || percentile > 100.0)
    throw std::invalid_argument("energy_vad: percentile must lie in [0,100]");
  const int64_t T = feats.cols();
  if (T < 1) throw std::invalid_argument("energy_vad: no frames");
  Eigen::ArrayXd e = feats.colwise().mean().transpose().array();
  std::vector<double> sorted(e.data(), e.data() + T);
  std::sort(sorted.begin(), sorted.end());
  int64_t rank = static_cast<int64_t>(std::floor(percentile / 100.0 *
                                                 static_cast<double>(T - 1)));
  rank = std::min<int64_t>(std::max<int64_t>(rank, 0), T - 1);
  const double thr = sorted[static_cast<size_t>(rank)];
  std::vector<int> labels(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) labels[static_cast<size_t>(t)] = e[t] >= thr ? 1 : 0;
  return labels;
}

Eigen::MatrixXd hard_vad_filter(const Eigen::MatrixXd& feats, const Eigen::ArrayXd& q,
                                double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("hard_vad_filter: threshold must lie in (0,1)");
  if (q.size() != feats.cols())
    throw std::invalid_argument("hard_vad_filter: " + std::to_string(q.size()) +
                                " posteriors for " + std::to_string(feats.cols()) + " frames");
  std::vector<int64_t> keep;
  for (int64_t t = 0; t < q.size(); ++t)
    if (q[t] >= threshold) keep.push_back(t);
  if (keep.empty())
    throw std::runtime_error("hard_vad_filter: no frames retained; utterance unverifiable");
  Eigen::MatrixXd out(feats.rows(), static_cast<int64_t>(keep.size()));
  for (size_t i = 0; i < keep.size(); ++i) out.col(static_cast<int64_t>(i)) = feats.col(keep[i]);
  return out;
}

Synchronizer::Synchronizer(ParamStore& ps, const std::string& prefix) {
  const int64_t chs[3] = {16, 32, 64};
  int64_t cin = 1;
  for (int l = 0; l < 3; ++l) {
    const std::string base = prefix + "b" + std::to_string(l + 1);
    ConvSpec s1;
    s1.plt = s1.pht = 1;
    c1_.emplace_back(ps, base + ".c1", cin, chs[l], 1, 3, s1, false);
    n1_.emplace_back(ps, base + ".bn1", chs[l]);
    ConvSpec s2;  // pad (1,0) so the halving is exactly floor(L/2)
    s2.plt = 1;
    s2.pht = 0;
    s2.st = 2;
    c2_.emplace_back(ps, base + ".c2", chs[l], chs[l], 1, 3, s2, false);
    n2_.emplace_back(ps, base + ".bn2", chs[l]);
    tap_.emplace_back(ps, base + ".tap", chs[l], 1, 1, 1, ConvSpec{}, true);
    cin = chs[l];
  }
  n_params_ = ps.count_with_prefix(prefix);
}

std::array<TensorPtr, 4> Synchronizer::forward(const TensorPtr& q, const FwdCtx& ctx) const {
  if (q->rank() != 2)
    throw std::invalid_argument("Synchronizer: q must be [N,T], got " + shape_str(q->shape));
  const int64_t N = q->dim(0), T = q->dim(1);
  if (T < 8)
    throw std::invalid_argument("Synchronizer: needs at least 8 frames, got " +
                                std::to_string(T));
  std::array<TensorPtr, 4> out;
  out[0] = q;
  TensorPtr x = reshape(q, {N, 1, 1, T});
  for (int l = 0; l < 3; ++l) {
    x = relu(n1_[l].forward(c1_[l].forward(x), ctx));
    x = relu(n2_[l].forward(c2_[l].forward(x), ctx));
    out[l + 1] = reshape(sigmoid(tap_[l].forward(x)), {N, x->dim(3)});
  }
  return out;
}

std::vector<TensorPtr> soft_vad_apply(const std::vector<TensorPtr>& maps,
                                      const std::vector<TensorPtr>& qs) {
  if (maps.size() != qs.size())
    throw std::invalid_argument("soft_vad_apply: " + std::to_string(maps.size()) +
                                " maps but " + std::to_string(qs.size()) + " posterior vectors");
  std::vector<TensorPtr> H;
  H.reserve(maps.size());
  for (size_t i = 0; i < maps.size(); ++i) H.push_back(scale_time(maps[i], qs[i]));
  return H;
}

void write_frame_labels(const std::string& path, const std::string& utt_id,
                        const std::vector<int>& labels) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_frame_labels: cannot open " + path);
  f << "utt_id,frame_index,label\n";
  for (size_t t = 0; t < labels.size(); ++t)
    f << utt_id << "," << t << "," << labels[t] << "\n";
}

std::vector<int> read_frame_labels(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_frame_labels: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("utt_id,frame_index,label", 0) != 0)
    throw std::runtime_error("read_frame_labels: " + path + " has no header");
  std::vector<int> labels;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const size_t c2 = line.rfind(',');
    const size_t c1 = line.rfind(',', c2 == std::string::npos ? 0 : c2 - 1);
    if (c1 == std::string::npos || c2 == std::string::npos || c1 >= c2)
      throw std::runtime_error("read_frame_labels: malformed row in " + path);
    const std::string lab = line.substr(c2 + 1);
    if (lab != "0" && lab != "1")
      throw std::runtime_error("read_frame_labels: label must be 0 or 1 in " + path);
    const size_t t = static_cast<size_t>(std::stoll(line.substr(c1 + 1, c2 - c1 - 1)));
    if (t != labels.size())
      throw std::runtime_error("read_frame_labels: frame indices out of order in " + path);
    labels.push_back(lab == "1" ? 1 : 0);
  }
  return labels;
}

}  // namespace svf
