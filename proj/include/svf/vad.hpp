// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_VAD_HPP
#define SVF_VAD_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "svf/layers.hpp"
#include "svf/tensor.hpp"

namespace svf {

// Frame-wise voice activity networks. All three read standardized features
// [1,1,d,T] and emit one speech posterior per frame, strictly inside (0,1).
//   dnn:   11-frame context, two 64-unit ReLU layers, sigmoid output.
//   lstm:  three stacked 42-unit LSTM layers, sigmoid head.
//   cldnn: 42-filter frequency convolution (kernel 8, padded to keep d bins),
//          non-overlapping 1x3 frequency max-pool, one 42-unit LSTM, one
//          42-unit ReLU affine, sigmoid head.
struct VadConfig {
  std::string arch = "dnn";  // dnn | lstm | cldnn
  int64_t feat_dim = 64;
  int context = 11;          // dnn input context (odd)
  int64_t dnn_hidden = 64;
  int64_t lstm_hidden = 42;
  int64_t cldnn_filters = 42;
  void validate() const;
};

class VadNet {
 public:
  VadNet() = default;
  VadNet(ParamStore& ps, const std::string& prefix, const VadConfig& cfg);

  // X [1,1,d,T] -> q [1,T]. detach_every > 0 detaches the recurrent state
  // every that many frames (truncated backpropagation through time while
  // training); inference decodes the whole utterance statefully with 0.
  TensorPtr forward(const TensorPtr& X, const FwdCtx& ctx, int detach_every = 0) const;

  int64_t parameter_count() const { return n_params_; }
  const VadConfig& config() const { return cfg_; }

 private:
  VadConfig cfg_;
  int64_t n_params_ = 0;
  Linear d1_, d2_, d3_;          // dnn
  std::vector<LstmLayer> lstm_;  // lstm / cldnn recurrence
  Linear head_;                  // final sigmoid projection (lstm / cldnn)
  Conv2d cconv_;                 // cldnn front end
  Linear cfc_;                   // cldnn post-recurrence affine
};

// Per-frame log-energy thresholding at a percentile of the utterance's own
// energy distribution. feats is d x T (frames in columns); a frame is speech
// when its energy reaches the nearest-rank percentile value.
std::vector<int> energy_vad(const Eigen::MatrixXd& feats, double percentile);

// Keep exactly the frames with q[t] >= threshold, in order. Rejects an empty
// selection: an utterance with no retained frames cannot be verified.
Eigen::MatrixXd hard_vad_filter(const Eigen::MatrixXd& feats, const Eigen::ArrayXd& q,
                                double threshold = 0.5);

// 1D synchronizer: three convolution blocks, each halving the posterior
// sequence (floor) and emitting a 1-channel sigmoid tap, so the four outputs
// line up with the four pyramid time extents (T, T/2, T/4, T/8 floored).
// Block trunks are 16/32/64 channels; the taps carry no batchnorm.
class Synchronizer {
 public:
  Synchronizer() = default;
  Synchronizer(ParamStore& ps, const std::string& prefix);

  // q [N,T], T >= 8 -> {q^(0)..q^(3)}; q^(0) is q itself
  std::array<TensorPtr, 4> forward(const TensorPtr& q, const FwdCtx& ctx) const;

  int64_t parameter_count() const { return n_params_; }

 private:
  int64_t n_params_ = 0;
  std::vector<Conv2d> c1_, c2_, tap_;
  std::vector<BatchNorm> n1_, n2_;
};

// H_i = P_i scaled along time by its synchronized posterior vector.
std::vector<TensorPtr> soft_vad_apply(const std::vector<TensorPtr>& maps,
                                      const std::vector<TensorPtr>& qs);

// Frame-label CSV: header `utt_id,frame_index,label`, one row per frame.
void write_frame_labels(const std::string& path, const std::string& utt_id,
                        const std::vector<int>& labels);
std::vector<int> read_frame_labels(const std::string& path);

}  // namespace svf

#endif
