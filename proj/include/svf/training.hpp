// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_TRAINING_HPP
#define SVF_TRAINING_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "svf/extractor.hpp"
#include "svf/optim.hpp"
#include "svf/rng.hpp"
#include "svf/tensor.hpp"
#include "svf/vad.hpp"

namespace svf {

// Focal loss over speech posteriors: mean over entries of
// -(1 - p_t)^gamma * ln(p_t), with p_t = p for label +1 and 1-p for -1.
// gamma = 0 reduces to cross-entropy bit for bit (the modulating factor is
// computed as an exact all-ones power). Every p must lie strictly in (0,1).
TensorPtr focal_loss(const TensorPtr& p, const std::vector<int>& y, double gamma);
// scalar convenience for single-frame evaluation
double focal_loss_value(double p, int y, double gamma);

// Frames whose posterior clears delta on either side become pseudo-labeled
// training targets; the ambiguous middle band [1-delta, delta] is dropped.
// delta > 0.5 keeps the two selections disjoint.
struct SpSelection {
  std::vector<int64_t> idx;
  std::vector<int> labels;  // +1 speech, -1 non-speech, aligned with idx
};
SpSelection sp_da_select(const Eigen::ArrayXd& q, double delta);

// Combined objective jl + lambda * sp. Rejects non-finite inputs so a
// diverging run fails loudly instead of logging NaN rows.
double combined_vad_loss(double jl, double sp, double lambda);

// One utterance of prepared training material. feats carries mean-normalized
// features: the same domain the speaker loops train in, so a pre-trained
// posterior network drops into the joint loop without a feature-space shift.
struct TrainUtterance {
  std::string utt_id;
  int64_t speaker = 0;           // class index in [0, n_speakers)
  Eigen::MatrixXd feats;         // d x T
  std::vector<int> frame_labels; // 1 speech / 0 non-speech, empty if unknown
};

// Standalone VAD pre-training (Adam, frame-wise cross-entropy, recurrent
// nets truncated every bptt frames).
struct VadPretrainConfig {
  int epochs = 3;
  int batch_frames = 512;  // frames sampled per step for the frame-wise net
  double learning_rate = 1e-3;
  int bptt = 50;
  uint64_t seed = 1;
};
// returns per-step mean losses
std::vector<double> pretrain_vad(VadNet& net, ParamStore& ps, const std::string& prefix,
                                 const std::vector<TrainUtterance>& data,
                                 const VadPretrainConfig& cfg, std::ostream* log = nullptr);

// Joint trainer covering the whole ladder: plain speaker training, and the
// self-adaptive soft-VAD loop where the posterior network trains against
// L_JL + lambda * L_SP while the speaker network follows L_JL alone.
struct JointTrainConfig {
  int epochs = 10;
  int batch = 64;
  int micro_batch = 16;   // gradient-accumulation slice
  int64_t segment = 200;  // frames per sampled training segment
  double lr_s = 0.1;      // speaker-side learning rate (SGD momentum)
  double lr_v = 1e-7;     // vad-side learning rate when adapting
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double lambda = 2.0;    // weight of L_SP
  double delta = 0.7;     // posterior confidence threshold
  double gamma = 0.5;     // focal focusing parameter
  int bptt = 50;
  uint64_t seed = 7;
  void validate() const;
};

struct StepLosses {
  double jl = 0.0;  // speaker classification loss
  double sp = 0.0;  // pseudo-label focal loss
  double v = 0.0;   // jl + lambda * sp
};

class JointTrainer {
 public:
  // vad/sync may be null for the plain speaker path; they must both be
  // present or both absent.
  JointTrainer(ParamStore& ps, SpeakerModel& model, VadNet* vad, Synchronizer* sync,
               const JointTrainConfig& cfg);

  // one optimizer step over the given utterance indices
  StepLosses step(const std::vector<TrainUtterance>& data,
                  const std::vector<int64_t>& batch, int epoch);

  // full run; appends `step,L_JL,L_SP,L_v,lr_s,lr_v` rows to log if given
  void train(const std::vector<TrainUtterance>& data, std::ostream* log = nullptr);

  const std::vector<StepLosses>& history() const { return history_; }
  int64_t steps_done() const { return step_count_; }
  Optimizer& speaker_opt() { return *opt_s_; }
  Optimizer& vad_opt() { return *opt_v_; }

  // debug hook: replace every posterior with an exact all-ones vector, which
  // reduces the soft weighting to the identity
  bool force_q_ones = false;

 private:
  ParamMap speaker_params() const;
  ParamMap vad_params() const;

  ParamStore& ps_;
  SpeakerModel& model_;
  VadNet* vad_;
  Synchronizer* sync_;
  JointTrainConfig cfg_;
  std::unique_ptr<Optimizer> opt_s_, opt_v_;
  std::vector<StepLosses> history_;
  int64_t step_count_ = 0;
};

}  // namespace svf

#endif
