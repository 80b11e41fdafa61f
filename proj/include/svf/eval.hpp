// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_EVAL_HPP
#define SVF_EVAL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace svf {

// One scored verification trial.
struct ScoredTrial {
  double score = 0.0;
  int target = 0;  // 1 same speaker, 0 different
};

// dot(z1, z2) / (|z1| |z2|), in [-1, 1]. Zero-norm embeddings are rejected.
double cosine_score(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;  // operating point, accept iff score >= threshold
};

// Equal error rate. FAR(t) and FRR(t) are swept over the distinct scores;
// a between-step crossing is resolved by linear interpolation, an exact
// FAR = FRR candidate is returned directly.
EerResult compute_eer(const std::vector<ScoredTrial>& trials);

// Area under the ROC curve as the Mann-Whitney statistic with midranks:
// P(pos > neg) + 0.5 P(pos == neg).
double compute_auc(const std::vector<ScoredTrial>& trials);

struct DetPoint {
  double threshold = 0.0;
  double far = 0.0;  // fraction of negatives accepted (score >= threshold)
  double frr = 0.0;  // fraction of positives rejected (score < threshold)
};

// One point per distinct score threshold (ascending), plus a final
// accept-none point above the maximum. FAR is non-increasing and FRR
// non-decreasing along the list.
std::vector<DetPoint> det_curve(const std::vector<ScoredTrial>& trials);
void det_curve_export(const std::vector<ScoredTrial>& trials, const std::string& path);

struct MetricsReport {
  double eer = 0.0;
  double auc = 0.0;
  int64_t n_trials = 0;
};

MetricsReport compute_metrics(const std::vector<ScoredTrial>& trials);
void write_metrics_json(const std::string& path, const MetricsReport& report);
MetricsReport read_metrics_json(const std::string& path);

}  // namespace svf

#endif
