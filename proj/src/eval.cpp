// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace svf {

namespace {

// Shared validation: finite scores, at least one trial of each class.
void check_trials(const std::vector<ScoredTrial>& trials) {
  int64_t pos = 0, neg = 0;
  for (const auto& t : trials) {
    if (!std::isfinite(t.score))
      throw std::invalid_argument("eval: trial scores must be finite");
    if (t.target != 0 && t.target != 1)
      throw std::invalid_argument("eval: trial target must be 0 or 1");
    (t.target == 1 ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0)
    throw std::invalid_argument("eval: need at least one positive and one negative trial");
}

// FAR and FRR at a given accept threshold (accept iff score >= t).
void rates_at(const std::vector<ScoredTrial>& trials, double t, double* far, double* frr) {
  int64_t fa = 0, fr = 0, pos = 0, neg = 0;
  for (const auto& tr : trials) {
    if (tr.target == 1) {
      ++pos;
      if (tr.score < t) ++fr;
    } else {
      ++neg;
      if (tr.score >= t) ++fa;
    }
  }
  *far = static_cast<double>(fa) / static_cast<double>(neg);
  *frr = static_cast<double>(fr) / static_cast<double>(pos);
}

std::vector<double> distinct_scores(const std::vector<ScoredTrial>& trials) {
  std::vector<double> s;
  s.reserve(trials.size());
  for (const auto& t : trials) s.push_back(t.score);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

double cosine_score(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2) {
  if (z1.size() != z2.size())
    throw std::invalid_argument("cosine_score: dimension mismatch");
  const double n1 = z1.norm(), n2 = z2.norm();
  if (n1 == 0.0 || n2 == 0.0)
    throw std::invalid_argument("cosine_score: zero-norm embedding");
  return z1.dot(z2) / (n1 * n2);
}

EerResult compute_eer(const std::vector<ScoredTrial>& trials) {
  check_trials(trials);
  // Candidate operating points: every distinct score. Below the minimum the
  // rates are (FAR 1, FRR 0) and the walk always reaches (FAR 0, FRR 1) just
  // above the maximum, so the sign of FAR - FRR flips somewhere inside.
  const std::vector<double> cand = distinct_scores(trials);
  double pf, pr;
  rates_at(trials, cand.front(), &pf, &pr);
  double pt = cand.front();
  if (pf == pr) return {pf, pt};
  for (size_t i = 1; i <= cand.size(); ++i) {
    // One virtual step above the top score closes the curve at (0, 1).
    const double t = i < cand.size() ? cand[i] : cand.back() + 1.0;
    double f, r;
    if (i < cand.size()) {
      rates_at(trials, t, &f, &r);
    } else {
      f = 0.0;
      r = 1.0;
    }
    if (f == r) return {f, t};
    if ((pf - pr) * (f - r) < 0.0) {
      // Linear interpolation across the step (the curves rarely cross at a
      // candidate exactly).
      const double a = (pf - pr) / ((pf - pr) - (f - r));
      return {pf + a * (f - pf), pt + a * (t - pt)};
    }
    pf = f;
    pr = r;
    pt = t;
  }
  throw std::logic_error("compute_eer: no crossing found");  // unreachable
}

double compute_auc(const std::vector<ScoredTrial>& trials) {
  check_trials(trials);
  // Midrank Mann-Whitney: sort all scores, average ranks over ties, then
  // AUC = (rank sum of positives - P(P+1)/2) / (P N).
  std::vector<size_t> order(trials.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return trials[a].score < trials[b].score; });
  std::vector<double> rank(trials.size(), 0.0);
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() &&
           trials[order[j + 1]].score == trials[order[i]].score)
      ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based midrank
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum = 0.0;
  int64_t pos = 0, neg = 0;
  for (size_t k = 0; k < trials.size(); ++k) {
    if (trials[k].target == 1) {
      rank_sum += rank[k];
      ++pos;
    } else {
      ++neg;
    }
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

std::vector<DetPoint> det_curve(const std::vector<ScoredTrial>& trials) {
  check_trials(trials);
  const std::vector<double> cand = distinct_scores(trials);
  std::vector<DetPoint> out;
  out.reserve(cand.size() + 1);
  for (double t : cand) {
    DetPoint p;
    p.threshold = t;
    rates_at(trials, t, &p.far, &p.frr);
    out.push_back(p);
  }
  out.push_back({cand.back() + 1.0, 0.0, 1.0});  // accept-none endpoint
  return out;
}

void det_curve_export(const std::vector<ScoredTrial>& trials, const std::string& path) {
  const auto points = det_curve(trials);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("det_curve_export: cannot open " + path);
  f << "threshold,far,frr\n";
  f.precision(17);
  for (const auto& p : points) f << p.threshold << ',' << p.far << ',' << p.frr << '\n';
  if (!f) throw std::runtime_error("det_curve_export: write failed for " + path);
}

MetricsReport compute_metrics(const std::vector<ScoredTrial>& trials) {
  MetricsReport r;
  r.eer = compute_eer(trials).eer;
  r.auc = compute_auc(trials);
  r.n_trials = static_cast<int64_t>(trials.size());
  return r;
}

void write_metrics_json(const std::string& path, const MetricsReport& report) {
  nlohmann::json j;
  j["eer"] = report.eer;
  j["auc"] = report.auc;
  j["n_trials"] = report.n_trials;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_metrics_json: cannot open " + path);
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("write_metrics_json: write failed for " + path);
}

MetricsReport read_metrics_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_metrics_json: cannot open " + path);
  nlohmann::json j;
  f >> j;
  MetricsReport r;
  r.eer = j.at("eer").get<double>();
  r.auc = j.at("auc").get<double>();
  r.n_trials = j.at("n_trials").get<int64_t>();
  return r;
}

}  // namespace svf
