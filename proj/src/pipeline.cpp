// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "svf/checkpoint.hpp"
#include "svf/dsp.hpp"
#include "svf/enhancement.hpp"
#include "svf/ops.hpp"
#include "svf/rng.hpp"
#include "svf/wav.hpp"

namespace svf {

namespace {

const FwdCtx kEval{false, false};
const FwdCtx kFrozen{true, false};  // batch statistics, replayable

std::string join(const std::string& dir, const std::string& leaf) {
  return (std::filesystem::path(dir) / leaf).string();
}

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Required path-valued keys have empty defaults so a missing one is a usage
// error that names the key.
std::string require_path(const Config& cfg, const std::string& key) {
  const std::string& v = cfg.get(key);
  if (v.empty())
    throw std::invalid_argument("config: key '" + key + "' must be set for this subcommand");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<int> parse_stage_list(const std::string& text) {
  std::vector<int> stages;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    size_t used = 0;
    const int s = std::stoi(part, &used);
    if (used != part.size())
      throw std::invalid_argument("config: model.stages entry '" + part + "' is not an integer");
    stages.push_back(s);
  }
  if (stages.empty()) throw std::invalid_argument("config: model.stages is empty");
  return stages;
}

SpeakerConfig speaker_config_from(const Config& cfg, int64_t n_speakers) {
  SpeakerConfig sc;
  sc.resnet.variant = cfg.get("model.variant");
  sc.resnet.width_multiplier = cfg.get_double("model.width_mult");
  sc.resnet.input_kind = cfg.get("features.kind");
  sc.pool = cfg.get("model.pool");
  sc.stages = parse_stage_list(cfg.get("model.stages"));
  sc.use_fpm = cfg.get_bool("model.use_fpm");
  sc.use_se = cfg.get_bool("model.use_se");
  sc.embed_dim = cfg.get_int("model.embed_dim");
  sc.n_speakers = n_speakers;
  sc.validate();
  return sc;
}

VadConfig vad_config_from(const Config& cfg) {
  VadConfig vc;
  vc.arch = cfg.get("vad.arch");
  vc.feat_dim = cfg.get("features.kind") == "spec160" ? 160 : 64;
  vc.context = static_cast<int>(cfg.get_int("vad.context"));
  vc.dnn_hidden = cfg.get_int("vad.dnn_hidden");
  vc.lstm_hidden = cfg.get_int("vad.lstm_hidden");
  vc.cldnn_filters = cfg.get_int("vad.cldnn_filters");
  vc.validate();
  return vc;
}

JointTrainConfig joint_config_from(const Config& cfg) {
  JointTrainConfig jc;
  jc.epochs = static_cast<int>(cfg.get_int("train.epochs"));
  jc.batch = static_cast<int>(cfg.get_int("train.batch"));
  jc.micro_batch = static_cast<int>(cfg.get_int("train.micro_batch"));
  jc.segment = cfg.get_int("train.segment");
  jc.lr_s = cfg.get_double("train.lr_s");
  jc.lr_v = cfg.get_double("train.lr_v");
  jc.momentum = cfg.get_double("train.momentum");
  jc.weight_decay = cfg.get_double("train.weight_decay");
  jc.lambda = cfg.get_double("train.lambda");
  jc.delta = cfg.get_double("train.delta");
  jc.gamma = cfg.get_double("train.gamma");
  jc.bptt = static_cast<int>(cfg.get_int("train.bptt"));
  jc.seed = Rng(cfg.get_u64("seed")).substream("train").seed();
  jc.validate();
  return jc;
}

FeatureMatrix features_for(const std::vector<double>& samples, const std::string& kind) {
  if (kind == "fbank64") return features_fbank64(samples);
  if (kind == "spec160") return features_spec160(samples);
  throw std::invalid_argument("config: features.kind must be fbank64 or spec160, got '" +
                              kind + "'");
}

std::string condition_name(const ManifestRow& r) {
  return "S" + std::to_string(r.S) + "-N" + std::to_string(r.N);
}

}  // namespace

std::map<int64_t, int64_t> speaker_classes(const std::vector<ManifestRow>& rows) {
  std::map<int64_t, int64_t> classes;
  for (const auto& r : rows) classes.emplace(r.speaker_id, 0);
  int64_t next = 0;
  for (auto& [id, cls] : classes) cls = next++;
  return classes;
}

ManifestSplit split_manifest(const std::vector<ManifestRow>& rows,
                             int64_t holdout_per_speaker) {
  if (holdout_per_speaker < 0)
    throw std::invalid_argument("split_manifest: holdout count must be >= 0");
  std::map<int64_t, int64_t> counts;
  for (const auto& r : rows) ++counts[r.speaker_id];
  ManifestSplit out;
  std::map<int64_t, int64_t> seen;
  for (const auto& r : rows) {
    const int64_t keep = counts[r.speaker_id] - holdout_per_speaker;
    (seen[r.speaker_id]++ < keep ? out.train : out.holdout).push_back(r);
  }
  return out;
}

std::vector<TrainUtterance> load_utterances(
    const std::vector<ManifestRow>& rows, const std::string& feat_kind,
    bool with_labels, const std::map<int64_t, int64_t>* classes) {
  std::vector<TrainUtterance> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    TrainUtterance tu;
    tu.utt_id = r.utt_id;
    if (classes) {
      auto it = classes->find(r.speaker_id);
      if (it == classes->end())
        throw std::invalid_argument("load_utterances: speaker " +
                                    std::to_string(r.speaker_id) +
                                    " is not in the class map");
      tu.speaker = it->second;
    } else {
      tu.speaker = r.speaker_id;
    }
    FeatureMatrix X = features_for(read_wav(r.wav_path), feat_kind);
    segment_mean_normalize(X);
    tu.feats = std::move(X.values);
    if (with_labels) {
      tu.frame_labels = read_frame_labels(r.wav_path + ".labels.csv");
      if (static_cast<int64_t>(tu.frame_labels.size()) != tu.feats.cols())
        throw std::runtime_error("load_utterances: " + r.utt_id + " has " +
                                 std::to_string(tu.frame_labels.size()) + " labels for " +
                                 std::to_string(tu.feats.cols()) + " frames");
    }
    out.push_back(std::move(tu));
  }
  return out;
}

Eigen::VectorXd embed_utterance(const SpeakerModel& model, const VadNet* vad,
                                const Synchronizer* sync,
                                const Eigen::MatrixXd& feats) {
  if ((vad == nullptr) != (sync == nullptr))
    throw std::invalid_argument("embed_utterance: vad and synchronizer must come together");
  if (feats.cols() < 8)
    throw std::invalid_argument("embed_utterance: utterance must span at least 8 frames");
  FeatureMatrix fm;
  fm.values = feats;
  auto X = feature_tensor(fm);
  auto Xh = model.enhance(X, kEval);
  auto maps = model.stage_maps(Xh, kEval);
  if (vad) {
    auto q = vad->forward(Xh, kEval, 0);
    auto qlv = sync->forward(q, kEval);
    std::vector<TensorPtr> qsel;
    for (int s : model.config().stages) qsel.push_back(qlv[static_cast<size_t>(s - 2)]);
    maps = soft_vad_apply(maps, qsel);
  }
  auto z = model.embed_from_maps(maps);
  return Eigen::Map<Eigen::VectorXd>(z->data.data(), z->numel());
}

void write_embeddings(const std::string& path, const EmbeddingTable& table) {
  const int64_t n = static_cast<int64_t>(table.utt_ids.size());
  if (table.z.cols() != n || static_cast<int64_t>(table.speaker_ids.size()) != n)
    throw std::invalid_argument("write_embeddings: table columns out of step with ids");
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_embeddings: cannot open " + path);
  f << "utt_id,speaker_id,embedding\n";
  for (int64_t i = 0; i < n; ++i) {
    f << table.utt_ids[i] << ',' << table.speaker_ids[i];
    for (int64_t d = 0; d < table.z.rows(); ++d) f << ',' << fmt_double(table.z(d, i));
    f << '\n';
  }
}

EmbeddingTable read_embeddings(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_embeddings: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("utt_id,speaker_id,", 0) != 0)
    throw std::runtime_error("read_embeddings: " + path + " has no header");
  EmbeddingTable out;
  std::vector<std::vector<double>> cols;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto parts = split_csv_line(line);
    if (parts.size() < 3)
      throw std::runtime_error("read_embeddings: malformed row in " + path);
    out.utt_ids.push_back(parts[0]);
    out.speaker_ids.push_back(std::stoll(parts[1]));
    std::vector<double> v(parts.size() - 2);
    for (size_t i = 2; i < parts.size(); ++i) v[i - 2] = std::stod(parts[i]);
    if (!cols.empty() && cols.front().size() != v.size())
      throw std::runtime_error("read_embeddings: inconsistent dimension in " + path);
    cols.push_back(std::move(v));
  }
  if (cols.empty()) throw std::runtime_error("read_embeddings: " + path + " is empty");
  out.z.resize(static_cast<int64_t>(cols.front().size()), static_cast<int64_t>(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i)
    for (size_t d = 0; d < cols[i].size(); ++d)
      out.z(static_cast<int64_t>(d), static_cast<int64_t>(i)) = cols[i][d];
  return out;
}

std::vector<ScoreRow> score_trials(const EmbeddingTable& emb,
                                   const std::vector<Trial>& trials,
                                   bool average_enrollment) {
  std::map<std::string, int64_t> index;
  for (size_t i = 0; i < emb.utt_ids.size(); ++i)
    if (!index.emplace(emb.utt_ids[i], static_cast<int64_t>(i)).second)
      throw std::invalid_argument("score_trials: duplicate utterance " + emb.utt_ids[i]);
  auto col_of = [&](const std::string& id) {
    auto it = index.find(id);
    if (it == index.end())
      throw std::invalid_argument("score_trials: no embedding for utterance " + id);
    return it->second;
  };
  std::vector<ScoreRow> out;
  out.reserve(trials.size());
  for (const auto& t : trials) {
    const int64_t e = col_of(t.enroll_id);
    const int64_t x = col_of(t.test_id);
    Eigen::VectorXd ze;
    if (average_enrollment) {
      // speaker model: mean embedding over the enrollment speaker's
      // utterances, never including the trial's own test utterance
      ze = Eigen::VectorXd::Zero(emb.z.rows());
      int64_t n = 0;
      for (size_t i = 0; i < emb.utt_ids.size(); ++i) {
        if (emb.speaker_ids[i] != emb.speaker_ids[static_cast<size_t>(e)]) continue;
        if (static_cast<int64_t>(i) == x) continue;
        ze += emb.z.col(static_cast<int64_t>(i));
        ++n;
      }
      if (n == 0)
        throw std::invalid_argument("score_trials: speaker of " + t.enroll_id +
                                    " has no enrollment utterances besides the test one");
      ze /= static_cast<double>(n);
    } else {
      ze = emb.z.col(e);
    }
    out.push_back({t.enroll_id, t.test_id, t.target,
                   cosine_score(ze, emb.z.col(x))});
  }
  return out;
}

void write_scores(const std::string& path, const std::vector<ScoreRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_scores: cannot open " + path);
  f << "enroll_id,test_id,target,score\n";
  for (const auto& r : rows)
    f << r.enroll_id << ',' << r.test_id << ',' << r.target << ',' << fmt_double(r.score)
      << '\n';
}

std::vector<ScoreRow> read_scores(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_scores: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("enroll_id,test_id,target,score", 0) != 0)
    throw std::runtime_error("read_scores: " + path + " has no header");
  std::vector<ScoreRow> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto parts = split_csv_line(line);
    if (parts.size() != 4) throw std::runtime_error("read_scores: malformed row in " + path);
    ScoreRow r;
    r.enroll_id = parts[0];
    r.test_id = parts[1];
    r.target = std::stoi(parts[2]);
    r.score = std::stod(parts[3]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoredTrial> scored_trials(const std::vector<ScoreRow>& rows) {
  std::vector<ScoredTrial> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({r.score, r.target});
  return out;
}

void emit_report(const std::vector<ReportRow>& rows, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
  std::vector<std::string> cols;
  for (const auto& [name, value] : rows.front().cells) cols.push_back(name);
  if (cols.empty()) throw std::invalid_argument("emit_report: no conditions");
  for (const auto& r : rows) {
    if (r.cells.size() != cols.size())
      throw std::invalid_argument("emit_report: row " + r.system +
                                  " does not cover every condition");
    for (const auto& c : cols)
      if (r.cells.find(c) == r.cells.end())
        throw std::invalid_argument("emit_report: row " + r.system + " is missing " + c);
  }
  // columns ordered by speech length, then padding length
  auto cond_key = [](const std::string& name) {
    int S = 0, N = 0;
    if (std::sscanf(name.c_str(), "S%d-N%d", &S, &N) != 2) return std::pair<int, int>{1 << 20, 0};
    return std::pair<int, int>{S, N};
  };
  std::sort(cols.begin(), cols.end(), [&](const std::string& a, const std::string& b) {
    const auto ka = cond_key(a), kb = cond_key(b);
    return ka != kb ? ka < kb : a < b;
  });
  const bool with_avg = cols.size() > 1;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("emit_report: cannot open " + path);
  f << "system";
  for (const auto& c : cols) f << ',' << c;
  if (with_avg) f << ",Avg";
  f << '\n';
  for (const auto& r : rows) {
    f << r.system;
    double sum = 0.0;
    for (const auto& c : cols) {
      const double v = r.cells.at(c);
      sum += v;
      f << ',' << fmt_double(v);
    }
    if (with_avg) f << ',' << fmt_double(sum / static_cast<double>(cols.size()));
    f << '\n';
  }
}

// ---------------------------------------------------------------------------
// gradient suite
// ---------------------------------------------------------------------------

namespace {

TensorPtr sq_mean(const TensorPtr& t) { return mean_all(mul(t, t)); }

TensorPtr randt(Shape s, uint64_t salt, double sd = 1.0) {
  Rng r(0x5eed0000ULL + salt);
  return Tensor::randn(std::move(s), r, sd, true);
}

// values in [lo, hi), for positive-domain operations
TensorPtr posrand(Shape s, uint64_t salt, double lo, double hi) {
  auto t = Tensor::zeros(std::move(s), true);
  Rng r(0x90510000ULL + salt);
  for (int64_t i = 0; i < t->numel(); ++i) t->data[i] = r.uniform(lo, hi);
  return t;
}

// magnitude at least `margin`, both signs: keeps finite differences away from
// the kinks of relu / clamp_min
TensorPtr awayrand(Shape s, uint64_t salt, double margin) {
  auto t = Tensor::zeros(std::move(s), true);
  Rng r(0xa3a90000ULL + salt);
  for (int64_t i = 0; i < t->numel(); ++i) {
    const double sign = r.uniform() < 0.5 ? -1.0 : 1.0;
    t->data[i] = sign * (margin + r.uniform());
  }
  return t;
}

// a shuffled value grid with gaps far above the finite-difference step, so
// maxpool argmaxes cannot flip under perturbation
TensorPtr gridrand(Shape s, uint64_t salt) {
  auto t = Tensor::zeros(std::move(s), true);
  std::vector<int64_t> order(static_cast<size_t>(t->numel()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  Rng r(0x96fd0000ULL + salt);
  r.shuffle(order);
  for (int64_t i = 0; i < t->numel(); ++i)
    t->data[i] = 0.01 * static_cast<double>(order[static_cast<size_t>(i)]) - 0.005 * static_cast<double>(t->numel());
  return t;
}

void run_check(std::vector<GradCheckItem>& out, std::ostream* log, const std::string& name,
               const ParamMap& params, const std::function<TensorPtr()>& build,
               const FdOptions& opt = {}) {
  GradCheckItem item{name, finite_difference_check(params, build, opt)};
  if (log) {
    *log << (item.report.pass ? "PASS " : "FAIL ") << name << "  max_rel "
         << item.report.max_rel_err << "  checked " << item.report.checked;
    if (!item.report.pass)
      *log << "  worst " << item.report.worst_param << '[' << item.report.worst_index
           << "] analytic " << item.report.worst_analytic << " numeric "
           << item.report.worst_numeric;
    *log << '\n';
  }
  out.push_back(std::move(item));
}

}  // namespace

std::vector<GradCheckItem> gradcheck_suite(std::ostream* log) {
  std::vector<GradCheckItem> items;
  auto check = [&](const std::string& name, const ParamMap& params,
                   const std::function<TensorPtr()>& build, const FdOptions& opt = {}) {
    run_check(items, log, name, params, build, opt);
  };

  // ---- elementwise ----
  {
    auto a = randt({2, 3}, 1), b = randt({2, 3}, 2);
    check("op/add", {{"a", a}, {"b", b}}, [=] { return sq_mean(add(a, b)); });
    check("op/sub", {{"a", a}, {"b", b}}, [=] { return sq_mean(sub(a, b)); });
    check("op/mul", {{"a", a}, {"b", b}}, [=] { return sq_mean(mul(a, b)); });
    check("op/neg", {{"a", a}}, [=] { return sq_mean(neg(a)); });
    check("op/add_scalar", {{"a", a}}, [=] { return sq_mean(add_scalar(a, 0.7)); });
    check("op/mul_scalar", {{"a", a}}, [=] { return sq_mean(mul_scalar(a, -1.3)); });
    Eigen::ArrayXd c(6);
    c << 0.5, -1.0, 2.0, 0.25, -0.75, 1.5;
    check("op/mul_const", {{"a", a}}, [=] { return sq_mean(mul_const(a, c)); });
  }
  {
    auto p = posrand({2, 4}, 3, 0.5, 1.5);
    check("op/pow_scalar", {{"p", p}}, [=] { return sq_mean(pow_scalar(p, 1.7)); });
    check("op/log", {{"p", p}}, [=] { return sq_mean(log_op(p)); });
    check("op/sqrt", {{"p", p}}, [=] { return sq_mean(sqrt_op(p)); });
  }
  {
    auto a = randt({3, 3}, 4, 0.5);
    check("op/exp", {{"a", a}}, [=] { return sq_mean(exp_op(a)); });
    check("op/tanh", {{"a", a}}, [=] { return sq_mean(tanh_op(a)); });
    check("op/sigmoid", {{"a", a}}, [=] { return sq_mean(sigmoid(a)); });
  }
  {
    auto a = awayrand({3, 4}, 5, 0.05);
    check("op/relu", {{"a", a}}, [=] { return sq_mean(relu(a)); });
    check("op/clamp_min", {{"a", a}}, [=] { return sq_mean(clamp_min(a, 0.0)); });
  }
  {
    auto a = randt({2, 5}, 6);
    check("op/softmax", {{"a", a}}, [=] { return sq_mean(softmax_lastdim(a)); });
    check("op/sum_all", {{"a", a}}, [=] { return sum_all(mul(a, a)); });
    check("op/mean_all", {{"a", a}}, [=] { return mean_all(mul(a, a)); });
  }

  // ---- linear algebra and shape plumbing ----
  {
    auto a = randt({3, 4}, 7), b = randt({4, 2}, 8);
    check("op/matmul", {{"a", a}, {"b", b}}, [=] { return sq_mean(matmul(a, b)); });
    auto W = randt({4, 2}, 9), bias = randt({2}, 10);
    check("op/affine", {{"x", a}, {"W", W}, {"b", bias}},
          [=] { return sq_mean(affine(a, W, bias)); });
  }
  {
    auto a = randt({2, 6}, 11);
    check("op/reshape", {{"a", a}}, [=] { return sq_mean(reshape(a, {3, 4})); });
  }
  {
    auto a = randt({2, 3}, 12), b = randt({2, 2}, 13);
    check("op/concat_lastdim", {{"a", a}, {"b", b}},
          [=] { return sq_mean(concat_lastdim({a, b})); });
  }
  {
    auto a = randt({2, 3, 4, 5}, 14);
    check("op/slice_axis", {{"a", a}}, [=] { return sq_mean(slice_axis(a, 3, 1, 3)); });
    check("op/channels_last_rows", {{"a", a}}, [=] { return sq_mean(channels_last_rows(a)); });
    check("op/pad_end", {{"a", a}}, [=] { return sq_mean(pad_end(a, 1, 2)); });
  }
  {
    auto a = randt({5, 3}, 15);
    std::vector<int64_t> idx{0, 2, 2, 4};
    check("op/gather_rows", {{"a", a}}, [=] { return sq_mean(gather_rows(a, idx)); });
  }
  {
    auto a = randt({1, 2, 3, 6}, 16);
    check("op/time_rows", {{"a", a}}, [=] { return sq_mean(time_rows(a, 3)); });
  }
  {
    auto alpha = randt({2, 4}, 17), H = randt({2, 4, 3}, 18);
    check("op/weighted_rowsum", {{"alpha", alpha}, {"H", H}},
          [=] { return sq_mean(weighted_rowsum(alpha, H)); });
  }
  {
    auto P = randt({2, 3, 2, 5}, 19), q = randt({2, 5}, 20);
    check("op/scale_time", {{"P", P}, {"q", q}}, [=] { return sq_mean(scale_time(P, q)); });
  }

  // ---- losses and normalization ----
  {
    auto lg = randt({3, 5}, 21);
    std::vector<int64_t> labels{0, 2, 4};
    check("op/softmax_xent_sum", {{"logits", lg}},
          [=] { return mul_scalar(softmax_xent_sum(lg, labels), 1.0 / 3.0); });
  }
  {
    auto p = posrand({4, 1}, 22, 0.1, 0.9);
    std::vector<int> y{1, -1, 1, -1};
    check("op/focal_loss", {{"p", p}}, [=] { return focal_loss(p, y, 1.5); });
  }
  {
    auto x = randt({2, 3, 2, 4}, 23);
    auto gamma = posrand({3}, 24, 0.5, 1.5);
    auto beta = randt({3}, 25, 0.3);
    auto rm = Tensor::zeros({3});
    auto rv = Tensor::full({3}, 1.0);
    auto rc = Tensor::zeros({1});
    check("op/batchnorm", {{"x", x}, {"gamma", gamma}, {"beta", beta}},
          [=] { return sq_mean(batchnorm(x, gamma, beta, rm, rv, rc, true, false)); });
  }

  // ---- convolution family ----
  {
    auto x = randt({2, 3, 5, 6}, 26), w = randt({4, 3, 3, 3}, 27), b = randt({4}, 28);
    ConvSpec same;
    same.plf = same.phf = same.plt = same.pht = 1;
    check("op/conv2d", {{"x", x}, {"w", w}, {"b", b}},
          [=] { return sq_mean(conv2d(x, w, b, same)); });
  }
  {
    auto x = randt({1, 3, 6, 7}, 29), w = randt({2, 3, 3, 3}, 30);
    ConvSpec spec;
    spec.sf = 2;
    spec.st = 2;
    spec.dt = 2;
    spec.plf = 1;
    spec.plt = 2;
    check("op/conv2d_strided_dilated", {{"x", x}, {"w", w}},
          [=] { return sq_mean(conv2d(x, w, nullptr, spec)); });
  }
  {
    auto x = randt({1, 3, 3, 4}, 31), w = randt({2, 3, 2, 3}, 32), b = randt({2}, 33);
    check("op/tconv2d", {{"x", x}, {"w", w}, {"b", b}},
          [=] { return sq_mean(tconv2d(x, w, b, 2, 2)); });
  }
  {
    auto x = gridrand({2, 2, 5, 6}, 34);
    check("op/maxpool2d", {{"x", x}},
          [=] { return sq_mean(maxpool2d(x, 2, 3, 2, 2)); });
  }
  {
    ParamStore ps(0xf00d);
    LstmLayer lstm(ps, "lstm.", 3, 4);
    auto x = randt({5, 3}, 35, 0.8);
    ParamMap pm = ps.params();
    pm["x"] = x;
    check("op/lstm_layer", pm, [&lstm, x] { return sq_mean(lstm.forward(x)); });
  }

  // ---- composite fragments ----
  {
    ParamStore ps(0xbead1);
    MaskNet net(ps, "se.");
    auto X = randt({1, 1, 8, 12}, 36, 0.5);
    ParamMap pm = ps.params();
    pm["X"] = X;
    FdOptions opt;
    opt.max_indices_per_param = 6;
    check("fragment/masking_net", pm,
          [&net, X] { return sq_mean(mask_apply(X, net.forward(X, kFrozen))); }, opt);
  }
  {
    ParamStore ps(0xbead2);
    StagePool pool(ps, "pool.", "sap", {5}, {5});
    auto H = randt({2, 5, 2, 6}, 37, 0.7);
    ParamMap pm = ps.params();
    pm["H"] = H;
    check("fragment/sap_stage", pm, [&pool, H] { return sq_mean(pool.forward(0, H)); });
  }
  {
    ParamStore ps(0xbead3);
    Fpm fpm(ps, "fpm.", {4, 6, 8, 10}, 6, true);
    std::array<TensorPtr, 4> C{randt({1, 4, 8, 16}, 38, 0.6), randt({1, 6, 4, 8}, 39, 0.6),
                               randt({1, 8, 2, 4}, 40, 0.6), randt({1, 10, 1, 2}, 41, 0.6)};
    ParamMap pm = ps.params();
    for (int i = 0; i < 4; ++i) pm["C" + std::to_string(i + 2)] = C[static_cast<size_t>(i)];
    FdOptions opt;
    opt.max_indices_per_param = 4;
    check("fragment/fpm_merge", pm,
          [&fpm, C] {
            auto P = fpm.forward(C);
            auto loss = sq_mean(P[0]);
            for (int i = 1; i < 4; ++i) loss = add(loss, sq_mean(P[static_cast<size_t>(i)]));
            return mul_scalar(loss, 0.25);
          },
          opt);
  }

  // ---- full integrated tiny model ----
  {
    ParamStore ps(0xbead4);
    SpeakerConfig sc;
    sc.resnet.width_multiplier = 0.125;
    sc.pool = "sap";
    sc.use_fpm = true;
    sc.use_se = true;
    sc.n_speakers = 3;
    SpeakerModel model(ps, sc);
    VadConfig vc;
    vc.arch = "dnn";
    vc.feat_dim = 64;
    VadNet vad(ps, "vad.", vc);
    Synchronizer sync(ps, "sync.");
    auto X = randt({1, 1, 64, 16}, 42, 0.5);
    std::vector<int64_t> labels{1};
    ParamMap pm = ps.params();
    pm["X"] = X;
    FdOptions opt;
    opt.max_indices_per_param = 2;
    opt.tol = 1e-3;
    check("model/full_tiny", pm,
          [&, X] {
            auto Xh = model.enhance(X, kFrozen);
            auto q = vad.forward(Xh, kFrozen, 0);
            auto qlv = sync.forward(q, kFrozen);
            auto maps = model.stage_maps(Xh, kFrozen);
            std::vector<TensorPtr> qsel;
            for (int s : model.config().stages)
              qsel.push_back(qlv[static_cast<size_t>(s - 2)]);
            maps = soft_vad_apply(maps, qsel);
            auto lg = model.logits(model.embed_from_maps(maps));
            return softmax_xent_sum(lg, labels);
          },
          opt);
  }

  return items;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

namespace {

int cmd_synth_data(const Config& cfg, const std::string& out) {
  CorpusSpec spec;
  spec.n_speakers = static_cast<int>(cfg.get_int("corpus.n_speakers"));
  spec.utt_per_speaker = static_cast<int>(cfg.get_int("corpus.utt_per_speaker"));
  spec.conditions = parse_conditions(cfg.get("corpus.conditions"));
  spec.seed = cfg.get_u64("seed");
  spec.out_dir = out;
  const auto rows = build_corpus(spec);
  // trials are drawn from the held-out rows so a model trained on the same
  // split is evaluated on unseen utterances; with no holdout, from everything
  const auto split = split_manifest(rows, cfg.get_int("corpus.holdout_per_speaker"));
  const auto& pool = split.holdout.empty() ? rows : split.holdout;
  const auto trials = build_trials(pool, cfg.get_int("trials.n"),
                                   cfg.get_double("trials.balance"), spec.seed);
  write_trials(join(out, "trials.csv"), trials);
  return kExitOk;
}

int cmd_train_vad(const Config& cfg, const std::string& out) {
  const std::string data_dir = require_path(cfg, "io.data_dir");
  const auto rows = read_manifest(join(data_dir, "manifest.csv"));
  const auto split = split_manifest(rows, cfg.get_int("corpus.holdout_per_speaker"));
  if (split.train.empty())
    throw std::invalid_argument("train-vad: corpus.holdout_per_speaker leaves no training rows");
  const std::string kind = cfg.get("features.kind");
  const auto data = load_utterances(split.train, kind, /*with_labels=*/true);

  const VadConfig vc = vad_config_from(cfg);
  const uint64_t seed = cfg.get_u64("seed");
  ParamStore ps(Rng(seed).substream("vad-init").seed());
  VadNet net(ps, "vad.", vc);
  VadPretrainConfig pc;
  pc.epochs = static_cast<int>(cfg.get_int("pretrain.epochs"));
  pc.batch_frames = static_cast<int>(cfg.get_int("pretrain.batch_frames"));
  pc.learning_rate = cfg.get_double("pretrain.lr");
  pc.bptt = static_cast<int>(cfg.get_int("train.bptt"));
  pc.seed = Rng(seed).substream("pretrain").seed();
  std::ofstream log(join(out, "pretrain_log.csv"));
  pretrain_vad(net, ps, "vad.", data, pc, &log);

  // frame-level posteriors vs ground truth on the held-out rows
  const auto& eval_rows = split.holdout.empty() ? split.train : split.holdout;
  const auto ev = load_utterances(eval_rows, kind, /*with_labels=*/true);
  std::vector<ScoredTrial> frames;
  for (const auto& u : ev) {
    FeatureMatrix fm;
    fm.values = u.feats;
    auto q = net.forward(feature_tensor(fm), kEval, 0);
    for (int64_t t = 0; t < q->numel(); ++t)
      frames.push_back({q->data[t], u.frame_labels[static_cast<size_t>(t)]});
  }
  write_metrics_json(join(out, "metrics.json"), compute_metrics(frames));

  CheckpointData extra;
  extra.meta["kind"] = "vad";
  extra.meta["config"] = cfg.resolved_text();
  save_checkpoint(join(out, "vad.ckpt"), ps, nullptr, extra);
  return kExitOk;
}

int cmd_train(const Config& cfg, const std::string& out) {
  const std::string data_dir = require_path(cfg, "io.data_dir");
  const auto rows = read_manifest(join(data_dir, "manifest.csv"));
  const auto split = split_manifest(rows, cfg.get_int("corpus.holdout_per_speaker"));
  if (split.train.empty())
    throw std::invalid_argument("train: corpus.holdout_per_speaker leaves no training rows");
  const auto classes = speaker_classes(split.train);
  const std::string kind = cfg.get("features.kind");
  const auto data =
      load_utterances(split.train, kind, /*with_labels=*/false, &classes);

  const uint64_t seed = cfg.get_u64("seed");
  const SpeakerConfig sc = speaker_config_from(cfg, static_cast<int64_t>(classes.size()));
  ParamStore ps(Rng(seed).substream("model-init").seed());
  SpeakerModel model(ps, sc);

  std::unique_ptr<VadNet> vad;
  std::unique_ptr<Synchronizer> sync;
  const bool sas = cfg.get_bool("train.sas");
  if (sas) {
    const std::string vad_init = require_path(cfg, "io.vad_init");
    const auto meta = read_checkpoint_meta(vad_init);
    if (meta.count("kind") == 0 || meta.at("kind") != "vad")
      throw std::invalid_argument("train: " + vad_init + " is not a posterior-network checkpoint");
    // the posterior network's architecture travels with its checkpoint
    Config vcfg;
    vcfg.load_string(meta.at("config"), vad_init);
    if (vcfg.get("features.kind") != kind)
      throw std::invalid_argument("train: " + vad_init + " was trained on " +
                                  vcfg.get("features.kind") + " features, this run uses " + kind);
    vad = std::make_unique<VadNet>(ps, "vad.", vad_config_from(vcfg));
    sync = std::make_unique<Synchronizer>(ps, "sync.");
    load_checkpoint(vad_init, ps, nullptr, /*partial=*/true);
  }

  JointTrainConfig jc = joint_config_from(cfg);
  JointTrainer trainer(ps, model, vad.get(), sync.get(), jc);
  std::ofstream log(join(out, "train_log.csv"));
  trainer.train(data, &log);

  CheckpointData extra;
  extra.meta["kind"] = "speaker";
  extra.meta["sas"] = sas ? "1" : "0";
  extra.meta["n_speakers"] = std::to_string(sc.n_speakers);
  extra.meta["config"] = cfg.resolved_text();
  const auto& h = trainer.history();
  Eigen::ArrayXd jl(h.size()), sp(h.size()), v(h.size());
  for (size_t i = 0; i < h.size(); ++i) {
    jl[static_cast<int64_t>(i)] = h[i].jl;
    sp[static_cast<int64_t>(i)] = h[i].sp;
    v[static_cast<int64_t>(i)] = h[i].v;
  }
  extra.series["loss/jl"] = jl;
  extra.series["loss/sp"] = sp;
  extra.series["loss/v"] = v;
  save_checkpoint(join(out, "model.ckpt"), ps, nullptr, extra);
  return kExitOk;
}

// model + optional posterior networks rebuilt from a speaker checkpoint
struct LoadedModel {
  std::unique_ptr<ParamStore> ps;
  std::unique_ptr<SpeakerModel> model;
  std::unique_ptr<VadNet> vad;
  std::unique_ptr<Synchronizer> sync;
  Config config;  // the resolved config the checkpoint was trained with
};

LoadedModel load_speaker_checkpoint(const std::string& path) {
  const auto meta = read_checkpoint_meta(path);
  if (meta.count("kind") == 0 || meta.at("kind") != "speaker")
    throw std::invalid_argument("load: " + path + " is not a speaker-model checkpoint");
  LoadedModel lm;
  lm.config.load_string(meta.at("config"), path);
  const int64_t n_speakers = std::stoll(meta.at("n_speakers"));
  lm.ps = std::make_unique<ParamStore>(0);
  lm.model = std::make_unique<SpeakerModel>(*lm.ps, speaker_config_from(lm.config, n_speakers));
  if (meta.count("sas") != 0 && meta.at("sas") == "1") {
    lm.vad = std::make_unique<VadNet>(*lm.ps, "vad.", vad_config_from(lm.config));
    lm.sync = std::make_unique<Synchronizer>(*lm.ps, "sync.");
  }
  load_checkpoint(path, *lm.ps);
  return lm;
}

EmbeddingTable embed_rows(const LoadedModel& lm, const std::vector<ManifestRow>& rows) {
  const std::string kind = lm.config.get("features.kind");
  const auto data = load_utterances(rows, kind, /*with_labels=*/false);
  EmbeddingTable tab;
  tab.z.resize(lm.model->config().embed_dim, static_cast<int64_t>(rows.size()));
  for (size_t i = 0; i < data.size(); ++i) {
    tab.utt_ids.push_back(rows[i].utt_id);
    tab.speaker_ids.push_back(rows[i].speaker_id);
    tab.z.col(static_cast<int64_t>(i)) =
        embed_utterance(*lm.model, lm.vad.get(), lm.sync.get(), data[i].feats);
  }
  return tab;
}

int cmd_enroll(const Config& cfg, const std::string& out) {
  const std::string ckpt = require_path(cfg, "io.ckpt");
  const std::string data_dir = require_path(cfg, "io.data_dir");
  const LoadedModel lm = load_speaker_checkpoint(ckpt);
  const auto rows = read_manifest(join(data_dir, "manifest.csv"));
  write_embeddings(join(out, "embeddings.csv"), embed_rows(lm, rows));
  return kExitOk;
}

int cmd_score(const Config& cfg, const std::string& out) {
  const auto emb = read_embeddings(require_path(cfg, "io.embeddings"));
  const auto trials = read_trials(require_path(cfg, "io.trials"));
  write_scores(join(out, "scores.csv"),
               score_trials(emb, trials, cfg.get_bool("enroll.average")));
  return kExitOk;
}

int cmd_eval(const Config& cfg, const std::string& out) {
  const auto rows = read_scores(require_path(cfg, "io.scores"));
  const auto st = scored_trials(rows);
  write_metrics_json(join(out, "metrics.json"), compute_metrics(st));
  det_curve_export(st, join(out, "det.csv"));
  return kExitOk;
}

struct AblateCombo {
  std::string name;
  bool fpm = false, vad = false, fl = false, se = false;
};

std::vector<AblateCombo> ablate_grid(bool full) {
  std::vector<AblateCombo> combos;
  if (full) {
    for (int fpm = 0; fpm < 2; ++fpm)
      for (int vd = 0; vd < 2; ++vd)
        for (int fl = 0; fl < 2; ++fl)
          for (int se = 0; se < 2; ++se) {
            AblateCombo c;
            c.fpm = fpm != 0;
            c.vad = vd != 0;
            c.fl = fl != 0;
            c.se = se != 0;
            c.name = std::string("fpm") + (c.fpm ? "1" : "0") + "-vad" + (c.vad ? "1" : "0") +
                     "-fl" + (c.fl ? "1" : "0") + "-se" + (c.se ? "1" : "0");
            combos.push_back(c);
          }
  } else {
    combos.push_back({"none", false, false, false, false});
    combos.push_back({"fpm", true, false, false, false});
    combos.push_back({"fpm+se", true, false, false, true});
    combos.push_back({"fpm+vad", true, true, false, false});
    combos.push_back({"fpm+vad+fl", true, true, true, false});
    combos.push_back({"fpm+vad+fl+se", true, true, true, true});
  }
  return combos;
}

int cmd_ablate(const Config& cfg, const std::string& out) {
  const std::string data_dir = require_path(cfg, "io.data_dir");
  const auto rows = read_manifest(join(data_dir, "manifest.csv"));
  const auto split = split_manifest(rows, cfg.get_int("corpus.holdout_per_speaker"));
  if (split.train.empty() || split.holdout.empty())
    throw std::invalid_argument("ablate: the split needs both training and held-out rows");
  const auto classes = speaker_classes(split.train);
  const std::string kind = cfg.get("features.kind");
  const auto data = load_utterances(split.train, kind, /*with_labels=*/true, &classes);
  const auto trials = read_trials(join(data_dir, "trials.csv"));
  std::map<std::string, std::string> cond_of;  // test utt -> condition name
  std::set<std::string> conditions;
  for (const auto& r : split.holdout) {
    cond_of[r.utt_id] = condition_name(r);
    conditions.insert(condition_name(r));
  }

  const auto combos = ablate_grid(cfg.get_bool("ablate.full_grid"));
  const int n_seeds = static_cast<int>(cfg.get_int("ablate.seeds"));
  if (n_seeds < 1) throw std::invalid_argument("ablate: ablate.seeds must be >= 1");
  const uint64_t base_seed = cfg.get_u64("seed");
  const bool any_vad =
      std::any_of(combos.begin(), combos.end(), [](const AblateCombo& c) { return c.vad; });

  std::vector<ReportRow> report(combos.size());
  for (size_t ci = 0; ci < combos.size(); ++ci) report[ci].system = combos[ci].name;

  for (int si = 0; si < n_seeds; ++si) {
    const uint64_t run_seed =
        n_seeds == 1 ? base_seed
                     : Rng(base_seed).substream("ablate-seed", static_cast<uint64_t>(si)).seed();
    // one shared posterior-network pre-training per seed, so rows that enable
    // the soft weighting differ from the others only in that component
    std::unique_ptr<ParamStore> psv;
    const VadConfig vc = vad_config_from(cfg);
    if (any_vad) {
      psv = std::make_unique<ParamStore>(Rng(run_seed).substream("vad-init").seed());
      VadNet pre(*psv, "vad.", vc);
      VadPretrainConfig pc;
      pc.epochs = static_cast<int>(cfg.get_int("pretrain.epochs"));
      pc.batch_frames = static_cast<int>(cfg.get_int("pretrain.batch_frames"));
      pc.learning_rate = cfg.get_double("pretrain.lr");
      pc.bptt = static_cast<int>(cfg.get_int("train.bptt"));
      pc.seed = Rng(run_seed).substream("pretrain").seed();
      pretrain_vad(pre, *psv, "vad.", data, pc, nullptr);
    }

    for (size_t ci = 0; ci < combos.size(); ++ci) {
      const AblateCombo& combo = combos[ci];
      Config run_cfg = cfg;
      run_cfg.set("model.use_fpm", combo.fpm ? "true" : "false");
      run_cfg.set("model.use_se", combo.se ? "true" : "false");
      run_cfg.set("train.sas", combo.vad ? "true" : "false");
      if (!combo.fl) run_cfg.set("train.gamma", "0");
      run_cfg.set("seed", std::to_string(run_seed));

      const SpeakerConfig sc =
          speaker_config_from(run_cfg, static_cast<int64_t>(classes.size()));
      ParamStore ps(Rng(run_seed).substream("model-init").seed());
      SpeakerModel model(ps, sc);
      std::unique_ptr<VadNet> vad;
      std::unique_ptr<Synchronizer> sync;
      if (combo.vad) {
        vad = std::make_unique<VadNet>(ps, "vad.", vc);
        sync = std::make_unique<Synchronizer>(ps, "sync.");
        for (const auto& [name, t] : psv->params()) ps.param(name)->data = t->data;
      }
      JointTrainConfig jc = joint_config_from(run_cfg);
      JointTrainer trainer(ps, model, vad.get(), sync.get(), jc);
      trainer.train(data, nullptr);

      EmbeddingTable tab;
      {
        const auto hold = load_utterances(split.holdout, kind, false);
        tab.z.resize(sc.embed_dim, static_cast<int64_t>(hold.size()));
        for (size_t i = 0; i < hold.size(); ++i) {
          tab.utt_ids.push_back(split.holdout[i].utt_id);
          tab.speaker_ids.push_back(split.holdout[i].speaker_id);
          tab.z.col(static_cast<int64_t>(i)) =
              embed_utterance(model, vad.get(), sync.get(), hold[i].feats);
        }
      }
      const auto scored = score_trials(tab, trials, cfg.get_bool("enroll.average"));

      const std::string run_dir =
          join(out, combo.name + (n_seeds == 1 ? "" : "-seed" + std::to_string(si)));
      std::filesystem::create_directories(run_dir);
      run_cfg.write_resolved(join(run_dir, "config.ini"));
      write_metrics_json(join(run_dir, "metrics.json"),
                         compute_metrics(scored_trials(scored)));

      for (const auto& cond : conditions) {
        std::vector<ScoredTrial> bucket;
        for (const auto& s : scored)
          if (cond_of.at(s.test_id) == cond) bucket.push_back({s.score, s.target});
        if (bucket.empty())
          throw std::runtime_error("ablate: no trials whose test utterance is in " + cond +
                                   "; enlarge trials.n");
        report[ci].cells[cond] += compute_eer(bucket).eer / static_cast<double>(n_seeds);
      }
    }
  }

  emit_report(report, join(out, "report.csv"));
  return kExitOk;
}

int cmd_gradcheck(const Config&, const std::string& out) {
  std::ostringstream lines;
  const auto items = gradcheck_suite(&lines);
  std::cout << lines.str();
  std::ofstream f(join(out, "gradcheck.txt"));
  f << lines.str();
  const bool ok = std::all_of(items.begin(), items.end(),
                              [](const GradCheckItem& i) { return i.report.pass; });
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_pipeline(const std::string& subcommand, const Config& cfg,
                 const std::string& out_dir) {
  try {
    if (out_dir.empty())
      throw std::invalid_argument(subcommand + ": an output directory is required (--out)");
    std::filesystem::create_directories(out_dir);
    // reproducibility: the directory always records what produced it
    cfg.write_resolved(join(out_dir, "config.ini"));
    if (subcommand == "synth-data") return cmd_synth_data(cfg, out_dir);
    if (subcommand == "train-vad") return cmd_train_vad(cfg, out_dir);
    if (subcommand == "train") return cmd_train(cfg, out_dir);
    if (subcommand == "enroll") return cmd_enroll(cfg, out_dir);
    if (subcommand == "score") return cmd_score(cfg, out_dir);
    if (subcommand == "eval") return cmd_eval(cfg, out_dir);
    if (subcommand == "ablate") return cmd_ablate(cfg, out_dir);
    if (subcommand == "gradcheck") return cmd_gradcheck(cfg, out_dir);
    throw std::invalid_argument("unknown subcommand '" + subcommand + "'");
  } catch (const std::exception& e) {
    std::cerr << "svf: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace svf
