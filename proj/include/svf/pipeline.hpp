// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_PIPELINE_HPP
#define SVF_PIPELINE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "svf/config.hpp"
#include "svf/corpus.hpp"
#include "svf/eval.hpp"
#include "svf/extractor.hpp"
#include "svf/gradcheck.hpp"
#include "svf/training.hpp"
#include "svf/vad.hpp"

namespace svf {

// Process exit codes of the command-line surface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;        // usage or config error
inline constexpr int kExitCheckFailed = 2;  // gradient suite failure

// Contiguous class index per speaker id, ranked by id.
std::map<int64_t, int64_t> speaker_classes(const std::vector<ManifestRow>& rows);

// Per-speaker split: the last `holdout_per_speaker` rows of each speaker in
// manifest order are held out for evaluation, the rest train.
struct ManifestSplit {
  std::vector<ManifestRow> train, holdout;
};
ManifestSplit split_manifest(const std::vector<ManifestRow>& rows,
                             int64_t holdout_per_speaker);

// Reads each row's wav and produces segment-mean-normalized features;
// with_labels additionally loads the frame-label CSV stored next to the wav.
// When a class map is given, TrainUtterance::speaker carries the class index
// (every row's speaker must appear in the map); otherwise the raw speaker id.
std::vector<TrainUtterance> load_utterances(
    const std::vector<ManifestRow>& rows, const std::string& feat_kind,
    bool with_labels, const std::map<int64_t, int64_t>* classes = nullptr);

// Whole-utterance embedding through the integrated model: enhancement, trunk,
// optional soft posterior weighting (vad and sync together or not at all),
// pooling, and the embedding projection. Evaluation-mode batchnorm.
Eigen::VectorXd embed_utterance(const SpeakerModel& model, const VadNet* vad,
                                const Synchronizer* sync,
                                const Eigen::MatrixXd& feats);

// Utterance embeddings keyed by position: column i of z belongs to
// utt_ids[i] / speaker_ids[i].
struct EmbeddingTable {
  std::vector<std::string> utt_ids;
  std::vector<int64_t> speaker_ids;
  Eigen::MatrixXd z;  // embed_dim x n
};
void write_embeddings(const std::string& path, const EmbeddingTable& table);
EmbeddingTable read_embeddings(const std::string& path);

// Cosine scoring of a trial list against an embedding table. With
// average_enrollment, the enrollment side is the mean embedding of the
// enrollment speaker's utterances (excluding the trial's own test utterance);
// the default scores the two utterances pairwise.
struct ScoreRow {
  std::string enroll_id, test_id;
  int target = 0;
  double score = 0.0;
};
std::vector<ScoreRow> score_trials(const EmbeddingTable& emb,
                                   const std::vector<Trial>& trials,
                                   bool average_enrollment);
void write_scores(const std::string& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores(const std::string& path);
std::vector<ScoredTrial> scored_trials(const std::vector<ScoreRow>& rows);

// Summary table: one row per system, one column per condition (sorted by
// speech then nonspeech length), plus an Avg column whenever there is more
// than one condition. Every row must cover every column.
struct ReportRow {
  std::string system;
  std::map<std::string, double> cells;  // condition name -> metric value
};
void emit_report(const std::vector<ReportRow>& rows, const std::string& path);

// Finite-difference gradient suite: one check per differentiable operation,
// the three composite fragments (masking net, attentive pooling stage,
// pyramid merge), and the full integrated tiny model. Writes one line per
// check to `log` when given.
struct GradCheckItem {
  std::string name;
  FdReport report;
};
std::vector<GradCheckItem> gradcheck_suite(std::ostream* log = nullptr);

// Dispatch for one subcommand with a fully resolved config. Writes artifacts
// under out_dir (every run leaves the resolved config there) and returns a
// process exit code instead of throwing.
int run_pipeline(const std::string& subcommand, const Config& cfg,
                 const std::string& out_dir);

}  // namespace svf

#endif
