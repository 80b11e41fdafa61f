// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_DSP_HPP
#define SVF_DSP_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "svf/tensor.hpp"

namespace svf {

struct FrameParams {
  int sample_rate = 16000;
  int window_len = 400;  // 25 ms
  int hop = 160;         // 10 ms, pinned so 2 s gives exactly 200 frames
  int fft_size = 512;
};

// Log-domain acoustic features, d rows by T frame columns.
struct FeatureMatrix {
  std::string kind;  // fbank64 | spec160
  Eigen::MatrixXd values;

  int64_t d() const { return values.rows(); }
  int64_t T() const { return values.cols(); }
};

int64_t frame_count(int64_t len, const FrameParams& p);

// Windowed 512-point FFT, bins 0..256 (bin f covers f * 31.25 Hz).
Eigen::MatrixXcd stft(const std::vector<double>& signal, const FrameParams& p);

// Triangular mel filterbank over the power spectrum, 0-8000 Hz, HTK mel
// scale; values ln-floored at 1e-10.
FeatureMatrix log_mel_fbank(const Eigen::MatrixXcd& spec, const FrameParams& p,
                            int n_mels = 64);
// Center frequencies (Hz) of the filters, for oracle checks.
std::vector<double> mel_center_freqs(const FrameParams& p, int n_mels = 64);

// Log power of FFT bins 0..159 (0 - 4968.75 Hz).
FeatureMatrix log_spectrogram_160(const Eigen::MatrixXcd& spec);

// Subtract each feature dimension's mean over the segment. Idempotent.
void segment_mean_normalize(FeatureMatrix& X);

struct GlobalStats {
  Eigen::VectorXd mean, stddev;  // per feature dimension
};

GlobalStats compute_global_stats(const std::vector<FeatureMatrix>& set);
void global_standardize(FeatureMatrix& X, const GlobalStats& stats);

// Frames t-(c/2)..t+(c/2) stacked per column, edges replicated: (c*d) x T.
Eigen::MatrixXd frame_context_stack(const FeatureMatrix& X, int context = 11);

// End-to-end helpers.
FeatureMatrix features_fbank64(const std::vector<double>& signal,
                               const FrameParams& p = {});
FeatureMatrix features_spec160(const std::vector<double>& signal,
                               const FrameParams& p = {});

// [1, 1, d, T] tensor view of a feature matrix (leaf, no grad).
TensorPtr feature_tensor(const FeatureMatrix& X);

}  // namespace svf

#endif
