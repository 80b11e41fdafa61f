// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <stdexcept>

namespace svf {

namespace {

constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// edge frequencies of the triangular filters: n_mels + 2 points, equally
// spaced on the mel axis between 0 and Nyquist
std::vector<double> mel_edges(const FrameParams& p, int n_mels) {
  const double lo = hz_to_mel(0.0);
  const double hi = hz_to_mel(p.sample_rate / 2.0);
  std::vector<double> hz(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    hz[static_cast<size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (n_mels + 1));
  return hz;
}

}  // namespace

int64_t frame_count(int64_t len, const FrameParams& p) {
  if (len < p.window_len)
    throw std::invalid_argument("signal of " + std::to_string(len) +
                                " samples is shorter than one analysis window (" +
                                std::to_string(p.window_len) + ")");
  return (len - p.window_len) / p.hop + 1;
}

Eigen::MatrixXcd stft(const std::vector<double>& signal, const FrameParams& p) {
  const int64_t T = frame_count(static_cast<int64_t>(signal.size()), p);
  const int64_t bins = p.fft_size / 2 + 1;
  Eigen::MatrixXcd out(bins, T);

  Eigen::VectorXd window(p.window_len);
  for (int i = 0; i < p.window_len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (p.window_len - 1));

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<size_t>(p.fft_size), 0.0);
  std::vector<std::complex<double>> spec(static_cast<size_t>(p.fft_size));
  for (int64_t t = 0; t < T; ++t) {
    const double* src = signal.data() + t * p.hop;
    for (int i = 0; i < p.window_len; ++i) frame[static_cast<size_t>(i)] = src[i] * window[i];
    std::fill(frame.begin() + p.window_len, frame.end(), 0.0);
    fft.fwd(spec, frame);
    for (int64_t f = 0; f < bins; ++f) out(f, t) = spec[static_cast<size_t>(f)];
  }
  return out;
}

FeatureMatrix log_mel_fbank(const Eigen::MatrixXcd& spec, const FrameParams& p, int n_mels) {
  const int64_t bins = spec.rows();
  const int64_t T = spec.cols();
  const auto edges = mel_edges(p, n_mels);
  const double hz_per_bin = static_cast<double>(p.sample_rate) / p.fft_size;

  // filter weights: linear-in-Hz triangles between consecutive mel edges
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, bins);
  for (int j = 0; j < n_mels; ++j) {
    const double lo = edges[static_cast<size_t>(j)];
    const double c = edges[static_cast<size_t>(j) + 1];
    const double hi = edges[static_cast<size_t>(j) + 2];
    for (int64_t k = 0; k < bins; ++k) {
      const double f = k * hz_per_bin;
      if (f > lo && f < c)
        fb(j, k) = (f - lo) / (c - lo);
      else if (f >= c && f < hi)
        fb(j, k) = (hi - f) / (hi - c);
    }
  }

  Eigen::MatrixXd power = spec.cwiseAbs2();
  FeatureMatrix out;
  out.kind = "fbank64";
  out.values = (fb * power).cwiseMax(kLogFloor).array().log();
  if (out.values.rows() != n_mels || out.values.cols() != T)
    throw std::logic_error("mel filterbank produced unexpected shape");
  return out;
}

std::vector<double> mel_center_freqs(const FrameParams& p, int n_mels) {
  const auto edges = mel_edges(p, n_mels);
  std::vector<double> centers(static_cast<size_t>(n_mels));
  for (int j = 0; j < n_mels; ++j) centers[static_cast<size_t>(j)] = edges[static_cast<size_t>(j) + 1];
  return centers;
}

FeatureMatrix log_spectrogram_160(const Eigen::MatrixXcd& spec) {
  if (spec.rows() < 160)
    throw std::invalid_argument("spectrogram has fewer than 160 bins");
  FeatureMatrix out;
  out.kind = "spec160";
  out.values = spec.topRows(160).cwiseAbs2().cwiseMax(kLogFloor).array().log();
  return out;
}

void segment_mean_normalize(FeatureMatrix& X) {
  X.values.colwise() -= X.values.rowwise().mean();
}

GlobalStats compute_global_stats(const std::vector<FeatureMatrix>& set) {
  if (set.empty()) throw std::invalid_argument("global stats need at least one segment");
  const int64_t d = set.front().d();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sum2 = Eigen::VectorXd::Zero(d);
  int64_t frames = 0;
  for (const auto& X : set) {
    if (X.d() != d) throw std::invalid_argument("global stats: feature dimension mismatch");
    sum += X.values.rowwise().sum();
    sum2 += X.values.array().square().matrix().rowwise().sum();
    frames += X.T();
  }
  GlobalStats s;
  s.mean = sum / static_cast<double>(frames);
  Eigen::VectorXd var =
      (sum2 / static_cast<double>(frames) - s.mean.cwiseProduct(s.mean)).cwiseMax(0.0);
  s.stddev = var.cwiseSqrt().cwiseMax(1e-8);
  return s;
}

void global_standardize(FeatureMatrix& X, const GlobalStats& stats) {
  if (stats.mean.size() != X.d() || stats.stddev.size() != X.d())
    throw std::invalid_argument("global stats dimension " + std::to_string(stats.mean.size()) +
                                " does not match features " + std::to_string(X.d()));
  X.values = (X.values.colwise() - stats.mean).array().colwise() / stats.stddev.array();
}

Eigen::MatrixXd frame_context_stack(const FeatureMatrix& X, int context) {
  if (context < 1 || context % 2 == 0)
    throw std::invalid_argument("context must be odd and positive");
  const int64_t d = X.d(), T = X.T();
  const int half = context / 2;
  Eigen::MatrixXd out(static_cast<int64_t>(context) * d, T);
  for (int64_t t = 0; t < T; ++t)
    for (int k = 0; k < context; ++k) {
      const int64_t tt = std::clamp<int64_t>(t + k - half, 0, T - 1);
      out.block(static_cast<int64_t>(k) * d, t, d, 1) = X.values.col(tt);
    }
  return out;
}

FeatureMatrix features_fbank64(const std::vector<double>& signal, const FrameParams& p) {
  return log_mel_fbank(stft(signal, p), p, 64);
}

FeatureMatrix features_spec160(const std::vector<double>& signal, const FrameParams& p) {
  return log_spectrogram_160(stft(signal, p));
}

TensorPtr feature_tensor(const FeatureMatrix& X) {
  auto t = Tensor::create({1, 1, X.d(), X.T()});
  for (int64_t f = 0; f < X.d(); ++f)
    for (int64_t tt = 0; tt < X.T(); ++tt) t->data[f * X.T() + tt] = X.values(f, tt);
  return t;
}

}  // namespace svf
