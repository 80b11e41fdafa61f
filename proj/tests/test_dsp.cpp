// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "svf/dsp.hpp"
#include "svf/rng.hpp"
#include "svf/wav.hpp"

using namespace svf;

namespace {

std::vector<double> tone(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  std::vector<double> s(static_cast<size_t>(seconds * rate));
  for (size_t i = 0; i < s.size(); ++i)
    s[i] = amp * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / rate);
  return s;
}

// direct O(N^2) DFT of one windowed frame, the oracle the FFT is checked
// against
std::complex<double> naive_dft_bin(const std::vector<double>& signal, int64_t frame_start,
                                   int64_t bin, const FrameParams& p) {
  std::complex<double> acc(0.0, 0.0);
  for (int n = 0; n < p.window_len; ++n) {
    const double w = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (p.window_len - 1));
    const double v = signal[static_cast<size_t>(frame_start + n)] * w;
    const double ang = -2.0 * M_PI * static_cast<double>(bin) * n / p.fft_size;
    acc += v * std::complex<double>(std::cos(ang), std::sin(ang));
  }
  return acc;
}

}  // namespace

TEST_CASE("frame count formula") {
  FrameParams p;
  CHECK(frame_count(16000, p) == 98);
  CHECK(frame_count(400, p) == 1);
  CHECK(frame_count(559, p) == 1);
  CHECK(frame_count(560, p) == 2);
  CHECK_THROWS_AS(frame_count(399, p), std::invalid_argument);
  // 100 frames per second of hop: a 200-frame training segment spans 2 s of
  // hops (199 * 160 + 400 samples)
  CHECK(frame_count(199 * 160 + 400, p) == 200);
  for (int64_t k : {1, 7, 31}) CHECK(frame_count(16000 + k * 160, p) == 98 + k);
}

TEST_CASE("stft matches a direct DFT oracle") {
  Rng rng(55);
  std::vector<double> sig(1200);
  for (auto& v : sig) v = rng.uniform(-0.8, 0.8);
  FrameParams p;
  auto S = stft(sig, p);
  REQUIRE(S.rows() == 257);
  REQUIRE(S.cols() == frame_count(1200, p));
  for (int64_t t : {0, 3})
    for (int64_t f : {0, 1, 17, 100, 256}) {
      auto oracle = naive_dft_bin(sig, t * p.hop, f, p);
      CHECK(std::abs(S(f, t) - oracle) < 1e-9);
    }
}

TEST_CASE("stft of silence is exactly zero") {
  std::vector<double> sig(2000, 0.0);
  auto S = stft(sig, FrameParams{});
  CHECK(S.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("1000 Hz tone peaks at bin 32") {
  auto sig = tone(1000.0, 0.5);
  auto S = stft(sig, FrameParams{});
  Eigen::MatrixXd mag = S.cwiseAbs();
  for (int64_t t : {0, 10, 20}) {
    int64_t argmax;
    mag.col(t).maxCoeff(&argmax);
    CHECK(argmax == 32);  // 1000 / 31.25
  }
}

TEST_CASE("mel filterbank oracles") {
  FrameParams p;
  SUBCASE("zero spectrogram floors at ln(1e-10)") {
    Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(257, 5);
    auto X = log_mel_fbank(zero, p);
    CHECK(X.kind == "fbank64");
    CHECK(X.d() == 64);
    CHECK(X.T() == 5);
    for (int64_t i = 0; i < 64; ++i)
      for (int64_t t = 0; t < 5; ++t) CHECK(X.values(i, t) == doctest::Approx(std::log(1e-10)));
  }
  SUBCASE("tone lands in the filter whose center is nearest 1000 Hz") {
    auto X = log_mel_fbank(stft(tone(1000.0, 0.5), p), p);
    auto centers = mel_center_freqs(p);
    int64_t nearest = 0;
    for (int64_t j = 1; j < 64; ++j)
      if (std::abs(centers[static_cast<size_t>(j)] - 1000.0) <
          std::abs(centers[static_cast<size_t>(nearest)] - 1000.0))
        nearest = j;
    for (int64_t t : {5, 15}) {
      int64_t argmax;
      X.values.col(t).maxCoeff(&argmax);
      CHECK(std::abs(argmax - nearest) <= 1);  // tone sits between two triangle peaks
    }
  }
  SUBCASE("doubling amplitude adds ln(4) in the power domain") {
    FrameParams fp;
    auto X1 = log_mel_fbank(stft(tone(1000.0, 0.3, 0.25), fp), fp);
    auto X2 = log_mel_fbank(stft(tone(1000.0, 0.3, 0.5), fp), fp);
    int64_t argmax;
    X1.values.col(10).maxCoeff(&argmax);
    CHECK(X2.values(argmax, 10) - X1.values(argmax, 10) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
  }
}

TEST_CASE("spec160 oracles") {
  FrameParams p;
  SUBCASE("zero signal floors everywhere") {
    auto X = log_spectrogram_160(stft(std::vector<double>(1000, 0.0), p));
    CHECK(X.kind == "spec160");
    CHECK(X.d() == 160);
    CHECK(X.values.maxCoeff() == doctest::Approx(std::log(1e-10)));
  }
  SUBCASE("1000 Hz tone peaks at row 32") {
    auto X = log_spectrogram_160(stft(tone(1000.0, 0.4), p));
    int64_t argmax;
    X.values.col(8).maxCoeff(&argmax);
    CHECK(argmax == 32);
  }
  SUBCASE("6 kHz tone has no dominant bin inside the retained range") {
    auto sig = tone(6000.0, 0.4);
    auto S = stft(sig, p);
    Eigen::VectorXd full = S.col(8).cwiseAbs2();
    int64_t global_argmax;
    full.maxCoeff(&global_argmax);
    CHECK(global_argmax == 192);  // 6000 / 31.25, outside rows 0..159
    auto X = log_spectrogram_160(S);
    // best retained bin sits far below the true peak (log power gap > ln(100))
    CHECK(std::log(full[global_argmax]) - X.values.col(8).maxCoeff() > std::log(100.0));
  }
}

TEST_CASE("segment mean normalization") {
  FeatureMatrix X;
  X.kind = "fbank64";
  X.values.resize(2, 3);
  X.values << 1, 2, 3, 5, 5, 5;
  segment_mean_normalize(X);
  CHECK(X.values(0, 0) == -1.0);
  CHECK(X.values(0, 1) == 0.0);
  CHECK(X.values(0, 2) == 1.0);
  for (int t = 0; t < 3; ++t) CHECK(X.values(1, t) == 0.0);
  Eigen::MatrixXd once = X.values;
  segment_mean_normalize(X);  // idempotent on exactly representable input
  CHECK(X.values == once);
}

TEST_CASE("global standardization") {
  Rng rng(77);
  std::vector<FeatureMatrix> set;
  for (int u = 0; u < 4; ++u) {
    FeatureMatrix X;
    X.kind = "fbank64";
    X.values.resize(3, 20 + u * 7);
    for (int64_t i = 0; i < X.values.size(); ++i)
      X.values.data()[i] = rng.normal() * (2.0 + u) + u;
    set.push_back(X);
  }
  auto stats = compute_global_stats(set);
  SUBCASE("training set itself standardizes to mean 0 var 1") {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sum2 = Eigen::VectorXd::Zero(3);
    int64_t frames = 0;
    for (auto X : set) {
      global_standardize(X, stats);
      sum += X.values.rowwise().sum();
      sum2 += X.values.array().square().matrix().rowwise().sum();
      frames += X.T();
    }
    for (int64_t i = 0; i < 3; ++i) {
      CHECK(std::abs(sum[i] / frames) < 1e-10);
      CHECK(std::abs(sum2[i] / frames - 1.0) < 1e-10);
    }
  }
  SUBCASE("identity stats change nothing; matching mean zeroes out") {
    GlobalStats id;
    id.mean = Eigen::VectorXd::Zero(3);
    id.stddev = Eigen::VectorXd::Ones(3);
    auto X = set[0];
    auto before = X.values;
    global_standardize(X, id);
    CHECK(X.values == before);

    FeatureMatrix C;
    C.kind = "fbank64";
    C.values = stats.mean.replicate(1, 6);
    global_standardize(C, stats);
    CHECK(C.values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("dimension mismatch rejected") {
    FeatureMatrix bad;
    bad.kind = "fbank64";
    bad.values.resize(4, 5);
    bad.values.setZero();
    CHECK_THROWS_AS(global_standardize(bad, stats), std::invalid_argument);
  }
}

TEST_CASE("frame context stacking") {
  FeatureMatrix X;
  X.kind = "fbank64";
  X.values.resize(2, 12);
  for (int64_t t = 0; t < 12; ++t) {
    X.values(0, t) = static_cast<double>(t);
    X.values(1, t) = 100.0 + static_cast<double>(t);
  }
  SUBCASE("context 1 is the identity") {
    CHECK(frame_context_stack(X, 1) == X.values);
  }
  SUBCASE("T=1 input replicates into all 11 slots") {
    FeatureMatrix one;
    one.kind = "fbank64";
    one.values = X.values.col(3);
    auto S = frame_context_stack(one, 11);
    REQUIRE(S.rows() == 22);
    for (int k = 0; k < 11; ++k) {
      CHECK(S(2 * k, 0) == 3.0);
      CHECK(S(2 * k + 1, 0) == 103.0);
    }
  }
  SUBCASE("interior frame stacks t-5..t+5 in order") {
    auto S = frame_context_stack(X, 11);
    REQUIRE(S.rows() == 22);
    REQUIRE(S.cols() == 12);
    for (int k = 0; k < 11; ++k) {
      CHECK(S(2 * k, 6) == static_cast<double>(6 + k - 5));
      CHECK(S(2 * k + 1, 6) == 100.0 + (6 + k - 5));
    }
    // edges replicate
    CHECK(S(0, 0) == 0.0);
    CHECK(S(2 * 10, 11) == 11.0);
  }
  SUBCASE("even context rejected") {
    CHECK_THROWS_AS(frame_context_stack(X, 4), std::invalid_argument);
  }
}

TEST_CASE("feature extraction is bit-identical across runs") {
  auto sig = tone(737.0, 0.3, 0.4);
  auto a = features_fbank64(sig);
  auto b = features_fbank64(sig);
  CHECK(a.values == b.values);
  auto c = features_spec160(sig);
  auto d2 = features_spec160(sig);
  CHECK(c.values == d2.values);
}

TEST_CASE("feature tensor layout is [1,1,d,T] row-contiguous in time") {
  FeatureMatrix X;
  X.kind = "fbank64";
  X.values.resize(2, 3);
  X.values << 1, 2, 3, 4, 5, 6;
  auto t = feature_tensor(X);
  CHECK(t->shape == Shape{1, 1, 2, 3});
  CHECK(t->data[0] == 1.0);
  CHECK(t->data[2] == 3.0);
  CHECK(t->data[3] == 4.0);
}

TEST_CASE("wav round-trip and validation") {
  Rng rng(88);
  std::vector<double> sig(3000);
  for (auto& v : sig) v = rng.uniform(-0.99, 0.99);
  const std::string path = "test_roundtrip.wav";
  write_wav(path, sig);
  auto back = read_wav(path);
  REQUIRE(back.size() == sig.size());
  for (size_t i = 0; i < sig.size(); ++i) CHECK(std::abs(back[i] - sig[i]) <= 1.0 / 32768.0);
  CHECK_THROWS_AS((void)read_wav(path, 8000), std::runtime_error);
  CHECK_THROWS_AS((void)read_wav("does_not_exist.wav"), std::runtime_error);
  std::remove(path.c_str());
}
