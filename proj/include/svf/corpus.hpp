// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_CORPUS_HPP
#define SVF_CORPUS_HPP

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "svf/dsp.hpp"

namespace svf {

// A parametric voice: fundamental plus three formant resonances and a
// spectral tilt. Parameters are fixed for the speaker's lifetime.
struct SyntheticSpeaker {
  int64_t id = 0;
  double f0 = 120.0;                    // Hz, in [90, 250]
  std::array<double, 3> formant{};      // center frequencies, Hz
  std::array<double, 3> bandwidth{};    // -3 dB widths, Hz
  double tilt = 0.0;                    // extra lowpass strength in [0, 1)
};

// n voices; every pair differs in at least one formant by >= 50 Hz.
std::vector<SyntheticSpeaker> make_speakers(int n, uint64_t seed);

// Audio with aligned sample-level speech/non-speech truth.
struct Utterance {
  std::vector<double> samples;
  std::vector<int> sample_labels;  // 1 speech, 0 non-speech
};

// Voiced syllables (pulse train through the speaker's formant cascade, with
// per-syllable pitch and amplitude modulation) separated by exact-silence
// micro-pauses. Deterministic in (speaker, seed).
Utterance synth_utterance(const SyntheticSpeaker& spk, double duration_s, uint64_t seed,
                          int sample_rate = 16000);

// Majority vote of the sample labels under each analysis window.
std::vector<int> frame_labels_from_samples(const std::vector<int>& sample_labels,
                                           const FrameParams& p = {});

enum class NoiseKind { white, pink, chirp, babble };
NoiseKind noise_kind_from_string(const std::string& s);

// n samples of the requested noise. Babble sums four voices drawn from the
// pool (which must hold at least 4 speakers).
std::vector<double> make_noise(NoiseKind kind, int64_t n, uint64_t seed,
                               const std::vector<SyntheticSpeaker>& babble_pool = {},
                               int sample_rate = 16000);

// Mix signal + g * noise with g chosen so the ratio of speech-labeled signal
// power to scaled-noise power over those same samples hits snr_db exactly.
// +infinity means clean (signal returned unchanged). Noise shorter than the
// signal is tiled; all-zero noise and label-free signals are rejected.
std::vector<double> add_noise_at_snr(const std::vector<double>& signal,
                                     const std::vector<double>& noise, double snr_db,
                                     const std::vector<int>& speech_labels);

// Direct-path impulse followed by white noise under an exponential envelope
// that reaches -60 dB at rt60; length 1.5 * rt60.
std::vector<double> make_rir(double rt60_s, uint64_t seed, int sample_rate = 16000);

// Convolve with a synthetic room response, trim to the input length, and
// rescale to the input RMS.
std::vector<double> apply_reverb(const std::vector<double>& signal, double rt60_s,
                                 uint64_t seed, int sample_rate = 16000);

// Sx-Ny evaluation condition: S seconds of speech inside N total seconds of
// padded silence (split equally), then an optional distortion applied to the
// padded whole.
struct Condition {
  int S = 4;  // speech seconds
  int N = 0;  // total padded silence seconds
  double snr_db = std::numeric_limits<double>::infinity();  // +inf = clean
  std::string distortion = "none";  // none | white | pink | chirp | babble | reverb
  std::string name() const;         // "S4-N2"
};

// Concatenate the given speech (cycling through the list as needed), trim to
// exactly S seconds, pad N/2 seconds of silence on each side, then apply the
// condition's distortion to the padded whole. Labels mark the pads non-speech.
// Reverb uses rt60 = 0.23 s; babble needs a pool of at least 4 speakers.
Utterance pad_silence_condition(const std::vector<Utterance>& speech, const Condition& cond,
                                uint64_t seed,
                                const std::vector<SyntheticSpeaker>& babble_pool = {},
                                int sample_rate = 16000);

// Fresh speech for one speaker pushed through pad_silence_condition.
Utterance make_conditioned_utterance(const SyntheticSpeaker& spk, const Condition& cond,
                                     uint64_t seed,
                                     const std::vector<SyntheticSpeaker>& babble_pool = {},
                                     int sample_rate = 16000);

struct ManifestRow {
  std::string utt_id;
  int64_t speaker_id = 0;
  std::string wav_path;
  int S = 4;
  int N = 0;
  std::string snr = "clean";  // dB value or "clean"
  std::string distortion = "none";
};

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

// Full corpus generation: audio, per-frame label CSVs (wav path + ".labels.csv"),
// and the manifest (out_dir + "/manifest.csv"). Conditions are drawn uniformly
// per utterance from the given list.
struct CorpusSpec {
  int n_speakers = 20;
  int utt_per_speaker = 50;
  std::vector<Condition> conditions{Condition{}};
  uint64_t seed = 1;
  std::string out_dir;
};
std::vector<ManifestRow> build_corpus(const CorpusSpec& spec);

struct Trial {
  std::string enroll_id, test_id;
  int target = 0;  // 1 same speaker, 0 different
};

// Deterministic trial sampling: positives pair distinct utterances of one
// speaker, negatives pair utterances of two speakers. No self-pairs.
std::vector<Trial> build_trials(const std::vector<ManifestRow>& rows, int64_t n_trials,
                                double balance, uint64_t seed);
void write_trials(const std::string& path, const std::vector<Trial>& trials);
std::vector<Trial> read_trials(const std::string& path);

}  // namespace svf

#endif
