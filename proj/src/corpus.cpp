// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/corpus.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "svf/rng.hpp"
#include "svf/vad.hpp"
#include "svf/wav.hpp"

namespace svf {

namespace {

constexpr double kReverbRt60 = 0.23;  // seconds, fixed for the reverb condition

void check_rate(int sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("corpus: sample_rate must be positive");
}

// Two-pole resonator applied in place. r close to 1 gives a narrow peak at f.
void resonate(std::vector<double>& x, double f_hz, double bw_hz, int sample_rate) {
  const double r = std::exp(-M_PI * bw_hz / sample_rate);
  const double c = 2.0 * r * std::cos(2.0 * M_PI * f_hz / sample_rate);
  const double r2 = r * r;
  const double g = (1.0 - r) * std::sqrt(1.0 + r2 - c);  // tames the peak gain
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = g * v + c * y1 - r2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

void one_pole_lowpass(std::vector<double>& x, double a) {
  double y = 0.0;
  for (double& v : x) {
    y = (1.0 - a) * v + a * y;
    v = y;
  }
}

}  // namespace

std::vector<SyntheticSpeaker> make_speakers(int n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_speakers: n must be positive");
  std::vector<SyntheticSpeaker> out;
  out.reserve(static_cast<size_t>(n));
  Rng root(seed);
  int64_t attempt = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++attempt > 1000LL * n)
      throw std::runtime_error("make_speakers: could not place distinct formants");
    Rng r = root.substream("speaker", static_cast<uint64_t>(attempt));
    SyntheticSpeaker s;
    s.id = static_cast<int64_t>(out.size());
    s.f0 = r.uniform(90.0, 250.0);
    s.formant = {r.uniform(300.0, 900.0), r.uniform(900.0, 2300.0), r.uniform(2300.0, 3400.0)};
    s.bandwidth = {r.uniform(60.0, 120.0), r.uniform(80.0, 170.0), r.uniform(100.0, 220.0)};
    s.tilt = r.uniform(0.1, 0.5);
    // Every accepted pair must differ by >= 50 Hz in at least one formant.
    bool ok = true;
    for (const auto& prev : out) {
      double best = 0.0;
      for (int i = 0; i < 3; ++i)
        best = std::max(best, std::abs(prev.formant[i] - s.formant[i]));
      if (best < 50.0) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(s);
  }
  return out;
}

Utterance synth_utterance(const SyntheticSpeaker& spk, double duration_s, uint64_t seed,
                          int sample_rate) {
  check_rate(sample_rate);
  if (!(duration_s >= 0.5))
    throw std::invalid_argument("synth_utterance: duration must be at least 0.5 s");
  const int64_t total = std::llround(duration_s * sample_rate);
  Utterance u;
  u.samples.assign(static_cast<size_t>(total), 0.0);
  u.sample_labels.assign(static_cast<size_t>(total), 0);

  Rng r = Rng(seed).substream("utt");
  int64_t pos = 0;
  // Leading/trailing micro-pauses are skipped so the utterance starts and ends
  // voiced; internal pauses stay exact zeros for clean labels.
  while (pos < total) {
    const int64_t vlen =
        std::min<int64_t>(total - pos, std::llround(r.uniform(0.12, 0.28) * sample_rate));
    // Per-syllable pitch and amplitude modulation.
    const double f0 = std::clamp(spk.f0 * std::exp(0.05 * r.normal()), 70.0, 320.0);
    const double amp = std::exp(0.25 * r.normal());
    const double vib_phase = r.uniform(0.0, 2.0 * M_PI);

    std::vector<double> seg(static_cast<size_t>(vlen), 0.0);
    double phase = r.uniform(0.0, 1.0);  // pulse position within the first period
    for (int64_t i = 0; i < vlen; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double f_inst = f0 * (1.0 + 0.015 * std::sin(2.0 * M_PI * 5.5 * t + vib_phase));
      phase += f_inst / sample_rate;
      if (phase >= 1.0) {
        phase -= 1.0;
        seg[static_cast<size_t>(i)] = 1.0 + 0.1 * r.normal();  // glottal pulse
      }
      seg[static_cast<size_t>(i)] += 0.01 * r.normal();  // aspiration
    }
    for (int i = 0; i < 3; ++i) resonate(seg, spk.formant[i], spk.bandwidth[i], sample_rate);
    one_pole_lowpass(seg, spk.tilt);
    // Raised-cosine attack and release keep syllable edges click-free.
    const int64_t ramp = std::min<int64_t>(vlen / 4, sample_rate / 50);
    for (int64_t i = 0; i < vlen; ++i) {
      double env = 1.0;
      if (i < ramp) env = 0.5 - 0.5 * std::cos(M_PI * (i + 1.0) / (ramp + 1.0));
      if (vlen - 1 - i < ramp)
        env = std::min(env, 0.5 - 0.5 * std::cos(M_PI * (vlen - i) / (ramp + 1.0)));
      u.samples[static_cast<size_t>(pos + i)] = amp * env * seg[static_cast<size_t>(i)];
      u.sample_labels[static_cast<size_t>(pos + i)] = 1;
    }
    pos += vlen;
    if (pos >= total) break;
    const int64_t plen =
        std::min<int64_t>(total - pos, std::llround(r.uniform(0.04, 0.10) * sample_rate));
    pos += plen;  // exact silence, labels already 0
  }
  double peak = 0.0;
  for (double v : u.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : u.samples) v *= 0.30 / peak;
  return u;
}

std::vector<int> frame_labels_from_samples(const std::vector<int>& sample_labels,
                                           const FrameParams& p) {
  const int64_t len = static_cast<int64_t>(sample_labels.size());
  const int64_t nf = frame_count(len, p);
  std::vector<int> out(static_cast<size_t>(nf), 0);
  for (int64_t t = 0; t < nf; ++t) {
    const int64_t lo = t * p.hop;
    const int64_t hi = std::min<int64_t>(len, lo + p.window_len);
    int64_t speech = 0;
    for (int64_t i = lo; i < hi; ++i) speech += sample_labels[static_cast<size_t>(i)];
    out[static_cast<size_t>(t)] = 2 * speech >= hi - lo ? 1 : 0;
  }
  return out;
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "white") return NoiseKind::white;
  if (s == "pink") return NoiseKind::pink;
  if (s == "chirp") return NoiseKind::chirp;
  if (s == "babble") return NoiseKind::babble;
  throw std::invalid_argument("noise_kind_from_string: unknown kind '" + s + "'");
}

std::vector<double> make_noise(NoiseKind kind, int64_t n, uint64_t seed,
                               const std::vector<SyntheticSpeaker>& babble_pool,
                               int sample_rate) {
  check_rate(sample_rate);
  if (n < 1) throw std::invalid_argument("make_noise: n must be positive");
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  Rng r = Rng(seed).substream("noise");
  switch (kind) {
    case NoiseKind::white: {
      for (double& v : out) v = r.normal();
      break;
    }
    case NoiseKind::pink: {
      // Three leaky integrators approximate a 1/f slope across the band.
      double b0 = 0.0, b1 = 0.0, b2 = 0.0;
      for (double& v : out) {
        const double w = r.normal();
        b0 = 0.99765 * b0 + w * 0.0990460;
        b1 = 0.96300 * b1 + w * 0.2965164;
        b2 = 0.57000 * b2 + w * 1.0526913;
        v = 0.2 * (b0 + b1 + b2 + w * 0.1848);
      }
      break;
    }
    case NoiseKind::chirp: {
      // Repeated 1 s linear sweeps, 200 to 4000 Hz.
      const double f_lo = 200.0, f_hi = 4000.0, sweep_s = 1.0;
      for (int64_t i = 0; i < n; ++i) {
        const double tau = std::fmod(static_cast<double>(i) / sample_rate, sweep_s);
        const double ph = f_lo * tau + (f_hi - f_lo) * tau * tau / (2.0 * sweep_s);
        out[static_cast<size_t>(i)] = std::sin(2.0 * M_PI * ph);
      }
      break;
    }
    case NoiseKind::babble: {
      if (babble_pool.size() < 4)
        throw std::invalid_argument("make_noise: babble needs at least 4 pool speakers");
      std::vector<int64_t> idx(babble_pool.size());
      for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);
      r.shuffle(idx);
      const double dur = std::max(0.5, static_cast<double>(n) / sample_rate + 0.05);
      for (int v = 0; v < 4; ++v) {
        const auto& spk = babble_pool[static_cast<size_t>(idx[static_cast<size_t>(v)])];
        Utterance u = synth_utterance(
            spk, dur, r.substream("voice", static_cast<uint64_t>(v)).seed(), sample_rate);
        double p = 0.0;
        for (double s : u.samples) p += s * s;
        const double rms = std::sqrt(p / static_cast<double>(u.samples.size()));
        const double g = rms > 0.0 ? 0.25 / rms : 0.0;
        for (int64_t i = 0; i < n; ++i)
          out[static_cast<size_t>(i)] += g * u.samples[static_cast<size_t>(i)];
      }
      break;
    }
  }
  return out;
}

std::vector<double> add_noise_at_snr(const std::vector<double>& signal,
                                     const std::vector<double>& noise, double snr_db,
                                     const std::vector<int>& speech_labels) {
  if (std::isnan(snr_db)) throw std::invalid_argument("add_noise_at_snr: snr is NaN");
  if (std::isinf(snr_db) && snr_db > 0.0) return signal;  // clean flag
  if (signal.empty()) throw std::invalid_argument("add_noise_at_snr: empty signal");
  if (noise.empty()) throw std::invalid_argument("add_noise_at_snr: empty noise");
  if (speech_labels.size() != signal.size())
    throw std::invalid_argument("add_noise_at_snr: labels must align with the signal");

  // Reference powers over the speech-labeled samples only, so silence padding
  // does not deflate the effective SNR.
  double ps = 0.0, pn = 0.0;
  int64_t cnt = 0;
  const size_t nlen = noise.size();
  for (size_t i = 0; i < signal.size(); ++i) {
    if (speech_labels[i] != 1) continue;
    const double nz = noise[i % nlen];
    ps += signal[i] * signal[i];
    pn += nz * nz;
    ++cnt;
  }
  if (cnt == 0) throw std::invalid_argument("add_noise_at_snr: no speech-labeled samples");
  if (pn <= 0.0) throw std::invalid_argument("add_noise_at_snr: noise is zero over speech");
  const double g = std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));

  std::vector<double> out(signal.size());
  for (size_t i = 0; i < signal.size(); ++i) out[i] = signal[i] + g * noise[i % nlen];
  return out;
}

std::vector<double> make_rir(double rt60_s, uint64_t seed, int sample_rate) {
  check_rate(sample_rate);
  if (!(rt60_s > 0.0)) throw std::invalid_argument("make_rir: rt60 must be positive");
  const int64_t len = std::max<int64_t>(1, std::llround(1.5 * rt60_s * sample_rate));
  std::vector<double> h(static_cast<size_t>(len), 0.0);
  h[0] = 1.0;  // direct path
  Rng r = Rng(seed).substream("rir");
  const double decay = 6.9078 / (rt60_s * sample_rate);  // -60 dB at t = rt60
  for (int64_t i = 1; i < len; ++i)
    h[static_cast<size_t>(i)] =
        0.35 * r.normal() * std::exp(-decay * static_cast<double>(i));
  return h;
}

std::vector<double> apply_reverb(const std::vector<double>& signal, double rt60_s,
                                 uint64_t seed, int sample_rate) {
  if (signal.empty()) throw std::invalid_argument("apply_reverb: empty signal");
  const std::vector<double> h = make_rir(rt60_s, seed, sample_rate);

  // Full convolution (length n + len(h) - 1) via FFT, then trim back to n.
  const size_t full = signal.size() + h.size() - 1;
  size_t fft_n = 1;
  while (fft_n < full) fft_n <<= 1;
  std::vector<std::complex<double>> a(fft_n), b(fft_n), fa(fft_n), fb(fft_n), c(fft_n);
  for (size_t i = 0; i < signal.size(); ++i) a[i] = signal[i];
  for (size_t i = 0; i < h.size(); ++i) b[i] = h[i];
  Eigen::FFT<double> fft;
  fft.fwd(fa, a);
  fft.fwd(fb, b);
  for (size_t i = 0; i < fft_n; ++i) fa[i] *= fb[i];
  fft.inv(c, fa);

  std::vector<double> out(signal.size());
  double pin = 0.0, pout = 0.0;
  for (size_t i = 0; i < signal.size(); ++i) {
    out[i] = c[i].real();
    pin += signal[i] * signal[i];
    pout += out[i] * out[i];
  }
  if (pout > 0.0) {
    const double g = std::sqrt(pin / pout);
    for (double& v : out) v *= g;
  }
  return out;
}

std::string Condition::name() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "S%d-N%d", S, N);
  return buf;
}

Utterance pad_silence_condition(const std::vector<Utterance>& speech, const Condition& cond,
                                uint64_t seed,
                                const std::vector<SyntheticSpeaker>& babble_pool,
                                int sample_rate) {
  check_rate(sample_rate);
  if (speech.empty()) throw std::invalid_argument("pad_silence_condition: no speech given");
  for (const auto& u : speech) {
    if (u.samples.empty() || u.samples.size() != u.sample_labels.size())
      throw std::invalid_argument("pad_silence_condition: malformed utterance");
  }
  if (cond.S < 1) throw std::invalid_argument("pad_silence_condition: S must be positive");
  if (cond.N < 0) throw std::invalid_argument("pad_silence_condition: N must be nonnegative");
  if (cond.distortion != "none" && cond.distortion != "reverb")
    (void)noise_kind_from_string(cond.distortion);  // validates

  // Concatenate (cycling) until S seconds of material, then trim.
  const int64_t target = static_cast<int64_t>(cond.S) * sample_rate;
  Utterance out;
  out.samples.reserve(static_cast<size_t>(target));
  out.sample_labels.reserve(static_cast<size_t>(target));
  size_t k = 0;
  while (static_cast<int64_t>(out.samples.size()) < target) {
    const Utterance& u = speech[k % speech.size()];
    out.samples.insert(out.samples.end(), u.samples.begin(), u.samples.end());
    out.sample_labels.insert(out.sample_labels.end(), u.sample_labels.begin(),
                             u.sample_labels.end());
    ++k;
  }
  out.samples.resize(static_cast<size_t>(target));
  out.sample_labels.resize(static_cast<size_t>(target));

  // N/2 seconds of exact silence on each side.
  const int64_t pad = static_cast<int64_t>(cond.N) * sample_rate / 2;
  out.samples.insert(out.samples.begin(), static_cast<size_t>(pad), 0.0);
  out.samples.insert(out.samples.end(), static_cast<size_t>(pad), 0.0);
  out.sample_labels.insert(out.sample_labels.begin(), static_cast<size_t>(pad), 0);
  out.sample_labels.insert(out.sample_labels.end(), static_cast<size_t>(pad), 0);

  // Distortion acts on the padded whole.
  Rng r(seed);
  if (cond.distortion == "reverb") {
    out.samples =
        apply_reverb(out.samples, kReverbRt60, r.substream("reverb").seed(), sample_rate);
  } else if (cond.distortion != "none") {
    const NoiseKind kind = noise_kind_from_string(cond.distortion);
    const std::vector<double> nz =
        make_noise(kind, static_cast<int64_t>(out.samples.size()),
                   r.substream("mixnoise").seed(), babble_pool, sample_rate);
    out.samples = add_noise_at_snr(out.samples, nz, cond.snr_db, out.sample_labels);
  }
  return out;
}

Utterance make_conditioned_utterance(const SyntheticSpeaker& spk, const Condition& cond,
                                     uint64_t seed,
                                     const std::vector<SyntheticSpeaker>& babble_pool,
                                     int sample_rate) {
  Rng r(seed);
  // Two or more fresh utterances so concatenation is real, then condition.
  std::vector<Utterance> speech;
  double have = 0.0;
  for (uint64_t k = 0; have < static_cast<double>(cond.S) + 0.25; ++k) {
    Rng rs = r.substream("speech", k);
    const double dur = rs.uniform(0.8, 1.6);
    speech.push_back(synth_utterance(spk, dur, rs.substream("synth").seed(), sample_rate));
    have += dur;
    if (speech.size() >= 2 && have >= static_cast<double>(cond.S) + 0.25) break;
  }
  if (speech.size() < 2)
    speech.push_back(synth_utterance(spk, 0.8, r.substream("extra").seed(), sample_rate));
  return pad_silence_condition(speech, cond, r.substream("condition").seed(), babble_pool,
                               sample_rate);
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
  f << "utt_id,speaker_id,wav_path,S,N,snr,distortion\n";
  for (const auto& r : rows)
    f << r.utt_id << ',' << r.speaker_id << ',' << r.wav_path << ',' << r.S << ',' << r.N
      << ',' << r.snr << ',' << r.distortion << '\n';
  if (!f) throw std::runtime_error("write_manifest: write failed for " + path);
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_manifest: cannot open " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("utt_id,", 0) == 0) continue;
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> parts;
    while (std::getline(ss, field, ',')) parts.push_back(field);
    if (parts.size() != 7)
      throw std::runtime_error("read_manifest: malformed row '" + line + "'");
    ManifestRow r;
    r.utt_id = parts[0];
    r.speaker_id = std::stoll(parts[1]);
    r.wav_path = parts[2];
    r.S = std::stoi(parts[3]);
    r.N = std::stoi(parts[4]);
    r.snr = parts[5];
    r.distortion = parts[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ManifestRow> build_corpus(const CorpusSpec& spec) {
  if (spec.n_speakers < 2) throw std::invalid_argument("build_corpus: need at least 2 speakers");
  if (spec.utt_per_speaker < 1)
    throw std::invalid_argument("build_corpus: need at least 1 utterance per speaker");
  if (spec.conditions.empty()) throw std::invalid_argument("build_corpus: no conditions");
  if (spec.out_dir.empty()) throw std::invalid_argument("build_corpus: out_dir not set");
  for (const auto& c : spec.conditions)
    if (c.distortion == "babble" && spec.n_speakers < 5)
      throw std::invalid_argument("build_corpus: babble needs at least 5 speakers");

  std::filesystem::create_directories(spec.out_dir);
  Rng root(spec.seed);
  const std::vector<SyntheticSpeaker> speakers =
      make_speakers(spec.n_speakers, root.substream("speakers").seed());

  std::vector<ManifestRow> rows;
  rows.reserve(static_cast<size_t>(spec.n_speakers) * spec.utt_per_speaker);
  for (int s = 0; s < spec.n_speakers; ++s) {
    // Babble voices come from the other speakers only.
    std::vector<SyntheticSpeaker> pool;
    pool.reserve(speakers.size() - 1);
    for (int j = 0; j < spec.n_speakers; ++j)
      if (j != s) pool.push_back(speakers[static_cast<size_t>(j)]);

    for (int u = 0; u < spec.utt_per_speaker; ++u) {
      Rng ru = root.substream("utt", static_cast<uint64_t>(s), static_cast<uint64_t>(u));
      const Condition& cond = spec.conditions[static_cast<size_t>(
          ru.uniform_int(0, static_cast<int64_t>(spec.conditions.size()) - 1))];
      const Utterance utt = make_conditioned_utterance(
          speakers[static_cast<size_t>(s)], cond, ru.substream("make").seed(), pool);

      char id[32];
      std::snprintf(id, sizeof(id), "s%03d-u%04d", s, u);
      ManifestRow row;
      row.utt_id = id;
      row.speaker_id = s;
      row.wav_path = spec.out_dir + "/" + id + ".wav";
      row.S = cond.S;
      row.N = cond.N;
      if (cond.distortion == "none" || cond.distortion == "reverb" ||
          std::isinf(cond.snr_db)) {
        row.snr = "clean";
      } else {
        char sb[16];
        std::snprintf(sb, sizeof(sb), "%g", cond.snr_db);
        row.snr = sb;
      }
      row.distortion = cond.distortion;

      write_wav(row.wav_path, utt.samples);
      write_frame_labels(row.wav_path + ".labels.csv", row.utt_id,
                         frame_labels_from_samples(utt.sample_labels));
      rows.push_back(std::move(row));
    }
  }
  write_manifest(spec.out_dir + "/manifest.csv", rows);
  return rows;
}

std::vector<Trial> build_trials(const std::vector<ManifestRow>& rows, int64_t n_trials,
                                double balance, uint64_t seed) {
  if (n_trials < 1) throw std::invalid_argument("build_trials: n_trials must be positive");
  if (!(balance >= 0.0 && balance <= 1.0))
    throw std::invalid_argument("build_trials: balance must be in [0, 1]");

  // Group utterance ids by speaker, preserving manifest order.
  std::vector<int64_t> speaker_of;
  std::vector<std::vector<std::string>> utts;
  for (const auto& r : rows) {
    size_t k = 0;
    while (k < speaker_of.size() && speaker_of[k] != r.speaker_id) ++k;
    if (k == speaker_of.size()) {
      speaker_of.push_back(r.speaker_id);
      utts.emplace_back();
    }
    utts[k].push_back(r.utt_id);
  }
  std::vector<size_t> multi;  // speakers usable for positives
  for (size_t k = 0; k < utts.size(); ++k)
    if (utts[k].size() >= 2) multi.push_back(k);
  if (utts.size() < 2 || multi.size() < 2)
    throw std::invalid_argument("build_trials: need at least 2 speakers with 2 utterances each");

  const int64_t n_pos = std::llround(static_cast<double>(n_trials) * balance);
  Rng r = Rng(seed).substream("trials");
  std::vector<Trial> out;
  out.reserve(static_cast<size_t>(n_trials));
  for (int64_t i = 0; i < n_pos; ++i) {
    const auto& ids =
        utts[multi[static_cast<size_t>(r.uniform_int(0, static_cast<int64_t>(multi.size()) - 1))]];
    const int64_t a = r.uniform_int(0, static_cast<int64_t>(ids.size()) - 1);
    int64_t b = r.uniform_int(0, static_cast<int64_t>(ids.size()) - 2);
    if (b >= a) ++b;  // distinct utterances, never a self-pair
    out.push_back({ids[static_cast<size_t>(a)], ids[static_cast<size_t>(b)], 1});
  }
  for (int64_t i = n_pos; i < n_trials; ++i) {
    const int64_t sa = r.uniform_int(0, static_cast<int64_t>(utts.size()) - 1);
    int64_t sb = r.uniform_int(0, static_cast<int64_t>(utts.size()) - 2);
    if (sb >= sa) ++sb;
    const auto& ia = utts[static_cast<size_t>(sa)];
    const auto& ib = utts[static_cast<size_t>(sb)];
    out.push_back({ia[static_cast<size_t>(r.uniform_int(0, static_cast<int64_t>(ia.size()) - 1))],
                   ib[static_cast<size_t>(r.uniform_int(0, static_cast<int64_t>(ib.size()) - 1))],
                   0});
  }
  return out;
}

void write_trials(const std::string& path, const std::vector<Trial>& trials) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_trials: cannot open " + path);
  f << "enroll_id,test_id,target\n";
  for (const auto& t : trials) f << t.enroll_id << ',' << t.test_id << ',' << t.target << '\n';
  if (!f) throw std::runtime_error("write_trials: write failed for " + path);
}

std::vector<Trial> read_trials(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_trials: cannot open " + path);
  std::vector<Trial> out;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("enroll_id,", 0) == 0) continue;
    }
    std::stringstream ss(line);
    std::string e, t, g;
    if (!std::getline(ss, e, ',') || !std::getline(ss, t, ',') || !std::getline(ss, g, ','))
      throw std::runtime_error("read_trials: malformed row '" + line + "'");
    out.push_back({e, t, std::stoi(g)});
  }
  return out;
}

}  // namespace svf
