#pragma once

// Attack suite: the training-time distortion layer and the evaluation-time
// robustness attacks. Every attack exists in two forms that share their
// numeric kernels: a value-level form on AudioClip for evaluation and the
// `attack` CLI, and a tape form on ad::VarPtr for training. Time scale
// modification and pitch scaling run through the spectrogram (interpolated
// magnitude, phase-vocoder phase); gradients flow through the magnitude
// path only, phase is carried as side information.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "syncguard/audio.hpp"
#include "syncguard/autodiff.hpp"
#include "syncguard/common.hpp"
#include "syncguard/resample.hpp"
#include "syncguard/spectral.hpp"
#include "syncguard/stft.hpp"

namespace syncguard {

// ---------------------------------------------------------------------------
// Attack specification.
// ---------------------------------------------------------------------------

enum class AttackKind {
  identity,
  tsm,
  pitch_scale,
  resample,
  gaussian_noise,
  mp3,
  amplitude,
  requantize,
  lowpass,
  crop,
  jitter,
};

enum class CropPosition { begin, middle, end, random_pos };

// One attack with its parameters. The struct is deliberately flat: only the
// fields of the active kind are meaningful, everything else keeps its
// neutral default. Factories below build well-formed specs.
struct AttackSpec {
  AttackKind kind = AttackKind::identity;

  double rate = 1.0;          // tsm: duration multiplier
  double semitones = 0.0;     // pitch_scale: shift in semitones
  double freq_ratio = 0.0;    // pitch_scale: explicit ratio; 0 = derive from semitones
  double ratio = 0.9;         // resample: down-up ratio
  double snr_db = 30.0;       // gaussian_noise: target SNR
  int kbps = 64;              // mp3: bitrate
  double scale = 0.85;        // amplitude: gain
  int bits = 8;               // requantize: word size
  double cutoff_hz = 6000.0;  // lowpass: cutoff
  double fraction = 0.1;      // crop: removed fraction
  CropPosition position = CropPosition::random_pos;  // crop: removal site
  int one_in_k = 100;         // jitter: one sample dropped per k

  static AttackSpec identity() { return {}; }
  static AttackSpec tsm(double rate) {
    AttackSpec s;
    s.kind = AttackKind::tsm;
    s.rate = rate;
    return s;
  }
  static AttackSpec pitch_semitones(double x) {
    AttackSpec s;
    s.kind = AttackKind::pitch_scale;
    s.semitones = x;
    return s;
  }
  static AttackSpec pitch_ratio(double rho) {
    AttackSpec s;
    s.kind = AttackKind::pitch_scale;
    s.freq_ratio = rho;
    return s;
  }
  static AttackSpec resample(double ratio) {
    AttackSpec s;
    s.kind = AttackKind::resample;
    s.ratio = ratio;
    return s;
  }
  static AttackSpec noise(double snr_db) {
    AttackSpec s;
    s.kind = AttackKind::gaussian_noise;
    s.snr_db = snr_db;
    return s;
  }
  static AttackSpec mp3(int kbps) {
    AttackSpec s;
    s.kind = AttackKind::mp3;
    s.kbps = kbps;
    return s;
  }
  static AttackSpec amplitude(double scale) {
    AttackSpec s;
    s.kind = AttackKind::amplitude;
    s.scale = scale;
    return s;
  }
  static AttackSpec requantize(int bits) {
    AttackSpec s;
    s.kind = AttackKind::requantize;
    s.bits = bits;
    return s;
  }
  static AttackSpec lowpass(double cutoff_hz) {
    AttackSpec s;
    s.kind = AttackKind::lowpass;
    s.cutoff_hz = cutoff_hz;
    return s;
  }
  static AttackSpec crop(double fraction, CropPosition pos = CropPosition::random_pos) {
    AttackSpec s;
    s.kind = AttackKind::crop;
    s.fraction = fraction;
    s.position = pos;
    return s;
  }
  static AttackSpec jitter(int one_in_k) {
    AttackSpec s;
    s.kind = AttackKind::jitter;
    s.one_in_k = one_in_k;
    return s;
  }

  // Frequency ratio of a pitch attack; semitone form uses rho = 2^(x/12).
  double pitch_ratio_value() const {
    return freq_ratio > 0.0 ? freq_ratio : std::exp2(semitones / 12.0);
  }

  void validate() const {
    switch (kind) {
      case AttackKind::identity:
        return;
      case AttackKind::tsm:
        require(rate >= 0.5 && rate <= 2.0, ErrorKind::parameter,
                "tsm rate out of [0.5, 2]");
        return;
      case AttackKind::pitch_scale:
        if (freq_ratio > 0.0)
          require(freq_ratio >= 0.5 && freq_ratio <= 2.0, ErrorKind::parameter,
                  "pitch ratio out of [0.5, 2]");
        else
          require(std::abs(semitones) <= 12.0, ErrorKind::parameter,
                  "pitch shift out of [-12, 12] semitones");
        return;
      case AttackKind::resample:
        require(ratio >= 0.25 && ratio <= 4.0, ErrorKind::parameter,
                "resample ratio out of [0.25, 4]");
        return;
      case AttackKind::gaussian_noise:
        require(snr_db >= 0.0 && snr_db <= 60.0, ErrorKind::parameter,
                "noise SNR out of [0, 60] dB");
        return;
      case AttackKind::mp3:
        require(kbps == 64 || kbps == 128, ErrorKind::parameter,
                "mp3 bitrate must be 64 or 128 kbps");
        return;
      case AttackKind::amplitude:
        require(scale > 0.0 && scale <= 2.0, ErrorKind::parameter,
                "amplitude scale out of (0, 2]");
        return;
      case AttackKind::requantize:
        require(bits >= 4 && bits <= 16, ErrorKind::parameter,
                "requantize bits out of [4, 16]");
        return;
      case AttackKind::lowpass:
        require(cutoff_hz > 0.0 && cutoff_hz < kWorkingRate / 2.0, ErrorKind::parameter,
                "lowpass cutoff must be below Nyquist");
        return;
      case AttackKind::crop:
        require(fraction >= 0.0 && fraction <= 0.95, ErrorKind::parameter,
                "crop fraction out of [0, 0.95]");
        return;
      case AttackKind::jitter:
        require(one_in_k >= 2, ErrorKind::parameter, "jitter k must be >= 2");
        return;
    }
    fail(ErrorKind::parameter, "unknown attack kind");
  }

  std::string str() const;
};

// ---------------------------------------------------------------------------
// Attack mini-grammar: `name` or `name:key=value,key=value`, chained with
// `|`, applied left to right. Example: "tsm:rate=0.9|noise:snr=30".
// ---------------------------------------------------------------------------

namespace grammar_detail {

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::config,
          "attack grammar: bad number for " + what + ": '" + s + "'");
  return v;
}

inline int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::config,
          "attack grammar: bad integer for " + what + ": '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace grammar_detail

inline const char* attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::identity: return "identity";
    case AttackKind::tsm: return "tsm";
    case AttackKind::pitch_scale: return "pitch";
    case AttackKind::resample: return "resample";
    case AttackKind::gaussian_noise: return "noise";
    case AttackKind::mp3: return "mp3";
    case AttackKind::amplitude: return "amplitude";
    case AttackKind::requantize: return "requantize";
    case AttackKind::lowpass: return "lowpass";
    case AttackKind::crop: return "crop";
    case AttackKind::jitter: return "jitter";
  }
  return "?";
}

inline const char* crop_position_name(CropPosition p) {
  switch (p) {
    case CropPosition::begin: return "begin";
    case CropPosition::middle: return "middle";
    case CropPosition::end: return "end";
    case CropPosition::random_pos: return "random";
  }
  return "?";
}

inline std::string AttackSpec::str() const {
  using grammar_detail::format_double;
  std::string out = attack_kind_name(kind);
  switch (kind) {
    case AttackKind::identity:
      break;
    case AttackKind::tsm:
      out += ":rate=" + format_double(rate);
      break;
    case AttackKind::pitch_scale:
      if (freq_ratio > 0.0)
        out += ":ratio=" + format_double(freq_ratio);
      else
        out += ":semitones=" + format_double(semitones);
      break;
    case AttackKind::resample:
      out += ":ratio=" + format_double(ratio);
      break;
    case AttackKind::gaussian_noise:
      out += ":snr=" + format_double(snr_db);
      break;
    case AttackKind::mp3:
      out += ":kbps=" + std::to_string(kbps);
      break;
    case AttackKind::amplitude:
      out += ":scale=" + format_double(scale);
      break;
    case AttackKind::requantize:
      out += ":bits=" + std::to_string(bits);
      break;
    case AttackKind::lowpass:
      out += ":cutoff=" + format_double(cutoff_hz);
      break;
    case AttackKind::crop:
      out += ":fraction=" + format_double(fraction);
      out += ",position=";
      out += crop_position_name(position);
      break;
    case AttackKind::jitter:
      out += ":k=" + std::to_string(one_in_k);
      break;
  }
  return out;
}

inline AttackSpec parse_attack(const std::string& token) {
  using namespace grammar_detail;
  std::string t = trim(token);
  require(!t.empty(), ErrorKind::config, "attack grammar: empty attack token");

  std::string name = t;
  std::string params;
  if (size_t colon = t.find(':'); colon != std::string::npos) {
    name = trim(t.substr(0, colon));
    params = t.substr(colon + 1);
  }

  AttackSpec s;
  if (name == "identity") s.kind = AttackKind::identity;
  else if (name == "tsm") s.kind = AttackKind::tsm;
  else if (name == "pitch" || name == "pitch_scale") s.kind = AttackKind::pitch_scale;
  else if (name == "resample") s.kind = AttackKind::resample;
  else if (name == "noise" || name == "gaussian_noise") s.kind = AttackKind::gaussian_noise;
  else if (name == "mp3") s.kind = AttackKind::mp3;
  else if (name == "amplitude") s.kind = AttackKind::amplitude;
  else if (name == "requantize") s.kind = AttackKind::requantize;
  else if (name == "lowpass") s.kind = AttackKind::lowpass;
  else if (name == "crop") s.kind = AttackKind::crop;
  else if (name == "jitter") s.kind = AttackKind::jitter;
  else fail(ErrorKind::config, "attack grammar: unknown attack '" + name + "'");

  if (!params.empty()) {
    for (const std::string& kvs : split(params, ',')) {
      std::string kv = trim(kvs);
      size_t eq = kv.find('=');
      require(eq != std::string::npos, ErrorKind::config,
              "attack grammar: expected key=value, got '" + kv + "'");
      std::string key = trim(kv.substr(0, eq));
      std::string val = trim(kv.substr(eq + 1));
      auto bad_key = [&] {
        fail(ErrorKind::config, "attack grammar: unknown parameter '" + key +
                                    "' for attack '" + name + "'");
      };
      switch (s.kind) {
        case AttackKind::tsm:
          if (key == "rate") s.rate = parse_double(val, key);
          else bad_key();
          break;
        case AttackKind::pitch_scale:
          if (key == "semitones") s.semitones = parse_double(val, key);
          else if (key == "ratio") s.freq_ratio = parse_double(val, key);
          else bad_key();
          break;
        case AttackKind::resample:
          if (key == "ratio") s.ratio = parse_double(val, key);
          else bad_key();
          break;
        case AttackKind::gaussian_noise:
          if (key == "snr") s.snr_db = parse_double(val, key);
          else bad_key();
          break;
        case AttackKind::mp3:
          if (key == "kbps") s.kbps = parse_int(val, key);
          else bad_key();
          break;
        case AttackKind::amplitude:
          if (key == "scale") s.scale = parse_double(val, key);
          else bad_key();
          break;
        case AttackKind::requantize:
          if (key == "bits") s.bits = parse_int(val, key);
          else bad_key();
          break;
        case AttackKind::lowpass:
          if (key == "cutoff") s.cutoff_hz = parse_double(val, key);
          else bad_key();
          break;
        case AttackKind::crop:
          if (key == "fraction") {
            s.fraction = parse_double(val, key);
          } else if (key == "position") {
            if (val == "begin") s.position = CropPosition::begin;
            else if (val == "middle") s.position = CropPosition::middle;
            else if (val == "end") s.position = CropPosition::end;
            else if (val == "random") s.position = CropPosition::random_pos;
            else fail(ErrorKind::config, "attack grammar: bad crop position '" + val + "'");
          } else {
            bad_key();
          }
          break;
        case AttackKind::jitter:
          if (key == "k") s.one_in_k = parse_int(val, key);
          else bad_key();
          break;
        case AttackKind::identity:
          bad_key();
          break;
      }
    }
  }
  s.validate();
  return s;
}

inline std::vector<AttackSpec> parse_attack_chain(const std::string& chain) {
  std::vector<AttackSpec> out;
  for (const std::string& tok : grammar_detail::split(chain, '|')) {
    if (grammar_detail::trim(tok).empty()) continue;
    out.push_back(parse_attack(tok));
  }
  return out;
}

inline std::string format_attack_chain(const std::vector<AttackSpec>& chain) {
  std::string out;
  for (size_t i = 0; i < chain.size(); ++i) {
    if (i) out += "|";
    out += chain[i].str();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Timewarp: linear magnitude interpolation along the frame axis plus
// phase-vocoder phase propagation.
// ---------------------------------------------------------------------------

namespace warp_detail {

// Source positions for each warped frame: output frame t reads input
// position t / rate, held between the last two frames at the tail.
struct WarpMap {
  long frames_out = 0;
  std::vector<long> left;    // left source frame per output frame
  std::vector<double> frac;  // weight toward left + 1
};

inline WarpMap warp_map(long frames_in, double rate) {
  require(rate >= 0.5 && rate <= 2.0, ErrorKind::parameter, "tsm rate out of [0.5, 2]");
  require(frames_in >= 2, ErrorKind::contract, "timewarp needs at least 2 frames");
  WarpMap m;
  m.frames_out = std::max<long>(2, lround64(rate * double(frames_in)));
  m.left.resize(size_t(m.frames_out));
  m.frac.resize(size_t(m.frames_out));
  for (long t = 0; t < m.frames_out; ++t) {
    double u = double(t) / rate;
    long i = long(std::floor(u));
    i = std::clamp<long>(i, 0, frames_in - 2);
    m.left[size_t(t)] = i;
    m.frac[size_t(t)] = std::clamp(u - double(i), 0.0, 1.0);
  }
  return m;
}

// Phase for the warped frames. The default propagates cumulatively: the
// per-bin advance between the source frames around each output step is
// deviation-corrected against the nominal advance 2*pi*h*hop/fft and
// accumulated, which keeps sinusoids at their original frequency. The
// literal per-frame variant instead offsets each source phase by the
// rate-scaled wrapped difference; it is kept for comparison only and
// sounds noticeably rougher at non-integer warps.
inline std::vector<double> propagate_phase(const SpectroPair& sp, const WarpMap& m,
                                           double rate, const StftConfig& cfg,
                                           bool literal_per_frame) {
  const int bins = sp.bins;
  std::vector<double> out(size_t(m.frames_out) * bins);
  if (literal_per_frame) {
    for (long t = 0; t < m.frames_out; ++t) {
      const long i = m.left[size_t(t)];
      for (int h = 0; h < bins; ++h) {
        double d = wrap_phase(sp.ph(i + 1, h) - sp.ph(i, h));
        out[size_t(t) * bins + h] = wrap_phase(sp.ph(i, h) + d * rate);
      }
    }
    return out;
  }
  std::vector<double> acc(static_cast<size_t>(bins));
  for (int h = 0; h < bins; ++h) {
    acc[size_t(h)] = sp.ph(m.left[0], h);
    out[size_t(h)] = wrap_phase(acc[size_t(h)]);
  }
  const double base = 2.0 * M_PI * cfg.hop_length / cfg.fft_size;
  for (long t = 1; t < m.frames_out; ++t) {
    const long i = m.left[size_t(t - 1)];
    for (int h = 0; h < bins; ++h) {
      const double nominal = base * h;
      double adv = nominal + wrap_phase(sp.ph(i + 1, h) - sp.ph(i, h) - nominal);
      acc[size_t(h)] += adv;
      out[size_t(t) * bins + h] = wrap_phase(acc[size_t(h)]);
    }
  }
  return out;
}

}  // namespace warp_detail

inline SpectroPair timewarp_spectrogram(const SpectroPair& sp, double rate,
                                        bool literal_phase = false,
                                        const StftConfig& cfg = {}) {
  auto m = warp_detail::warp_map(sp.frames, rate);
  SpectroPair out;
  out.frames = m.frames_out;
  out.bins = sp.bins;
  out.magnitude.resize(size_t(m.frames_out) * sp.bins);
  for (long t = 0; t < m.frames_out; ++t) {
    const long i = m.left[size_t(t)];
    const double f = m.frac[size_t(t)];
    for (int h = 0; h < sp.bins; ++h)
      out.mag(t, h) = (1.0 - f) * sp.mag(i, h) + f * sp.mag(i + 1, h);
  }
  out.phase = warp_detail::propagate_phase(sp, m, rate, cfg, literal_phase);
  return out;
}

// ---------------------------------------------------------------------------
// Shared numeric kernels (used by both the value and the tape forms).
// ---------------------------------------------------------------------------

namespace attack_detail {

constexpr uint64_t kNoiseTag = 0x6E5Eu;
constexpr uint64_t kCropTag = 0xC709u;
constexpr uint64_t kJitterTag = 0x71BBu;
constexpr uint64_t kSamplerTag = 0x5A3Du;

inline std::vector<double> unit_noise(long n, uint64_t seed) {
  Rng rng(derive_seed(seed, kNoiseTag));
  std::vector<double> u(static_cast<size_t>(n));
  for (auto& v : u) v = rng.gaussian();
  return u;
}

// Gain that makes 10*log10(signal / (g^2 * noise)) hit the target exactly.
inline double noise_gain(double signal_energy, double noise_energy, double snr_db) {
  require(signal_energy > 0.0, ErrorKind::degenerate_input,
          "noise attack needs a nonzero input");
  require(noise_energy > 0.0, ErrorKind::degenerate_input,
          "noise attack drew a zero noise vector");
  return std::sqrt(signal_energy / (std::pow(10.0, snr_db / 10.0) * noise_energy));
}

// Indices kept after removing a contiguous span of round(fraction * n).
inline std::vector<long> crop_keep_indices(long n, double fraction, CropPosition pos,
                                           uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 0.95, ErrorKind::parameter,
          "crop fraction out of [0, 0.95]");
  const long removed = lround64(fraction * double(n));
  const long kept = n - removed;
  require(kept >= StftConfig{}.window_length, ErrorKind::degenerate_output,
          "crop leaves less than one analysis window");
  long start = 0;
  switch (pos) {
    case CropPosition::begin: start = 0; break;
    case CropPosition::middle: start = kept / 2; break;
    case CropPosition::end: start = kept; break;
    case CropPosition::random_pos: {
      Rng rng(derive_seed(seed, kCropTag));
      start = long(rng.below(uint64_t(kept + 1)));
      break;
    }
  }
  std::vector<long> idx(static_cast<size_t>(kept));
  for (long i = 0; i < start; ++i) idx[size_t(i)] = i;
  for (long i = start; i < kept; ++i) idx[size_t(i)] = i + removed;
  return idx;
}

// Indices kept after dropping one uniformly chosen sample from every full
// block of k; a trailing partial block is kept whole.
inline std::vector<long> jitter_keep_indices(long n, int k, uint64_t seed) {
  require(k >= 2, ErrorKind::parameter, "jitter k must be >= 2");
  Rng rng(derive_seed(seed, kJitterTag));
  const long blocks = n / k;
  std::vector<long> idx;
  idx.reserve(size_t(n - blocks));
  for (long b = 0; b < blocks; ++b) {
    const long drop = b * k + long(rng.below(uint64_t(k)));
    for (long i = b * k; i < (b + 1) * k; ++i)
      if (i != drop) idx.push_back(i);
  }
  for (long i = blocks * k; i < n; ++i) idx.push_back(i);
  return idx;
}

// Row windows that reproduce resample_to_length as a sparse linear map.
inline std::shared_ptr<const std::vector<ad::RowWindow>> resample_rows(long in_len,
                                                                       long out_len) {
  require(in_len >= 1 && out_len >= 1, ErrorKind::parameter, "resample: bad lengths");
  auto rows = std::make_shared<std::vector<ad::RowWindow>>(size_t(out_len));
  const double step = double(in_len) / double(out_len);
  const double c = step > 1.0 ? 1.0 / step : 1.0;
  for (long j = 0; j < out_len; ++j) {
    auto tw = sinc_detail::taps_at(double(j) * step, c, in_len);
    (*rows)[size_t(j)] = ad::RowWindow{tw.start, std::move(tw.w)};
  }
  return rows;
}

// Row windows for a zero-padded 'same' FIR pass.
inline std::shared_ptr<const std::vector<ad::RowWindow>> fir_rows(
    const std::vector<double>& h, long len) {
  const long half = long(h.size()) / 2;
  auto rows = std::make_shared<std::vector<ad::RowWindow>>(size_t(len));
  for (long i = 0; i < len; ++i) (*rows)[size_t(i)] = ad::RowWindow{i - half, h};
  return rows;
}

inline double quantize_step(int bits) {
  require(bits >= 4 && bits <= 16, ErrorKind::parameter, "requantize bits out of [4, 16]");
  return std::exp2(1 - bits);
}

inline int mp3_proxy_bits(int kbps) { return kbps >= 128 ? 12 : 10; }

inline double mp3_proxy_cutoff(int sample_rate) { return 0.8 * (sample_rate / 2.0); }

}  // namespace attack_detail

// ---------------------------------------------------------------------------
// Value-level attacks.
// ---------------------------------------------------------------------------

// Stretch or compress duration while preserving pitch. Output length is
// round(rate * M); synthesis can fall up to one hop short of that, the tail
// is zero padded.
inline AudioClip tsm(const AudioClip& clip, double rate, bool literal_phase = false) {
  StftConfig cfg;
  SpectroPair sp = stft(clip, cfg);
  SpectroPair warped = timewarp_spectrogram(sp, rate, literal_phase, cfg);
  const long out_len = lround64(rate * double(clip.length()));
  const long synth = std::min(out_len, warped.frames * long(cfg.hop_length));
  AudioClip out = istft(warped, cfg, std::max<long>(1, synth));
  out.samples.resize(size_t(out_len), 0.0f);
  out.sample_rate = clip.sample_rate;
  return out;
}

// One-stage rate change: output length round(ratio * M), content slowed or
// sped up accordingly (frequencies scale by 1/ratio at playback).
inline AudioClip resample(const AudioClip& clip, double ratio) {
  AudioClip out;
  out.samples = resample_by_ratio(clip.samples, ratio);
  out.sample_rate = clip.sample_rate;
  return out;
}

// Shift pitch by a frequency ratio, duration preserved: timewarp by rho,
// then resample the stretched signal back to the original length.
inline AudioClip pitch_scale_ratio(const AudioClip& clip, double rho,
                                   bool literal_phase = false) {
  require(rho >= 0.5 && rho <= 2.0, ErrorKind::parameter, "pitch ratio out of [0.5, 2]");
  AudioClip stretched = tsm(clip, rho, literal_phase);
  AudioClip out;
  out.samples = resample_to_length(stretched.samples, clip.length());
  out.sample_rate = clip.sample_rate;
  return out;
}

inline AudioClip pitch_scale(const AudioClip& clip, double semitones,
                             bool literal_phase = false) {
  require(std::abs(semitones) <= 12.0, ErrorKind::parameter,
          "pitch shift out of [-12, 12] semitones");
  return pitch_scale_ratio(clip, std::exp2(semitones / 12.0), literal_phase);
}

// Additive white Gaussian noise at an exact measured SNR.
inline AudioClip gaussian_noise(const AudioClip& clip, double snr_db, uint64_t seed) {
  require(snr_db >= 0.0 && snr_db <= 60.0, ErrorKind::parameter,
          "noise SNR out of [0, 60] dB");
  const long n = clip.length();
  auto u = attack_detail::unit_noise(n, seed);
  double se = 0.0, ne = 0.0;
  for (long i = 0; i < n; ++i) se += double(clip.samples[size_t(i)]) * clip.samples[size_t(i)];
  for (long i = 0; i < n; ++i) ne += u[size_t(i)] * u[size_t(i)];
  const double g = attack_detail::noise_gain(se, ne, snr_db);
  AudioClip out = clip;
  for (long i = 0; i < n; ++i)
    out.samples[size_t(i)] = float(double(clip.samples[size_t(i)]) + g * u[size_t(i)]);
  return out;
}

inline AudioClip amplitude(const AudioClip& clip, double scale) {
  require(scale > 0.0 && scale <= 2.0, ErrorKind::parameter, "amplitude scale out of (0, 2]");
  AudioClip out = clip;
  for (auto& v : out.samples) v = float(double(v) * scale);
  return out;
}

inline AudioClip requantize(const AudioClip& clip, int bits) {
  const double step = attack_detail::quantize_step(bits);
  AudioClip out = clip;
  for (auto& v : out.samples) v = float(step * std::round(double(v) / step));
  return out;
}

inline AudioClip lowpass(const AudioClip& clip, double cutoff_hz) {
  auto h = fir_lowpass_kernel(cutoff_hz, clip.sample_rate);
  AudioClip out;
  out.samples = fir_apply(clip.samples, h);
  out.sample_rate = clip.sample_rate;
  return out;
}

inline AudioClip crop(const AudioClip& clip, double fraction, CropPosition pos,
                      uint64_t seed) {
  auto idx = attack_detail::crop_keep_indices(clip.length(), fraction, pos, seed);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out.samples[i] = clip.samples[size_t(idx[i])];
  return out;
}

inline AudioClip jitter(const AudioClip& clip, int one_in_k, uint64_t seed) {
  auto idx = attack_detail::jitter_keep_indices(clip.length(), one_in_k, seed);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out.samples[i] = clip.samples[size_t(idx[i])];
  return out;
}

// ---------------------------------------------------------------------------
// MP3: a real codec round trip when an encoder is on PATH, and a
// differentiable stand-in (band limiting plus requantization) for training.
// ---------------------------------------------------------------------------

inline AudioClip mp3_proxy(const AudioClip& clip, int kbps) {
  AttackSpec::mp3(kbps).validate();
  AudioClip out = lowpass(clip, attack_detail::mp3_proxy_cutoff(clip.sample_rate));
  return requantize(out, attack_detail::mp3_proxy_bits(kbps));
}

inline bool mp3_codec_available() {
  static const bool ok = [] {
    int rc = std::system("lame --version > /dev/null 2>&1");
    return rc == 0;
  }();
  return ok;
}

inline AudioClip mp3_codec(const AudioClip& clip, int kbps) {
  AttackSpec::mp3(kbps).validate();
  require(mp3_codec_available(), ErrorKind::io,
          "mp3 attack needs the `lame` encoder on PATH");
  static std::atomic<uint64_t> counter{0};
  std::ostringstream base;
  base << "/tmp/syncguard_mp3_" << uint64_t(::getpid()) << "_" << counter++;
  const std::string wav_in = base.str() + "_in.wav";
  const std::string mp3_path = base.str() + ".mp3";
  const std::string wav_out = base.str() + "_out.wav";

  save_audio(clip, wav_in);
  const std::string enc = "lame --quiet -b " + std::to_string(kbps) + " \"" + wav_in +
                          "\" \"" + mp3_path + "\"";
  const std::string dec = "lame --quiet --decode \"" + mp3_path + "\" \"" + wav_out + "\"";
  auto cleanup = [&] {
    std::remove(wav_in.c_str());
    std::remove(mp3_path.c_str());
    std::remove(wav_out.c_str());
  };
  if (std::system(enc.c_str()) != 0 || std::system(dec.c_str()) != 0) {
    cleanup();
    fail(ErrorKind::io, "mp3 codec round trip failed");
  }
  AudioClip decoded = load_audio(wav_out, clip.sample_rate);
  cleanup();

  // The codec prepends a decoder delay; realign by picking the offset that
  // best correlates with the input, then trim or pad to the input length.
  const long n = clip.length();
  const long dn = decoded.length();
  const long max_off = std::min<long>(std::max<long>(0, dn - 1), 4096);
  long best = 0;
  double best_score = -1e300;
  const long probe = std::min<long>(n, 8192);
  for (long off = 0; off <= max_off; ++off) {
    double score = 0.0;
    const long lim = std::min(probe, dn - off);
    for (long i = 0; i < lim; ++i)
      score += double(clip.samples[size_t(i)]) * decoded.samples[size_t(i + off)];
    if (score > best_score) {
      best_score = score;
      best = off;
    }
  }
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(size_t(n), 0.0f);
  for (long i = 0; i < n && best + i < dn; ++i)
    out.samples[size_t(i)] = decoded.samples[size_t(best + i)];
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch.
// ---------------------------------------------------------------------------

// training: every attack must stay differentiable, so mp3 uses the proxy.
// evaluation: real transforms only; mp3 requires the external codec.
enum class AttackMode { training, evaluation };

inline AudioClip apply_attack(const AudioClip& clip, const AttackSpec& spec, uint64_t seed,
                              AttackMode mode = AttackMode::evaluation) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::identity:
      return clip;
    case AttackKind::tsm:
      return tsm(clip, spec.rate);
    case AttackKind::pitch_scale:
      return pitch_scale_ratio(clip, spec.pitch_ratio_value());
    case AttackKind::resample: {
      AudioClip down = resample(clip, spec.ratio);
      AudioClip out;
      out.samples = resample_to_length(down.samples, clip.length());
      out.sample_rate = clip.sample_rate;
      return out;
    }
    case AttackKind::gaussian_noise:
      return gaussian_noise(clip, spec.snr_db, seed);
    case AttackKind::mp3:
      return mode == AttackMode::training ? mp3_proxy(clip, spec.kbps)
                                          : mp3_codec(clip, spec.kbps);
    case AttackKind::amplitude:
      return amplitude(clip, spec.scale);
    case AttackKind::requantize:
      return requantize(clip, spec.bits);
    case AttackKind::lowpass:
      return lowpass(clip, spec.cutoff_hz);
    case AttackKind::crop:
      return crop(clip, spec.fraction, spec.position, seed);
    case AttackKind::jitter:
      return jitter(clip, spec.one_in_k, seed);
  }
  fail(ErrorKind::parameter, "unknown attack kind");
}

inline AudioClip apply_attack_chain(const AudioClip& clip,
                                    const std::vector<AttackSpec>& chain, uint64_t seed,
                                    AttackMode mode = AttackMode::evaluation) {
  AudioClip out = clip;
  for (size_t i = 0; i < chain.size(); ++i)
    out = apply_attack(out, chain[i], derive_seed(seed, i), mode);
  return out;
}

// ---------------------------------------------------------------------------
// Tape-level attacks for training. Same kernels, with gradients flowing
// through the magnitude/sample paths; stochastic draws and phase handling
// match the value forms so the two stay numerically aligned.
// ---------------------------------------------------------------------------

namespace graph_detail {

// Interpolate a [T, H] magnitude variable along the frame axis and
// resynthesize with the propagated phase (which enters as a constant).
// Synthesis stops at min(max_len, T' * hop).
template <typename T>
ad::VarPtr<T> timewarp_graph(const ad::VarPtr<T>& mag, const std::vector<double>& phase_in,
                             double rate, const StftConfig& cfg, bool literal_phase,
                             long max_len) {
  require(mag->val.rank() == 2, ErrorKind::contract, "timewarp_graph expects [T, bins]");
  const long frames = mag->val.dim(0);
  const int bins = int(mag->val.dim(1));
  auto m = warp_detail::warp_map(frames, rate);

  // Gather the two bracketing source frames and blend with constant weights.
  std::vector<long> idx0(size_t(m.frames_out) * bins), idx1(idx0.size());
  Tensor<T> w0({long(idx0.size())}), w1({long(idx0.size())});
  for (long t = 0; t < m.frames_out; ++t) {
    const long i = m.left[size_t(t)];
    const double f = m.frac[size_t(t)];
    for (int h = 0; h < bins; ++h) {
      const size_t j = size_t(t) * bins + size_t(h);
      idx0[j] = i * bins + h;
      idx1[j] = (i + 1) * bins + h;
      w0[long(j)] = T(1.0 - f);
      w1[long(j)] = T(f);
    }
  }
  auto flat = ad::reshape(mag, {frames * bins});
  auto g0 = ad::mul(ad::gather(flat, std::move(idx0)), mag->tape->constant(std::move(w0)));
  auto g1 = ad::mul(ad::gather(flat, std::move(idx1)), mag->tape->constant(std::move(w1)));
  auto warped = ad::reshape(ad::add(g0, g1), {m.frames_out, long(bins)});

  SpectroPair carrier;
  carrier.frames = frames;
  carrier.bins = bins;
  carrier.phase = phase_in;
  auto phase = std::make_shared<std::vector<double>>(
      warp_detail::propagate_phase(carrier, m, rate, cfg, literal_phase));

  const long synth = std::max<long>(1, std::min(max_len, m.frames_out * cfg.hop_length));
  return ad::var_istft(warped, std::move(phase), cfg, synth);
}

// var_stft -> timewarp_graph on the magnitude.
template <typename T>
ad::VarPtr<T> tsm_graph(const ad::VarPtr<T>& x, double rate, const StftConfig& cfg,
                        bool literal_phase) {
  const long n = x->val.numel();
  ad::SpecVar<T> sv = ad::var_stft(x, cfg);
  const long out_len = lround64(rate * double(n));
  return timewarp_graph(sv.mag, *sv.phase, rate, cfg, literal_phase, out_len);
}

template <typename T>
ad::VarPtr<T> quantize_st(const ad::VarPtr<T>& x, int bits) {
  const double step = attack_detail::quantize_step(bits);
  Tensor<T> c(x->val.shape);
  for (long i = 0; i < c.numel(); ++i) {
    const double v = double(x->val[i]);
    c[i] = T(step * std::round(v / step) - v);
  }
  return ad::offset_const(x, c);
}

}  // namespace graph_detail

// Differentiable attack on a rank-1 sample variable. Output length follows
// the value-level contract except for tsm/pitch, whose synthesis may stop
// up to one hop short of round(rate * M) (training never pads).
template <typename T>
ad::VarPtr<T> attack_graph(const ad::VarPtr<T>& x, const AttackSpec& spec, uint64_t seed,
                           const StftConfig& cfg = {}, bool literal_phase = false) {
  spec.validate();
  require(x->val.rank() == 1, ErrorKind::contract, "attack_graph expects rank-1 samples");
  const long n = x->val.numel();
  using attack_detail::fir_rows;
  using attack_detail::resample_rows;
  switch (spec.kind) {
    case AttackKind::identity:
      return x;
    case AttackKind::tsm:
      return graph_detail::tsm_graph(x, spec.rate, cfg, literal_phase);
    case AttackKind::pitch_scale: {
      const double rho = spec.pitch_ratio_value();
      require(rho >= 0.5 && rho <= 2.0, ErrorKind::parameter, "pitch ratio out of [0.5, 2]");
      auto stretched = graph_detail::tsm_graph(x, rho, cfg, literal_phase);
      return ad::row_mix(stretched, resample_rows(stretched->val.numel(), n));
    }
    case AttackKind::resample: {
      const long mid = std::max<long>(1, lround64(spec.ratio * double(n)));
      auto down = ad::row_mix(x, resample_rows(n, mid));
      return ad::row_mix(down, resample_rows(mid, n));
    }
    case AttackKind::gaussian_noise: {
      require(spec.snr_db >= 0.0 && spec.snr_db <= 60.0, ErrorKind::parameter,
              "noise SNR out of [0, 60] dB");
      auto u = attack_detail::unit_noise(n, seed);
      double se = 0.0, ne = 0.0;
      for (long i = 0; i < n; ++i) se += double(x->val[i]) * double(x->val[i]);
      for (long i = 0; i < n; ++i) ne += u[size_t(i)] * u[size_t(i)];
      const double g = attack_detail::noise_gain(se, ne, spec.snr_db);
      Tensor<T> c({n});
      for (long i = 0; i < n; ++i) c[i] = T(g * u[size_t(i)]);
      return ad::offset_const(x, c);
    }
    case AttackKind::mp3: {
      AttackSpec::mp3(spec.kbps).validate();
      auto h = fir_lowpass_kernel(attack_detail::mp3_proxy_cutoff(kWorkingRate),
                                  kWorkingRate);
      auto banded = ad::row_mix(x, fir_rows(h, n));
      return graph_detail::quantize_st(banded, attack_detail::mp3_proxy_bits(spec.kbps));
    }
    case AttackKind::amplitude:
      require(spec.scale > 0.0 && spec.scale <= 2.0, ErrorKind::parameter,
              "amplitude scale out of (0, 2]");
      return ad::scale(x, spec.scale);
    case AttackKind::requantize:
      return graph_detail::quantize_st(x, spec.bits);
    case AttackKind::lowpass: {
      auto h = fir_lowpass_kernel(spec.cutoff_hz, kWorkingRate);
      return ad::row_mix(x, fir_rows(h, n));
    }
    case AttackKind::crop:
      return ad::gather(x, attack_detail::crop_keep_indices(n, spec.fraction,
                                                            spec.position, seed));
    case AttackKind::jitter:
      return ad::gather(x, attack_detail::jitter_keep_indices(n, spec.one_in_k, seed));
  }
  fail(ErrorKind::parameter, "unknown attack kind");
}

// ---------------------------------------------------------------------------
// Attack sampler: each pool entry carries a selection probability taken
// from one of three difficulty levels; whatever mass is left goes to the
// identity draw.
// ---------------------------------------------------------------------------

inline constexpr double kLevelHigh = 0.3;
inline constexpr double kLevelMedium = 0.1;
inline constexpr double kLevelLow = 0.05;

struct AttackSampler {
  struct Entry {
    AttackSpec spec;
    double weight = kLevelMedium;
  };

  std::vector<Entry> pool;
  // With the flag cleared the pool weights are renormalized to sum to one
  // and identity is never drawn.
  bool include_identity = true;

  double pool_mass() const {
    double m = 0.0;
    for (const Entry& e : pool) m += e.weight;
    return m;
  }

  double identity_mass() const { return include_identity ? 1.0 - pool_mass() : 0.0; }

  void validate() const {
    for (const Entry& e : pool) {
      require(e.weight > 0.0, ErrorKind::config, "attack weight must be positive");
      e.spec.validate();
    }
    require(pool_mass() <= 1.0 + 1e-9, ErrorKind::config,
            "attack pool selection mass exceeds 1");
    if (!include_identity)
      require(!pool.empty(), ErrorKind::config,
              "attack pool is empty and identity draws are disabled");
  }
};

inline AttackSpec sample_attack(const AttackSampler& sampler, uint64_t seed) {
  sampler.validate();
  if (sampler.pool.empty()) return AttackSpec::identity();
  Rng rng(derive_seed(seed, attack_detail::kSamplerTag));
  const double span = sampler.include_identity ? 1.0 : sampler.pool_mass();
  const double u = rng.uniform() * span;
  double acc = 0.0;
  for (const auto& e : sampler.pool) {
    acc += e.weight;
    if (u < acc) return e.spec;
  }
  return sampler.include_identity ? AttackSpec::identity() : sampler.pool.back().spec;
}

// Stage-2 default: both desynchronization attacks at the high level, noise
// and the codec at medium, gain and band limiting at low. Mass 0.9, so one
// draw in ten is clean.
inline AttackSampler default_training_sampler() {
  AttackSampler s;
  s.pool = {
      {AttackSpec::tsm(0.9), kLevelHigh},
      {AttackSpec::pitch_ratio(1.1), kLevelHigh},
      {AttackSpec::noise(30.0), kLevelMedium},
      {AttackSpec::mp3(64), kLevelMedium},
      {AttackSpec::amplitude(0.85), kLevelLow},
      {AttackSpec::lowpass(6000.0), kLevelLow},
  };
  return s;
}

}  // namespace syncguard
