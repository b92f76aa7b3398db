#pragma once

// STFT analysis and ISTFT synthesis, the carrier representation shared by
// the codec and the distortion layer. Center reflect padding keeps frame 0
// aligned to sample 0 and T = 1 + floor(M / hop) deterministic.

#include <cmath>
#include <vector>

#include "syncguard/audio.hpp"
#include "syncguard/common.hpp"
#include "syncguard/fft.hpp"

namespace syncguard {

enum class WindowKind { hann };

struct StftConfig {
  int fft_size = 1024;
  int hop_length = 256;
  int window_length = 1024;
  WindowKind window_kind = WindowKind::hann;

  int bins() const { return fft_size / 2 + 1; }

  void validate() const {
    require(is_pow2(fft_size), ErrorKind::config, "fft_size must be a power of two");
    require(window_length <= fft_size, ErrorKind::config,
            "window_length must be <= fft_size");
    require(hop_length > 0 && hop_length * 2 <= window_length, ErrorKind::config,
            "hop_length must give at least 2x overlap");
  }

  long frames_for(long samples) const {
    return 1 + samples / hop_length;
  }

  bool operator==(const StftConfig& o) const {
    return fft_size == o.fft_size && hop_length == o.hop_length &&
           window_length == o.window_length && window_kind == o.window_kind;
  }
};

struct SpectroPair {
  long frames = 0;  // T
  int bins = 0;     // H
  std::vector<double> magnitude;  // [T x H], row-major, nonnegative
  std::vector<double> phase;      // [T x H], in (-pi, pi]

  double& mag(long t, int h) { return magnitude[size_t(t) * bins + h]; }
  double mag(long t, int h) const { return magnitude[size_t(t) * bins + h]; }
  double& ph(long t, int h) { return phase[size_t(t) * bins + h]; }
  double ph(long t, int h) const { return phase[size_t(t) * bins + h]; }
};

namespace stft_detail {

// Periodic window centered in an fft_size buffer (zero padded when
// window_length < fft_size).
inline std::vector<double> analysis_window(const StftConfig& cfg) {
  std::vector<double> w(size_t(cfg.fft_size), 0.0);
  const int off = (cfg.fft_size - cfg.window_length) / 2;
  for (int i = 0; i < cfg.window_length; ++i) {
    double v = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / cfg.window_length));
    w[size_t(off + i)] = v;
  }
  return w;
}

inline long reflect_index(long i, long m) {
  // torch-style reflect (no edge repeat); m >= 2 guaranteed by preconditions
  while (i < 0 || i >= m) {
    if (i < 0) i = -i;
    if (i >= m) i = 2 * m - 2 - i;
  }
  return i;
}

// Absolute source index for (frame t, tap j) after center reflect padding.
inline std::vector<long> frame_index_map(long m, const StftConfig& cfg, long frames) {
  const long pad = cfg.fft_size / 2;
  std::vector<long> idx(size_t(frames) * cfg.fft_size);
  for (long t = 0; t < frames; ++t) {
    const long base = t * cfg.hop_length - pad;
    for (int j = 0; j < cfg.fft_size; ++j)
      idx[size_t(t) * cfg.fft_size + j] = reflect_index(base + j, m);
  }
  return idx;
}

// Per-sample sum of squared synthesis windows over the padded span.
inline std::vector<double> ola_norm(long frames, const StftConfig& cfg,
                                    const std::vector<double>& window) {
  const long padded = (frames - 1) * cfg.hop_length + cfg.fft_size;
  std::vector<double> norm(size_t(padded), 0.0);
  for (long t = 0; t < frames; ++t)
    for (int j = 0; j < cfg.fft_size; ++j)
      norm[size_t(t * cfg.hop_length + j)] += window[size_t(j)] * window[size_t(j)];
  return norm;
}

constexpr double kNormFloor = 1e-11;

}  // namespace stft_detail

inline SpectroPair stft(const AudioClip& clip, const StftConfig& cfg) {
  cfg.validate();
  const long m = clip.length();
  require(m >= cfg.window_length, ErrorKind::input_too_short,
          "clip shorter than one analysis window");
  const long frames = cfg.frames_for(m);
  const int n = cfg.fft_size;
  const int h = cfg.bins();
  const auto window = stft_detail::analysis_window(cfg);
  const auto idx = stft_detail::frame_index_map(m, cfg, frames);

  SpectroPair out;
  out.frames = frames;
  out.bins = h;
  out.magnitude.resize(size_t(frames) * h);
  out.phase.resize(size_t(frames) * h);

  std::vector<double> buf(static_cast<size_t>(n)), re(static_cast<size_t>(h)), im(static_cast<size_t>(h));
  for (long t = 0; t < frames; ++t) {
    for (int j = 0; j < n; ++j)
      buf[size_t(j)] = double(clip.samples[size_t(idx[size_t(t) * n + j])]) *
                       window[size_t(j)];
    rfft(buf.data(), n, re.data(), im.data());
    for (int k = 0; k < h; ++k) {
      out.mag(t, k) = std::hypot(re[size_t(k)], im[size_t(k)]);
      double p = std::atan2(im[size_t(k)], re[size_t(k)]);
      if (p <= -M_PI) p += 2.0 * M_PI;
      out.ph(t, k) = p;
    }
  }
  return out;
}

inline AudioClip istft(const SpectroPair& spec, const StftConfig& cfg,
                       long length_hint) {
  cfg.validate();
  const long frames = spec.frames;
  const int n = cfg.fft_size;
  const int h = cfg.bins();
  require(spec.bins == h && long(spec.magnitude.size()) == frames * h &&
              long(spec.phase.size()) == frames * h,
          ErrorKind::contract, "spectrogram shape inconsistent with config");
  require(length_hint >= 1 && length_hint <= frames * cfg.hop_length,
          ErrorKind::contract, "length_hint out of range");

  const auto window = stft_detail::analysis_window(cfg);
  const auto norm = stft_detail::ola_norm(frames, cfg, window);
  const long padded = long(norm.size());
  std::vector<double> ola(size_t(padded), 0.0);

  std::vector<double> re(static_cast<size_t>(h)), im(static_cast<size_t>(h)), buf(static_cast<size_t>(n));
  for (long t = 0; t < frames; ++t) {
    for (int k = 0; k < h; ++k) {
      re[size_t(k)] = spec.mag(t, k) * std::cos(spec.ph(t, k));
      im[size_t(k)] = spec.mag(t, k) * std::sin(spec.ph(t, k));
    }
    irfft(re.data(), im.data(), n, buf.data());
    const long base = t * cfg.hop_length;
    for (int j = 0; j < n; ++j)
      ola[size_t(base + j)] += buf[size_t(j)] * window[size_t(j)];
  }

  const long pad = n / 2;
  AudioClip out;
  out.sample_rate = kWorkingRate;
  out.samples.resize(size_t(length_hint));
  for (long i = 0; i < length_hint; ++i) {
    double d = std::max(norm[size_t(pad + i)], stft_detail::kNormFloor);
    out.samples[size_t(i)] = float(ola[size_t(pad + i)] / d);
  }
  return out;
}

}  // namespace syncguard
