#pragma once

// Clip collections for training and evaluation: a directory loader for WAV
// corpora and a deterministic synthetic generator used by tests, demos, and
// self-contained benchmark runs. Clip i of a synthetic set depends only on
// (seed, i), so any prefix of a generated set is stable across runs.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "syncguard/audio.hpp"
#include "syncguard/common.hpp"

namespace syncguard {

struct Dataset {
  std::vector<AudioClip> clips;
  std::vector<std::string> names;  // aligned with clips; file stems or synthetic ids

  long size() const { return long(clips.size()); }
  bool empty() const { return clips.empty(); }
};

// Load every .wav under `dir` (non-recursive), sorted by filename so the clip
// order is stable across machines.
inline Dataset load_dataset(const std::string& dir, int target_rate = kWorkingRate) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorKind::io, "not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".wav") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  Dataset ds;
  for (const auto& p : paths) {
    ds.clips.push_back(load_audio(p.string(), target_rate));
    ds.names.push_back(p.stem().string());
  }
  return ds;
}

// One deterministic synthetic clip: a handful of log-spaced partials with
// random amplitudes and phases over a low noise floor, peak-normalized so
// attacks (requantize, noise at a target SNR) operate in a realistic range.
inline AudioClip synthetic_clip(double seconds, uint64_t seed) {
  require(seconds > 0.0, ErrorKind::parameter, "clip length must be positive");
  const long m = lround64(seconds * kWorkingRate);
  Rng rng(seed);
  const int tones = 3 + int(rng.below(3));
  std::vector<double> freq(static_cast<size_t>(tones));
  std::vector<double> amp(static_cast<size_t>(tones));
  std::vector<double> phase(static_cast<size_t>(tones));
  for (int k = 0; k < tones; ++k) {
    freq[size_t(k)] = std::exp(rng.uniform(std::log(150.0), std::log(5000.0)));
    amp[size_t(k)] = rng.uniform(0.08, 0.3);
    phase[size_t(k)] = rng.uniform(0.0, 2.0 * M_PI);
  }
  std::vector<double> raw(size_t(m), 0.0);
  double peak = 0.0;
  for (long i = 0; i < m; ++i) {
    double s = 0.0;
    for (int k = 0; k < tones; ++k)
      s += amp[size_t(k)] *
           std::sin(2.0 * M_PI * freq[size_t(k)] * double(i) / kWorkingRate + phase[size_t(k)]);
    raw[size_t(i)] = s;
    peak = std::max(peak, std::abs(s));
  }
  const double gain = peak > 0.0 ? 0.45 / peak : 0.0;
  AudioClip clip;
  clip.sample_rate = kWorkingRate;
  clip.samples.resize(size_t(m));
  for (long i = 0; i < m; ++i)
    clip.samples[size_t(i)] = float(raw[size_t(i)] * gain + 0.003 * rng.gaussian());
  return clip;
}

inline Dataset synthetic_dataset(int n_clips, double seconds, uint64_t seed) {
  require(n_clips >= 1, ErrorKind::parameter, "need at least one clip");
  Dataset ds;
  for (int i = 0; i < n_clips; ++i) {
    ds.clips.push_back(synthetic_clip(seconds, derive_seed(seed, uint64_t(i))));
    ds.names.push_back("synth" + std::to_string(i));
  }
  return ds;
}

// "dir:<path>", "synth:<n>x<seconds>", or a bare directory path. The synthetic
// form keeps benchmark and training runs reproducible without shipping audio.
inline Dataset resolve_dataset(const std::string& spec, uint64_t seed) {
  if (spec.rfind("synth:", 0) == 0) {
    const std::string body = spec.substr(6);
    const size_t x = body.find('x');
    require(x != std::string::npos, ErrorKind::config,
            "synthetic dataset spec must look like synth:<count>x<seconds>");
    int count = 0;
    double seconds = 0.0;
    try {
      count = std::stoi(body.substr(0, x));
      seconds = std::stod(body.substr(x + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::config, "bad synthetic dataset spec: " + spec);
    }
    return synthetic_dataset(count, seconds, seed);
  }
  if (spec.rfind("dir:", 0) == 0) return load_dataset(spec.substr(4));
  return load_dataset(spec);
}

}  // namespace syncguard
