#pragma once

// Audio ingestion, persistence, and dataset segmentation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "syncguard/common.hpp"
#include "syncguard/resample.hpp"
#include "syncguard/wav.hpp"

namespace syncguard {

struct AudioClip {
  std::vector<float> samples;  // mono, nominal range [-1, 1]
  int sample_rate = kWorkingRate;

  long length() const { return long(samples.size()); }
  double seconds() const { return double(samples.size()) / sample_rate; }

  void validate() const {
    require(sample_rate > 0, ErrorKind::contract, "sample_rate must be > 0");
    for (float s : samples)
      require(std::isfinite(s), ErrorKind::contract, "non-finite sample");
  }
};

inline double clip_power(const AudioClip& a) {
  double e = 0.0;
  for (float s : a.samples) e += double(s) * double(s);
  return a.samples.empty() ? 0.0 : e / double(a.samples.size());
}

// Load a PCM16 WAV as mono at target_rate. Multi-channel input is averaged
// to mono before resampling. A file already at target_rate is returned
// as decoded, with no resampling pass.
inline AudioClip load_audio(const std::string& path, int target_rate = kWorkingRate) {
  require(target_rate > 0, ErrorKind::parameter, "target_rate must be > 0");
  WavData w = read_wav(path);
  const size_t frames = w.channels.empty() ? 0 : w.channels[0].size();
  require(frames > 0, ErrorKind::format, "no audio frames in " + path);

  AudioClip clip;
  if (w.channels.size() == 1) {
    clip.samples = std::move(w.channels[0]);
  } else {
    clip.samples.resize(frames);
    const double inv = 1.0 / double(w.channels.size());
    for (size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (const auto& ch : w.channels) acc += double(ch[i]);
      clip.samples[i] = float(acc * inv);
    }
  }
  clip.sample_rate = w.sample_rate;
  if (w.sample_rate != target_rate) {
    long out_len = lround64(double(frames) * target_rate / w.sample_rate);
    clip.samples = resample_to_length(clip.samples, std::max<long>(1, out_len));
    clip.sample_rate = target_rate;
  }
  return clip;
}

inline void save_audio(const AudioClip& clip, const std::string& path) {
  clip.validate();
  write_wav(path, clip.samples, clip.sample_rate);
}

struct DatasetSpec {
  std::string root_path;
  double segment_seconds = 1.0;
  std::string split = "train";  // selects <root>/<split>/ when it exists
  uint64_t shuffle_seed = 0;
};

struct SegmentStats {
  int files_seen = 0;
  int files_skipped = 0;  // shorter than one segment
};

// Segment every WAV under the dataset root into fixed-length clips of
// round(segment_seconds * 22050) samples. Trailing remainders are dropped.
// Order is deterministic under shuffle_seed.
inline std::vector<AudioClip> iterate_segments(const DatasetSpec& spec,
                                               SegmentStats* stats = nullptr) {
  namespace fs = std::filesystem;
  require(spec.segment_seconds >= 0.5, ErrorKind::config,
          "segment_seconds must be >= 0.5");
  fs::path root(spec.root_path);
  if (!spec.split.empty() && fs::is_directory(root / spec.split))
    root /= spec.split;
  require(fs::is_directory(root), ErrorKind::config,
          "dataset root not found: " + root.string());

  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".wav")
      files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::config,
          "no .wav files under " + root.string());

  const long seg_len = lround64(spec.segment_seconds * kWorkingRate);
  SegmentStats local;
  std::vector<AudioClip> segments;
  for (const auto& f : files) {
    AudioClip clip = load_audio(f, kWorkingRate);
    ++local.files_seen;
    const long n = clip.length() / seg_len;
    if (n == 0) {
      ++local.files_skipped;
      warn("file shorter than one segment, skipped: " + f);
      continue;
    }
    for (long i = 0; i < n; ++i) {
      AudioClip seg;
      seg.sample_rate = kWorkingRate;
      seg.samples.assign(clip.samples.begin() + i * seg_len,
                         clip.samples.begin() + (i + 1) * seg_len);
      segments.push_back(std::move(seg));
    }
  }
  Rng rng(derive_seed(spec.shuffle_seed, 0xDA7Aull));
  rng.shuffle(segments);
  if (stats) *stats = local;
  return segments;
}

}  // namespace syncguard
