#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

#include <syncguard/audio.hpp>
#include <syncguard/wav.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace syncguard;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto dir = fs::temp_directory_path() / "syncguard_audio_io_test";
  fs::create_directories(dir);
  return dir;
}

std::vector<float> sine(std::size_t n, double freq, int rate, double amp = 0.5) {
  std::vector<float> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * double(i) / rate));
  return x;
}

}  // namespace

TEST_CASE("pcm16 round trip stays within one quantization step") {
  auto dir = temp_dir();
  auto path = (dir / "roundtrip.wav").string();

  Rng rng(123);
  std::vector<float> x(4096);
  for (auto& v : x) v = static_cast<float>(rng.uniform(-0.99, 0.99));

  write_wav(path, x, kWorkingRate);
  auto clip = load_audio(path, kWorkingRate);

  REQUIRE(clip.samples.size() == x.size());
  REQUIRE(clip.sample_rate == kWorkingRate);

  // Half a quantization step plus decode rounding headroom.
  const double tol = std::pow(2.0, -15) + 1e-7;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, std::abs(double(clip.samples[i]) - double(x[i])));
  REQUIRE(worst <= tol);
}

TEST_CASE("pcm16 write clamps out-of-range samples") {
  auto dir = temp_dir();
  auto path = (dir / "clamp.wav").string();

  std::vector<float> x = {1.5f, -1.5f, 0.0f};
  write_wav(path, x, kWorkingRate);
  auto clip = load_audio(path, kWorkingRate);

  REQUIRE(clip.samples[0] == Catch::Approx(32767.0 / 32768.0));
  REQUIRE(clip.samples[1] == Catch::Approx(-1.0));
  REQUIRE(clip.samples[2] == Catch::Approx(0.0));
}

TEST_CASE("load_audio resamples 44.1 kHz input to the working rate") {
  auto dir = temp_dir();
  auto path = (dir / "rate44k.wav").string();

  const int file_rate = 44100;
  const std::size_t n = 44100;  // one second
  write_wav(path, sine(n, 440.0, file_rate), file_rate);

  auto clip = load_audio(path, kWorkingRate);
  REQUIRE(clip.sample_rate == kWorkingRate);

  const std::size_t expect = std::llround(double(n) * kWorkingRate / file_rate);
  REQUIRE(clip.samples.size() == expect);
  REQUIRE(clip.samples.size() == 22050);

  // Tone should survive the rate change: compare power in a mid-span window.
  double p = 0.0;
  for (std::size_t i = 2000; i < 20000; ++i) p += double(clip.samples[i]) * clip.samples[i];
  p /= 18000.0;
  REQUIRE(p == Catch::Approx(0.125).margin(0.01));  // 0.5^2 / 2
}

TEST_CASE("load_audio averages stereo channels to mono") {
  auto dir = temp_dir();
  auto path = (dir / "stereo.wav").string();

  std::vector<std::vector<float>> ch(2);
  ch[0] = sine(2048, 440.0, kWorkingRate, 0.8);
  ch[1] = std::vector<float>(2048, 0.0f);
  write_wav_channels(path, ch, kWorkingRate);

  auto clip = load_audio(path, kWorkingRate);
  REQUIRE(clip.samples.size() == 2048);
  for (std::size_t i = 0; i < 64; ++i)
    REQUIRE(clip.samples[i] == Catch::Approx(0.5 * ch[0][i]).margin(2e-4));
}

TEST_CASE("load_audio rejects missing and malformed files") {
  auto dir = temp_dir();

  auto missing = (dir / "does_not_exist.wav").string();
  REQUIRE_THROWS_MATCHES(load_audio(missing), SgError,
                         sgtest::kind_is(ErrorKind::io));

  auto garbage = (dir / "garbage.wav").string();
  {
    std::ofstream f(garbage, std::ios::binary);
    f << "not a riff file at all";
  }
  REQUIRE_THROWS_MATCHES(load_audio(garbage), SgError,
                         sgtest::kind_is(ErrorKind::format));
}

TEST_CASE("segment iteration slices fixed windows and drops the remainder") {
  auto dir = temp_dir() / "dataset";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // 2.4 s and 0.7 s at the working rate: 2 + 0 full one-second segments.
  write_wav((dir / "a.wav").string(), sine(std::size_t(2.4 * kWorkingRate), 330.0, kWorkingRate),
            kWorkingRate);
  write_wav((dir / "b.wav").string(), sine(std::size_t(0.7 * kWorkingRate), 330.0, kWorkingRate),
            kWorkingRate);

  DatasetSpec spec;
  spec.root_path = dir.string();
  spec.segment_seconds = 1.0;
  spec.shuffle_seed = 7;

  SegmentStats stats;
  auto segs = iterate_segments(spec, &stats);
  REQUIRE(segs.size() == 2);
  REQUIRE(stats.files_seen == 2);
  REQUIRE(stats.files_skipped == 1);  // b.wav is shorter than one segment
  for (const auto& s : segs) REQUIRE(s.samples.size() == std::size_t(kWorkingRate));
}

TEST_CASE("segment iteration prefers a split subdirectory when present") {
  auto root = temp_dir() / "split_dataset";
  fs::remove_all(root);
  fs::create_directories(root / "train");
  fs::create_directories(root / "valid");

  write_wav((root / "train" / "t.wav").string(), sine(kWorkingRate, 220.0, kWorkingRate),
            kWorkingRate);
  write_wav((root / "valid" / "v.wav").string(), sine(2 * kWorkingRate, 220.0, kWorkingRate),
            kWorkingRate);

  DatasetSpec spec;
  spec.root_path = root.string();
  spec.segment_seconds = 1.0;

  spec.split = "train";
  REQUIRE(iterate_segments(spec).size() == 1);
  spec.split = "valid";
  REQUIRE(iterate_segments(spec).size() == 2);
}

TEST_CASE("empty dataset is a configuration error") {
  auto root = temp_dir() / "empty_dataset";
  fs::remove_all(root);
  fs::create_directories(root);

  DatasetSpec spec;
  spec.root_path = root.string();
  spec.segment_seconds = 1.0;

  REQUIRE_THROWS_MATCHES(iterate_segments(spec), SgError,
                         sgtest::kind_is(ErrorKind::config));
}

TEST_CASE("resample_to_length at unit ratio is the identity") {
  auto x = sine(4096, 1234.0, kWorkingRate);
  auto y = resample_to_length(x, x.size());
  REQUIRE(y.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(y[i] == Catch::Approx(x[i]).margin(1e-6));
}

TEST_CASE("resample_by_ratio length follows round(ratio * n)") {
  auto x = sine(22050, 440.0, kWorkingRate);
  REQUIRE(resample_by_ratio(x, 0.5).size() == 11025);
  REQUIRE(resample_by_ratio(x, 2.0).size() == 44100);
  REQUIRE(resample_by_ratio(x, 16000.0 / 22050.0).size() ==
          std::size_t(std::llround(22050.0 * 16000.0 / 22050.0)));
}

TEST_CASE("downsampling preserves an in-band tone") {
  // 1 kHz tone downsampled to half rate stays well below the new Nyquist.
  auto x = sine(22050, 1000.0, kWorkingRate);
  auto y = resample_by_ratio(x, 0.5);

  // Compare against a directly synthesized half-rate tone away from the edges.
  auto ref = sine(y.size(), 1000.0, kWorkingRate / 2);
  double err = 0.0, sig = 0.0;
  for (std::size_t i = 200; i + 200 < y.size(); ++i) {
    err += (double(y[i]) - ref[i]) * (double(y[i]) - ref[i]);
    sig += double(ref[i]) * ref[i];
  }
  REQUIRE(10.0 * std::log10(sig / err) > 30.0);
}
