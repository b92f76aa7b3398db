// Attack layer: grammar, length/measurement contracts, spectral oracles on
// sinusoids, sampler statistics, and gradients of the tape forms.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "helpers.hpp"
#include "syncguard/distortion.hpp"
#include "syncguard/fft.hpp"

using namespace syncguard;

namespace {

AudioClip sine_clip(double hz, double seconds, double amp = 0.5,
                    int rate = kWorkingRate) {
  AudioClip c;
  c.sample_rate = rate;
  long n = lround64(seconds * rate);
  c.samples.resize(size_t(n));
  for (long i = 0; i < n; ++i)
    c.samples[size_t(i)] = float(amp * std::sin(2.0 * M_PI * hz * i / rate));
  return c;
}

AudioClip noise_clip(double seconds, uint64_t seed, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = kWorkingRate;
  long n = lround64(seconds * kWorkingRate);
  c.samples.resize(size_t(n));
  Rng rng(seed);
  for (auto& v : c.samples) v = float(amp * rng.uniform(-1.0, 1.0));
  return c;
}

// Dominant frequency of a mid-signal segment, by windowed zero-padded FFT.
double dominant_hz(const AudioClip& clip, long from = 1024, long seg = 8192) {
  const long n = clip.length();
  if (from + seg > n) {
    seg = n - from;
    if (seg < 256) {
      from = 0;
      seg = n;
    }
  }
  const int nfft = 16384;
  std::vector<double> x(size_t(nfft), 0.0);
  for (long i = 0; i < seg; ++i) {
    double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (seg - 1));
    x[size_t(i)] = w * clip.samples[size_t(from + i)];
  }
  std::vector<double> re(size_t(nfft / 2 + 1)), im(size_t(nfft / 2 + 1));
  rfft(x.data(), nfft, re.data(), im.data());
  double best = -1.0;
  int best_bin = 0;
  for (int h = 2; h < nfft / 2; ++h) {
    double p = re[size_t(h)] * re[size_t(h)] + im[size_t(h)] * im[size_t(h)];
    if (p > best) {
      best = p;
      best_bin = h;
    }
  }
  return double(best_bin) * clip.sample_rate / nfft;
}

double energy(const std::vector<float>& x) {
  double e = 0.0;
  for (float v : x) e += double(v) * v;
  return e;
}

// Energy above a frequency bound, via windowed FFT of the full clip.
double band_energy_above(const AudioClip& clip, double hz) {
  const int nfft = 32768;
  std::vector<double> x(size_t(nfft), 0.0);
  const long n = std::min<long>(clip.length(), nfft);
  for (long i = 0; i < n; ++i) {
    double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (n - 1));
    x[size_t(i)] = w * clip.samples[size_t(i)];
  }
  std::vector<double> re(size_t(nfft / 2 + 1)), im(size_t(nfft / 2 + 1));
  rfft(x.data(), nfft, re.data(), im.data());
  const int lo = int(std::ceil(hz * nfft / clip.sample_rate));
  double e = 0.0;
  for (int h = lo; h <= nfft / 2; ++h)
    e += re[size_t(h)] * re[size_t(h)] + im[size_t(h)] * im[size_t(h)];
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grammar.
// ---------------------------------------------------------------------------

TEST_CASE("attack grammar parses chains and round-trips") {
  auto chain = parse_attack_chain("tsm:rate=0.9|noise:snr=30");
  REQUIRE(chain.size() == 2);
  CHECK(chain[0].kind == AttackKind::tsm);
  CHECK(chain[0].rate == Catch::Approx(0.9));
  CHECK(chain[1].kind == AttackKind::gaussian_noise);
  CHECK(chain[1].snr_db == Catch::Approx(30.0));

  auto crop_spec = parse_attack("crop:fraction=0.2,position=random");
  CHECK(crop_spec.kind == AttackKind::crop);
  CHECK(crop_spec.fraction == Catch::Approx(0.2));
  CHECK(crop_spec.position == CropPosition::random_pos);

  // Aliases map onto the same kinds.
  CHECK(parse_attack("pitch_scale:semitones=2").kind == AttackKind::pitch_scale);
  CHECK(parse_attack("gaussian_noise:snr=20").kind == AttackKind::gaussian_noise);

  // Canonical string form reparses to the same spec.
  std::vector<AttackSpec> specs = {
      AttackSpec::identity(),         AttackSpec::tsm(0.8),
      AttackSpec::pitch_ratio(1.1),   AttackSpec::pitch_semitones(-3.0),
      AttackSpec::resample(0.8),      AttackSpec::noise(20.0),
      AttackSpec::mp3(64),            AttackSpec::amplitude(0.85),
      AttackSpec::requantize(8),      AttackSpec::lowpass(6000.0),
      AttackSpec::crop(0.2, CropPosition::end), AttackSpec::jitter(100),
  };
  for (const auto& s : specs) {
    auto back = parse_attack(s.str());
    CHECK(back.kind == s.kind);
    CHECK(back.str() == s.str());
  }
  CHECK(format_attack_chain(chain) == "tsm:rate=0.9|noise:snr=30");
}

TEST_CASE("attack grammar rejects malformed input") {
  CHECK_THROWS_MATCHES(parse_attack("reverb:mix=0.3"), SgError,
                       sgtest::kind_is(ErrorKind::config));
  CHECK_THROWS_MATCHES(parse_attack("tsm:speed=0.9"), SgError,
                       sgtest::kind_is(ErrorKind::config));
  CHECK_THROWS_MATCHES(parse_attack("tsm:rate=fast"), SgError,
                       sgtest::kind_is(ErrorKind::config));
  CHECK_THROWS_MATCHES(parse_attack("crop:fraction=0.2,position=edge"), SgError,
                       sgtest::kind_is(ErrorKind::config));
  CHECK_THROWS_MATCHES(parse_attack("identity:x=1"), SgError,
                       sgtest::kind_is(ErrorKind::config));
  // Well-formed grammar, out-of-range value.
  CHECK_THROWS_MATCHES(parse_attack("tsm:rate=3"), SgError,
                       sgtest::kind_is(ErrorKind::parameter));
  CHECK_THROWS_MATCHES(parse_attack("noise:snr=99"), SgError,
                       sgtest::kind_is(ErrorKind::parameter));
  CHECK_THROWS_MATCHES(parse_attack("jitter:k=1"), SgError,
                       sgtest::kind_is(ErrorKind::parameter));
}

// ---------------------------------------------------------------------------
// Timewarp geometry and TSM.
// ---------------------------------------------------------------------------

TEST_CASE("timewarp frame counts and identity warp") {
  AudioClip clip = noise_clip(1.0, 77);
  StftConfig cfg;
  SpectroPair sp = stft(clip, cfg);
  REQUIRE(sp.frames == 87);

  CHECK(timewarp_spectrogram(sp, 0.8).frames == 70);
  CHECK(timewarp_spectrogram(sp, 1.0).frames == 87);
  CHECK(timewarp_spectrogram(sp, 2.0).frames == 174);

  // rate 1 reads integer source positions: magnitude passes through.
  SpectroPair same = timewarp_spectrogram(sp, 1.0);
  double max_diff = 0.0;
  for (size_t i = 0; i < sp.magnitude.size(); ++i)
    max_diff = std::max(max_diff, std::abs(same.magnitude[i] - sp.magnitude[i]));
  CHECK(max_diff < 1e-6);

  CHECK_THROWS_MATCHES(timewarp_spectrogram(sp, 0.4), SgError,
                       sgtest::kind_is(ErrorKind::parameter));
  SpectroPair tiny;
  tiny.frames = 1;
  tiny.bins = sp.bins;
  tiny.magnitude.resize(size_t(sp.bins));
  tiny.phase.resize(size_t(sp.bins));
  CHECK_THROWS_MATCHES(timewarp_spectrogram(tiny, 1.2), SgError,
                       sgtest::kind_is(ErrorKind::contract));
}

TEST_CASE("tsm scales duration and preserves pitch") {
  AudioClip clip = sine_clip(440.0, 1.0);
  const long m = clip.length();
  for (double rate : {0.8, 0.9, 1.1, 1.2}) {
    AudioClip out = tsm(clip, rate);
    CHECK(out.length() == lround64(rate * double(m)));
    double peak = dominant_hz(out);
    INFO("rate " << rate << " peak " << peak << " Hz");
    CHECK(std::abs(peak - 440.0) <= 0.01 * 440.0);
  }
}

TEST_CASE("tsm at rate 1 is a faithful round trip") {
  AudioClip clip = sine_clip(440.0, 1.0);
  AudioClip out = tsm(clip, 1.0);
  REQUIRE(out.length() == clip.length());
  CHECK(sgtest::snr_db(clip.samples, out.samples) >= 30.0);
}

TEST_CASE("literal per-frame phase variant keeps the length contract") {
  AudioClip clip = sine_clip(440.0, 1.0);
  AudioClip out = tsm(clip, 0.9, /*literal_phase=*/true);
  CHECK(out.length() == lround64(0.9 * double(clip.length())));
  double peak = dominant_hz(out);
  CHECK(std::abs(peak - 440.0) <= 0.05 * 440.0);
}

// ---------------------------------------------------------------------------
// Pitch scale.
// ---------------------------------------------------------------------------

TEST_CASE("pitch scale shifts frequency and preserves duration") {
  AudioClip clip = sine_clip(440.0, 1.0);
  for (double rho : {0.9, 1.1}) {
    AudioClip out = pitch_scale_ratio(clip, rho);
    CHECK(out.length() == clip.length());
    double peak = dominant_hz(out);
    INFO("rho " << rho << " peak " << peak << " Hz");
    CHECK(std::abs(peak - 440.0 * rho) <= 0.02 * 440.0 * rho);
  }
}

TEST_CASE("semitone parameterization: twelve semitones double the rate") {
  CHECK(AttackSpec::pitch_semitones(12.0).pitch_ratio_value() == 2.0);
  CHECK(AttackSpec::pitch_semitones(0.0).pitch_ratio_value() == 1.0);
  AudioClip clip = sine_clip(440.0, 1.0);
  AudioClip out = pitch_scale(clip, 0.0);
  CHECK(sgtest::snr_db(clip.samples, out.samples) >= 30.0);
}

// ---------------------------------------------------------------------------
// Resample.
// ---------------------------------------------------------------------------

TEST_CASE("resample attack restores length and preserves in-band content") {
  AudioClip clip = sine_clip(440.0, 1.0);
  AudioClip out = apply_attack(clip, AttackSpec::resample(0.8), 1);
  REQUIRE(out.length() == clip.length());
  double peak = dominant_hz(out);
  CHECK(std::abs(peak - 440.0) <= 0.01 * 440.0);

  // One-stage resample changes the length.
  CHECK(resample(clip, 0.8).length() == lround64(0.8 * double(clip.length())));

  // Content above the intermediate Nyquist does not survive a 0.5 round trip.
  AudioClip high = sine_clip(8000.0, 1.0);
  AudioClip wrecked = apply_attack(high, AttackSpec::resample(0.5), 1);
  double drop = 10.0 * std::log10(energy(high.samples) / (energy(wrecked.samples) + 1e-30));
  CHECK(drop >= 20.0);
}

// ---------------------------------------------------------------------------
// Noise.
// ---------------------------------------------------------------------------

TEST_CASE("gaussian noise hits the target SNR") {
  AudioClip clip = sine_clip(440.0, 1.0);
  for (double target : {20.0, 30.0}) {
    AudioClip out = gaussian_noise(clip, target, 7);
    std::vector<float> diff(out.samples.size());
    for (size_t i = 0; i < diff.size(); ++i) diff[i] = out.samples[i] - clip.samples[i];
    double measured = 10.0 * std::log10(energy(clip.samples) / energy(diff));
    CHECK(std::abs(measured - target) <= 0.5);
  }

  AudioClip a = gaussian_noise(clip, 20.0, 7);
  AudioClip b = gaussian_noise(clip, 20.0, 8);
  double d = 0.0;
  for (size_t i = 0; i < a.samples.size(); ++i)
    d = std::max(d, std::abs(double(a.samples[i]) - b.samples[i]));
  CHECK(d > 1e-4);  // different seeds, different noise

  AudioClip near = gaussian_noise(clip, 60.0, 9);
  double md = 0.0;
  for (size_t i = 0; i < near.samples.size(); ++i)
    md = std::max(md, std::abs(double(near.samples[i]) - clip.samples[i]));
  CHECK(md < 5e-3);

  AudioClip silent;
  silent.samples.assign(22050, 0.0f);
  CHECK_THROWS_MATCHES(gaussian_noise(silent, 20.0, 1), SgError,
                       sgtest::kind_is(ErrorKind::degenerate_input));
}

// ---------------------------------------------------------------------------
// Amplitude, requantize, lowpass, mp3 proxy.
// ---------------------------------------------------------------------------

TEST_CASE("amplitude scales exactly") {
  AudioClip clip = sine_clip(440.0, 0.25);
  AudioClip same = amplitude(clip, 1.0);
  CHECK(same.samples == clip.samples);
  AudioClip down = amplitude(clip, 0.85);
  for (size_t i = 0; i < clip.samples.size(); i += 997)
    CHECK(down.samples[i] == Catch::Approx(0.85 * clip.samples[i]).margin(1e-7));
}

TEST_CASE("requantize bounds the error by half a step") {
  AudioClip clip = noise_clip(0.25, 3);
  AudioClip out = requantize(clip, 8);
  double worst = 0.0;
  for (size_t i = 0; i < clip.samples.size(); ++i)
    worst = std::max(worst, std::abs(double(out.samples[i]) - clip.samples[i]));
  CHECK(worst <= std::exp2(-8) + 1e-7);
}

TEST_CASE("lowpass attenuates an out-of-band tone by 40 dB") {
  AudioClip tone = sine_clip(8000.0, 1.0);
  AudioClip out = lowpass(tone, 6000.0);
  REQUIRE(out.length() == tone.length());
  double drop = 10.0 * std::log10(energy(tone.samples) / (energy(out.samples) + 1e-30));
  CHECK(drop >= 40.0);
  // In-band content passes nearly untouched.
  AudioClip low = sine_clip(1000.0, 1.0);
  AudioClip kept = lowpass(low, 6000.0);
  CHECK(sgtest::snr_db(low.samples, kept.samples) >= 40.0);
}

TEST_CASE("mp3 proxy band-limits and quantizes") {
  AudioClip wn = noise_clip(1.0, 11);
  AudioClip out = mp3_proxy(wn, 64);
  REQUIRE(out.length() == wn.length());
  double in_hi = band_energy_above(wn, 9000.0);
  double out_hi = band_energy_above(out, 9000.0);
  CHECK(10.0 * std::log10(in_hi / (out_hi + 1e-30)) >= 10.0);

  AudioClip silent;
  silent.samples.assign(22050, 0.0f);
  AudioClip still = mp3_proxy(silent, 64);
  for (size_t i = 0; i < still.samples.size(); i += 1111) CHECK(still.samples[i] == 0.0f);
}

TEST_CASE("mp3 at evaluation needs the external codec") {
  AudioClip clip = sine_clip(440.0, 0.5);
  if (mp3_codec_available()) {
    AudioClip out = apply_attack(clip, AttackSpec::mp3(64), 1, AttackMode::evaluation);
    CHECK(out.length() == clip.length());
  } else {
    CHECK_THROWS_MATCHES(apply_attack(clip, AttackSpec::mp3(64), 1, AttackMode::evaluation),
                         SgError, sgtest::kind_is(ErrorKind::io));
  }
  // The training path never needs it.
  AudioClip proxied = apply_attack(clip, AttackSpec::mp3(64), 1, AttackMode::training);
  CHECK(proxied.length() == clip.length());
}

// ---------------------------------------------------------------------------
// Crop and jitter.
// ---------------------------------------------------------------------------

TEST_CASE("crop removes a contiguous span at the requested position") {
  AudioClip ramp;
  ramp.samples.resize(22050);
  for (size_t i = 0; i < ramp.samples.size(); ++i) ramp.samples[i] = float(i);

  AudioClip out = crop(ramp, 0.2, CropPosition::begin, 1);
  REQUIRE(out.length() == 22050 - lround64(0.2 * 22050.0));
  CHECK(out.samples.front() == 4410.0f);
  CHECK(out.samples.back() == 22049.0f);

  out = crop(ramp, 0.2, CropPosition::end, 1);
  CHECK(out.samples.front() == 0.0f);
  CHECK(out.samples.back() == float(22050 - 4410 - 1));

  out = crop(ramp, 0.2, CropPosition::middle, 1);
  CHECK(out.length() == 17640);
  // Exactly one jump of 4410 in the kept sequence.
  long jumps = 0;
  for (size_t i = 1; i < out.samples.size(); ++i)
    if (out.samples[i] != out.samples[i - 1] + 1.0f) ++jumps;
  CHECK(jumps == 1);

  AudioClip same = crop(ramp, 0.0, CropPosition::begin, 1);
  CHECK(same.samples == ramp.samples);

  AudioClip r1 = crop(ramp, 0.2, CropPosition::random_pos, 42);
  AudioClip r2 = crop(ramp, 0.2, CropPosition::random_pos, 42);
  CHECK(r1.samples == r2.samples);

  AudioClip tiny;
  tiny.samples.assign(1100, 0.1f);
  CHECK_THROWS_MATCHES(crop(tiny, 0.2, CropPosition::begin, 1), SgError,
                       sgtest::kind_is(ErrorKind::degenerate_output));
}

TEST_CASE("jitter drops one sample per full block") {
  AudioClip clip;
  clip.samples.resize(1000);
  for (size_t i = 0; i < 1000; ++i) clip.samples[i] = float(i);
  AudioClip out = jitter(clip, 100, 5);
  CHECK(out.length() == 990);

  AudioClip four;
  four.samples = {10.0f, 11.0f, 20.0f, 21.0f};
  AudioClip two = jitter(four, 2, 3);
  REQUIRE(two.length() == 2);
  CHECK((two.samples[0] == 10.0f || two.samples[0] == 11.0f));
  CHECK((two.samples[1] == 20.0f || two.samples[1] == 21.0f));

  AudioClip a = jitter(clip, 100, 5);
  AudioClip b = jitter(clip, 100, 5);
  CHECK(a.samples == b.samples);

  // A one-second clip keeps its trailing partial block.
  AudioClip sec = noise_clip(1.0, 2);
  CHECK(jitter(sec, 100, 1).length() == 22050 - 220);
}

// ---------------------------------------------------------------------------
// Chains.
// ---------------------------------------------------------------------------

TEST_CASE("attack chains apply left to right") {
  AudioClip clip = sine_clip(440.0, 1.0);
  auto chain = parse_attack_chain("tsm:rate=0.9|noise:snr=30");
  AudioClip out = apply_attack_chain(clip, chain, 17);
  CHECK(out.length() == lround64(0.9 * double(clip.length())));
  for (float v : out.samples) REQUIRE(std::isfinite(v));
}

// ---------------------------------------------------------------------------
// Sampler.
// ---------------------------------------------------------------------------

TEST_CASE("sampler frequencies converge to the configured levels") {
  AttackSampler sampler = default_training_sampler();
  CHECK(sampler.identity_mass() == Catch::Approx(0.1));

  std::map<AttackKind, long> counts;
  const long draws = 100000;
  for (long i = 0; i < draws; ++i)
    counts[sample_attack(sampler, derive_seed(99, uint64_t(i))).kind]++;

  auto freq = [&](AttackKind k) { return double(counts[k]) / draws; };
  CHECK(std::abs(freq(AttackKind::tsm) - 0.3) <= 0.01);
  CHECK(std::abs(freq(AttackKind::pitch_scale) - 0.3) <= 0.01);
  CHECK(std::abs(freq(AttackKind::gaussian_noise) - 0.1) <= 0.01);
  CHECK(std::abs(freq(AttackKind::mp3) - 0.1) <= 0.01);
  CHECK(std::abs(freq(AttackKind::amplitude) - 0.05) <= 0.01);
  CHECK(std::abs(freq(AttackKind::lowpass) - 0.05) <= 0.01);
  CHECK(std::abs(freq(AttackKind::identity) - 0.1) <= 0.01);
}

TEST_CASE("sampler contracts: mass bound, empty pool, determinism") {
  AttackSampler heavy;
  heavy.pool = {{AttackSpec::tsm(0.8), kLevelHigh},
                {AttackSpec::tsm(0.9), kLevelHigh},
                {AttackSpec::tsm(1.1), kLevelHigh},
                {AttackSpec::tsm(1.2), kLevelHigh}};
  CHECK_THROWS_MATCHES(sample_attack(heavy, 1), SgError,
                       sgtest::kind_is(ErrorKind::config));

  AttackSampler empty;
  for (uint64_t s = 0; s < 32; ++s)
    CHECK(sample_attack(empty, s).kind == AttackKind::identity);

  AttackSampler sampler = default_training_sampler();
  std::vector<AttackKind> seq1, seq2;
  for (uint64_t s = 0; s < 64; ++s) seq1.push_back(sample_attack(sampler, s).kind);
  for (uint64_t s = 0; s < 64; ++s) seq2.push_back(sample_attack(sampler, s).kind);
  CHECK(seq1 == seq2);

  AttackSampler no_id = default_training_sampler();
  no_id.include_identity = false;
  for (uint64_t s = 0; s < 256; ++s)
    CHECK(sample_attack(no_id, s).kind != AttackKind::identity);
}

// ---------------------------------------------------------------------------
// Tape forms: forward agreement with the value forms, and gradients.
// ---------------------------------------------------------------------------

namespace {

// Compare the tape forward pass against the value-level attack.
void check_graph_matches_value(const AttackSpec& spec, uint64_t seed, double tol) {
  AudioClip clip = noise_clip(1.0, 21);
  AudioClip expect = apply_attack(clip, spec, seed, AttackMode::training);

  ad::Tape<double> tape;
  Tensor<double> x({clip.length()});
  for (long i = 0; i < clip.length(); ++i) x[i] = double(clip.samples[size_t(i)]);
  auto out = attack_graph(tape.constant(std::move(x)), spec, seed);

  const long n = std::min<long>(out->val.numel(), expect.length());
  REQUIRE(n > 0);
  double worst = 0.0;
  for (long i = 0; i < n; ++i)
    worst = std::max(worst, std::abs(out->val[i] - double(expect.samples[size_t(i)])));
  INFO(spec.str() << ": max |graph - value| = " << worst << " over " << n);
  CHECK(worst <= tol);
}

// Central finite differences on a coordinate subset.
void fd_check_subset(ad::Tape<double>& tape, const ad::VarPtr<double>& leaf,
                     const std::function<ad::VarPtr<double>(const ad::VarPtr<double>&)>& fn,
                     long stride, double eps, double tol) {
  auto out = fn(leaf);
  // Weighted sum makes the scalar sensitive to every output coordinate.
  Tensor<double> w(out->val.shape);
  Rng rng(4242);
  for (long i = 0; i < w.numel(); ++i) w[i] = rng.uniform(0.5, 1.5);
  auto loss = ad::mean_all(ad::mul(out, tape.constant(std::move(w))));
  tape.backward(loss);

  Tensor<double> base = leaf->val;
  auto eval = [&](const Tensor<double>& point) {
    ad::Tape<double> t2;
    auto l2 = t2.constant(point);
    auto o2 = fn(l2);
    double acc = 0.0;
    Rng rng2(4242);
    for (long i = 0; i < o2->val.numel(); ++i) acc += o2->val[i] * rng2.uniform(0.5, 1.5);
    return acc / double(o2->val.numel());
  };
  for (long i = 0; i < base.numel(); i += stride) {
    Tensor<double> hi = base, lo = base;
    hi[i] += eps;
    lo[i] -= eps;
    double fd = (eval(hi) - eval(lo)) / (2.0 * eps);
    double an = leaf->grad.numel() ? leaf->grad[i] : 0.0;
    double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    INFO("coord " << i << " fd " << fd << " analytic " << an);
    REQUIRE(std::abs(fd - an) / denom <= tol);
  }
}

}  // namespace

TEST_CASE("tape attacks match the value attacks on the forward pass") {
  check_graph_matches_value(AttackSpec::tsm(0.9), 1, 2e-4);
  check_graph_matches_value(AttackSpec::pitch_ratio(1.1), 1, 2e-4);
  check_graph_matches_value(AttackSpec::resample(0.8), 1, 2e-4);
  check_graph_matches_value(AttackSpec::noise(30.0), 5, 2e-4);
  check_graph_matches_value(AttackSpec::amplitude(0.85), 1, 1e-6);
  check_graph_matches_value(AttackSpec::lowpass(6000.0), 1, 2e-4);
  check_graph_matches_value(AttackSpec::crop(0.2, CropPosition::middle), 9, 1e-7);
  check_graph_matches_value(AttackSpec::jitter(100), 9, 1e-7);
}

TEST_CASE("interpolation warp gradients match finite differences") {
  // 2048-sample probe; the warp is linear in the magnitude, so central
  // differences on the magnitude leaf agree with the adjoint.
  AudioClip probe = noise_clip(2048.0 / kWorkingRate, 31, 0.4);
  StftConfig cfg;
  SpectroPair sp = stft(probe, cfg);
  std::vector<double> phase = sp.phase;

  ad::Tape<double> tape;
  Tensor<double> mag({sp.frames, long(sp.bins)});
  for (long i = 0; i < mag.numel(); ++i) mag[i] = sp.magnitude[size_t(i)] + 0.05;
  auto leaf = tape.leaf(std::move(mag));

  const long out_len = lround64(0.9 * 2048.0);
  auto warp = [&](const ad::VarPtr<double>& m) {
    return graph_detail::timewarp_graph(m, phase, 0.9, cfg, false, out_len);
  };
  fd_check_subset(tape, leaf, warp, 101, 1e-6, 1e-3);
}

TEST_CASE("sample-domain attack gradients match finite differences") {
  AudioClip probe = noise_clip(2048.0 / kWorkingRate, 32, 0.4);
  Tensor<double> x0({probe.length()});
  for (long i = 0; i < probe.length(); ++i) x0[i] = double(probe.samples[size_t(i)]);

  SECTION("resample") {
    ad::Tape<double> tape;
    auto leaf = tape.leaf(x0);
    fd_check_subset(tape, leaf,
                    [](const ad::VarPtr<double>& x) {
                      return attack_graph(x, AttackSpec::resample(0.8), 1);
                    },
                    173, 1e-6, 1e-3);
  }
  SECTION("lowpass") {
    ad::Tape<double> tape;
    auto leaf = tape.leaf(x0);
    fd_check_subset(tape, leaf,
                    [](const ad::VarPtr<double>& x) {
                      return attack_graph(x, AttackSpec::lowpass(6000.0), 1);
                    },
                    173, 1e-6, 1e-3);
  }
  SECTION("noise and amplitude") {
    ad::Tape<double> tape;
    auto leaf = tape.leaf(x0);
    fd_check_subset(tape, leaf,
                    [](const ad::VarPtr<double>& x) {
                      return attack_graph(x, AttackSpec::noise(30.0), 7);
                    },
                    211, 1e-6, 1e-3);
    ad::Tape<double> tape2;
    auto leaf2 = tape2.leaf(x0);
    fd_check_subset(tape2, leaf2,
                    [](const ad::VarPtr<double>& x) {
                      return attack_graph(x, AttackSpec::amplitude(0.85), 1);
                    },
                    211, 1e-6, 1e-3);
  }
}

TEST_CASE("straight-through quantization passes gradients unchanged") {
  AudioClip probe = noise_clip(2048.0 / kWorkingRate, 33, 0.4);
  ad::Tape<double> tape;
  Tensor<double> x0({probe.length()});
  for (long i = 0; i < probe.length(); ++i) x0[i] = double(probe.samples[size_t(i)]);
  auto leaf = tape.leaf(std::move(x0));
  auto out = attack_graph(leaf, AttackSpec::requantize(8), 1);
  auto loss = ad::mean_all(out);
  tape.backward(loss);
  REQUIRE(leaf->grad.numel() == leaf->val.numel());
  for (long i = 0; i < leaf->grad.numel(); i += 97)
    CHECK(leaf->grad[i] == Catch::Approx(1.0 / double(leaf->val.numel())).epsilon(1e-12));
}

TEST_CASE("desynchronization tape attacks carry finite nonzero gradients") {
  AudioClip probe = noise_clip(1.0, 34, 0.4);
  for (const AttackSpec& spec :
       {AttackSpec::tsm(0.9), AttackSpec::pitch_ratio(1.1),
        AttackSpec::crop(0.2, CropPosition::middle), AttackSpec::jitter(100),
        AttackSpec::mp3(64)}) {
    ad::Tape<float> tape;
    Tensor<float> x0({probe.length()});
    for (long i = 0; i < probe.length(); ++i) x0[i] = probe.samples[size_t(i)];
    auto leaf = tape.leaf(std::move(x0));
    auto out = attack_graph(leaf, spec, 3);
    auto loss = ad::mse(out, tape.constant(Tensor<float>(out->val.shape)));
    tape.backward(loss);
    REQUIRE(leaf->grad.numel() == leaf->val.numel());
    double norm = 0.0;
    for (long i = 0; i < leaf->grad.numel(); ++i) {
      REQUIRE(std::isfinite(double(leaf->grad[i])));
      norm += double(leaf->grad[i]) * leaf->grad[i];
    }
    INFO(spec.str());
    CHECK(norm > 0.0);
  }
}
