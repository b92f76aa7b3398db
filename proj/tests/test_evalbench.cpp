// Evaluation bench: metrics, robustness tables, crop study, sliding-window
// detection, capacity sweep, and the efficiency report. Model quality is not
// under test here (untrained codecs score at chance); the contracts are the
// counts, the determinism, and the report shapes.

#include <catch2/catch_amalgamated.hpp>

#include <syncguard/dataset.hpp>
#include <syncguard/evalbench.hpp>
#include <syncguard/model.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "helpers.hpp"

using namespace syncguard;
using sgtest::kind_is;
using Catch::Matchers::WithinAbs;

namespace {

ModelConfig tiny_config(int n_bits = 16, int pattern = 4) {
  ModelConfig cfg;
  cfg.n_bits = n_bits;
  cfg.pattern_len = pattern;
  cfg.c_w = 4;
  cfg.c_v = 4;
  cfg.width = 4;
  cfg.c_dec = 4;
  cfg.enc_blocks = 2;
  cfg.dec_blocks = 2;
  cfg.disc_width = 4;
  cfg.init_seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("bit accuracy counts matches and honors complement symmetry") {
  Message a, b;
  a.bits = {1, 0, 1, 1, 0, 0, 1, 0};
  b.bits = a.bits;
  CHECK(bit_accuracy(a, b) == 1.0);
  for (auto& bit : b.bits) bit = uint8_t(1 - bit);
  CHECK(bit_accuracy(a, b) == 0.0);
  b.bits = a.bits;
  b.bits[0] = uint8_t(1 - b.bits[0]);
  b.bits[1] = uint8_t(1 - b.bits[1]);
  CHECK_THAT(bit_accuracy(a, b), WithinAbs(0.75, 1e-12));

  // Complementing BOTH messages flips every comparison twice.
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Message x = Message::random_uniform(16, rng);
    Message y = Message::random_uniform(16, rng);
    const double before = bit_accuracy(x, y);
    for (auto& bit : x.bits) bit = uint8_t(1 - bit);
    for (auto& bit : y.bits) bit = uint8_t(1 - bit);
    CHECK(bit_accuracy(x, y) == before);
  }

  Message longer;
  longer.bits = {1, 0, 1};
  CHECK_THROWS_MATCHES(bit_accuracy(a, longer), SgError, kind_is(ErrorKind::contract));
  Message empty1, empty2;
  CHECK_THROWS_MATCHES(bit_accuracy(empty1, empty2), SgError, kind_is(ErrorKind::contract));
}

TEST_CASE("bit accuracy of independent random messages sits at chance") {
  Rng rng(1234);
  double sum = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    Message x = Message::random_uniform(16, rng);
    Message y = Message::random_uniform(16, rng);
    sum += bit_accuracy(x, y);
  }
  CHECK_THAT(sum / trials, WithinAbs(0.5, 0.02));
}

TEST_CASE("snr matches the analytic scaled-noise case and caps at identity") {
  AudioClip a = synthetic_clip(0.5, 7);
  AudioClip scaled = a;
  for (auto& s : scaled.samples) s += s / 10.0f;
  CHECK_THAT(snr_db(a, scaled), WithinAbs(20.0, 1e-3));

  CHECK(snr_db(a, a) == kSnrCapDb);

  AudioClip silent;
  silent.samples.assign(1000, 0.0f);
  CHECK_THROWS_MATCHES(snr_db(silent, a), SgError, kind_is(ErrorKind::contract));
  AudioClip silent_match = silent;
  CHECK_THROWS_MATCHES(snr_db(silent, silent_match), SgError,
                       kind_is(ErrorKind::degenerate_input));
}

TEST_CASE("pesq hook delegates to an external tool and never fabricates") {
  AudioClip a = synthetic_clip(0.3, 11);
  AudioClip b = a;
  ::unsetenv(kPesqEnvVar);
  CHECK_FALSE(pesq_hook(a, b).has_value());

  // A stand-in evaluator that prints a trailing score, as the P.862 binary does.
  const std::string dir = std::filesystem::temp_directory_path().string();
  const std::string good = dir + "/sg_fake_pesq_ok.sh";
  {
    std::ofstream out(good);
    out << "#!/bin/sh\necho \"Prediction (MOS-LQO) = 3.214\"\n";
  }
  std::filesystem::permissions(good, std::filesystem::perms::owner_all);
  auto score = pesq_hook(a, b, good);
  REQUIRE(score.has_value());
  CHECK_THAT(*score, WithinAbs(3.214, 1e-9));

  const std::string bad = dir + "/sg_fake_pesq_fail.sh";
  {
    std::ofstream out(bad);
    out << "#!/bin/sh\necho broken\nexit 1\n";
  }
  std::filesystem::permissions(bad, std::filesystem::perms::owner_all);
  CHECK_FALSE(pesq_hook(a, b, bad).has_value());

  std::filesystem::remove(good);
  std::filesystem::remove(bad);
}

TEST_CASE("robustness table carries every attack with counts and reproduces") {
  Codec<float> codec(tiny_config());
  Dataset data = synthetic_dataset(6, 0.6, 2024);
  const std::vector<AttackSpec> attacks = {AttackSpec::identity(), AttackSpec::noise(30.0),
                                           AttackSpec::crop(0.2), AttackSpec::mp3(64)};

  EvalReport report = robustness_table(codec, data, attacks, 555);
  REQUIRE(report.rows.size() == attacks.size());
  CHECK(report.n_clips == 6);
  CHECK(report.snr_db > 0.0);

  for (size_t j = 0; j < 3; ++j) {
    const AttackResult& row = report.rows[j];
    CHECK_FALSE(row.skipped);
    CHECK(row.n_clips == 6);
    CHECK(row.n_skipped == 0);
    CHECK(row.acc >= 0.0);
    CHECK(row.acc <= 1.0);
  }
  const AttackResult& mp3_row = report.rows[3];
  if (mp3_codec_available()) {
    CHECK_FALSE(mp3_row.skipped);
    CHECK(mp3_row.n_clips == 6);
  } else {
    CHECK(mp3_row.skipped);
    CHECK(mp3_row.n_skipped == 6);
    CHECK_FALSE(mp3_row.note.empty());
  }

  // Deterministic under (seed, dataset, checkpoint).
  EvalReport again = robustness_table(codec, data, attacks, 555);
  REQUIRE(again.rows.size() == report.rows.size());
  CHECK(again.snr_db == report.snr_db);
  for (size_t j = 0; j < report.rows.size(); ++j) {
    CHECK(again.rows[j].acc == report.rows[j].acc);
    CHECK(again.rows[j].n_clips == report.rows[j].n_clips);
  }

  const std::string text = render_report(report);
  CHECK(text.find("PESQ: n/a") != std::string::npos);
  for (const auto& atk : attacks) CHECK(text.find(atk.str()) != std::string::npos);

  // Machine-readable form: one meta record then one record per row.
  const std::string jsonl = report_jsonl(report);
  std::vector<nlohmann::json> lines;
  size_t pos = 0;
  while (pos < jsonl.size()) {
    const size_t eol = jsonl.find('\n', pos);
    lines.push_back(nlohmann::json::parse(jsonl.substr(pos, eol - pos)));
    pos = eol + 1;
  }
  REQUIRE(lines.size() == 1 + attacks.size());
  CHECK(lines[0].at("record") == "meta");
  CHECK(lines[0].at("pesq").is_null());
  for (size_t j = 0; j < attacks.size(); ++j) {
    CHECK(lines[j + 1].at("record") == "attack");
    CHECK(lines[j + 1].at("attack").get<std::string>() == attacks[j].str());
    CHECK(lines[j + 1].at("n_clips").get<long>() + lines[j + 1].at("n_skipped").get<long>() ==
          6);
  }
}

TEST_CASE("clips degenerate under an attack are skipped with a count") {
  Codec<float> codec(tiny_config());
  Dataset data;
  data.clips.push_back(synthetic_clip(0.6, 1));
  data.clips.push_back(synthetic_clip(0.07, 2));  // 1543 samples
  data.clips.push_back(synthetic_clip(0.6, 3));
  data.names = {"a", "short", "b"};

  // Cropping half of the short clip leaves under one analysis window.
  EvalReport report = robustness_table(
      codec, data, {AttackSpec::identity(), AttackSpec::crop(0.5)}, 99);
  CHECK(report.rows[0].n_clips == 3);
  CHECK(report.rows[0].n_skipped == 0);
  CHECK(report.rows[1].n_clips == 2);
  CHECK(report.rows[1].n_skipped == 1);
  CHECK_FALSE(report.rows[1].skipped);
}

TEST_CASE("untrained model scores at chance over a wide clip set") {
  Codec<float> codec(tiny_config());
  Dataset data = synthetic_dataset(50, 0.5, 31337);
  EvalReport report = robustness_table(codec, data, {AttackSpec::identity()}, 777);
  REQUIRE(report.rows[0].n_clips == 50);
  CHECK(report.rows[0].acc >= 0.4);
  CHECK(report.rows[0].acc <= 0.6);
}

TEST_CASE("crop position study covers the grid and meets the identity row at zero") {
  Codec<float> codec(tiny_config());
  Dataset data = synthetic_dataset(4, 0.6, 88);
  const std::vector<double> fractions = {0.0, 0.2};
  const std::vector<CropPosition> positions = {CropPosition::begin, CropPosition::middle,
                                               CropPosition::end};

  auto rows = crop_position_study(codec, data, fractions, positions, 321);
  REQUIRE(rows.size() == 6);
  for (const auto& row : rows) {
    CHECK(row.n_clips == 4);
    CHECK(row.n_skipped == 0);
  }

  EvalReport identity = robustness_table(codec, data, {AttackSpec::identity()}, 321);
  for (const auto& row : rows)
    if (row.fraction == 0.0) CHECK(row.acc == identity.rows[0].acc);

  const std::string csv = crop_study_csv(rows);
  CHECK(csv.rfind("position,fraction,acc,n_clips,n_skipped\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  CHECK_THROWS_MATCHES(crop_position_study(codec, data, {0.9}, positions, 1), SgError,
                       kind_is(ErrorKind::parameter));
}

TEST_CASE("sliding extraction follows the window arithmetic") {
  Codec<float> codec(tiny_config());
  AudioClip clip = synthetic_clip(3.0, 5);

  SlidingResult result = sliding_extract(codec, clip, 1.0, 0.05);
  REQUIRE(long(result.windows.size()) == 41);
  CHECK(result.windows.front().offset_samples == 0);
  CHECK(result.windows.back().offset_samples == 2 * kWorkingRate);
  for (const auto& w : result.windows) CHECK(w.bits.size() == 16);

  long first = -1;
  for (size_t k = 0; k < result.windows.size(); ++k)
    if (result.windows[k].pattern_ok) {
      first = long(k);
      break;
    }
  CHECK(result.first_valid == first);

  AudioClip shorter = synthetic_clip(0.5, 5);
  CHECK_THROWS_MATCHES(sliding_extract(codec, shorter, 1.0, 0.05), SgError,
                       kind_is(ErrorKind::input_too_short));
}

TEST_CASE("offset trace is symmetric around the embed position") {
  Codec<float> codec(tiny_config());
  AudioClip host = synthetic_clip(2.0, 17);
  Rng rng(3);
  Message msg = Message::random(16, 4, rng);

  LocalizationTrace trace = offset_trace(codec, host, 0.5, msg, 1.0, 0.1, 0.3);
  REQUIRE(trace.offsets.size() == 7);
  for (size_t i = 0; i < trace.offsets.size(); ++i) {
    CHECK_THAT(trace.offsets[i], WithinAbs(-trace.offsets[trace.offsets.size() - 1 - i], 1e-12));
    CHECK(trace.acc_at_offset[i] >= 0.0);
    CHECK(trace.acc_at_offset[i] <= 1.0);
  }
  CHECK(trace.offsets[3] == 0.0);

  const std::string csv = trace_csv(trace);
  CHECK(csv.rfind("offset_seconds,acc\n", 0) == 0);

  // Not enough host on the left of the watermark for the requested offsets.
  CHECK_THROWS_MATCHES(offset_trace(codec, host, 0.1, msg, 1.0, 0.1, 0.3), SgError,
                       kind_is(ErrorKind::parameter));
}

TEST_CASE("capacity sweep runs every configured message size") {
  Dataset data = synthetic_dataset(3, 0.5, 404);
  Codec<float> m32(tiny_config(32, 8)), m64(tiny_config(64, 8)), m96(tiny_config(96, 8));
  auto rows = capacity_sweep({&m32, &m64, &m96}, data, 11);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].n_bits == 32);
  CHECK(rows[1].n_bits == 64);
  CHECK(rows[2].n_bits == 96);
  for (const auto& r : rows) {
    CHECK(r.n_clips == 3);
    CHECK(r.acc >= 0.0);
    CHECK(r.acc <= 1.0);
    CHECK(r.snr_db > 0.0);
  }
  CHECK(capacity_csv(rows).rfind("n_bits,acc,snr_db,n_clips\n", 0) == 0);
}

TEST_CASE("efficiency report matches the analytic parameter sum") {
  const ModelConfig cfg = tiny_config();
  Codec<float> codec(cfg);

  // Independent layer-by-layer arithmetic for the tiny configuration.
  const long h = cfg.stft.bins();
  const long w = cfg.width, cw = cfg.c_w, cv = cfg.c_v;
  long enc = cw * h * cfg.n_bits + cw * h;     // expand
  enc += cv * 1 * 9 + cv;                      // carrier
  enc += w * (cv + 1 + cw) * 1 + w;            // in_proj
  enc += 2 * (w * w * 9 + w);                  // block 0 (residual pair)
  enc += 2 * (w * (w + 1 + cw) * 9 + w);       // block 1 (gated pair)
  enc += 1 * w * 9 + 1;                        // head
  long dec = cv * 1 * 9 + cv;                  // carrier
  dec += w * cv * 1 + w;                       // in_proj
  dec += 2 * (w * w * 9 + w);                  // block 0
  dec += 2 * (w * (w + 1) * 9 + w);            // block 1
  dec += cfg.c_dec * w * 9 + cfg.c_dec;        // head
  dec += cfg.n_bits * cfg.c_dec * h + cfg.n_bits;  // fc
  const long dw = cfg.disc_width;
  const long chs[6] = {1, dw, 2 * dw, 4 * dw, 4 * dw, 4 * dw};
  long disc = 0;
  for (int l = 0; l < 5; ++l) disc += chs[l + 1] * chs[l] * 15 + chs[l + 1];
  disc += 1 * 4 * dw + 1;  // fc

  EfficiencyReport rep = efficiency_report(codec, 0.5, 20);
  CHECK(rep.params_codec == enc + dec);
  CHECK(rep.params_disc == disc);
  CHECK(rep.flops_embed > 0.0);
  CHECK(rep.flops_extract > 0.0);
  CHECK(rep.embed_ms_per_audio_second > 0.0);
  CHECK(rep.extract_ms_per_audio_second > 0.0);
  CHECK(rep.runs == 20);

  const std::string text = render_efficiency(rep);
  CHECK(text.find("parameters") != std::string::npos);

  CHECK_THROWS_MATCHES(efficiency_report(codec, 0.5, 19), SgError,
                       kind_is(ErrorKind::parameter));
}

TEST_CASE("dataset loaders agree on order and the synthetic recipe is stable") {
  Dataset ds = synthetic_dataset(4, 0.3, 5150);
  REQUIRE(ds.size() == 4);
  Dataset again = synthetic_dataset(4, 0.3, 5150);
  for (long i = 0; i < 4; ++i) CHECK(ds.clips[size_t(i)].samples == again.clips[size_t(i)].samples);
  // A prefix of a larger set matches: clip i depends only on (seed, i).
  Dataset more = synthetic_dataset(6, 0.3, 5150);
  CHECK(more.clips[2].samples == ds.clips[2].samples);

  const std::string dir =
      std::filesystem::temp_directory_path().string() + "/sg_dataset_test";
  std::filesystem::create_directories(dir);
  save_audio(ds.clips[1], dir + "/b.wav");
  save_audio(ds.clips[0], dir + "/a.wav");
  Dataset loaded = load_dataset(dir);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded.names[0] == "a");
  CHECK(loaded.names[1] == "b");
  CHECK(loaded.clips[0].length() == ds.clips[0].length());

  Dataset resolved = resolve_dataset("synth:3x0.3", 5150);
  CHECK(resolved.size() == 3);
  CHECK(resolved.clips[0].samples == ds.clips[0].samples);
  CHECK_THROWS_MATCHES(resolve_dataset("synth:banana", 1), SgError,
                       kind_is(ErrorKind::config));
  std::filesystem::remove_all(dir);
}
