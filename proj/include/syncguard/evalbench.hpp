#pragma once

// Evaluation bench: scalar metrics (bit accuracy, SNR, optional external
// PESQ), robustness tables over attack grids, the crop-position study,
// sliding-window detection and offset traces, capacity sweep, and the
// parameter/FLOP/timing report. Every row carries its clip and skip counts;
// nothing is silently omitted from a report.
//
// All loops are deterministic under (seed, dataset, checkpoint): messages and
// attack randomness are derived per (clip, row) from the run seed. Clip loops
// are embarrassingly parallel but run single threaded so reports reproduce
// bit-for-bit.

#include <json.hpp>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "syncguard/audio.hpp"
#include "syncguard/common.hpp"
#include "syncguard/dataset.hpp"
#include "syncguard/distortion.hpp"
#include "syncguard/model.hpp"
#include "syncguard/resample.hpp"

namespace syncguard {

// ---------------------------------------------------------------------------
// Scalar metrics.
// ---------------------------------------------------------------------------

// Reported ceiling for SNR; identical signals would be +inf, which no report
// format survives, so the value is capped here.
constexpr double kSnrCapDb = 150.0;

inline double bit_accuracy(const std::vector<uint8_t>& recovered,
                           const std::vector<uint8_t>& original) {
  require(recovered.size() == original.size(), ErrorKind::contract,
          "bit_accuracy: length mismatch");
  require(!original.empty(), ErrorKind::contract, "bit_accuracy: empty message");
  long hits = 0;
  for (size_t i = 0; i < original.size(); ++i)
    if (recovered[i] == original[i]) ++hits;
  return double(hits) / double(original.size());
}

inline double bit_accuracy(const Message& recovered, const Message& original) {
  return bit_accuracy(recovered.bits, original.bits);
}

// 10*log10(sum a^2 / sum (a_w - a)^2), capped at kSnrCapDb.
inline double snr_db(const AudioClip& reference, const AudioClip& processed) {
  require(reference.length() == processed.length(), ErrorKind::contract,
          "snr_db: length mismatch");
  double se = 0.0, ne = 0.0;
  for (long i = 0; i < reference.length(); ++i) {
    const double a = double(reference.samples[size_t(i)]);
    const double d = double(processed.samples[size_t(i)]) - a;
    se += a * a;
    ne += d * d;
  }
  require(se > 0.0, ErrorKind::degenerate_input, "snr_db: zero-energy reference");
  if (ne <= 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, db_from_power_ratio(se, ne));
}

// ---------------------------------------------------------------------------
// PESQ delegation. The metric itself is a standardized external algorithm;
// this hook resamples both signals to 16 kHz, hands them to the configured
// tool as `<tool> <ref.wav> <deg.wav>`, and takes the last number the tool
// prints. No tool (or any failure) yields nullopt -- a score is never made up.
// ---------------------------------------------------------------------------

constexpr const char* kPesqEnvVar = "SYNCGUARD_PESQ_TOOL";

namespace eval_detail {

inline AudioClip to_16k(const AudioClip& clip) {
  AudioClip out;
  out.sample_rate = 16000;
  const long n = lround64(double(clip.length()) * 16000.0 / double(clip.sample_rate));
  out.samples = resample_to_length(clip.samples, std::max(1L, n));
  return out;
}

inline std::optional<double> last_number_in(const std::string& text) {
  std::optional<double> found;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!(c == '-' || c == '.' || (c >= '0' && c <= '9'))) continue;
    const char* begin = text.c_str() + i;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin && std::isfinite(v)) {
      found = v;
      i += size_t(end - begin) - 1;
    }
  }
  return found;
}

}  // namespace eval_detail

inline std::optional<double> pesq_hook(const AudioClip& reference, const AudioClip& processed,
                                       std::string tool = {}) {
  if (tool.empty()) {
    const char* env = std::getenv(kPesqEnvVar);
    if (env) tool = env;
  }
  if (tool.empty()) return std::nullopt;

  static std::atomic<uint64_t> counter{0};
  const std::string base = "/tmp/syncguard_pesq_" + std::to_string(::getpid()) + "_" +
                           std::to_string(counter.fetch_add(1));
  const std::string ref_path = base + "_ref.wav", deg_path = base + "_deg.wav";
  std::optional<double> score;
  try {
    save_audio(eval_detail::to_16k(reference), ref_path);
    save_audio(eval_detail::to_16k(processed), deg_path);
    const std::string cmd = tool + " " + ref_path + " " + deg_path + " 2>/dev/null";
    if (FILE* pipe = ::popen(cmd.c_str(), "r")) {
      std::string out;
      char buf[512];
      while (size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
      if (::pclose(pipe) == 0) score = eval_detail::last_number_in(out);
    }
  } catch (const SgError&) {
    score = std::nullopt;  // tool failure is reported as absence, never a value
  }
  std::remove(ref_path.c_str());
  std::remove(deg_path.c_str());
  return score;
}

// ---------------------------------------------------------------------------
// Robustness table.
// ---------------------------------------------------------------------------

constexpr uint64_t kEvalMsgTag = 0x4D5347;  // per-clip message streams
constexpr uint64_t kEvalAtkTag = 0x41544B;  // per-(clip, row) attack streams

struct AttackResult {
  AttackSpec attack;
  double acc = 0.0;    // mean bit accuracy over scored clips
  long n_clips = 0;    // clips that produced a score
  long n_skipped = 0;  // clips skipped as degenerate for this attack
  bool skipped = false;  // whole row skipped (note says why)
  std::string note;
};

struct EvalReport {
  std::vector<AttackResult> rows;
  double snr_db = 0.0;  // embed imperceptibility over the dataset
  std::optional<double> pesq;
  std::string checkpoint_id;
  std::string dataset_id;
  uint64_t seed = 0;
  long n_clips = 0;
};

namespace eval_detail {

// Per-clip uniform random message + watermarked copy, embedded once and
// reused across every attack row so rows are comparable and fraction-0 crops
// coincide exactly with the identity row.
struct EmbeddedSet {
  std::vector<Message> messages;
  std::vector<AudioClip> marked;
  double mean_snr_db = 0.0;
};

inline EmbeddedSet embed_all(const Codec<float>& codec, const Dataset& data, uint64_t seed) {
  EmbeddedSet set;
  double snr_sum = 0.0;
  for (long i = 0; i < data.size(); ++i) {
    Rng rng(derive_seed(derive_seed(seed, kEvalMsgTag), uint64_t(i)));
    Message msg = Message::random_uniform(codec.config().n_bits, rng);
    AudioClip marked = codec.embed_clip(data.clips[size_t(i)], msg);
    snr_sum += snr_db(data.clips[size_t(i)], marked);
    set.messages.push_back(std::move(msg));
    set.marked.push_back(std::move(marked));
  }
  set.mean_snr_db = snr_sum / double(data.size());
  return set;
}

inline bool degenerate_kind(ErrorKind k) {
  return k == ErrorKind::degenerate_input || k == ErrorKind::degenerate_output ||
         k == ErrorKind::input_too_short;
}

}  // namespace eval_detail

inline EvalReport robustness_table(const Codec<float>& codec, const Dataset& data,
                                   const std::vector<AttackSpec>& attacks, uint64_t seed,
                                   AttackMode mode = AttackMode::evaluation,
                                   const std::string& pesq_tool = {}) {
  require(!data.empty(), ErrorKind::contract, "robustness_table: empty dataset");
  require(!attacks.empty(), ErrorKind::contract, "robustness_table: no attacks configured");
  for (const auto& a : attacks) a.validate();

  EvalReport report;
  report.seed = seed;
  report.n_clips = data.size();

  eval_detail::EmbeddedSet set = eval_detail::embed_all(codec, data, seed);
  report.snr_db = set.mean_snr_db;

  // PESQ (optional): mean over clips where the external tool yields a score.
  {
    double sum = 0.0;
    long n = 0;
    for (long i = 0; i < data.size(); ++i) {
      auto s = pesq_hook(data.clips[size_t(i)], set.marked[size_t(i)], pesq_tool);
      if (s) {
        sum += *s;
        ++n;
      }
    }
    if (n > 0) report.pesq = sum / double(n);
  }

  for (size_t j = 0; j < attacks.size(); ++j) {
    AttackResult row;
    row.attack = attacks[j];
    if (attacks[j].kind == AttackKind::mp3 && mode == AttackMode::evaluation &&
        !mp3_codec_available()) {
      row.skipped = true;
      row.n_skipped = data.size();
      row.note = "external mp3 codec unavailable";
      report.rows.push_back(std::move(row));
      continue;
    }
    double acc_sum = 0.0;
    for (long i = 0; i < data.size(); ++i) {
      const uint64_t atk_seed =
          derive_seed(derive_seed(derive_seed(seed, kEvalAtkTag), uint64_t(i)), uint64_t(j));
      try {
        AudioClip attacked = apply_attack(set.marked[size_t(i)], attacks[j], atk_seed, mode);
        ExtractResult ex = codec.extract_clip(attacked);
        acc_sum += bit_accuracy(ex.bits, set.messages[size_t(i)].bits);
        ++row.n_clips;
      } catch (const SgError& e) {
        if (!eval_detail::degenerate_kind(e.kind())) throw;
        ++row.n_skipped;
      }
    }
    if (row.n_clips > 0) {
      row.acc = acc_sum / double(row.n_clips);
    } else {
      row.skipped = true;
      row.note = "degenerate for every clip";
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

// The Tables 2-3 style benchmark grid: common signal processing plus
// desynchronization attacks, with an identity reference row.
inline std::vector<AttackSpec> standard_attack_grid() {
  return {
      AttackSpec::identity(),       AttackSpec::resample(0.8),
      AttackSpec::resample(0.9),    AttackSpec::noise(20.0),
      AttackSpec::noise(30.0),      AttackSpec::mp3(64),
      AttackSpec::amplitude(0.85),  AttackSpec::requantize(8),
      AttackSpec::lowpass(6000.0),  AttackSpec::jitter(100),
      AttackSpec::tsm(0.8),         AttackSpec::tsm(0.9),
      AttackSpec::tsm(1.1),         AttackSpec::tsm(1.2),
      AttackSpec::crop(0.1),        AttackSpec::crop(0.2),
      AttackSpec::pitch_ratio(0.9), AttackSpec::pitch_ratio(1.1),
  };
}

inline std::string render_report(const EvalReport& report) {
  char line[256];
  std::string out = "robustness report\n";
  std::snprintf(line, sizeof line, "  checkpoint: %s  seed: %llu  dataset: %s (%ld clips)\n",
                report.checkpoint_id.empty() ? "-" : report.checkpoint_id.c_str(),
                static_cast<unsigned long long>(report.seed),
                report.dataset_id.empty() ? "-" : report.dataset_id.c_str(), report.n_clips);
  out += line;
  std::snprintf(line, sizeof line, "  embed SNR: %.2f dB\n", report.snr_db);
  out += line;
  if (report.pesq)
    std::snprintf(line, sizeof line, "  PESQ: %.3f\n", *report.pesq);
  else
    std::snprintf(line, sizeof line, "  PESQ: n/a\n");
  out += line;
  std::snprintf(line, sizeof line, "  %-34s %8s %7s %8s\n", "attack", "ACC", "clips",
                "skipped");
  out += line;
  for (const auto& row : report.rows) {
    if (row.skipped)
      std::snprintf(line, sizeof line, "  %-34s %8s %7ld %8ld  %s\n", row.attack.str().c_str(),
                    "-", row.n_clips, row.n_skipped, row.note.c_str());
    else
      std::snprintf(line, sizeof line, "  %-34s %8.4f %7ld %8ld%s%s\n",
                    row.attack.str().c_str(), row.acc, row.n_clips, row.n_skipped,
                    row.note.empty() ? "" : "  ", row.note.c_str());
    out += line;
  }
  return out;
}

// Line-delimited machine-readable form: one meta record, then one per row.
inline std::string report_jsonl(const EvalReport& report) {
  nlohmann::json meta = {{"record", "meta"},
                         {"checkpoint", report.checkpoint_id},
                         {"dataset", report.dataset_id},
                         {"seed", report.seed},
                         {"n_clips", report.n_clips},
                         {"snr_db", report.snr_db}};
  if (report.pesq)
    meta["pesq"] = *report.pesq;
  else
    meta["pesq"] = nullptr;
  std::string out = meta.dump() + "\n";
  for (const auto& row : report.rows) {
    nlohmann::json r = {{"record", "attack"}, {"attack", row.attack.str()},
                        {"acc", row.acc},     {"n_clips", row.n_clips},
                        {"n_skipped", row.n_skipped}, {"skipped", row.skipped},
                        {"note", row.note}};
    out += r.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Crop position study (ACC over a position x fraction grid, up to 0.85).
// ---------------------------------------------------------------------------

struct CropStudyRow {
  CropPosition position = CropPosition::begin;
  double fraction = 0.0;
  double acc = 0.0;
  long n_clips = 0;
  long n_skipped = 0;
};

inline std::vector<CropStudyRow> crop_position_study(
    const Codec<float>& codec, const Dataset& data, const std::vector<double>& fractions,
    const std::vector<CropPosition>& positions, uint64_t seed) {
  require(!data.empty(), ErrorKind::contract, "crop_position_study: empty dataset");
  require(!fractions.empty() && !positions.empty(), ErrorKind::contract,
          "crop_position_study: empty grid");
  for (double f : fractions)
    require(f >= 0.0 && f <= 0.85, ErrorKind::parameter,
            "crop study fractions must lie in [0, 0.85]");

  eval_detail::EmbeddedSet set = eval_detail::embed_all(codec, data, seed);
  std::vector<CropStudyRow> rows;
  long grid_index = 0;
  for (CropPosition pos : positions) {
    for (double f : fractions) {
      CropStudyRow row;
      row.position = pos;
      row.fraction = f;
      double acc_sum = 0.0;
      for (long i = 0; i < data.size(); ++i) {
        const uint64_t atk_seed = derive_seed(
            derive_seed(derive_seed(seed, kEvalAtkTag), uint64_t(i)), uint64_t(grid_index));
        try {
          AudioClip attacked = crop(set.marked[size_t(i)], f, pos, atk_seed);
          ExtractResult ex = codec.extract_clip(attacked);
          acc_sum += bit_accuracy(ex.bits, set.messages[size_t(i)].bits);
          ++row.n_clips;
        } catch (const SgError& e) {
          if (!eval_detail::degenerate_kind(e.kind())) throw;
          ++row.n_skipped;
        }
      }
      if (row.n_clips > 0) row.acc = acc_sum / double(row.n_clips);
      rows.push_back(row);
      ++grid_index;
    }
  }
  return rows;
}

inline std::string crop_study_csv(const std::vector<CropStudyRow>& rows) {
  std::string out = "position,fraction,acc,n_clips,n_skipped\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%.4f,%.6f,%ld,%ld\n", crop_position_name(r.position),
                  r.fraction, r.acc, r.n_clips, r.n_skipped);
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sliding-window detection.
// ---------------------------------------------------------------------------

struct SlidingWindow {
  long offset_samples = 0;
  double offset_seconds = 0.0;
  std::vector<uint8_t> bits;
  bool pattern_ok = false;
};

struct SlidingResult {
  std::vector<SlidingWindow> windows;
  long first_valid = -1;  // index of the first pattern-valid window, -1 if none
  double window_seconds = 0.0;
  double stride_seconds = 0.0;
};

inline SlidingResult sliding_extract(const Codec<float>& codec, const AudioClip& clip,
                                     double window_seconds = 1.0,
                                     double stride_seconds = 0.05) {
  require(window_seconds > 0.0 && stride_seconds > 0.0, ErrorKind::parameter,
          "window and stride must be positive");
  const long win = lround64(window_seconds * clip.sample_rate);
  require(clip.length() >= win, ErrorKind::input_too_short,
          "clip shorter than the detection window");

  // Window count follows the seconds-level formula floor((dur-win)/stride)+1;
  // the epsilon absorbs binary round-off in the division.
  const long count =
      long(std::floor((clip.seconds() - window_seconds) / stride_seconds + 1e-9)) + 1;

  SlidingResult result;
  result.window_seconds = window_seconds;
  result.stride_seconds = stride_seconds;
  for (long k = 0; k < count; ++k) {
    long off = lround64(double(k) * stride_seconds * clip.sample_rate);
    off = std::min(off, clip.length() - win);
    AudioClip piece;
    piece.sample_rate = clip.sample_rate;
    piece.samples.assign(clip.samples.begin() + off, clip.samples.begin() + off + win);
    ExtractResult ex = codec.extract_clip(piece);
    SlidingWindow w;
    w.offset_samples = off;
    w.offset_seconds = double(off) / clip.sample_rate;
    w.bits = ex.bits;
    w.pattern_ok = ex.pattern_ok;
    if (w.pattern_ok && result.first_valid < 0) result.first_valid = k;
    result.windows.push_back(std::move(w));
  }
  return result;
}

// ACC against a known message as the extraction window slides off the true
// watermark position; offsets are symmetric around zero.
struct LocalizationTrace {
  std::vector<double> offsets;  // signed seconds relative to the embed position
  std::vector<double> acc_at_offset;
  double window_seconds = 0.0;
  double stride_seconds = 0.0;
};

inline LocalizationTrace offset_trace(const Codec<float>& codec, const AudioClip& host,
                                      double mark_start_seconds, const Message& msg,
                                      double window_seconds = 1.0,
                                      double stride_seconds = 0.05,
                                      double max_offset_seconds = 0.5) {
  require(stride_seconds > 0.0 && window_seconds > 0.0 && max_offset_seconds >= 0.0,
          ErrorKind::parameter, "bad trace geometry");
  const int rate = host.sample_rate;
  const long win = lround64(window_seconds * rate);
  const long start = lround64(mark_start_seconds * rate);
  const long pad = lround64(max_offset_seconds * rate);
  require(start - pad >= 0 && start + win + pad <= host.length(), ErrorKind::parameter,
          "host must leave max_offset margin on both sides of the watermark");

  // Watermark only the window at `start`, splicing it into the host.
  AudioClip segment;
  segment.sample_rate = rate;
  segment.samples.assign(host.samples.begin() + start, host.samples.begin() + start + win);
  AudioClip marked_segment = codec.embed_clip(segment, msg);
  AudioClip composite = host;
  for (long i = 0; i < win; ++i)
    composite.samples[size_t(start + i)] = marked_segment.samples[size_t(i)];

  LocalizationTrace trace;
  trace.window_seconds = window_seconds;
  trace.stride_seconds = stride_seconds;
  const long steps = long(std::floor(max_offset_seconds / stride_seconds + 1e-9));
  for (long k = -steps; k <= steps; ++k) {
    const long off = start + lround64(double(k) * stride_seconds * rate);
    AudioClip piece;
    piece.sample_rate = rate;
    piece.samples.assign(composite.samples.begin() + off, composite.samples.begin() + off + win);
    ExtractResult ex = codec.extract_clip(piece);
    trace.offsets.push_back(double(k) * stride_seconds);
    trace.acc_at_offset.push_back(bit_accuracy(ex.bits, msg.bits));
  }
  return trace;
}

inline std::string trace_csv(const LocalizationTrace& trace) {
  std::string out = "offset_seconds,acc\n";
  char line[64];
  for (size_t i = 0; i < trace.offsets.size(); ++i) {
    std::snprintf(line, sizeof line, "%.4f,%.6f\n", trace.offsets[i], trace.acc_at_offset[i]);
    out += line;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Capacity sweep and the efficiency report.
// ---------------------------------------------------------------------------

struct CapacityRow {
  int n_bits = 0;
  double acc = 0.0;
  double snr_db = 0.0;
  long n_clips = 0;
};

inline std::vector<CapacityRow> capacity_sweep(const std::vector<const Codec<float>*>& models,
                                               const Dataset& data, uint64_t seed) {
  require(!models.empty(), ErrorKind::contract, "capacity_sweep: no models");
  require(!data.empty(), ErrorKind::contract, "capacity_sweep: empty dataset");
  std::vector<CapacityRow> rows;
  for (size_t m = 0; m < models.size(); ++m) {
    const Codec<float>& codec = *models[m];
    eval_detail::EmbeddedSet set =
        eval_detail::embed_all(codec, data, derive_seed(seed, uint64_t(m)));
    CapacityRow row;
    row.n_bits = codec.config().n_bits;
    row.snr_db = set.mean_snr_db;
    row.n_clips = data.size();
    double acc_sum = 0.0;
    for (long i = 0; i < data.size(); ++i) {
      ExtractResult ex = codec.extract_clip(set.marked[size_t(i)]);
      acc_sum += bit_accuracy(ex.bits, set.messages[size_t(i)].bits);
    }
    row.acc = acc_sum / double(data.size());
    rows.push_back(row);
  }
  return rows;
}

inline std::string capacity_csv(const std::vector<CapacityRow>& rows) {
  std::string out = "n_bits,acc,snr_db,n_clips\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%.6f,%.2f,%ld\n", r.n_bits, r.acc, r.snr_db, r.n_clips);
    out += line;
  }
  return out;
}

struct EfficiencyReport {
  long params_codec = 0;
  long params_disc = 0;
  double flops_embed = 0.0;    // analytic count for one clip of `clip_seconds`
  double flops_extract = 0.0;
  double embed_ms_per_audio_second = 0.0;    // wall-clock median over `runs`
  double extract_ms_per_audio_second = 0.0;
  double clip_seconds = 0.0;
  int runs = 0;
};

inline EfficiencyReport efficiency_report(const Codec<float>& codec, double clip_seconds = 1.0,
                                          int runs = 20) {
  require(runs >= 20, ErrorKind::parameter, "timing medians need at least 20 runs");
  require(clip_seconds > 0.0, ErrorKind::parameter, "clip length must be positive");

  EfficiencyReport rep;
  rep.params_codec = codec.param_count(nn::ParamGroup::codec);
  rep.params_disc = codec.param_count(nn::ParamGroup::disc);
  rep.clip_seconds = clip_seconds;
  rep.runs = runs;

  const AudioClip clip = synthetic_clip(clip_seconds, 0x7777);
  rep.flops_embed = codec.flops_embed(clip.length());
  rep.flops_extract = codec.flops_extract(clip.length());

  Rng rng(0x7778);
  const Message msg = Message::random_uniform(codec.config().n_bits, rng);

  auto median_ms = [](std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
  };
  using clock = std::chrono::steady_clock;

  std::vector<double> embed_ms, extract_ms;
  AudioClip marked;
  for (int r = 0; r < runs; ++r) {
    const auto t0 = clock::now();
    marked = codec.embed_clip(clip, msg);
    embed_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  }
  for (int r = 0; r < runs; ++r) {
    const auto t0 = clock::now();
    (void)codec.extract_clip(marked);
    extract_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  }
  rep.embed_ms_per_audio_second = median_ms(embed_ms) / clip_seconds;
  rep.extract_ms_per_audio_second = median_ms(extract_ms) / clip_seconds;
  return rep;
}

inline std::string render_efficiency(const EfficiencyReport& rep) {
  char line[160];
  std::string out = "efficiency report\n";
  std::snprintf(line, sizeof line, "  parameters: codec %ld, discriminator %ld\n",
                rep.params_codec, rep.params_disc);
  out += line;
  std::snprintf(line, sizeof line,
                "  analytic FLOPs (%.2f s clip): embed %.3g, extract %.3g\n", rep.clip_seconds,
                rep.flops_embed, rep.flops_extract);
  out += line;
  std::snprintf(line, sizeof line,
                "  wall clock (median of %d runs): embed %.2f ms/s, extract %.2f ms/s\n",
                rep.runs, rep.embed_ms_per_audio_second, rep.extract_ms_per_audio_second);
  out += line;
  return out;
}

}  // namespace syncguard
