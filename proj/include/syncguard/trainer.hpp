#pragma once

// Losses and the two-stage training procedure. Stage 1 trains embedder and
// extractor on clean audio for imperceptibility plus message recovery; stage 2
// inserts the differentiable distortion layer, drawing one attack per batch
// per step. The discriminator is updated separately on its own tape from
// detached watermarked audio, so a discriminator step can never move the
// embedder, and the embedder step sees the discriminator only through the
// adversarial term.
//
// Every stochastic choice (batch composition, messages, segment offsets, the
// per-step attack and its internal randomness) derives from the run seed, so
// a run is bit-reproducible on one machine.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "syncguard/dataset.hpp"
#include "syncguard/distortion.hpp"
#include "syncguard/evalbench.hpp"
#include "syncguard/model.hpp"
#include "syncguard/nn.hpp"

namespace syncguard {

// ---------------------------------------------------------------------------
// Losses. Value-level forms are the reference implementations; the graph
// builders reproduce them on a tape.
// ---------------------------------------------------------------------------

// Floor for the arguments of adversarial logs; keeps saturated discriminator
// outputs from producing infinities.
constexpr double kLogFloor = 1e-7;

// (1/N) * sum (soft_i - bit_i)^2 over soft extractor outputs in [0, 1].
inline double loss_w(const std::vector<float>& soft, const Message& msg) {
  require(soft.size() == msg.bits.size(), ErrorKind::contract, "loss_w: length mismatch");
  require(!soft.empty(), ErrorKind::contract, "loss_w: empty message");
  double acc = 0.0;
  for (size_t i = 0; i < soft.size(); ++i) {
    const double d = double(soft[i]) - double(msg.bits[i]);
    acc += d * d;
  }
  return acc / double(soft.size());
}

// (1/M) * sum (a_w,i - a_i)^2 over samples.
inline double loss_e(const AudioClip& a, const AudioClip& a_w) {
  require(a.length() == a_w.length(), ErrorKind::contract, "loss_e: length mismatch");
  require(a.length() > 0, ErrorKind::contract, "loss_e: empty clips");
  double acc = 0.0;
  for (long i = 0; i < a.length(); ++i) {
    const double d = double(a_w.samples[size_t(i)]) - double(a.samples[size_t(i)]);
    acc += d * d;
  }
  return acc / double(a.length());
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// L_adv = log(1 - sigma(D(a_w))): minimized when the discriminator reads the
// watermarked clip as real.
inline double adv_loss(double sigma_fake) {
  return std::log(std::max(1.0 - sigma_fake, kLogFloor));
}

// L_d = log(1 - sigma(D(a))) + log(sigma(D(a_w))): minimized when the
// discriminator separates real from watermarked.
inline double disc_loss(double sigma_real, double sigma_fake) {
  return std::log(std::max(1.0 - sigma_real, kLogFloor)) +
         std::log(std::max(sigma_fake, kLogFloor));
}

template <typename T>
ad::VarPtr<T> loss_w_graph(ad::Tape<T>& tape, const ad::VarPtr<T>& soft, const Message& msg) {
  require(soft->val.numel() == long(msg.bits.size()), ErrorKind::contract,
          "loss_w: length mismatch");
  Tensor<T> target({long(msg.bits.size())});
  for (size_t i = 0; i < msg.bits.size(); ++i) target[long(i)] = msg.bits[i] ? T(1) : T(0);
  return ad::mse(soft, tape.constant(std::move(target)));
}

namespace train_detail {

template <typename T>
ad::VarPtr<T> one_minus(const ad::VarPtr<T>& x) {
  Tensor<T> ones(x->val.shape);
  ones.fill(T(1));
  return ad::offset_const(ad::scale(x, -1.0), ones);
}

}  // namespace train_detail

template <typename T>
ad::VarPtr<T> adv_loss_graph(const ad::VarPtr<T>& fake_logit) {
  return ad::log_clamped(train_detail::one_minus(ad::sigmoid(fake_logit)), kLogFloor);
}

template <typename T>
ad::VarPtr<T> disc_loss_graph(const ad::VarPtr<T>& real_logit, const ad::VarPtr<T>& fake_logit) {
  auto real_term =
      ad::log_clamped(train_detail::one_minus(ad::sigmoid(real_logit)), kLogFloor);
  auto fake_term = ad::log_clamped(ad::sigmoid(fake_logit), kLogFloor);
  return ad::add(real_term, fake_term);
}

// ---------------------------------------------------------------------------
// Configuration and run records.
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lambda_e = 1.0;
  double lambda_w = 0.01;
  double lambda_adv = 0.01;
  double learning_rate = 1e-5;
  int batch_size = 4;
  long stage1_steps = 0;
  long stage2_steps = 0;
  AttackSampler sampler = default_training_sampler();  // stage-2 pool
  uint64_t seed = 1;
  double segment_seconds = 1.0;  // per-item training segment; 0 = whole clip
  // Stage 1 hands off early once the running means (over the last
  // kTransitionWindow steps) clear both thresholds; stage1_steps is the hard
  // budget either way. Set transition_acc above 1 to disable the early exit.
  double transition_acc = 0.99;
  double transition_snr_db = 0.0;
  long checkpoint_every = 0;  // steps between checkpoints; 0 = off
  std::string checkpoint_dir;
  std::string metrics_path;  // JSONL sink; empty = in-memory history only

  void validate() const {
    require(lambda_e >= 0.0 && lambda_w >= 0.0 && lambda_adv >= 0.0, ErrorKind::config,
            "loss weights must be nonnegative");
    require(learning_rate > 0.0, ErrorKind::config, "learning rate must be positive");
    require(batch_size >= 1, ErrorKind::config, "batch size must be at least 1");
    require(stage1_steps >= 0 && stage2_steps >= 0, ErrorKind::config,
            "step counts must be nonnegative");
    require(segment_seconds >= 0.0, ErrorKind::config, "segment length must be nonnegative");
    require(checkpoint_every >= 0, ErrorKind::config, "checkpoint cadence must be nonnegative");
    sampler.validate();
  }
};

struct MetricsRecord {
  long step = 0;
  int stage = 1;
  double l = 0.0;      // lambda-weighted total seen by the embedder/extractor
  double l_e = 0.0;
  double l_w = 0.0;
  double l_adv = 0.0;
  double l_d = 0.0;
  double acc = 0.0;  // batch bit accuracy after the (possibly attacked) path
  double snr = 0.0;  // batch embed SNR in dB
};

inline nlohmann::json to_json(const MetricsRecord& r) {
  return {{"step", r.step},   {"stage", r.stage}, {"l", r.l},
          {"l_e", r.l_e},     {"l_w", r.l_w},     {"l_adv", r.l_adv},
          {"l_d", r.l_d},     {"acc", r.acc},     {"snr", r.snr}};
}

inline std::string metrics_line(const MetricsRecord& r) { return to_json(r).dump(); }

struct TrainState {
  long step = 0;  // steps completed
  int stage = 1;
  long stage2_start = -1;  // step index where stage 2 began; -1 if it never ran
  MetricsRecord last;
  std::vector<MetricsRecord> history;
};

using StepCallback = std::function<void(const MetricsRecord&)>;

// ---------------------------------------------------------------------------
// Human-readable key/value config files. `key = value` lines, '#' comments;
// repeated `attack = <spec> <weight>` lines build the stage-2 pool (the first
// one replaces the built-in default pool).
// ---------------------------------------------------------------------------

inline std::string format_train_config(const TrainConfig& cfg) {
  using grammar_detail::format_double;
  std::string out = "# syncguard training configuration\n";
  auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("lambda_e", format_double(cfg.lambda_e));
  kv("lambda_w", format_double(cfg.lambda_w));
  kv("lambda_adv", format_double(cfg.lambda_adv));
  kv("learning_rate", format_double(cfg.learning_rate));
  kv("batch_size", std::to_string(cfg.batch_size));
  kv("stage1_steps", std::to_string(cfg.stage1_steps));
  kv("stage2_steps", std::to_string(cfg.stage2_steps));
  kv("seed", std::to_string(cfg.seed));
  kv("segment_seconds", format_double(cfg.segment_seconds));
  kv("transition_acc", format_double(cfg.transition_acc));
  kv("transition_snr_db", format_double(cfg.transition_snr_db));
  kv("checkpoint_every", std::to_string(cfg.checkpoint_every));
  kv("checkpoint_dir", cfg.checkpoint_dir);
  kv("metrics_path", cfg.metrics_path);
  for (const auto& e : cfg.sampler.pool)
    kv("attack", e.spec.str() + " " + format_double(e.weight));
  kv("include_identity", cfg.sampler.include_identity ? "true" : "false");
  return out;
}

inline TrainConfig parse_train_config(const std::string& text) {
  using grammar_detail::parse_double;
  using grammar_detail::parse_int;
  using grammar_detail::trim;
  TrainConfig cfg;
  bool pool_reset = false;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t eol = text.find('\n', pos);
    std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::config, "config line has no '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "lambda_e") {
      cfg.lambda_e = parse_double(value, key);
    } else if (key == "lambda_w") {
      cfg.lambda_w = parse_double(value, key);
    } else if (key == "lambda_adv") {
      cfg.lambda_adv = parse_double(value, key);
    } else if (key == "learning_rate") {
      cfg.learning_rate = parse_double(value, key);
    } else if (key == "batch_size") {
      cfg.batch_size = parse_int(value, key);
    } else if (key == "stage1_steps") {
      cfg.stage1_steps = parse_int(value, key);
    } else if (key == "stage2_steps") {
      cfg.stage2_steps = parse_int(value, key);
    } else if (key == "seed") {
      try {
        size_t used = 0;
        cfg.seed = std::stoull(value, &used);
        require(used == value.size(), ErrorKind::config, "bad seed: " + value);
      } catch (const std::logic_error&) {
        fail(ErrorKind::config, "bad seed: " + value);
      }
    } else if (key == "segment_seconds") {
      cfg.segment_seconds = parse_double(value, key);
    } else if (key == "transition_acc") {
      cfg.transition_acc = parse_double(value, key);
    } else if (key == "transition_snr_db") {
      cfg.transition_snr_db = parse_double(value, key);
    } else if (key == "checkpoint_every") {
      cfg.checkpoint_every = parse_int(value, key);
    } else if (key == "checkpoint_dir") {
      cfg.checkpoint_dir = value;
    } else if (key == "metrics_path") {
      cfg.metrics_path = value;
    } else if (key == "attack") {
      const size_t sp = value.rfind(' ');
      require(sp != std::string::npos, ErrorKind::config,
              "attack entries need '<spec> <weight>': " + value);
      if (!pool_reset) {
        cfg.sampler.pool.clear();
        pool_reset = true;
      }
      AttackSampler::Entry e;
      e.spec = parse_attack(trim(value.substr(0, sp)));
      e.weight = parse_double(trim(value.substr(sp + 1)), "attack weight");
      cfg.sampler.pool.push_back(std::move(e));
    } else if (key == "include_identity") {
      if (value == "true" || value == "1")
        cfg.sampler.include_identity = true;
      else if (value == "false" || value == "0")
        cfg.sampler.include_identity = false;
      else
        fail(ErrorKind::config, "include_identity must be true or false");
    } else {
      fail(ErrorKind::config, "unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), ErrorKind::io, "cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_train_config(text);
}

// ---------------------------------------------------------------------------
// The training loop.
// ---------------------------------------------------------------------------

namespace train_detail {

constexpr uint64_t kBatchTag = 0x8A7C;        // clip, segment, and message draws
constexpr uint64_t kAttackDrawTag = 0xD11A;   // which attack a stage-2 step uses
constexpr uint64_t kAttackApplyTag = 0xAB12;  // attack-internal randomness
constexpr int kTransitionWindow = 8;

inline uint64_t step_seed(uint64_t seed, uint64_t tag, long step) {
  return derive_seed(derive_seed(seed, tag), uint64_t(step));
}

inline AudioClip slice_clip(const AudioClip& clip, long offset, long length) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(clip.samples.begin() + offset, clip.samples.begin() + offset + length);
  return out;
}

struct BatchItem {
  AudioClip audio;
  Message msg;
};

inline std::vector<BatchItem> draw_batch(const Dataset& data, const TrainConfig& cfg,
                                         int n_bits, long step) {
  Rng rng(step_seed(cfg.seed, kBatchTag, step));
  std::vector<BatchItem> batch;
  const long seg = cfg.segment_seconds > 0.0
                       ? lround64(cfg.segment_seconds * double(kWorkingRate))
                       : 0;
  for (int b = 0; b < cfg.batch_size; ++b) {
    const AudioClip& clip = data.clips[size_t(rng.below(uint64_t(data.size())))];
    BatchItem item;
    if (seg > 0 && seg < clip.length()) {
      const long offset = long(rng.below(uint64_t(clip.length() - seg + 1)));
      item.audio = slice_clip(clip, offset, seg);
    } else {
      item.audio = clip;
    }
    item.msg = Message::random_uniform(n_bits, rng);
    batch.push_back(std::move(item));
  }
  return batch;
}

}  // namespace train_detail

// Runs stage 1 then stage 2 in place on `codec`. The returned state carries
// the full metrics history; `on_step` (if given) sees each record as it is
// produced.
inline TrainState train(Codec<float>& codec, const Dataset& data, const TrainConfig& cfg,
                        const StepCallback& on_step = {}) {
  using train_detail::kAttackApplyTag;
  using train_detail::kAttackDrawTag;
  using train_detail::kTransitionWindow;
  using train_detail::step_seed;

  cfg.validate();
  require(!data.empty(), ErrorKind::contract, "train: empty dataset");
  const int n_bits = codec.config().n_bits;

  nn::ParameterStore<float>& params = codec.params();
  nn::Adam<float> opt_codec(&params, nn::ParamGroup::codec, cfg.learning_rate);
  nn::Adam<float> opt_disc(&params, nn::ParamGroup::disc, cfg.learning_rate);

  std::ofstream metrics;
  if (!cfg.metrics_path.empty()) {
    metrics.open(cfg.metrics_path, std::ios::trunc);
    require(bool(metrics), ErrorKind::io, "cannot write metrics: " + cfg.metrics_path);
  }
  if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty())
    std::filesystem::create_directories(cfg.checkpoint_dir);

  TrainState state;
  std::deque<double> acc_window, snr_window;

  auto run_step = [&](long step, int stage) {
    auto batch = train_detail::draw_batch(data, cfg, n_bits, step);
    AttackSpec attack = AttackSpec::identity();
    if (stage == 2)
      attack = sample_attack(cfg.sampler, step_seed(cfg.seed, kAttackDrawTag, step));

    MetricsRecord rec;
    rec.step = step;
    rec.stage = stage;

    // Embedder/extractor pass: one tape per item, gradients averaged into the
    // store, then one Adam step over the codec group.
    params.zero_grad();
    std::vector<Tensor<float>> marked_samples;  // detached a_w for the disc pass
    for (int b = 0; b < cfg.batch_size; ++b) {
      const train_detail::BatchItem& item = batch[size_t(b)];
      ad::Tape<float> tape;
      auto vars = params.bind(tape);

      ad::VarPtr<float> a_w = codec.embed_graph(tape, vars, item.audio, item.msg);
      Tensor<float> a_t({item.audio.length()});
      for (long i = 0; i < item.audio.length(); ++i) a_t[i] = item.audio.samples[size_t(i)];
      ad::VarPtr<float> l_e = ad::mse(a_w, tape.constant(a_t));

      ad::VarPtr<float> attacked =
          stage == 2 ? attack_graph<float>(
                           a_w, attack,
                           derive_seed(step_seed(cfg.seed, kAttackApplyTag, step), uint64_t(b)))
                     : a_w;
      ad::VarPtr<float> soft = codec.extract_graph(tape, vars, attacked);
      ad::VarPtr<float> l_w = loss_w_graph(tape, soft, item.msg);

      ad::VarPtr<float> total =
          ad::add(ad::scale(l_e, cfg.lambda_e), ad::scale(l_w, cfg.lambda_w));
      if (cfg.lambda_adv > 0.0) {
        ad::VarPtr<float> logit = codec.disc_graph(tape, vars, a_w);
        total = ad::add(total, ad::scale(adv_loss_graph(logit), cfg.lambda_adv));
      }
      tape.backward(total);
      params.absorb(vars, 1.0 / double(cfg.batch_size));

      rec.l += double(total->val[0]) / cfg.batch_size;
      rec.l_e += double(l_e->val[0]) / cfg.batch_size;
      rec.l_w += double(l_w->val[0]) / cfg.batch_size;

      // Batch metrics: hard-bit accuracy on this (possibly attacked) item and
      // the embed SNR before the attack.
      long hits = 0;
      for (int i = 0; i < n_bits; ++i)
        hits += (soft->val[i] > 0.5f ? 1 : 0) == int(item.msg.bits[size_t(i)]);
      rec.acc += double(hits) / double(n_bits) / cfg.batch_size;
      AudioClip marked;
      marked.sample_rate = item.audio.sample_rate;
      marked.samples.resize(size_t(a_w->val.numel()));
      for (long i = 0; i < a_w->val.numel(); ++i) marked.samples[size_t(i)] = a_w->val[i];
      rec.snr += snr_db(item.audio, marked) / cfg.batch_size;
      marked_samples.push_back(a_w->val);
    }
    if (!std::isfinite(rec.l))
      fail(ErrorKind::divergence,
           "training diverged at step " + std::to_string(step) + ": loss is not finite");
    opt_codec.step();

    // Discriminator pass on the same pre-update batch; touches only the disc
    // parameter group.
    params.zero_grad();
    for (int b = 0; b < cfg.batch_size; ++b) {
      const train_detail::BatchItem& item = batch[size_t(b)];
      ad::Tape<float> tape;
      auto vars = params.bind(tape);
      Tensor<float> a_t({item.audio.length()});
      for (long i = 0; i < item.audio.length(); ++i) a_t[i] = item.audio.samples[size_t(i)];
      ad::VarPtr<float> real_logit = codec.disc_graph(tape, vars, tape.constant(a_t));
      ad::VarPtr<float> fake_logit =
          codec.disc_graph(tape, vars, tape.constant(marked_samples[size_t(b)]));
      ad::VarPtr<float> l_d = disc_loss_graph(real_logit, fake_logit);
      tape.backward(l_d);
      params.absorb(vars, 1.0 / double(cfg.batch_size));
      rec.l_d += double(l_d->val[0]) / cfg.batch_size;
      // The adversarial term is logged from here even when lambda_adv is 0:
      // both passes see identical parameters and the same detached a_w.
      rec.l_adv += adv_loss(logistic(double(fake_logit->val[0]))) / cfg.batch_size;
    }
    opt_disc.step();

    state.history.push_back(rec);
    state.last = rec;
    state.step = step + 1;
    if (metrics.is_open()) metrics << metrics_line(rec) << "\n";
    if (on_step) on_step(rec);

    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
        (step + 1) % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "step%06ld.ckpt", step + 1);
      CheckpointMeta meta;
      meta.stage = stage;
      meta.step = step + 1;
      save_checkpoint(cfg.checkpoint_dir + "/" + name, codec, meta);
    }
    return rec;
  };

  long step = 0;
  for (long s1 = 0; s1 < cfg.stage1_steps; ++s1, ++step) {
    const MetricsRecord rec = run_step(step, 1);
    acc_window.push_back(rec.acc);
    snr_window.push_back(rec.snr);
    if (long(acc_window.size()) > kTransitionWindow) {
      acc_window.pop_front();
      snr_window.pop_front();
    }
    if (long(acc_window.size()) == kTransitionWindow) {
      double acc_mean = 0.0, snr_mean = 0.0;
      for (double v : acc_window) acc_mean += v;
      for (double v : snr_window) snr_mean += v;
      acc_mean /= kTransitionWindow;
      snr_mean /= kTransitionWindow;
      if (acc_mean >= cfg.transition_acc && snr_mean >= cfg.transition_snr_db) {
        ++step;
        break;
      }
    }
  }
  if (cfg.stage2_steps > 0) {
    state.stage = 2;
    state.stage2_start = step;
    for (long s2 = 0; s2 < cfg.stage2_steps; ++s2, ++step) run_step(step, 2);
  }
  return state;
}

}  // namespace syncguard
