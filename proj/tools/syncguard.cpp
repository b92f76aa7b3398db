// syncguard -- command-line front end.
//
// Every run writes a manifest (command, resolved options, seed, checkpoint
// hash) and `syncguard replay --manifest <file>` re-executes it; because all
// stochastic components draw from the recorded seed, a replayed extraction is
// bit-identical to the original run. Exit codes: 0 success, 1 runtime error
// (diagnostic on stderr), 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <syncguard/dataset.hpp>
#include <syncguard/evalbench.hpp>
#include <syncguard/trainer.hpp>

#include <cstdio>
#include <deque>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
using namespace syncguard;

// ---------------------------------------------------------------------------
// Small utilities.
// ---------------------------------------------------------------------------

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= uint64_t(uint8_t(buf[i]));
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char out[32];
  std::snprintf(out, sizeof out, "fnv1a:%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << text;
}

// Message argument: a 0/1 bit string, or hex (auto-detected; "0x" prefix
// forces hex). Without --raw-bits the argument is the payload and the sync
// pattern is prefixed automatically.
Message parse_message_arg(const std::string& text, bool raw_bits, const ModelConfig& cfg) {
  require(!text.empty(), ErrorKind::parameter, "empty message");
  std::string body = text;
  bool force_hex = false;
  if (body.rfind("0x", 0) == 0 || body.rfind("0X", 0) == 0) {
    body = body.substr(2);
    force_hex = true;
  }
  bool all_binary = !body.empty();
  for (char c : body)
    if (c != '0' && c != '1') all_binary = false;

  std::vector<uint8_t> bits =
      (!force_hex && all_binary) ? parse_bit_string(body) : parse_hex_string(body);

  const long expected = raw_bits ? cfg.n_bits : cfg.n_bits - cfg.pattern_len;
  require(long(bits.size()) == expected, ErrorKind::parameter,
          "message has " + std::to_string(bits.size()) + " bits, expected " +
              std::to_string(expected) + (raw_bits ? " (raw)" : " payload bits"));
  if (raw_bits) {
    Message m;
    m.bits = bits;
    return m;
  }
  return Message::from_payload(cfg.n_bits, cfg.pattern_len, bits);
}

// ---------------------------------------------------------------------------
// Options plumbing: each command receives a flat JSON object. The same object
// is stored in the manifest, so replay re-enters dispatch() with identical
// inputs.
// ---------------------------------------------------------------------------

std::string want_str(const json& o, const std::string& key) {
  if (!o.contains(key) || !o[key].is_string() || o[key].get<std::string>().empty())
    fail(ErrorKind::config, "missing required option --" + key);
  return o[key].get<std::string>();
}

uint64_t opt_seed(const json& o) { return o.value("seed", uint64_t(1)); }

void write_manifest(const std::string& command, const json& options,
                    const std::string& checkpoint_hash) {
  json m;
  m["command"] = command;
  m["options"] = options;
  m["seed"] = opt_seed(options);
  m["checkpoint_hash"] = checkpoint_hash.empty() ? json(nullptr) : json(checkpoint_hash);
  std::string path = options.value("manifest", std::string());
  if (path.empty()) path = command + "-manifest.json";
  write_text_file(path, m.dump(2) + "\n");
}

Codec<float> load_model(const json& o, std::string* hash_out) {
  const std::string path = want_str(o, "model");
  if (hash_out) *hash_out = fnv1a_file(path);
  return load_codec(path);
}

// ---------------------------------------------------------------------------
// Command implementations.
// ---------------------------------------------------------------------------

int cmd_train(const json& o) {
  TrainConfig tcfg;
  if (o.contains("config_text"))
    tcfg = parse_train_config(o["config_text"].get<std::string>());
  else if (o.contains("config"))
    tcfg = load_train_config(o["config"].get<std::string>());
  if (o.contains("seed")) tcfg.seed = o["seed"].get<uint64_t>();
  if (o.contains("metrics")) tcfg.metrics_path = o["metrics"].get<std::string>();
  if (o.contains("checkpoint_dir")) tcfg.checkpoint_dir = o["checkpoint_dir"].get<std::string>();
  if (o.contains("steps1")) tcfg.stage1_steps = o["steps1"].get<long>();
  if (o.contains("steps2")) tcfg.stage2_steps = o["steps2"].get<long>();

  ModelConfig mcfg;
  if (o.contains("model_config_json"))
    mcfg = model_config_from_json(o["model_config_json"]);
  else if (o.contains("model_config"))
    mcfg = model_config_from_json(json::parse(read_text_file(o["model_config"].get<std::string>())));

  const std::string out_path = want_str(o, "out");
  const Dataset data = resolve_dataset(want_str(o, "data"), tcfg.seed);

  Codec<float> codec = o.contains("init_model")
                           ? load_codec(o["init_model"].get<std::string>())
                           : Codec<float>(mcfg);

  const TrainState state = train(codec, data, tcfg);
  save_checkpoint(out_path, codec, CheckpointMeta{state.stage, state.step});

  json stored = o;
  stored["config_text"] = format_train_config(tcfg);
  stored["model_config_json"] = to_json(codec.config());
  stored["seed"] = tcfg.seed;
  write_manifest("train", stored, fnv1a_file(out_path));

  if (state.history.empty()) {
    std::printf("trained 0 steps -> %s\n", out_path.c_str());
  } else {
    const MetricsRecord& last = state.last;
    std::printf("trained %ld steps (final stage %d): L=%.4f ACC=%.3f SNR=%.2f dB -> %s\n",
                state.step, state.stage, last.l, last.acc, last.snr, out_path.c_str());
  }
  return 0;
}

int cmd_embed(const json& o) {
  std::string hash;
  const Codec<float> codec = load_model(o, &hash);
  const AudioClip host = load_audio(want_str(o, "in"));
  const Message msg =
      parse_message_arg(want_str(o, "bits"), o.value("raw_bits", false), codec.config());
  const AudioClip marked = codec.embed_clip(host, msg);
  const std::string out_path = want_str(o, "out");
  save_audio(marked, out_path);
  write_manifest("embed", o, hash);
  std::printf("embedded %d bits into %s (%.2f s, snr %.2f dB)\n", codec.config().n_bits,
              out_path.c_str(), marked.seconds(), snr_db(host, marked));
  return 0;
}

int cmd_extract(const json& o) {
  std::string hash;
  const Codec<float> codec = load_model(o, &hash);
  const AudioClip clip = load_audio(want_str(o, "in"));
  const ExtractResult r = codec.extract_clip(clip);
  const std::string line =
      format_bit_string(r.bits) + " pattern_ok=" + (r.pattern_ok ? "1" : "0");
  std::printf("%s\n", line.c_str());
  if (o.contains("out")) write_text_file(o["out"].get<std::string>(), line + "\n");
  write_manifest("extract", o, hash);
  return 0;
}

int cmd_attack(const json& o) {
  const std::vector<AttackSpec> chain = parse_attack_chain(want_str(o, "chain"));
  const AudioClip clip = load_audio(want_str(o, "in"));
  const AudioClip out = apply_attack_chain(clip, chain, opt_seed(o), AttackMode::evaluation);
  const std::string out_path = want_str(o, "out");
  save_audio(out, out_path);
  write_manifest("attack", o, "");
  std::printf("applied %zu attack(s): %ld -> %ld samples -> %s\n", chain.size(), clip.length(),
              out.length(), out_path.c_str());
  return 0;
}

int cmd_evaluate(const json& o) {
  std::string hash;
  const Codec<float> codec = load_model(o, &hash);
  const Dataset data = resolve_dataset(want_str(o, "data"), opt_seed(o));
  const std::vector<AttackSpec> grid = o.contains("attacks")
                                           ? parse_attack_chain(o["attacks"].get<std::string>())
                                           : standard_attack_grid();
  EvalReport rep = robustness_table(codec, data, grid, opt_seed(o), AttackMode::evaluation,
                                    o.value("pesq_tool", std::string()));
  rep.checkpoint_id = hash;
  rep.dataset_id = want_str(o, "data");
  const std::string text = render_report(rep);
  std::fputs(text.c_str(), stdout);
  if (o.contains("out")) write_text_file(o["out"].get<std::string>(), text);
  if (o.contains("jsonl")) write_text_file(o["jsonl"].get<std::string>(), report_jsonl(rep));
  write_manifest("evaluate", o, hash);
  return 0;
}

int cmd_crop_study(const json& o) {
  std::string hash;
  const Codec<float> codec = load_model(o, &hash);
  const Dataset data = resolve_dataset(want_str(o, "data"), opt_seed(o));
  std::vector<double> fractions;
  for (const auto& part : split_csv(o.value("fractions", std::string("0,0.2,0.4,0.6,0.85")))) {
    try {
      size_t used = 0;
      fractions.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      fail(ErrorKind::config, "bad crop fraction '" + part + "'");
    }
  }
  const auto rows = crop_position_study(
      codec, data, fractions,
      {CropPosition::begin, CropPosition::middle, CropPosition::end}, opt_seed(o));
  const std::string csv = crop_study_csv(rows);
  std::fputs(csv.c_str(), stdout);
  if (o.contains("out")) write_text_file(o["out"].get<std::string>(), csv);
  write_manifest("crop-study", o, hash);
  return 0;
}

int cmd_locate(const json& o) {
  std::string hash;
  const Codec<float> codec = load_model(o, &hash);
  const AudioClip clip = load_audio(want_str(o, "in"));
  const SlidingResult res =
      sliding_extract(codec, clip, o.value("window", 1.0), o.value("stride", 0.05));
  std::printf("sliding extraction: %zu windows (window %.2f s, stride %.2f s)\n",
              res.windows.size(), res.window_seconds, res.stride_seconds);
  std::string csv = "offset_seconds,pattern_ok,bits\n";
  for (const auto& w : res.windows) {
    std::printf("  t=%.2fs  %s pattern_ok=%d\n", w.offset_seconds,
                format_bit_string(w.bits).c_str(), w.pattern_ok ? 1 : 0);
    char line[64];
    std::snprintf(line, sizeof line, "%.4f,%d,", w.offset_seconds, w.pattern_ok ? 1 : 0);
    csv += line;
    csv += format_bit_string(w.bits) + "\n";
  }
  if (res.first_valid >= 0)
    std::printf("first pattern-valid window: index %ld at t=%.2f s\n", res.first_valid,
                res.windows[size_t(res.first_valid)].offset_seconds);
  else
    std::printf("no pattern-valid window\n");
  if (o.contains("out")) write_text_file(o["out"].get<std::string>(), csv);
  write_manifest("locate", o, hash);
  return 0;
}

int cmd_sweep(const json& o) {
  const Dataset data = resolve_dataset(want_str(o, "data"), opt_seed(o));
  std::deque<Codec<float>> owned;
  std::vector<const Codec<float>*> models;
  std::string hash;
  if (o.contains("models")) {
    for (const auto& path : split_csv(o["models"].get<std::string>())) {
      owned.push_back(load_codec(path));
      models.push_back(&owned.back());
    }
    hash = fnv1a_file(split_csv(o["models"].get<std::string>()).front());
  } else {
    for (const auto& part : split_csv(o.value("bits", std::string("32,64,96")))) {
      ModelConfig mc;
      try {
        size_t used = 0;
        mc.n_bits = std::stoi(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::logic_error&) {
        fail(ErrorKind::config, "bad bit count '" + part + "'");
      }
      mc.init_seed = o.value("init_seed", uint64_t(1234));
      owned.emplace_back(mc);
      models.push_back(&owned.back());
    }
  }
  const auto rows = capacity_sweep(models, data, opt_seed(o));
  const std::string csv = capacity_csv(rows);
  std::fputs(csv.c_str(), stdout);
  if (o.contains("out")) write_text_file(o["out"].get<std::string>(), csv);
  write_manifest("sweep", o, hash);
  return 0;
}

int cmd_efficiency(const json& o) {
  std::string hash;
  Codec<float> codec = o.contains("model") ? load_model(o, &hash) : Codec<float>(ModelConfig{});
  const EfficiencyReport rep =
      efficiency_report(codec, o.value("seconds", 1.0), o.value("runs", 20));
  const std::string text = render_efficiency(rep);
  std::fputs(text.c_str(), stdout);
  if (o.contains("out")) write_text_file(o["out"].get<std::string>(), text);
  write_manifest("efficiency", o, hash);
  return 0;
}

int dispatch(const std::string& command, const json& options) {
  if (command == "train") return cmd_train(options);
  if (command == "embed") return cmd_embed(options);
  if (command == "extract") return cmd_extract(options);
  if (command == "attack") return cmd_attack(options);
  if (command == "evaluate") return cmd_evaluate(options);
  if (command == "crop-study") return cmd_crop_study(options);
  if (command == "locate") return cmd_locate(options);
  if (command == "sweep") return cmd_sweep(options);
  if (command == "efficiency") return cmd_efficiency(options);
  fail(ErrorKind::config, "unknown command '" + command + "' in manifest");
}

int cmd_replay(const std::string& manifest_path) {
  const json m = json::parse(read_text_file(manifest_path));
  if (!m.contains("command") || !m.contains("options"))
    fail(ErrorKind::config, "manifest missing command/options");
  return dispatch(m["command"].get<std::string>(), m["options"]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"syncguard: blind robust audio watermarking"};
  app.require_subcommand(1);

  // Common option storage; each subcommand binds the subset it uses.
  std::string model, in_path, out_path, bits, chain, data, config, model_config, init_model;
  std::string metrics, checkpoint_dir, attacks, jsonl, fractions, models, pesq_tool, manifest;
  std::string replay_manifest;
  bool raw_bits = false;
  uint64_t seed = 1, init_seed = 1234;
  long steps1 = -1, steps2 = -1;
  double window = 1.0, stride = 0.05, seconds = 1.0;
  int runs = 20;

  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest, "manifest output path (default <command>-manifest.json)");
  };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed, "global seed"); };

  CLI::App* c_train = app.add_subcommand("train", "train a codec");
  c_train->add_option("--config", config, "train config file")->check(CLI::ExistingFile);
  c_train->add_option("--data", data, "dataset: dir:<path>, synth:<n>x<sec>, or a directory")->required();
  c_train->add_option("--out", out_path, "final checkpoint path")->required();
  c_train->add_option("--model-config", model_config, "model config JSON file")->check(CLI::ExistingFile);
  c_train->add_option("--init-model", init_model, "checkpoint to continue from")->check(CLI::ExistingFile);
  c_train->add_option("--metrics", metrics, "metrics JSONL path");
  c_train->add_option("--checkpoint-dir", checkpoint_dir, "periodic checkpoint directory");
  c_train->add_option("--steps1", steps1, "stage-1 steps override");
  c_train->add_option("--steps2", steps2, "stage-2 steps override");
  add_seed(c_train);
  add_manifest(c_train);

  CLI::App* c_embed = app.add_subcommand("embed", "embed a message into a WAV");
  c_embed->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
  c_embed->add_option("--in", in_path, "input WAV")->required()->check(CLI::ExistingFile);
  c_embed->add_option("--out", out_path, "output WAV")->required();
  c_embed->add_option("--bits", bits, "message payload (bit string or hex)")->required();
  c_embed->add_flag("--raw-bits", raw_bits, "message covers all n bits; skip the sync-pattern prefix");
  add_seed(c_embed);
  add_manifest(c_embed);

  CLI::App* c_extract = app.add_subcommand("extract", "extract a message from a WAV");
  c_extract->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
  c_extract->add_option("--in", in_path, "input WAV")->required()->check(CLI::ExistingFile);
  c_extract->add_option("--out", out_path, "also write the result line to this file");
  add_seed(c_extract);
  add_manifest(c_extract);

  CLI::App* c_attack = app.add_subcommand("attack", "apply an attack chain to a WAV");
  c_attack->add_option("--chain", chain, "pipe-separated attack chain, applied left-to-right")->required();
  c_attack->add_option("--in", in_path, "input WAV")->required()->check(CLI::ExistingFile);
  c_attack->add_option("--out", out_path, "output WAV")->required();
  add_seed(c_attack);
  add_manifest(c_attack);

  CLI::App* c_eval = app.add_subcommand("evaluate", "robustness table over an attack grid");
  c_eval->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--data", data, "dataset spec")->required();
  c_eval->add_option("--attacks", attacks, "pipe-separated attack list (default: standard grid)");
  c_eval->add_option("--out", out_path, "write the rendered report here");
  c_eval->add_option("--jsonl", jsonl, "write per-row JSONL here");
  c_eval->add_option("--pesq-tool", pesq_tool, "external PESQ binary (overrides $" +
                                                   std::string(kPesqEnvVar) + ")");
  add_seed(c_eval);
  add_manifest(c_eval);

  CLI::App* c_crop = app.add_subcommand("crop-study", "accuracy vs crop position and fraction");
  c_crop->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
  c_crop->add_option("--data", data, "dataset spec")->required();
  c_crop->add_option("--fractions", fractions, "comma-separated crop fractions (default 0,0.2,0.4,0.6,0.85)");
  c_crop->add_option("--out", out_path, "write CSV here");
  add_seed(c_crop);
  add_manifest(c_crop);

  CLI::App* c_locate = app.add_subcommand("locate", "sliding-window detection over a WAV");
  c_locate->add_option("--model", model, "checkpoint")->required()->check(CLI::ExistingFile);
  c_locate->add_option("--in", in_path, "input WAV")->required()->check(CLI::ExistingFile);
  c_locate->add_option("--window", window, "window seconds (default 1.0)");
  c_locate->add_option("--stride", stride, "stride seconds (default 0.05)");
  c_locate->add_option("--out", out_path, "write per-window CSV here");
  add_seed(c_locate);
  add_manifest(c_locate);

  CLI::App* c_sweep = app.add_subcommand("sweep", "capacity sweep across message lengths");
  c_sweep->add_option("--data", data, "dataset spec")->required();
  c_sweep->add_option("--bits", bits, "comma-separated n_bits list (default 32,64,96)");
  c_sweep->add_option("--models", models, "comma-separated checkpoints (overrides --bits)");
  c_sweep->add_option("--init-seed", init_seed, "init seed for fresh models");
  c_sweep->add_option("--out", out_path, "write CSV here");
  add_seed(c_sweep);
  add_manifest(c_sweep);

  CLI::App* c_eff = app.add_subcommand("efficiency", "parameter/FLOP/latency report");
  c_eff->add_option("--model", model, "checkpoint (default: fresh default-config model)")->check(CLI::ExistingFile);
  c_eff->add_option("--seconds", seconds, "clip length for timing (default 1.0)");
  c_eff->add_option("--runs", runs, "timing repetitions, >= 20");
  c_eff->add_option("--out", out_path, "write the report here");
  add_seed(c_eff);
  add_manifest(c_eff);

  CLI::App* c_replay = app.add_subcommand("replay", "re-execute a recorded run");
  c_replay->add_option("--manifest", replay_manifest, "manifest from a previous run")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json o;
    auto put = [&o](CLI::App* sub, const std::string& flag, const std::string& key,
                    const json& value) {
      if (sub->count("--" + flag) > 0) o[key] = value;
    };
    if (*c_replay) return cmd_replay(replay_manifest);

    if (*c_train) {
      o["data"] = data;
      o["out"] = out_path;
      put(c_train, "config", "config", config);
      put(c_train, "model-config", "model_config", model_config);
      put(c_train, "init-model", "init_model", init_model);
      put(c_train, "metrics", "metrics", metrics);
      put(c_train, "checkpoint-dir", "checkpoint_dir", checkpoint_dir);
      put(c_train, "steps1", "steps1", steps1);
      put(c_train, "steps2", "steps2", steps2);
      put(c_train, "seed", "seed", seed);
      put(c_train, "manifest", "manifest", manifest);
      return dispatch("train", o);
    }
    if (*c_embed) {
      o["model"] = model;
      o["in"] = in_path;
      o["out"] = out_path;
      o["bits"] = bits;
      o["raw_bits"] = raw_bits;
      o["seed"] = seed;
      put(c_embed, "manifest", "manifest", manifest);
      return dispatch("embed", o);
    }
    if (*c_extract) {
      o["model"] = model;
      o["in"] = in_path;
      o["seed"] = seed;
      put(c_extract, "out", "out", out_path);
      put(c_extract, "manifest", "manifest", manifest);
      return dispatch("extract", o);
    }
    if (*c_attack) {
      o["chain"] = chain;
      o["in"] = in_path;
      o["out"] = out_path;
      o["seed"] = seed;
      put(c_attack, "manifest", "manifest", manifest);
      return dispatch("attack", o);
    }
    if (*c_eval) {
      o["model"] = model;
      o["data"] = data;
      o["seed"] = seed;
      put(c_eval, "attacks", "attacks", attacks);
      put(c_eval, "out", "out", out_path);
      put(c_eval, "jsonl", "jsonl", jsonl);
      put(c_eval, "pesq-tool", "pesq_tool", pesq_tool);
      put(c_eval, "manifest", "manifest", manifest);
      return dispatch("evaluate", o);
    }
    if (*c_crop) {
      o["model"] = model;
      o["data"] = data;
      o["seed"] = seed;
      put(c_crop, "fractions", "fractions", fractions);
      put(c_crop, "out", "out", out_path);
      put(c_crop, "manifest", "manifest", manifest);
      return dispatch("crop-study", o);
    }
    if (*c_locate) {
      o["model"] = model;
      o["in"] = in_path;
      o["seed"] = seed;
      o["window"] = window;
      o["stride"] = stride;
      put(c_locate, "out", "out", out_path);
      put(c_locate, "manifest", "manifest", manifest);
      return dispatch("locate", o);
    }
    if (*c_sweep) {
      o["data"] = data;
      o["seed"] = seed;
      put(c_sweep, "bits", "bits", bits);
      put(c_sweep, "models", "models", models);
      put(c_sweep, "init-seed", "init_seed", init_seed);
      put(c_sweep, "out", "out", out_path);
      put(c_sweep, "manifest", "manifest", manifest);
      return dispatch("sweep", o);
    }
    if (*c_eff) {
      o["seed"] = seed;
      o["seconds"] = seconds;
      o["runs"] = runs;
      put(c_eff, "model", "model", model);
      put(c_eff, "out", "out", out_path);
      put(c_eff, "manifest", "manifest", manifest);
      return dispatch("efficiency", o);
    }
  } catch (const SgError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;  // unreachable: require_subcommand(1) guarantees a branch above
}
