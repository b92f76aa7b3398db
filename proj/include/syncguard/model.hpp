#pragma once

// The watermark codec: a message-conditioned spectrogram encoder that writes
// a residual onto the magnitude carrier, a fully convolutional decoder that
// votes over frames, and a small waveform discriminator for the adversarial
// stage. One parameter store backs all three.
//
// Layout conventions: spectrogram features are [C, T, H] (channels, frames,
// bins), stride-1 convolutions with same padding and per-axis dilation.

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "syncguard/autodiff.hpp"
#include "syncguard/nn.hpp"
#include "syncguard/spectral.hpp"
#include "syncguard/stft.hpp"

namespace syncguard {

// ---------------------------------------------------------------------------
// Messages. A message is n_bits long; the first pattern_len bits are a fixed
// sync pattern used to validate detections, the rest carry payload.
// ---------------------------------------------------------------------------

constexpr uint8_t kSyncPattern[8] = {1, 0, 1, 1, 0, 0, 1, 0};

inline std::vector<uint8_t> pattern_bits(int k) {
  std::vector<uint8_t> p(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) p[size_t(i)] = kSyncPattern[i % 8];
  return p;
}

struct Message {
  std::vector<uint8_t> bits;  // 0/1, pattern prefix included

  static Message random(int n_bits, int pattern_len, Rng& rng) {
    Message m;
    m.bits = pattern_bits(pattern_len);
    m.bits.resize(size_t(n_bits));
    for (int i = pattern_len; i < n_bits; ++i) m.bits[size_t(i)] = uint8_t(rng.below(2));
    return m;
  }

  // All n bits uniform, pattern positions included. Training and accuracy
  // benchmarks draw these so every bit position is exercised symmetrically;
  // the fixed sync prefix is a deployment convention layered on top.
  static Message random_uniform(int n_bits, Rng& rng) {
    Message m;
    m.bits.resize(size_t(n_bits));
    for (int i = 0; i < n_bits; ++i) m.bits[size_t(i)] = uint8_t(rng.below(2));
    return m;
  }

  static Message from_payload(int n_bits, int pattern_len,
                              const std::vector<uint8_t>& payload) {
    require(long(payload.size()) == n_bits - pattern_len, ErrorKind::parameter,
            "payload must have n_bits - pattern_len bits");
    Message m;
    m.bits = pattern_bits(pattern_len);
    m.bits.insert(m.bits.end(), payload.begin(), payload.end());
    return m;
  }

  bool pattern_ok(int pattern_len) const {
    auto p = pattern_bits(pattern_len);
    if (bits.size() < p.size()) return false;
    for (size_t i = 0; i < p.size(); ++i)
      if (bits[i] != p[i]) return false;
    return true;
  }
};

inline std::vector<uint8_t> parse_bit_string(const std::string& s) {
  std::vector<uint8_t> bits;
  for (char c : s) {
    if (c == '0')
      bits.push_back(0);
    else if (c == '1')
      bits.push_back(1);
    else
      fail(ErrorKind::parameter, std::string("invalid bit character '") + c + "'");
  }
  return bits;
}

inline std::vector<uint8_t> parse_hex_string(const std::string& s) {
  std::vector<uint8_t> bits;
  for (char c : s) {
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = 10 + c - 'a';
    else if (c >= 'A' && c <= 'F')
      v = 10 + c - 'A';
    else
      fail(ErrorKind::parameter, std::string("invalid hex character '") + c + "'");
    for (int b = 3; b >= 0; --b) bits.push_back(uint8_t((v >> b) & 1));
  }
  return bits;
}

inline std::string format_bit_string(const std::vector<uint8_t>& bits) {
  std::string s;
  for (uint8_t b : bits) s += b ? '1' : '0';
  return s;
}

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct ModelConfig {
  int n_bits = 32;       // total message length, sync pattern included
  int pattern_len = 8;   // leading bits pinned to the sync pattern
  int c_w = 32;          // expanded message channels
  int c_v = 32;          // carrier feature channels
  int width = 32;        // trunk channels
  int c_dec = 16;        // decoder head channels before pooling
  int enc_blocks = 8;    // encoder trunk blocks (alternating residual/gated)
  int dec_blocks = 4;    // decoder trunk blocks
  int disc_width = 16;   // discriminator base channels
  double mu = 1.0;       // residual embed strength
  uint64_t init_seed = 1234;
  StftConfig stft;

  void validate() const {
    stft.validate();
    require(n_bits >= 1 && pattern_len >= 1 && pattern_len < n_bits, ErrorKind::config,
            "need 1 <= pattern_len < n_bits");
    require(c_w >= 1 && c_v >= 1 && width >= 1 && c_dec >= 1, ErrorKind::config,
            "channel counts must be positive");
    require(enc_blocks >= 1 && dec_blocks >= 1, ErrorKind::config,
            "block counts must be positive");
    require(mu > 0.0, ErrorKind::config, "mu must be positive");
  }

  bool operator==(const ModelConfig& o) const {
    return n_bits == o.n_bits && pattern_len == o.pattern_len && c_w == o.c_w &&
           c_v == o.c_v && width == o.width && c_dec == o.c_dec &&
           enc_blocks == o.enc_blocks && dec_blocks == o.dec_blocks &&
           disc_width == o.disc_width && mu == o.mu && stft == o.stft;
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"n_bits", c.n_bits},
          {"pattern_len", c.pattern_len},
          {"c_w", c.c_w},
          {"c_v", c.c_v},
          {"width", c.width},
          {"c_dec", c.c_dec},
          {"enc_blocks", c.enc_blocks},
          {"dec_blocks", c.dec_blocks},
          {"disc_width", c.disc_width},
          {"mu", c.mu},
          {"init_seed", c.init_seed},
          {"stft",
           {{"fft_size", c.stft.fft_size},
            {"hop_length", c.stft.hop_length},
            {"window_length", c.stft.window_length}}}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_bits = j.at("n_bits").get<int>();
  c.pattern_len = j.at("pattern_len").get<int>();
  c.c_w = j.at("c_w").get<int>();
  c.c_v = j.at("c_v").get<int>();
  c.width = j.at("width").get<int>();
  c.c_dec = j.at("c_dec").get<int>();
  c.enc_blocks = j.at("enc_blocks").get<int>();
  c.dec_blocks = j.at("dec_blocks").get<int>();
  c.disc_width = j.at("disc_width").get<int>();
  c.mu = j.at("mu").get<double>();
  c.init_seed = j.at("init_seed").get<uint64_t>();
  const auto& s = j.at("stft");
  c.stft.fft_size = s.at("fft_size").get<int>();
  c.stft.hop_length = s.at("hop_length").get<int>();
  c.stft.window_length = s.at("window_length").get<int>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Codec.
// ---------------------------------------------------------------------------

struct ExtractResult {
  std::vector<uint8_t> bits;
  std::vector<float> soft;
  bool pattern_ok = false;
};

template <typename T>
class Codec {
 public:
  using Var = ad::VarPtr<T>;
  using Vars = std::vector<ad::VarPtr<T>>;

  explicit Codec(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(cfg_.init_seed, 0x1717));
    const long h = cfg_.stft.bins();
    const long w = cfg_.width, cw = cfg_.c_w, cv = cfg_.c_v;

    // Encoder.
    add_lin("enc.expand", cw * h, cfg_.n_bits, rng, 0.02);
    add_conv("enc.carrier", cv, 1, 3, 3, rng);
    add_conv("enc.in_proj", w, cv + 1 + cw, 1, 1, rng);
    for (int b = 0; b < cfg_.enc_blocks; ++b) {
      std::string p = "enc.b" + std::to_string(b);
      if (b % 2 == 0) {
        add_conv(p + ".c1", w, w, 3, 3, rng);
        add_conv(p + ".c2", w, w, 3, 3, rng);
      } else {
        add_conv(p + ".gv", w, w + 1 + cw, 3, 3, rng);
        add_conv(p + ".gg", w, w + 1 + cw, 3, 3, rng);
      }
    }
    add_conv("enc.head", 1, w, 3, 3, rng, /*zero=*/true);

    // Decoder.
    add_conv("dec.carrier", cv, 1, 3, 3, rng);
    add_conv("dec.in_proj", w, cv, 1, 1, rng);
    for (int b = 0; b < cfg_.dec_blocks; ++b) {
      std::string p = "dec.b" + std::to_string(b);
      if (b % 2 == 0) {
        add_conv(p + ".c1", w, w, 3, 3, rng);
        add_conv(p + ".c2", w, w, 3, 3, rng);
      } else {
        add_conv(p + ".gv", w, w + 1, 3, 3, rng);
        add_conv(p + ".gg", w, w + 1, 3, 3, rng);
      }
    }
    add_conv("dec.head", cfg_.c_dec, w, 3, 3, rng);
    add_lin("dec.fc", cfg_.n_bits, cfg_.c_dec * h, rng, 0.02);

    // Discriminator: strided waveform convs, global average, one logit.
    const long dw = cfg_.disc_width;
    const long chs[6] = {1, dw, 2 * dw, 4 * dw, 4 * dw, 4 * dw};
    for (int l = 0; l < 5; ++l)
      add_conv1d("disc.c" + std::to_string(l), chs[l + 1], chs[l], 15, rng);
    add_lin("disc.fc", 1, 4 * dw, rng, 0.02);
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore<T>& params() { return params_; }
  const nn::ParameterStore<T>& params() const { return params_; }

  Vars bind(ad::Tape<T>& tape) const { return params_.bind(tape); }

  // ---- graph-level pieces -------------------------------------------------

  // Message expansion: centered bits through one FC, shaped [c_w, 1, H].
  Var expand_message(ad::Tape<T>& tape, const Vars& vars, const Message& msg) const {
    require(long(msg.bits.size()) == cfg_.n_bits, ErrorKind::parameter,
            "message length does not match the model");
    Tensor<T> m({long(cfg_.n_bits)});
    for (int i = 0; i < cfg_.n_bits; ++i) m[i] = msg.bits[size_t(i)] ? T(1) : T(-1);
    Var mv = tape.constant(std::move(m));
    Var f = ad::linear(mv, at(vars, "enc.expand.w"), at(vars, "enc.expand.b"));
    return ad::reshape(f, {long(cfg_.c_w), 1L, long(cfg_.stft.bins())});
  }

  // Embed a message into a clip; returns the watermarked samples [M].
  Var embed_graph(ad::Tape<T>& tape, const Vars& vars, const AudioClip& clip,
                  const Message& msg) const {
    const SpectroPair sp = stft(clip, cfg_.stft);
    const long t_n = sp.frames, h = sp.bins;

    Tensor<T> mag = ad::mag_tensor<T>(sp);
    double mag_mean = 0.0;
    for (const auto& x : mag.v) mag_mean += double(x);
    mag_mean /= double(mag.numel());

    Var s = tape.constant(mag);  // [T, H]
    Var s1 = ad::reshape(ad::mean_normalize(s), {1L, t_n, long(h)});

    Var f_wb = ad::broadcast_time(expand_message(tape, vars, msg), t_n);
    Var f_c = ad::leaky_relu(conv(vars, "enc.carrier", s1), kSlope);
    Var x = ad::concat_channels<T>({f_c, s1, f_wb});
    x = conv(vars, "enc.in_proj", x);
    for (int b = 0; b < cfg_.enc_blocks; ++b)
      x = block(vars, "enc.b" + std::to_string(b), b, x, {s1, f_wb});
    Var r = conv(vars, "enc.head", x);  // [1, T, H], zero at init

    // Return the residual to carrier units before adding.
    Var s_w = ad::relu(ad::add(s, ad::reshape(ad::scale(r, cfg_.mu * (mag_mean + 1e-6)),
                                              {t_n, long(h)})));
    auto phase = std::make_shared<std::vector<double>>(sp.phase);
    return ad::var_istft(s_w, phase, cfg_.stft, clip.length());
  }

  // Decode soft bits in [0, 1] from samples (watermarked or attacked).
  Var extract_graph(ad::Tape<T>& tape, const Vars& vars, const Var& samples) const {
    auto sv = ad::var_stft(samples, cfg_.stft);
    const long t_n = sv.frames, h = sv.bins;

    Var d1 = ad::reshape(ad::mean_normalize(sv.mag), {1L, t_n, long(h)});
    Var x = ad::leaky_relu(conv(vars, "dec.carrier", d1), kSlope);
    x = conv(vars, "dec.in_proj", x);
    for (int b = 0; b < cfg_.dec_blocks; ++b)
      x = block(vars, "dec.b" + std::to_string(b), b, x, {d1});
    x = ad::leaky_relu(conv(vars, "dec.head", x), kSlope);
    Var pooled = ad::mean_time(x);  // [c_dec, H]
    Var flat = ad::reshape(pooled, {pooled->val.numel()});
    Var logits = ad::linear(flat, at(vars, "dec.fc.w"), at(vars, "dec.fc.b"));
    return ad::sigmoid(logits);
  }

  // Discriminator logit for a waveform Var.
  Var disc_graph(ad::Tape<T>& tape, const Vars& vars, const Var& samples) const {
    Var x = ad::reshape(samples, {1L, samples->val.numel()});
    for (int l = 0; l < 5; ++l) {
      std::string p = "disc.c" + std::to_string(l);
      x = ad::conv1d(x, at(vars, p + ".w"), at(vars, p + ".b"), 4, 7);
      x = ad::leaky_relu(x, kSlope);
    }
    // Global average over time, then the final projection.
    const long c_n = x->val.dim(0), len = x->val.dim(1);
    Var pooled = ad::mean_time(ad::reshape(x, {c_n, len, 1L}));  // [C, 1]
    Var flat = ad::reshape(pooled, {c_n});
    return ad::linear(flat, at(vars, "disc.fc.w"), at(vars, "disc.fc.b"));
  }

  // ---- value-level convenience ---------------------------------------------

  AudioClip embed_clip(const AudioClip& clip, const Message& msg) const {
    ad::Tape<T> tape;
    Vars vars = params_.bind(tape);
    for (auto& v : vars) v->needs_grad = false;  // inference: no backward graph
    Var aw = embed_graph(tape, vars, clip, msg);
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    out.samples.resize(size_t(aw->val.numel()));
    for (long i = 0; i < aw->val.numel(); ++i) out.samples[size_t(i)] = float(aw->val[i]);
    return out;
  }

  ExtractResult extract_clip(const AudioClip& clip) const {
    ad::Tape<T> tape;
    Vars vars = params_.bind(tape);
    for (auto& v : vars) v->needs_grad = false;
    Tensor<T> s({clip.length()});
    for (long i = 0; i < clip.length(); ++i) s[i] = T(clip.samples[size_t(i)]);
    Var soft = extract_graph(tape, vars, tape.constant(std::move(s)));
    ExtractResult r;
    r.soft.resize(size_t(cfg_.n_bits));
    r.bits.resize(size_t(cfg_.n_bits));
    for (int i = 0; i < cfg_.n_bits; ++i) {
      r.soft[size_t(i)] = float(soft->val[i]);
      r.bits[size_t(i)] = soft->val[i] > T(0.5) ? 1 : 0;
    }
    Message m;
    m.bits = r.bits;
    r.pattern_ok = m.pattern_ok(cfg_.pattern_len);
    return r;
  }

  // ---- bookkeeping ----------------------------------------------------------

  long param_count(nn::ParamGroup g) const { return params_.count(g); }

  // Analytic flops (multiply + add counted separately) for one embed or
  // extract of a clip with m samples.
  double flops_embed(long m) const {
    const double t = double(cfg_.stft.frames_for(m)), h = double(cfg_.stft.bins());
    const double fft = fft_flops(m);
    double f = 2.0 * cfg_.c_w * h * cfg_.n_bits;                    // expand
    f += conv_flops(cfg_.c_v, 1, 9, t, h);                          // carrier
    f += conv_flops(cfg_.width, cfg_.c_v + 1 + cfg_.c_w, 1, t, h);  // in_proj
    for (int b = 0; b < cfg_.enc_blocks; ++b)
      f += b % 2 == 0 ? 2.0 * conv_flops(cfg_.width, cfg_.width, 9, t, h)
                      : 2.0 * conv_flops(cfg_.width, cfg_.width + 1 + cfg_.c_w, 9, t, h);
    f += conv_flops(1, cfg_.width, 9, t, h);  // head
    return f + 2.0 * fft;                     // analysis + synthesis
  }

  double flops_extract(long m) const {
    const double t = double(cfg_.stft.frames_for(m)), h = double(cfg_.stft.bins());
    double f = conv_flops(cfg_.c_v, 1, 9, t, h);
    f += conv_flops(cfg_.width, cfg_.c_v, 1, t, h);
    for (int b = 0; b < cfg_.dec_blocks; ++b)
      f += b % 2 == 0 ? 2.0 * conv_flops(cfg_.width, cfg_.width, 9, t, h)
                      : 2.0 * conv_flops(cfg_.width, cfg_.width + 1, 9, t, h);
    f += conv_flops(cfg_.c_dec, cfg_.width, 9, t, h);
    f += 2.0 * cfg_.n_bits * cfg_.c_dec * h;
    return f + fft_flops(m);
  }

 private:
  static constexpr double kSlope = 0.1;

  double fft_flops(long m) const {
    const double t = double(cfg_.stft.frames_for(m));
    const double n = double(cfg_.stft.fft_size);
    return t * 5.0 * n * std::log2(n);
  }
  static double conv_flops(double co, double ci, double k, double t, double h) {
    return 2.0 * co * ci * k * t * h;
  }

  void add_conv(const std::string& name, long co, long ci, long kt, long kh, Rng& rng,
                bool zero = false, nn::ParamGroup g = nn::ParamGroup::codec) {
    Tensor<T> w = zero ? Tensor<T>({co, ci, kt, kh}) : nn::he_init<T>({co, ci, kt, kh}, rng);
    params_.add(name + ".w", std::move(w), g);
    params_.add(name + ".b", Tensor<T>({co}), g);
  }
  void add_conv1d(const std::string& name, long co, long ci, long k, Rng& rng) {
    params_.add(name + ".w", nn::he_init<T>({co, ci, k}, rng), nn::ParamGroup::disc);
    params_.add(name + ".b", Tensor<T>({co}), nn::ParamGroup::disc);
  }
  void add_lin(const std::string& name, long m, long n, Rng& rng, double stddev) {
    nn::ParamGroup g =
        name.rfind("disc.", 0) == 0 ? nn::ParamGroup::disc : nn::ParamGroup::codec;
    params_.add(name + ".w", randn<T>({m, n}, rng, stddev), g);
    params_.add(name + ".b", Tensor<T>({m}), g);
  }

  const Var& at(const Vars& vars, const std::string& name) const {
    return vars[params_.index.at(name)];
  }

  Var conv(const Vars& vars, const std::string& name, const Var& x, long d = 1) const {
    return ad::conv2d(x, at(vars, name + ".w"), at(vars, name + ".b"), d, d);
  }

  static long dilation_for(int block) {
    static const long cycle[4] = {1, 2, 4, 8};
    return cycle[block % 4];
  }

  // Even blocks: pre-activation residual pair. Odd blocks: gated conv with the
  // conditioning channels re-injected.
  Var block(const Vars& vars, const std::string& p, int b, const Var& x,
            const std::vector<Var>& cond) const {
    const long d = dilation_for(b);
    if (b % 2 == 0) {
      Var t1 = conv(vars, p + ".c1", ad::leaky_relu(x, kSlope), d);
      Var t2 = conv(vars, p + ".c2", ad::leaky_relu(t1, kSlope), d);
      return ad::add(x, t2);
    }
    std::vector<Var> parts = {x};
    parts.insert(parts.end(), cond.begin(), cond.end());
    Var xin = ad::concat_channels(parts);
    Var v = ad::tanh(conv(vars, p + ".gv", xin, d));
    Var g = ad::sigmoid(conv(vars, p + ".gg", xin, d));
    return ad::add(x, ad::mul(v, g));
  }

  ModelConfig cfg_;
  nn::ParameterStore<T> params_;
};

// ---------------------------------------------------------------------------
// Checkpoints: "SGCK" magic, version, JSON header, then raw f32 blobs in
// header order. Round trips are bit exact.
// ---------------------------------------------------------------------------

constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  int stage = 1;
  long step = 0;
};

inline void save_checkpoint(const std::string& path, const Codec<float>& codec,
                            const CheckpointMeta& meta) {
  nlohmann::json header;
  header["config"] = to_json(codec.config());
  header["stage"] = meta.stage;
  header["step"] = meta.step;
  header["dtype"] = "f32";
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& e : codec.params().entries) {
    plist.push_back({{"name", e.name},
                     {"shape", e.value.shape},
                     {"group", e.group == nn::ParamGroup::codec ? "codec" : "disc"}});
  }
  header["params"] = plist;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out.write("SGCK", 4);
  uint32_t ver = kCheckpointVersion;
  uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&ver), 4);
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), std::streamsize(hs.size()));
  for (const auto& e : codec.params().entries)
    out.write(reinterpret_cast<const char*>(e.value.data()),
              std::streamsize(e.value.numel() * long(sizeof(float))));
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

struct LoadedCheckpoint {
  ModelConfig config;
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

inline LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  char magic[4];
  uint32_t ver = 0;
  uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&ver), 4);
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || std::memcmp(magic, "SGCK", 4) != 0)
    fail(ErrorKind::checkpoint, "not a checkpoint file: " + path);
  if (ver != kCheckpointVersion)
    fail(ErrorKind::checkpoint, "unsupported checkpoint version");
  std::string hs(hlen, '\0');
  in.read(hs.data(), std::streamsize(hlen));
  if (!in) fail(ErrorKind::checkpoint, "truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::checkpoint, "corrupt checkpoint header");
  }

  LoadedCheckpoint lc;
  try {
    lc.config = model_config_from_json(header.at("config"));
    lc.meta.stage = header.at("stage").get<int>();
    lc.meta.step = header.at("step").get<long>();
    require(header.at("dtype").get<std::string>() == "f32", ErrorKind::checkpoint,
            "unsupported checkpoint dtype");
    for (const auto& p : header.at("params")) {
      std::vector<long> shape = p.at("shape").get<std::vector<long>>();
      Tensor<float> t(shape);
      in.read(reinterpret_cast<char*>(t.data()),
              std::streamsize(t.numel() * long(sizeof(float))));
      if (!in) fail(ErrorKind::checkpoint, "truncated checkpoint blob");
      lc.tensors.emplace_back(p.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::checkpoint, "malformed checkpoint header fields");
  }
  return lc;
}

inline Codec<float> load_codec(const std::string& path, CheckpointMeta* meta = nullptr) {
  LoadedCheckpoint lc = read_checkpoint(path);
  Codec<float> codec(lc.config);
  require(lc.tensors.size() == codec.params().entries.size(), ErrorKind::checkpoint,
          "checkpoint parameter list does not match the model");
  for (auto& [name, tensor] : lc.tensors) {
    auto& e = codec.params().at(name);
    require(e.value.shape == tensor.shape, ErrorKind::checkpoint,
            "checkpoint shape mismatch for " + name);
    e.value = std::move(tensor);
  }
  if (meta) *meta = lc.meta;
  return codec;
}

}  // namespace syncguard
