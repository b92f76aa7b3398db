#pragma once

// Minimal RIFF/WAVE PCM16 reader and writer. The core pipeline is fixed to
// 16-bit PCM WAV; anything else is a format error.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "syncguard/common.hpp"

namespace syncguard {

struct WavData {
  std::vector<std::vector<float>> channels;  // [channel][sample], in [-1, 1]
  int sample_rate = 0;
};

namespace wav_detail {

inline uint32_t read_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
         uint32_t(p[3]) << 24;
}
inline uint16_t read_u16(const uint8_t* p) {
  return uint16_t(p[0]) | uint16_t(p[1]) << 8;
}
inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}
inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

}  // namespace wav_detail

inline WavData read_wav(const std::string& path) {
  using namespace wav_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::io, "read failed: " + path);
  if (bytes.size() < 44) fail(ErrorKind::format, "not a WAV file: " + path);
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorKind::format, "not a RIFF/WAVE file: " + path);

  int channels = 0, bits = 0, rate = 0;
  uint16_t fmt_tag = 0;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    const uint8_t* body = hdr + 8;
    if (pos + 8 + chunk_len > bytes.size())
      chunk_len = uint32_t(bytes.size() - pos - 8);
    if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_len >= 16) {
      fmt_tag = read_u16(body);
      channels = read_u16(body + 2);
      rate = int(read_u32(body + 4));
      bits = read_u16(body + 14);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (channels <= 0 || rate <= 0 || data == nullptr)
    fail(ErrorKind::format, "missing fmt/data chunk: " + path);
  if (fmt_tag != 1 || bits != 16)
    fail(ErrorKind::format, "unsupported encoding (PCM16 required): " + path);

  size_t frames = data_len / (size_t(channels) * 2);
  WavData out;
  out.sample_rate = rate;
  out.channels.assign(channels, std::vector<float>(frames));
  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const uint8_t* p = data + (i * channels + c) * 2;
      int16_t q = int16_t(read_u16(p));
      out.channels[c][i] = float(q) / 32768.0f;
    }
  }
  return out;
}

// Write interleaved PCM16. Samples are clamped to [-1, 1] before quantization.
inline void write_wav_channels(const std::string& path,
                               const std::vector<std::vector<float>>& channels,
                               int sample_rate) {
  using namespace wav_detail;
  require(!channels.empty(), ErrorKind::parameter, "write_wav: no channels");
  size_t frames = channels[0].size();
  for (const auto& c : channels)
    require(c.size() == frames, ErrorKind::parameter,
            "write_wav: channel length mismatch");
  uint16_t nch = uint16_t(channels.size());

  std::vector<uint8_t> b;
  b.reserve(44 + frames * nch * 2);
  uint32_t data_len = uint32_t(frames * nch * 2);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, 36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, 1);  // PCM
  put_u16(b, nch);
  put_u32(b, uint32_t(sample_rate));
  put_u32(b, uint32_t(sample_rate) * nch * 2);
  put_u16(b, uint16_t(nch * 2));  // block align
  put_u16(b, 16);                 // bits
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, data_len);
  for (size_t i = 0; i < frames; ++i) {
    for (uint16_t c = 0; c < nch; ++c) {
      double x = double(channels[c][i]);
      if (x > 1.0) x = 1.0;
      if (x < -1.0) x = -1.0;
      long q = std::lround(x * 32768.0);
      if (q > 32767) q = 32767;
      if (q < -32768) q = -32768;
      put_u16(b, uint16_t(int16_t(q)));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

inline void write_wav(const std::string& path, const std::vector<float>& samples,
                      int sample_rate) {
  write_wav_channels(path, {samples}, sample_rate);
}

}  // namespace syncguard
