// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace svf {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ofstream& f, uint32_t v) {
  uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                  static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

void wr_u16(std::ofstream& f, uint16_t v) {
  uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
  f.write(reinterpret_cast<const char*>(b), 2);
}

}  // namespace

std::vector<double> read_wav(const std::string& path, int expect_rate) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open wav file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error("not a RIFF/WAVE file: " + path);

  size_t pos = 12;
  bool have_fmt = false;
  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    const uint32_t sz = rd_u32(bytes.data() + pos + 4);
    if (pos + 8 + sz > bytes.size())
      throw std::runtime_error("truncated wav chunk in " + path);
    const uint8_t* body = bytes.data() + pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw std::runtime_error("malformed fmt chunk in " + path);
      const uint16_t fmt = rd_u16(body);
      channels = rd_u16(body + 2);
      rate = rd_u32(body + 4);
      bits = rd_u16(body + 14);
      if (fmt != 1) throw std::runtime_error("only PCM wav supported: " + path);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      data_len = sz;
    }
    pos += 8 + sz + (sz & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !data) throw std::runtime_error("wav missing fmt or data chunk: " + path);
  if (channels != 1) throw std::runtime_error("wav must be mono: " + path);
  if (bits != 16) throw std::runtime_error("wav must be 16-bit PCM: " + path);
  if (expect_rate > 0 && rate != static_cast<uint32_t>(expect_rate))
    throw std::runtime_error("wav sample rate " + std::to_string(rate) + " != expected " +
                             std::to_string(expect_rate) + ": " + path);

  const size_t n = data_len / 2;
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    const int16_t s = static_cast<int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
    out[i] = static_cast<double>(s) / 32768.0;
  }
  return out;
}

void write_wav(const std::string& path, const std::vector<double>& samples, int rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write wav file: " + path);
  const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  f.write("RIFF", 4);
  wr_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, 1);  // PCM
  wr_u16(f, 1);  // mono
  wr_u32(f, static_cast<uint32_t>(rate));
  wr_u32(f, static_cast<uint32_t>(rate) * 2);  // byte rate
  wr_u16(f, 2);                                // block align
  wr_u16(f, 16);                               // bits
  f.write("data", 4);
  wr_u32(f, data_len);
  for (double v : samples) {
    const long q = std::lround(std::clamp(v, -1.0, 1.0) * 32768.0);
    const int16_t s = static_cast<int16_t>(std::clamp<long>(q, -32768, 32767));
    wr_u16(f, static_cast<uint16_t>(s));
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

}  // namespace svf
