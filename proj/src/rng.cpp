// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/rng.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace svf {

namespace {

inline uint64_t splitmix64(uint64_t& x) {
  x += 0x9e3779b97f4a7c15ull;
  uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

inline uint64_t fnv1a(std::string_view s, uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Rng::Rng(uint64_t seed) : seed_(seed) {
  uint64_t x = seed;
  for (auto& w : s_) w = splitmix64(x);
}

uint64_t Rng::next_u64() {
  uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  // top 53 bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  // u1 in (0, 1] keeps the log finite
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925286766559 * u2;
  cached_ = r * std::sin(a);
  have_cached_ = true;
  return r * std::cos(a);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<int64_t>(next_u64());  // full 64-bit range
  // rejection sampling, no modulo bias
  uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return lo + static_cast<int64_t>(v % span);
}

Rng Rng::substream(std::string_view name) const {
  uint64_t h = fnv1a(name, 0xcbf29ce484222325ull);
  uint64_t x = seed_ ^ rotl(h, 17);
  return Rng(splitmix64(x));
}

Rng Rng::substream(std::string_view name, uint64_t a, uint64_t b) const {
  uint64_t h = fnv1a(name, 0xcbf29ce484222325ull);
  h ^= rotl(a + 0x9e3779b97f4a7c15ull, 29);
  h *= 0x100000001b3ull;
  h ^= rotl(b + 0xc2b2ae3d27d4eb4full, 47);
  uint64_t x = seed_ ^ rotl(h, 17);
  return Rng(splitmix64(x));
}

std::vector<uint64_t> Rng::state() const {
  return {seed_, s_[0], s_[1], s_[2], s_[3],
          have_cached_ ? 1ull : 0ull,
          std::bit_cast<uint64_t>(cached_)};
}

void Rng::set_state(const std::vector<uint64_t>& st) {
  if (st.size() != 7) throw std::invalid_argument("Rng::set_state: bad state size");
  seed_ = st[0];
  for (int i = 0; i < 4; ++i) s_[i] = st[static_cast<size_t>(i) + 1];
  have_cached_ = st[5] != 0;
  cached_ = std::bit_cast<double>(st[6]);
}

}  // namespace svf
