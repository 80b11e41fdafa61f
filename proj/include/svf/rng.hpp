// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_RNG_HPP
#define SVF_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace svf {

// Deterministic generator (xoshiro256++ seeded through splitmix64).
//
// All randomness in the project flows from one master seed through named
// substreams, so two runs that differ in one component draw identical values
// everywhere else. Substream derivation depends only on the seed and the
// name/index arguments, never on draw order.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // [0, 1)
  double uniform();
  // [lo, hi)
  double uniform(double lo, double hi);
  // standard normal, Box-Muller (library distributions are not portable
  // bit-for-bit, this one is)
  double normal();
  // [lo, hi] inclusive, unbiased
  int64_t uniform_int(int64_t lo, int64_t hi);

  // Independent generator derived from this one's seed and the given key.
  Rng substream(std::string_view name) const;
  Rng substream(std::string_view name, uint64_t a, uint64_t b = 0) const;

  uint64_t seed() const { return seed_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = uniform_int(0, i);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  // 16-hex-digit serialization of the full state, for checkpoints
  std::vector<uint64_t> state() const;
  void set_state(const std::vector<uint64_t>& s);

 private:
  uint64_t seed_;
  uint64_t s_[4];
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace svf

#endif
