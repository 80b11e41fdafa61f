// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_WAV_HPP
#define SVF_WAV_HPP

#include <string>
#include <vector>

namespace svf {

// PCM 16-bit signed little-endian, mono. Samples are scaled to [-1, 1).
std::vector<double> read_wav(const std::string& path, int expect_rate = 16000);
void write_wav(const std::string& path, const std::vector<double>& samples,
               int rate = 16000);

}  // namespace svf

#endif
