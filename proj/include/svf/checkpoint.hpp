// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_CHECKPOINT_HPP
#define SVF_CHECKPOINT_HPP

#include <Eigen/Core>
#include <map>
#include <string>

#include "svf/layers.hpp"
#include "svf/optim.hpp"

namespace svf {

// Free-form payload carried beside the parameters: short strings (config
// echo, serialized RNG state) and numeric series (loss history).
struct CheckpointData {
  std::map<std::string, std::string> meta;
  std::map<std::string, Eigen::ArrayXd> series;
};

// Single-file binary checkpoint: a magic line, a JSON manifest listing every
// entry with its kind and shape, then the raw little-endian doubles in
// manifest order. Writing is deterministic, so save -> load -> save is
// byte-identical.
void save_checkpoint(const std::string& path, const ParamStore& ps,
                     const Optimizer* opt = nullptr, const CheckpointData& extra = {});

// Restores parameter and buffer values into an already-built store whose
// names and shapes must match the manifest exactly; restores optimizer slots
// when an optimizer is given. Returns the meta/series payload. With partial
// set, the manifest may cover a subset of the store (used to seed a joint
// model from a single-network checkpoint); every listed entry must still
// match by name and shape.
CheckpointData load_checkpoint(const std::string& path, ParamStore& ps,
                               Optimizer* opt = nullptr, bool partial = false);

// Manifest meta only, without needing a model.
std::map<std::string, std::string> read_checkpoint_meta(const std::string& path);

}  // namespace svf

#endif
