// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace svf {

namespace {

constexpr char kMagic[] = "SVUF1\n";
constexpr size_t kMagicLen = 6;

struct Entry {
  std::string name;
  std::string kind;  // param | buffer | opt | series
  std::vector<int64_t> shape;
  const double* src = nullptr;
  int64_t count = 0;
};

void append_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t parse_u64(const char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& ps, const Optimizer* opt,
                     const CheckpointData& extra) {
  // Entries in a fixed (kind, name) order; the source maps are std::map, so
  // iteration within each kind is already sorted by name.
  std::vector<Entry> entries;
  for (const auto& [name, t] : ps.params())
    entries.push_back({name, "param", t->shape, t->data.data(), t->numel()});
  for (const auto& [name, t] : ps.buffers())
    entries.push_back({name, "buffer", t->shape, t->data.data(), t->numel()});
  if (opt) {
    for (const auto& [name, a] : opt->slots())
      entries.push_back({name, "opt", {a.size()}, a.data(), a.size()});
  }
  for (const auto& [name, a] : extra.series)
    entries.push_back({name, "series", {a.size()}, a.data(), a.size()});

  nlohmann::json manifest;
  manifest["meta"] = extra.meta;
  nlohmann::json jentries = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json je;
    je["name"] = e.name;
    je["kind"] = e.kind;
    je["shape"] = e.shape;
    je["count"] = e.count;
    jentries.push_back(je);
  }
  manifest["entries"] = jentries;
  const std::string mtext = manifest.dump();

  std::string head(kMagic, kMagicLen);
  append_u64(head, mtext.size());

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(head.data(), static_cast<std::streamsize>(head.size()));
  f.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& e : entries)
    f.write(reinterpret_cast<const char*>(e.src),
            static_cast<std::streamsize>(e.count * static_cast<int64_t>(sizeof(double))));
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

namespace {

// Reads and validates the container, returning the parsed manifest and the
// payload start offset.
nlohmann::json read_manifest_blob(const std::string& path, std::string* blob) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic, kMagicLen) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  const uint64_t mlen = parse_u64(bytes.data() + kMagicLen);
  if (bytes.size() < kMagicLen + 8 + mlen)
    throw std::runtime_error("load_checkpoint: " + path + " is truncated in the manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(kMagicLen + 8, mlen));
  } catch (const nlohmann::json::exception&) {
    throw std::runtime_error("load_checkpoint: " + path + " has a corrupt manifest");
  }
  *blob = bytes.substr(kMagicLen + 8 + mlen);
  return manifest;
}

}  // namespace

CheckpointData load_checkpoint(const std::string& path, ParamStore& ps, Optimizer* opt,
                               bool partial) {
  std::string payload;
  const nlohmann::json manifest = read_manifest_blob(path, &payload);

  CheckpointData out;
  for (auto it = manifest.at("meta").begin(); it != manifest.at("meta").end(); ++it)
    out.meta[it.key()] = it.value().get<std::string>();

  int64_t n_params = 0, n_buffers = 0;
  size_t offset = 0;
  if (opt) opt->slots().clear();
  for (const auto& je : manifest.at("entries")) {
    const std::string name = je.at("name").get<std::string>();
    const std::string kind = je.at("kind").get<std::string>();
    const int64_t count = je.at("count").get<int64_t>();
    const size_t bytes = static_cast<size_t>(count) * sizeof(double);
    if (offset + bytes > payload.size())
      throw std::runtime_error("load_checkpoint: " + path + " is truncated in entry " + name);
    const double* src = reinterpret_cast<const double*>(payload.data() + offset);

    if (kind == "param" || kind == "buffer") {
      const ParamMap& store = kind == "param" ? ps.params() : ps.buffers();
      auto found = store.find(name);
      if (found == store.end())
        throw std::runtime_error("load_checkpoint: model has no " + kind + " named " + name);
      const Shape shape = je.at("shape").get<Shape>();
      if (found->second->shape != shape || found->second->numel() != count)
        throw std::runtime_error("load_checkpoint: shape mismatch for " + name +
                                 " (checkpoint " + shape_str(shape) + ", model " +
                                 shape_str(found->second->shape) + ")");
      for (int64_t i = 0; i < count; ++i) found->second->data[i] = src[i];
      (kind == "param" ? n_params : n_buffers) += 1;
    } else if (kind == "opt") {
      if (opt) {
        Eigen::ArrayXd a(count);
        for (int64_t i = 0; i < count; ++i) a[i] = src[i];
        opt->slots()[name] = std::move(a);
      }
    } else if (kind == "series") {
      Eigen::ArrayXd a(count);
      for (int64_t i = 0; i < count; ++i) a[i] = src[i];
      out.series[name] = std::move(a);
    } else {
      throw std::runtime_error("load_checkpoint: unknown entry kind " + kind);
    }
    offset += bytes;
  }
  if (offset != payload.size())
    throw std::runtime_error("load_checkpoint: " + path + " has trailing bytes");
  if (partial) return out;
  if (n_params != static_cast<int64_t>(ps.params().size()))
    throw std::runtime_error("load_checkpoint: checkpoint covers " + std::to_string(n_params) +
                             " of " + std::to_string(ps.params().size()) +
                             " model parameters");
  if (n_buffers != static_cast<int64_t>(ps.buffers().size()))
    throw std::runtime_error("load_checkpoint: checkpoint covers " + std::to_string(n_buffers) +
                             " of " + std::to_string(ps.buffers().size()) + " model buffers");
  return out;
}

std::map<std::string, std::string> read_checkpoint_meta(const std::string& path) {
  std::string payload;
  const nlohmann::json manifest = read_manifest_blob(path, &payload);
  std::map<std::string, std::string> meta;
  for (auto it = manifest.at("meta").begin(); it != manifest.at("meta").end(); ++it)
    meta[it.key()] = it.value().get<std::string>();
  return meta;
}

}  // namespace svf
