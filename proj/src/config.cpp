// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#include "svf/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace svf {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// The complete key registry with defaults. Anything not listed here is a
// config error, so typos fail loudly instead of silently using a default.
const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      {"seed", "7"},
      {"features.kind", "fbank64"},

      {"corpus.n_speakers", "20"},
      {"corpus.utt_per_speaker", "50"},
      {"corpus.conditions", "S4-N0"},
      {"corpus.holdout_per_speaker", "10"},

      {"model.variant", "2d"},
      {"model.width_mult", "1.0"},
      {"model.pool", "sap"},
      {"model.stages", "2,3,4,5"},
      {"model.use_fpm", "true"},
      {"model.use_se", "false"},
      {"model.embed_dim", "128"},

      {"vad.arch", "dnn"},
      {"vad.context", "11"},
      {"vad.dnn_hidden", "64"},
      {"vad.lstm_hidden", "42"},
      {"vad.cldnn_filters", "42"},

      {"train.epochs", "10"},
      {"train.batch", "64"},
      {"train.micro_batch", "16"},
      {"train.segment", "200"},
      {"train.lr_s", "0.1"},
      {"train.lr_v", "1e-7"},
      {"train.momentum", "0.9"},
      {"train.weight_decay", "1e-4"},
      {"train.lambda", "2.0"},
      {"train.delta", "0.7"},
      {"train.gamma", "0.5"},
      {"train.bptt", "50"},
      {"train.sas", "false"},

      {"pretrain.epochs", "3"},
      {"pretrain.batch_frames", "512"},
      {"pretrain.lr", "1e-3"},

      {"io.data_dir", ""},
      {"io.vad_init", ""},
      {"io.ckpt", ""},
      {"io.embeddings", ""},
      {"io.trials", ""},
      {"io.scores", ""},

      {"trials.n", "1000"},
      {"trials.balance", "0.5"},
      {"enroll.average", "false"},

      {"ablate.full_grid", "false"},
      {"ablate.seeds", "1"},
  };
  return defaults;
}

}  // namespace

Config::Config() : values_(default_values()) {}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second = value;
}

bool Config::known(const std::string& key) const { return values_.count(key) > 0; }

void Config::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  load_string(buf.str(), path);
}

void Config::load_string(const std::string& text, const std::string& origin) {
  std::istringstream f(text);
  const std::string path = origin.empty() ? "<string>" : origin;
  std::string line, section;
  int64_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    set(key, value);
  }
}

void Config::apply_override(const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("config: override must look like key=value, got '" +
                                assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("config: unknown key '" + key + "'");
  return it->second;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  size_t used = 0;
  int64_t out;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " = '" + v + "' is not an integer");
  }
  if (used != v.size())
    throw std::invalid_argument("config: " + key + " = '" + v + "' is not an integer");
  return out;
}

uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  size_t used = 0;
  uint64_t out;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " = '" + v + "' is not an unsigned integer");
  }
  if (used != v.size() || v.front() == '-')
    throw std::invalid_argument("config: " + key + " = '" + v + "' is not an unsigned integer");
  return out;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  size_t used = 0;
  double out;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " = '" + v + "' is not a number");
  }
  if (used != v.size())
    throw std::invalid_argument("config: " + key + " = '" + v + "' is not a number");
  return out;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " = '" + v + "' is not a boolean");
}

std::string Config::resolved_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

void Config::write_resolved(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path + " for writing");
  f << resolved_text();
  if (!f) throw std::runtime_error("config: write failed for " + path);
}

std::vector<Condition> parse_conditions(const std::string& text) {
  std::vector<Condition> out;
  std::stringstream ss(text);
  std::string entry;
  while (std::getline(ss, entry, ';')) {
    entry = trim(entry);
    if (entry.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream es(entry);
    std::string p;
    while (std::getline(es, p, ':')) parts.push_back(trim(p));
    if (parts.empty() || parts.size() > 3)
      throw std::invalid_argument("conditions: malformed entry '" + entry + "'");

    Condition c;
    int s = 0, n = 0;
    char extra = 0;
    if (std::sscanf(parts[0].c_str(), "S%d-N%d%c", &s, &n, &extra) != 2)
      throw std::invalid_argument("conditions: entry '" + entry +
                                  "' must start with Sx-Ny");
    c.S = s;
    c.N = n;
    if (parts.size() >= 2) {
      if (parts[1] == "clean") {
        c.snr_db = std::numeric_limits<double>::infinity();
      } else {
        try {
          size_t used = 0;
          c.snr_db = std::stod(parts[1], &used);
          if (used != parts[1].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
          throw std::invalid_argument("conditions: bad snr '" + parts[1] + "' in '" +
                                      entry + "'");
        }
      }
    }
    if (parts.size() == 3) {
      if (parts[2] != "none" && parts[2] != "reverb")
        (void)noise_kind_from_string(parts[2]);  // validates
      c.distortion = parts[2];
    }
    out.push_back(c);
  }
  if (out.empty()) throw std::invalid_argument("conditions: empty list");
  return out;
}

}  // namespace svf
