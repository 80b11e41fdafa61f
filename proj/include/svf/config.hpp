// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SVF_CONFIG_HPP
#define SVF_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "svf/corpus.hpp"

namespace svf {

// Flat key/value run configuration with a closed key registry. Values start
// from the built-in defaults, then an INI file, then command-line overrides;
// unknown keys are rejected by name at every layer. The fully resolved state
// can be dumped next to run outputs and read back.
class Config {
 public:
  Config();  // defaults

  // INI with [section] headers: "key = value" becomes "section.key".
  // '#' starts a comment.
  void load_file(const std::string& path);
  // Same syntax from an in-memory string (checkpoint meta); origin names the
  // source in diagnostics.
  void load_string(const std::string& text, const std::string& origin = "");
  // "key=value" as given on the command line.
  void apply_override(const std::string& assignment);

  void set(const std::string& key, const std::string& value);
  bool known(const std::string& key) const;

  const std::string& get(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;  // true/false/1/0/yes/no

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Sorted "key = value" lines, loadable by load_file.
  std::string resolved_text() const;
  void write_resolved(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
};

// "S4-N0" or "S1-N6:10:white" or "S2-N2:clean:reverb", ';'-separated.
// The second field is an SNR in dB or "clean", the third a distortion name.
std::vector<Condition> parse_conditions(const std::string& text);

}  // namespace svf

#endif
