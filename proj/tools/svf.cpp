// Copyright 2026 the svf authors
// SPDX-License-Identifier: Apache-2.0
//
// svf: speaker-verification workbench.
//
//   svf synth-data --out data/            generate a labeled corpus + trials
//   svf train-vad  --out runs/vad  --set io.data_dir=data
//   svf train      --out runs/sv   --set io.data_dir=data [--set train.sas=true]
//   svf enroll     --out runs/emb  --set io.ckpt=runs/sv/model.ckpt ...
//   svf score      --out runs/sc   --set io.embeddings=... --set io.trials=...
//   svf eval       --out runs/ev   --set io.scores=runs/sc/scores.csv
//   svf ablate     --out runs/abl  --set io.data_dir=data
//   svf gradcheck  --out runs/gc
//
// Flags common to every subcommand: --config FILE, --seed N, --out DIR and
// repeatable --set key=value overrides. Precedence: defaults, then the config
// file, then --set in order, then --seed. Every run writes its resolved
// configuration into the output directory.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svf/config.hpp"
#include "svf/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"speaker-verification workbench"};
  app.require_subcommand(1);

  struct Common {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::string seed;
  };
  std::vector<std::pair<std::string, Common>> subs;
  for (const char* name : {"synth-data", "train-vad", "train", "enroll", "score", "eval",
                           "ablate", "gradcheck"}) {
    subs.emplace_back(name, Common{});
  }
  for (auto& [name, common] : subs) {
    CLI::App* sc = app.add_subcommand(name);
    sc->add_option("--config", common.config_path, "configuration file (INI)");
    sc->add_option("--seed", common.seed, "master random seed");
    sc->add_option("--out", common.out_dir, "output directory")->required();
    sc->add_option("--set", common.overrides, "override, key=value (repeatable)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? svf::kExitOk : svf::kExitUsage;
  }

  for (const auto& [name, common] : subs) {
    if (!app.get_subcommand(name)->parsed()) continue;
    try {
      svf::Config cfg;
      if (!common.config_path.empty()) cfg.load_file(common.config_path);
      for (const auto& ov : common.overrides) cfg.apply_override(ov);
      if (!common.seed.empty()) cfg.set("seed", common.seed);
      return svf::run_pipeline(name, cfg, common.out_dir);
    } catch (const std::exception& e) {
      std::cerr << "svf: " << e.what() << "\n";
      return svf::kExitUsage;
    }
  }
  return svf::kExitUsage;
}
