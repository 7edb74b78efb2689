// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "hadiff/losses.hpp"
#include "hadiff/nma.hpp"
#include "hadiff/schedules.hpp"
#include "hadiff/score_model.hpp"

namespace hadiff {

/// Everything the CLI and pipeline can tune, one flat key = value namespace.
struct RunConfig {
  GlobalSchedule schedule;
  ModelConfig model;
  LossWeights weights;

  // sampler
  int sampler_steps = 40;
  bool sampler_stochastic = true;
  int sampler_candidates = 8;

  // NMA features
  double nma_cutoff = kAnmCutoff;
  int nma_modes = kAnmModeCount;

  // training
  double learning_rate = 1e-3;
  double irmsd_learning_rate = 1e-3;
  int train_steps = 2000;
  int log_every = 50;

  // IGSO(3) table cache
  std::string table_path = "igso3_table.bin";

  // global flags
  std::uint64_t seed = 0;
  int threads = 1;
  bool deterministic = false;

  void apply(const std::string& key, const std::string& value);
  void validate() const;
};

/// Flat `key = value` text; '#' comments and blank lines ignored. Unknown
/// keys raise ConfigError listing the registry.
RunConfig parse_config_file(const std::string& path, RunConfig base = {});

const std::vector<std::string>& config_keys();

}  // namespace hadiff
