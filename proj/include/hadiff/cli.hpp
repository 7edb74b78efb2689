// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace hadiff {

/// Entry point for the `hadiff` tool. Subcommands: featurize, nma, noise,
/// train-toy, sample, eval, tables. Returns a process exit code (0 success,
/// 2 usage/configuration errors, 1 runtime failure).
int run_cli(const std::vector<std::string>& args);

}  // namespace hadiff
