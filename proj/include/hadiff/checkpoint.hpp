// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>

#include "hadiff/score_model.hpp"

namespace hadiff {

/// Versioned binary container (magic "HDCKPT1"): hyperparameter header plus
/// named little-endian f64 tensors for the score model and the iRMSD
/// regressor. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& score_params,
                     const ModelParams& irmsd_params);

std::pair<ModelParams, ModelParams> load_checkpoint(const std::string& path);

}  // namespace hadiff
