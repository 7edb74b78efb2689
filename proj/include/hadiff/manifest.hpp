// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hadiff/config.hpp"
#include "hadiff/geometry.hpp"
#include "hadiff/graph.hpp"

namespace hadiff {

/// One dataset case: tab-separated line of
///   case_id  unbound_receptor  unbound_ligand  bound_complex  [emb_r  emb_l  [irmsd]]
/// with "-" for an absent embedding file.
struct CaseManifest {
  std::string case_id;
  std::string unbound_receptor_path;
  std::string unbound_ligand_path;
  std::string bound_complex_path;
  std::optional<std::string> receptor_embedding_path;
  std::optional<std::string> ligand_embedding_path;
  std::optional<double> irmsd_override;
};

std::vector<CaseManifest> load_manifest(const std::string& path);

/// Per-residue evolutionary embeddings: one whitespace-separated record per
/// residue (chain id, residue number, then `width` floats), in chain order.
MatX read_embedding_file(const std::string& path, const ChainState& chain, int width);

struct LoadedCase {
  std::string case_id;
  ComplexState unbound;             // as given (sampling prior placement)
  ComplexState unbound_superposed;  // chains Kabsch-aligned onto bound
  ComplexState bound;
  ComplexFeatures features;         // computed on the unbound chains
  double true_irmsd = 0.0;          // unbound-vs-bound interface RMSD
  std::optional<double> irmsd_override;
};

/// Parse structures, verify correspondence, superpose, compute NMA features.
LoadedCase load_case(const CaseManifest& manifest, const RunConfig& config);

}  // namespace hadiff
