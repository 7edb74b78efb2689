// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "hadiff/geometry.hpp"

namespace hadiff {

/// One residue's backbone atoms from a PDB file.
struct BackboneRecord {
  std::string chain_id;  // single character
  int residue_seq = 0;
  std::string res_name;  // 3-letter code
  Vec3 n = Vec3::Zero();
  Vec3 ca = Vec3::Zero();
  Vec3 c = Vec3::Zero();
};

struct PdbParseResult {
  std::vector<BackboneRecord> records;
  int dropped_residues = 0;  // residues missing any of N/CA/C
};

/// Fixed-column ATOM parser: N/CA/C only, altloc ' ' or 'A', first model.
/// Throws ParseError (with line number) on malformed coordinates and when no
/// complete residue survives.
PdbParseResult parse_pdb_backbone(const std::string& path);

/// 0..19 for the standard amino acids (alphabetical by 3-letter code),
/// 20 for anything else.
int aa_type_from_code(const std::string& three_letter);
const std::string& aa_code_from_type(int type);

/// Build a chain of frames from records (orientation via the Gram-Schmidt
/// backbone frame).
ChainState chain_from_records(const std::vector<BackboneRecord>& records);

/// Reconstruct backbone records from frames. N and C are placed at canonical
/// offsets in the frame basis (C at 1.526 A along e1; N at 1.458 A in the
/// e1-e2 plane at the ideal 111-degree N-CA-C angle), which round-trips
/// exactly through chain_from_records.
std::vector<BackboneRecord> records_from_chain(const ChainState& chain);

void write_pdb(const std::string& path, const ComplexState& state);

/// One MODEL block per state.
void write_pdb_trajectory(const std::string& path, const std::vector<ComplexState>& states);

/// All residues of the file as one chain (chain id from the first record).
ChainState load_chain(const std::string& path);

/// Split a two-chain complex file by the chain ids of the unbound inputs.
ComplexState load_bound_complex(const std::string& path, const std::string& receptor_chain,
                                const std::string& ligand_chain);

}  // namespace hadiff
