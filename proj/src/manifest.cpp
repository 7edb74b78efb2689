// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hadiff/forward_diffusion.hpp"
#include "hadiff/metrics.hpp"
#include "hadiff/pdb_io.hpp"

namespace hadiff {

std::vector<CaseManifest> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("manifest: cannot open " + path);
  std::vector<CaseManifest> cases;
  std::string line;
  int line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(field);
    }
    if (fields.size() != 4 && fields.size() != 6 && fields.size() != 7)
      throw ParseError("manifest: line " + std::to_string(line_number) +
                       " must have 4, 6 or 7 tab-separated fields");
    CaseManifest c;
    c.case_id = fields[0];
    c.unbound_receptor_path = fields[1];
    c.unbound_ligand_path = fields[2];
    c.bound_complex_path = fields[3];
    if (fields.size() >= 6) {
      if (fields[4] != "-") c.receptor_embedding_path = fields[4];
      if (fields[5] != "-") c.ligand_embedding_path = fields[5];
    }
    if (fields.size() == 7) c.irmsd_override = std::stod(fields[6]);
    for (const std::string* p :
         {&c.unbound_receptor_path, &c.unbound_ligand_path, &c.bound_complex_path}) {
      std::ifstream probe(*p);
      if (!probe)
        throw ParseError("manifest: case " + c.case_id + " references missing file " + *p);
    }
    cases.push_back(std::move(c));
  }
  if (cases.empty()) throw ParseError("manifest: no cases in " + path);
  return cases;
}

MatX read_embedding_file(const std::string& path, const ChainState& chain, int width) {
  std::ifstream f(path);
  if (!f) throw ParseError("embeddings: cannot open " + path);
  MatX out(static_cast<Eigen::Index>(chain.size()), width);
  std::string line;
  Eigen::Index row = 0;
  int line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    if (row >= out.rows())
      throw ParseError("embeddings: more records than residues in " + path);
    std::stringstream ss(line);
    std::string chain_id;
    int residue_number = 0;
    if (!(ss >> chain_id >> residue_number))
      throw ParseError("embeddings: malformed record at line " + std::to_string(line_number));
    if (chain_id != chain.chain_id)
      throw ParseError("embeddings: chain mismatch at line " + std::to_string(line_number));
    if (residue_number != chain.residue_ids[static_cast<std::size_t>(row)])
      throw ParseError("embeddings: residue order mismatch at line " +
                       std::to_string(line_number));
    for (int k = 0; k < width; ++k) {
      double v = 0.0;
      if (!(ss >> v))
        throw ParseError("embeddings: expected " + std::to_string(width) +
                         " values at line " + std::to_string(line_number));
      out(row, k) = v;
    }
    double extra;
    if (ss >> extra)
      throw ParseError("embeddings: too many values at line " + std::to_string(line_number));
    ++row;
  }
  if (row != out.rows()) throw ParseError("embeddings: fewer records than residues in " + path);
  return out;
}

LoadedCase load_case(const CaseManifest& manifest, const RunConfig& config) {
  LoadedCase lc;
  lc.case_id = manifest.case_id;
  lc.irmsd_override = manifest.irmsd_override;

  lc.unbound.receptor = load_chain(manifest.unbound_receptor_path);
  lc.unbound.ligand = load_chain(manifest.unbound_ligand_path);
  lc.unbound.validate();
  lc.bound = load_bound_complex(manifest.bound_complex_path, lc.unbound.receptor.chain_id,
                                lc.unbound.ligand.chain_id);

  lc.unbound_superposed = superpose_unbound(lc.unbound, lc.bound);
  lc.true_irmsd = std::max(irmsd(lc.unbound_superposed, lc.bound), 1e-6);

  std::optional<MatX> emb_r, emb_l;
  if (manifest.receptor_embedding_path)
    emb_r = read_embedding_file(*manifest.receptor_embedding_path, lc.unbound.receptor,
                                config.model.esm_dim);
  if (manifest.ligand_embedding_path)
    emb_l = read_embedding_file(*manifest.ligand_embedding_path, lc.unbound.ligand,
                                config.model.esm_dim);
  lc.features.receptor = compute_chain_features(lc.unbound.receptor, emb_r, config.model.esm_dim,
                                                config.nma_cutoff, config.nma_modes);
  lc.features.ligand = compute_chain_features(lc.unbound.ligand, emb_l, config.model.esm_dim,
                                              config.nma_cutoff, config.nma_modes);
  return lc;
}

}  // namespace hadiff
