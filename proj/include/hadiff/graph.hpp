// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "hadiff/geometry.hpp"
#include "hadiff/types.hpp"

namespace hadiff {

inline constexpr double kIntraCutoff = 10.0;      // Angstrom
inline constexpr double kInterCutoffBase = 40.0;  // + 3 sigma_tr
inline constexpr int kRbfCount = 32;
inline constexpr int kTimeEmbeddingDim = 32;
inline constexpr int kAminoAcidTypes = 21;  // 20 standard + unknown

enum class GraphKind { RR, LL, RL, LR };

/// Radius graph over one chain (RR/LL) or across chains (RL/LR). Edge source
/// and destination are residue indices into their owning chains. Edges are
/// directed and ordered lexicographically by (src, dst).
struct ResidueGraph {
  GraphKind kind = GraphKind::RR;
  double cutoff = 0.0;
  std::vector<int> nodes;                       // unique endpoint residues
  std::vector<std::pair<int, int>> edges;       // (src, dst)
  MatX edge_vectors;                            // E x 3, x_dst - x_src
  VecX edge_lengths;                            // E
  MatX edge_features;                           // E x (rbf + 1), filled by attach_edge_features

  int edge_count() const { return static_cast<int>(edges.size()); }
};

/// K Gaussian basis values exp(-(d - c_k)^2 / (2 w^2)), centers uniform on
/// [0, cutoff], width w = cutoff / K.
VecX rbf_expand(double d, double cutoff, int k = kRbfCount);

/// Interleaved sin/cos at geometric frequencies; time in [0, 1], dim even.
VecX sinusoidal_time_embedding(double time, int dim);

/// Both-ways directed radius graph within one chain, strict cutoff, no self
/// edges; node list covers every residue of the chain.
ResidueGraph build_intra_graph(const ChainState& chain, double cutoff = kIntraCutoff);

/// Cross-chain graphs with cutoff (40 + 3 sigma_tr); node lists contain only
/// edge endpoints.
std::pair<ResidueGraph, ResidueGraph> build_inter_graphs(const ChainState& receptor,
                                                         const ChainState& ligand,
                                                         double sigma_tr);

/// The four graphs the score model consumes, built at the current noise level.
struct GraphSet {
  ResidueGraph rr, ll, rl, lr;
};

GraphSet build_graphs(const ComplexState& state, double sigma_tr,
                      double intra_cutoff = kIntraCutoff);

/// Static per-chain node features (geometry-independent inputs).
struct ChainFeatures {
  MatX one_hot;        // n x 21
  MatX embedding;      // n x esm_dim (zeros when no file supplied)
  VecX msf_normalized; // n, min-max normalized per chain
  MatX correlation;    // n x n NMA cross-correlation

  /// [one_hot | embedding | msf] as one matrix.
  MatX scalar_base() const;
};

struct ComplexFeatures {
  ChainFeatures receptor;
  ChainFeatures ligand;
};

/// NMA-derived features for one chain of the unbound structure. `embedding`
/// may be empty (zero-filled to `esm_dim`).
ChainFeatures compute_chain_features(const ChainState& chain, const std::optional<MatX>& embedding,
                                     int esm_dim, double anm_cutoff, int anm_modes);

/// RBF-of-length plus cross-correlation (intra) or zero (inter) per edge.
void attach_edge_features(ResidueGraph& graph, const MatX* correlation, int rbf_count = kRbfCount);

}  // namespace hadiff
