// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hadiff/nma.hpp"

namespace hadiff {

VecX rbf_expand(double d, double cutoff, int k) {
  if (d < 0.0) throw ConfigError("rbf_expand: negative distance");
  if (k < 2 || cutoff <= 0.0) throw ConfigError("rbf_expand: bad basis parameters");
  VecX out(k);
  const double width = cutoff / k;
  const double denom = 2.0 * width * width;
  for (int i = 0; i < k; ++i) {
    const double center = cutoff * i / (k - 1);
    const double delta = d - center;
    out(i) = std::exp(-delta * delta / denom);
  }
  return out;
}

VecX sinusoidal_time_embedding(double time, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("sinusoidal_time_embedding: dim must be even");
  VecX out(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = (half == 1) ? 1.0 : std::pow(1000.0, static_cast<double>(i) / (half - 1));
    out(2 * i) = std::sin(freq * time);
    out(2 * i + 1) = std::cos(freq * time);
  }
  return out;
}

namespace {

void finalize_edges(ResidueGraph& g, const ChainState& src_chain, const ChainState& dst_chain) {
  const int e = g.edge_count();
  g.edge_vectors.resize(e, 3);
  g.edge_lengths.resize(e);
  for (int k = 0; k < e; ++k) {
    const Vec3 d =
        dst_chain.frames[g.edges[k].second].position - src_chain.frames[g.edges[k].first].position;
    g.edge_vectors.row(k) = d.transpose();
    g.edge_lengths(k) = d.norm();
  }
}

}  // namespace

ResidueGraph build_intra_graph(const ChainState& chain, double cutoff) {
  const int n = static_cast<int>(chain.size());
  ResidueGraph g;
  g.cutoff = cutoff;
  g.nodes.resize(n);
  for (int i = 0; i < n; ++i) g.nodes[i] = i;
  const double c2 = cutoff * cutoff;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if ((chain.frames[i].position - chain.frames[j].position).squaredNorm() < c2)
        g.edges.emplace_back(i, j);
    }
  }
  finalize_edges(g, chain, chain);
  return g;
}

std::pair<ResidueGraph, ResidueGraph> build_inter_graphs(const ChainState& receptor,
                                                         const ChainState& ligand,
                                                         double sigma_tr) {
  if (sigma_tr < 0.0) throw ConfigError("build_inter_graphs: sigma_tr must be nonnegative");
  const double cutoff = kInterCutoffBase + 3.0 * sigma_tr;
  const double c2 = cutoff * cutoff;

  ResidueGraph rl, lr;
  rl.kind = GraphKind::RL;
  lr.kind = GraphKind::LR;
  rl.cutoff = lr.cutoff = cutoff;

  std::set<int> r_nodes, l_nodes;
  for (int i = 0; i < static_cast<int>(receptor.size()); ++i) {
    for (int j = 0; j < static_cast<int>(ligand.size()); ++j) {
      if ((receptor.frames[i].position - ligand.frames[j].position).squaredNorm() < c2) {
        rl.edges.emplace_back(i, j);
        r_nodes.insert(i);
        l_nodes.insert(j);
      }
    }
  }
  for (int i = 0; i < static_cast<int>(ligand.size()); ++i) {
    for (int j = 0; j < static_cast<int>(receptor.size()); ++j) {
      if ((ligand.frames[i].position - receptor.frames[j].position).squaredNorm() < c2)
        lr.edges.emplace_back(i, j);
    }
  }
  rl.nodes.assign(r_nodes.begin(), r_nodes.end());
  lr.nodes.assign(l_nodes.begin(), l_nodes.end());
  finalize_edges(rl, receptor, ligand);
  finalize_edges(lr, ligand, receptor);
  return {std::move(rl), std::move(lr)};
}

GraphSet build_graphs(const ComplexState& state, double sigma_tr, double intra_cutoff) {
  GraphSet set;
  set.rr = build_intra_graph(state.receptor, intra_cutoff);
  set.rr.kind = GraphKind::RR;
  set.ll = build_intra_graph(state.ligand, intra_cutoff);
  set.ll.kind = GraphKind::LL;
  auto [rl, lr] = build_inter_graphs(state.receptor, state.ligand, sigma_tr);
  set.rl = std::move(rl);
  set.lr = std::move(lr);
  return set;
}

MatX ChainFeatures::scalar_base() const {
  const Eigen::Index n = one_hot.rows();
  MatX out(n, one_hot.cols() + embedding.cols() + 1);
  out << one_hot, embedding, msf_normalized;
  return out;
}

ChainFeatures compute_chain_features(const ChainState& chain, const std::optional<MatX>& embedding,
                                     int esm_dim, double anm_cutoff, int anm_modes) {
  const int n = static_cast<int>(chain.size());
  ChainFeatures f;
  f.one_hot = MatX::Zero(n, kAminoAcidTypes);
  for (int i = 0; i < n; ++i) {
    int aa = chain.aa_types[i];
    if (aa < 0 || aa >= kAminoAcidTypes) aa = kAminoAcidTypes - 1;
    f.one_hot(i, aa) = 1.0;
  }
  if (embedding) {
    if (embedding->rows() != n)
      throw CorrespondenceError("compute_chain_features: embedding row count mismatch");
    if (embedding->cols() != esm_dim)
      throw CorrespondenceError("compute_chain_features: embedding width mismatch");
    f.embedding = *embedding;
  } else {
    f.embedding = MatX::Zero(n, esm_dim);
  }

  if (n >= 3) {
    const auto coords = chain.positions();
    const MatX h = build_anm_hessian(coords, anm_cutoff);
    const NormalModes modes = compute_modes(h, anm_modes);
    f.msf_normalized = min_max_normalize(msf(modes));
    f.correlation = cross_correlation(modes);
  } else {
    f.msf_normalized = VecX::Zero(n);
    f.correlation = MatX::Identity(n, n);
  }
  return f;
}

void attach_edge_features(ResidueGraph& graph, const MatX* correlation, int rbf_count) {
  const int e = graph.edge_count();
  graph.edge_features.resize(e, rbf_count + 1);
  for (int k = 0; k < e; ++k) {
    graph.edge_features.row(k).head(rbf_count) =
        rbf_expand(graph.edge_lengths(k), graph.cutoff, rbf_count).transpose();
    double corr = 0.0;
    if (correlation != nullptr) corr = (*correlation)(graph.edges[k].first, graph.edges[k].second);
    graph.edge_features(k, rbf_count) = corr;
  }
}

}  // namespace hadiff
