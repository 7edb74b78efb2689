// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <utility>
#include <vector>

#include "hadiff/forward_diffusion.hpp"
#include "hadiff/score_model.hpp"

namespace hadiff {

inline constexpr double kFapeClamp = 10.0;   // Angstrom
inline constexpr double kFapeScale = 10.0;   // Angstrom
inline constexpr double kInterfaceCutoff = 10.0;  // cross-chain CA distance

struct LossWeights {
  double diffusion = 1.0;
  double ifape = 1.0;
  double lddt = 1.0;

  void validate() const {
    if (diffusion < 0.0 || ifape < 0.0 || lddt < 0.0)
      throw ConfigError("loss weights must be nonnegative");
  }
};

struct LossBreakdown {
  double global_tr = 0.0;
  double global_rot = 0.0;
  double res_tr_receptor = 0.0;
  double res_rot_receptor = 0.0;
  double res_tr_ligand = 0.0;
  double res_rot_ligand = 0.0;
  double ifape = 0.0;
  double clddt = 0.0;
  double total = 0.0;

  double diffusion_sum() const {
    return global_tr + global_rot + res_tr_receptor + res_rot_receptor + res_tr_ligand +
           res_rot_ligand;
  }
};

/// Variance-weighted global score-matching losses:
///   l_tr  = sigma_tr^2 |pred - target|^2
///   l_rot = |pred - target|^2 / E||score||(sigma_rot)^2
std::pair<double, double> loss_global(const ScoreOutput& pred, const TargetSet& targets,
                                      double sigma_tr, double sigma_rot,
                                      const IGSO3Table& table);

/// Flow-matching residue losses: mean squared error per head, averaged over
/// residues. Order: (receptor tr, receptor rot, ligand tr, ligand rot).
std::array<double, 4> loss_cfm(const ScoreOutput& pred, const TargetSet& targets);

/// Interface residues of a complex: indices (into receptor then ligand) of
/// residues with any cross-chain CA distance below `cutoff`.
std::vector<int> interface_residues(const ComplexState& state, double cutoff = kInterfaceCutoff);

/// Interface-focused frame-aligned point error between the predicted and
/// bound structures, clamped at kFapeClamp and divided by kFapeScale.
/// Interface residues are taken from the bound state. Returns 0 and sets
/// *empty_interface when the bound interface is empty.
double loss_ifape(const ComplexState& pred_state, const ComplexState& bound_state,
                  bool* empty_interface = nullptr, double d_clamp = kFapeClamp,
                  double d_scale = kFapeScale, double interface_cutoff = kInterfaceCutoff);

/// Squared error between pooled confidence prediction and the true value.
double loss_clddt(double pred_clddt, double true_clddt);

/// Weighted combination per the training objective; all sub-diffusion terms
/// carry weight 1 inside the diffusion block.
LossBreakdown total_loss(const std::pair<double, double>& global_losses,
                         const std::array<double, 4>& cfm_losses, double ifape, double clddt,
                         const LossWeights& weights);

}  // namespace hadiff
