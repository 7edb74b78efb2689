// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/losses.hpp"

#include <algorithm>
#include <cmath>

namespace hadiff {

std::pair<double, double> loss_global(const ScoreOutput& pred, const TargetSet& targets,
                                      double sigma_tr, double sigma_rot,
                                      const IGSO3Table& table) {
  const double l_tr = sigma_tr * sigma_tr * (pred.global_tr - targets.global_tr_score).squaredNorm();
  const double norm = table.expected_score_norm(sigma_rot);
  const double l_rot =
      (pred.global_rot - targets.global_rot_score).squaredNorm() / (norm * norm);
  return {l_tr, l_rot};
}

std::array<double, 4> loss_cfm(const ScoreOutput& pred, const TargetSet& targets) {
  auto mse = [](const MatX& a, const MatX& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw CorrespondenceError("loss_cfm: shape mismatch");
    if (a.rows() == 0) return 0.0;
    return (a - b).squaredNorm() / static_cast<double>(a.rows());
  };
  return {mse(pred.receptor_tr, targets.receptor_tr_residual),
          mse(pred.receptor_rot, targets.receptor_rot_residual),
          mse(pred.ligand_tr, targets.ligand_tr_residual),
          mse(pred.ligand_rot, targets.ligand_rot_residual)};
}

std::vector<int> interface_residues(const ComplexState& state, double cutoff) {
  const int n_r = static_cast<int>(state.receptor.size());
  const int n_l = static_cast<int>(state.ligand.size());
  const double c2 = cutoff * cutoff;
  std::vector<bool> in_r(n_r, false), in_l(n_l, false);
  for (int i = 0; i < n_r; ++i) {
    for (int j = 0; j < n_l; ++j) {
      if ((state.receptor.frames[i].position - state.ligand.frames[j].position).squaredNorm() <
          c2) {
        in_r[i] = true;
        in_l[j] = true;
      }
    }
  }
  std::vector<int> out;
  for (int i = 0; i < n_r; ++i)
    if (in_r[i]) out.push_back(i);
  for (int j = 0; j < n_l; ++j)
    if (in_l[j]) out.push_back(n_r + j);
  return out;
}

namespace {

const Frame& frame_at(const ComplexState& s, int global_index) {
  const int n_r = static_cast<int>(s.receptor.size());
  return global_index < n_r ? s.receptor.frames[global_index]
                            : s.ligand.frames[global_index - n_r];
}

}  // namespace

double loss_ifape(const ComplexState& pred_state, const ComplexState& bound_state,
                  bool* empty_interface, double d_clamp, double d_scale,
                  double interface_cutoff) {
  if (pred_state.receptor.size() != bound_state.receptor.size() ||
      pred_state.ligand.size() != bound_state.ligand.size())
    throw CorrespondenceError("loss_ifape: residue correspondence mismatch");

  const std::vector<int> iface = interface_residues(bound_state, interface_cutoff);
  if (empty_interface != nullptr) *empty_interface = iface.empty();
  if (iface.empty()) return 0.0;

  double acc = 0.0;
  int count = 0;
  for (int a : iface) {
    const Frame& fa_p = frame_at(pred_state, a);
    const Frame& fa_b = frame_at(bound_state, a);
    for (int b : iface) {
      if (a == b) continue;
      const Frame& fb_p = frame_at(pred_state, b);
      const Frame& fb_b = frame_at(bound_state, b);
      const Vec3 local_p = fa_p.orientation.transpose() * (fb_p.position - fa_p.position);
      const Vec3 local_b = fa_b.orientation.transpose() * (fb_b.position - fa_b.position);
      acc += std::min((local_p - local_b).norm(), d_clamp);
      ++count;
    }
  }
  return acc / (static_cast<double>(count) * d_scale);
}

double loss_clddt(double pred_clddt, double true_clddt) {
  const double d = pred_clddt - true_clddt;
  return d * d;
}

LossBreakdown total_loss(const std::pair<double, double>& global_losses,
                         const std::array<double, 4>& cfm_losses, double ifape, double clddt,
                         const LossWeights& weights) {
  weights.validate();
  LossBreakdown b;
  b.global_tr = global_losses.first;
  b.global_rot = global_losses.second;
  b.res_tr_receptor = cfm_losses[0];
  b.res_rot_receptor = cfm_losses[1];
  b.res_tr_ligand = cfm_losses[2];
  b.res_rot_ligand = cfm_losses[3];
  b.ifape = ifape;
  b.clddt = clddt;
  b.total = weights.diffusion * b.diffusion_sum() + weights.ifape * b.ifape + weights.lddt * b.clddt;
  return b;
}

}  // namespace hadiff
