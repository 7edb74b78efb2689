// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "hadiff/geometry.hpp"
#include "hadiff/rng.hpp"
#include "hadiff/schedules.hpp"
#include "hadiff/so3_stats.hpp"

namespace hadiff {

/// Regression targets for the four score heads.
struct TargetSet {
  Vec3 global_tr_score = Vec3::Zero();   // -dx / sigma_tr^2
  Vec3 global_rot_score = Vec3::Zero();  // IGSO(3) tangent score of the noise rotation
  MatX receptor_tr_residual;             // n_r x 3, t0 - t_tau
  MatX receptor_rot_residual;            // n_r x 3, Log(R0 (R_tau)^-1)
  MatX ligand_tr_residual;               // n_l x 3
  MatX ligand_rot_residual;              // n_l x 3
};

struct NoisedSample {
  ComplexState noisy_state;
  double time_global = 0.0;
  double time_local = 0.0;
  double beta_used = 1.0;  // flexing rate the sample was generated with
  TargetSet targets;
  Vec3 noise_dx = Vec3::Zero();   // sampled global displacement
  Mat3 noise_rot = Mat3::Identity();
};

/// Residue transforms of the bound state relative to the (superposed) unbound
/// base: receptor against the unbound as-is, ligand against the unbound
/// rotated by `global_rotation` about its centroid. Returned per chain as
/// (n x 3 translations, per-residue rotations).
struct ResidueEndpoints {
  MatX receptor_tr;                 // n_r x 3
  std::vector<Mat3> receptor_rot;   // n_r
  MatX ligand_tr;                   // n_l x 3
  std::vector<Mat3> ligand_rot;     // n_l
};

ResidueEndpoints residue_targets_from_states(const ComplexState& bound,
                                             const ComplexState& unbound_superposed,
                                             const Mat3& global_rotation);

/// Deterministic noising core: builds the state at (t, tau) for the given
/// global noise draw and emits targets. Exposed separately so equivariance
/// properties can be checked with transformed noise.
NoisedSample forward_noise_with(const ComplexState& bound, const ComplexState& unbound,
                                double t, double tau, double beta,
                                const GlobalSchedule& schedule, const Vec3& noise_dx,
                                const Mat3& noise_rot);

/// Sample global noise at time t and apply the deterministic core.
NoisedSample forward_noise(const ComplexState& bound, const ComplexState& unbound, double t,
                           double tau, double beta, const GlobalSchedule& schedule,
                           const IGSO3Table& table, Rng& rng);

/// Superpose each unbound chain onto its bound counterpart (Kabsch on CA) so
/// residue residuals measure pure flexing. Returns the aligned unbound state.
ComplexState superpose_unbound(const ComplexState& unbound, const ComplexState& bound);

/// Fully-flexed prediction from the current state and predicted residuals;
/// ligand positions corrected by -global_offset (the known or predicted
/// global displacement). Input residual blocks are (n x 3).
ComplexState build_flexed_prediction(const ComplexState& current, const MatX& receptor_tr,
                                     const MatX& receptor_rot, const MatX& ligand_tr,
                                     const MatX& ligand_rot, const Vec3& global_offset);

}  // namespace hadiff
