// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "hadiff/types.hpp"

namespace hadiff {

/// Retained elastic-network eigenmodes (rigid-body modes excluded).
struct NormalModes {
  int n_residues = 0;
  VecX eigenvalues;   // ascending, all > 0
  MatX eigenvectors;  // 3n x M, orthonormal columns

  int mode_count() const { return static_cast<int>(eigenvalues.size()); }
  Vec3 displacement(int mode, int residue) const {
    return eigenvectors.col(mode).segment<3>(3 * residue);
  }
};

inline constexpr double kAnmCutoff = 15.0;  // Angstrom
inline constexpr double kAnmGamma = 1.0;
inline constexpr int kAnmModeCount = 20;
inline constexpr double kRigidModeFloor = 1e-8;  // relative to largest eigenvalue

/// Anisotropic-network Hessian on CA coordinates: for pairs within `cutoff`,
/// H_ij = -gamma d_ij d_ij^T / |d_ij|^2, diagonal blocks minus the row sums.
MatX build_anm_hessian(std::span<const Vec3> coords, double cutoff = kAnmCutoff,
                       double gamma = kAnmGamma);

/// Ascending eigenpairs of the Hessian with the 6 rigid modes discarded and
/// the next `num_modes` retained (fewer when the spectrum is smaller).
/// Throws ConnectivityError when the near-zero mode count is not 6.
NormalModes compute_modes(const MatX& hessian, int num_modes = kAnmModeCount,
                          double rigid_floor = kRigidModeFloor);

/// Mean square fluctuation per residue: sum_m |u_i^m|^2 / lambda_m.
VecX msf(const NormalModes& modes);

/// Normalized mode-weighted displacement correlations; C(i,i) = 1.
MatX cross_correlation(const NormalModes& modes);

/// Min-max normalization to [0, 1]; constant input maps to all zeros.
VecX min_max_normalize(const VecX& values);

/// Distance-cutoff graph components (diagnostics for ConnectivityError).
std::vector<std::vector<int>> connected_components(std::span<const Vec3> coords, double cutoff);

}  // namespace hadiff
