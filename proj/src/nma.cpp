// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/nma.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace hadiff {

MatX build_anm_hessian(std::span<const Vec3> coords, double cutoff, double gamma) {
  const int n = static_cast<int>(coords.size());
  if (n < 2) throw ConfigError("build_anm_hessian: need at least 2 residues");
  if (cutoff <= 0.0 || gamma <= 0.0)
    throw ConfigError("build_anm_hessian: cutoff and gamma must be positive");

  MatX h = MatX::Zero(3 * n, 3 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec3 d = coords[j] - coords[i];
      const double r2 = d.squaredNorm();
      if (r2 < 1e-12)
        throw DegenerateGeometryError("build_anm_hessian: duplicate coordinates at residues " +
                                      std::to_string(i) + ", " + std::to_string(j));
      if (r2 > cutoff * cutoff) continue;
      const Mat3 block = -(gamma / r2) * (d * d.transpose());
      h.block<3, 3>(3 * i, 3 * j) = block;
      h.block<3, 3>(3 * j, 3 * i) = block;
      h.block<3, 3>(3 * i, 3 * i) -= block;
      h.block<3, 3>(3 * j, 3 * j) -= block;
    }
  }
  return h;
}

NormalModes compute_modes(const MatX& hessian, int num_modes, double rigid_floor) {
  if (hessian.rows() != hessian.cols() || hessian.rows() % 3 != 0)
    throw ConfigError("compute_modes: hessian must be 3n x 3n");
  const int n = static_cast<int>(hessian.rows() / 3);

  Eigen::SelfAdjointEigenSolver<MatX> solver(hessian);
  if (solver.info() != Eigen::Success) throw std::runtime_error("compute_modes: eigensolver failed");
  const VecX& evals = solver.eigenvalues();  // ascending
  const double lambda_max = std::max(evals(evals.size() - 1), 0.0);
  const double floor = rigid_floor * std::max(lambda_max, 1e-30);

  int n_rigid = 0;
  while (n_rigid < evals.size() && evals(n_rigid) < floor) ++n_rigid;
  if (n_rigid != 6) {
    std::string msg = "compute_modes: found " + std::to_string(n_rigid) +
                      " near-zero modes (expected 6); elastic network is likely disconnected";
    throw ConnectivityError(msg);
  }

  const int available = static_cast<int>(evals.size()) - 6;
  const int m = std::min(num_modes, available);
  if (m <= 0) throw ConfigError("compute_modes: no nontrivial modes available");

  NormalModes modes;
  modes.n_residues = n;
  modes.eigenvalues = evals.segment(6, m);
  modes.eigenvectors = solver.eigenvectors().middleCols(6, m);
  return modes;
}

VecX msf(const NormalModes& modes) {
  VecX out = VecX::Zero(modes.n_residues);
  for (int m = 0; m < modes.mode_count(); ++m) {
    const double inv_lambda = 1.0 / modes.eigenvalues(m);
    for (int i = 0; i < modes.n_residues; ++i)
      out(i) += inv_lambda * modes.displacement(m, i).squaredNorm();
  }
  return out;
}

MatX cross_correlation(const NormalModes& modes) {
  const int n = modes.n_residues;
  MatX raw = MatX::Zero(n, n);
  for (int m = 0; m < modes.mode_count(); ++m) {
    const double inv_lambda = 1.0 / modes.eigenvalues(m);
    MatX u(n, 3);
    for (int i = 0; i < n; ++i) u.row(i) = modes.displacement(m, i).transpose();
    raw += inv_lambda * (u * u.transpose());
  }
  MatX c(n, n);
  for (int i = 0; i < n; ++i) {
    if (raw(i, i) <= 0.0)
      throw DegenerateGeometryError("cross_correlation: zero fluctuation at residue " +
                                    std::to_string(i));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = raw(i, j) / std::sqrt(raw(i, i) * raw(j, j));
  return c;
}

VecX min_max_normalize(const VecX& values) {
  if (values.size() == 0) return values;
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  if (hi - lo < 1e-30) return VecX::Zero(values.size());
  return (values.array() - lo) / (hi - lo);
}

std::vector<std::vector<int>> connected_components(std::span<const Vec3> coords, double cutoff) {
  const int n = static_cast<int>(coords.size());
  std::vector<int> label(n, -1);
  std::vector<std::vector<int>> comps;
  const double c2 = cutoff * cutoff;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    comps.emplace_back();
    std::vector<int> stack{s};
    label[s] = id;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      comps[id].push_back(i);
      for (int j = 0; j < n; ++j) {
        if (label[j] < 0 && (coords[i] - coords[j]).squaredNorm() <= c2) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  return comps;
}

}  // namespace hadiff
