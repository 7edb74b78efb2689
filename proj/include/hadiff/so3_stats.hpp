// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hadiff/geometry.hpp"
#include "hadiff/rng.hpp"
#include "hadiff/types.hpp"

namespace hadiff {

// Isotropic Gaussian on SO(3), axis-angle marginal over omega in [0, pi]:
//
//   f(omega; eps) = ((1 - cos omega)/pi)
//                   * sum_l (2l+1) exp(-l(l+1) eps^2) sin((l+1/2) omega) / sin(omega/2)
//
// The character sum (the density without the uniform-axis factor) is written
// f_tilde below. For eps below the reach of the truncated series the exact
// Jacobi-theta dual of the same sum is evaluated instead; the two branches
// agree to ~1e-10 where both converge.

/// Angle density including the (1 - cos omega)/pi axis factor.
double igso3_density(double omega, double eps);

/// d/d omega of log f_tilde (density without the axis factor).
double igso3_log_ftilde_derivative(double omega, double eps);

/// Tangent-space score of IG(I, eps^2) at a relative rotation: direction is
/// the axis of log(R_rel), magnitude d/d omega log f_tilde. Zero at identity.
Vec3 igso3_score(const Mat3& r_rel, double eps);

/// Haar-uniform rotation via a uniform unit quaternion.
Mat3 uniform_so3_sample(Rng& rng);

struct IGSO3Params {
  int n_eps = 128;
  int n_omega = 8192;
  double eps_min = 1e-3;
  double eps_max = 10.0;

  bool operator==(const IGSO3Params&) const = default;
};

/// Inverse-CDF angle sampler for one fixed epsilon (a single interpolated
/// table row). Cheap to copy; safe to use from one thread at a time.
class AngleSampler {
 public:
  AngleSampler(VecX omega_grid, VecX cdf, VecX score_mag);
  double sample(Rng& rng) const;
  double score_magnitude(double omega) const;

 private:
  VecX omega_;
  VecX cdf_;
  VecX score_mag_;
};

/// Precomputed density/CDF/score tables over a log-spaced epsilon grid,
/// with Monte-Carlo expected score magnitudes per epsilon.
class IGSO3Table {
 public:
  static IGSO3Table build(const IGSO3Params& params = {});

  /// Load from `path` when the stored grids match `params`, else build and
  /// (best effort) write the cache.
  static IGSO3Table build_or_load(const std::string& path, const IGSO3Params& params = {});

  void save(const std::string& path) const;
  static std::optional<IGSO3Table> load(const std::string& path);

  const IGSO3Params& params() const { return params_; }
  const VecX& epsilon_grid() const { return eps_grid_; }
  const VecX& omega_grid() const { return omega_grid_; }
  const MatX& density() const { return density_; }    // n_eps x n_omega
  const MatX& cdf() const { return cdf_; }            // rows normalized to end at 1
  const VecX& expected_score_norms() const { return expected_norms_; }

  /// Row for a given epsilon, linearly interpolated in log epsilon.
  /// Epsilons outside the grid are clamped (warns once per process).
  AngleSampler sampler_for(double eps) const;

  /// One IG(mean, eps^2) draw: mean * exp(omega * u_hat), u_hat uniform.
  Mat3 sample(const Mat3& mean, double eps, Rng& rng) const;

  /// E || score || under IG(I, eps^2); interpolated in log epsilon.
  double expected_score_norm(double eps) const;

  /// Fresh Monte-Carlo estimate (test oracle; independent of cached values).
  double mc_expected_score_norm(double eps, int n_samples, std::uint64_t seed) const;

 private:
  IGSO3Params params_;
  VecX eps_grid_;
  VecX omega_grid_;
  MatX density_;
  MatX cdf_;
  MatX score_mag_;  // |d/d omega log f_tilde| per (eps, omega)
  VecX expected_norms_;

  void interpolation_weights(double eps, int& lo, int& hi, double& w) const;
};

}  // namespace hadiff
