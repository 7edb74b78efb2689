// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hadiff/types.hpp"

namespace hadiff {

/// Geometric variance-exploding noise scales for the global pose.
struct GlobalSchedule {
  double sigma_tr_min = 0.5;    // Angstrom
  double sigma_tr_max = 20.0;   // Angstrom
  double sigma_rot_min = 0.05;  // radians
  double sigma_rot_max = 1.65;  // radians

  void validate() const;
};

enum class SigmaKind { Translation, Rotation };

/// sigma(t) = sigma_min^(1-t) * sigma_max^t, t in [0, 1].
double sigma(double t, SigmaKind kind, const GlobalSchedule& schedule);

/// d sigma^2 / dt for the geometric schedule: 2 sigma(t)^2 ln(max/min).
double sigma_squared_rate(double t, SigmaKind kind, const GlobalSchedule& schedule);

/// Flexing completion schedule alpha(tau) = 1 - exp(-beta tau).
double alpha(double tau, double beta);

/// alpha'(tau) / (1 - alpha(tau)); identically beta for this schedule.
double flex_rate(double tau, double beta);

/// Completion level used to anchor beta to the predicted interface RMSD.
inline constexpr double kFlexCompletion = 0.99;

/// Floor on the anchor time t*; keeps beta finite for near-rigid cases.
inline constexpr double kBetaTimeFloor = 0.05;

/// beta such that flexing is kFlexCompletion-done at the diffusion time where
/// the translation noise scale equals the predicted interface RMSD:
///   t* = clamp(ln(irmsd/sigma_tr_min) / ln(sigma_tr_max/sigma_tr_min), floor, 1)
///   beta = -ln(1 - kFlexCompletion) / t*
double beta_from_irmsd(double irmsd, const GlobalSchedule& schedule,
                       double completion = kFlexCompletion, double t_floor = kBetaTimeFloor);

}  // namespace hadiff
