// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/schedules.hpp"

#include <algorithm>
#include <cmath>

namespace hadiff {

void GlobalSchedule::validate() const {
  if (!(sigma_tr_min > 0.0 && sigma_tr_min < sigma_tr_max))
    throw ConfigError("schedule: need 0 < sigma_tr_min < sigma_tr_max");
  if (!(sigma_rot_min > 0.0 && sigma_rot_min < sigma_rot_max))
    throw ConfigError("schedule: need 0 < sigma_rot_min < sigma_rot_max");
}

double sigma(double t, SigmaKind kind, const GlobalSchedule& schedule) {
  if (t < 0.0 || t > 1.0) throw ConfigError("sigma: t outside [0, 1]");
  const double lo = (kind == SigmaKind::Translation) ? schedule.sigma_tr_min : schedule.sigma_rot_min;
  const double hi = (kind == SigmaKind::Translation) ? schedule.sigma_tr_max : schedule.sigma_rot_max;
  return std::pow(lo, 1.0 - t) * std::pow(hi, t);
}

double sigma_squared_rate(double t, SigmaKind kind, const GlobalSchedule& schedule) {
  const double lo = (kind == SigmaKind::Translation) ? schedule.sigma_tr_min : schedule.sigma_rot_min;
  const double hi = (kind == SigmaKind::Translation) ? schedule.sigma_tr_max : schedule.sigma_rot_max;
  const double s = sigma(t, kind, schedule);
  return 2.0 * s * s * std::log(hi / lo);
}

double alpha(double tau, double beta) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("alpha: tau outside [0, 1]");
  if (beta <= 0.0) throw ConfigError("alpha: beta must be positive");
  return -std::expm1(-beta * tau);
}

double flex_rate(double tau, double beta) {
  if (tau < 0.0 || tau > 1.0) throw ConfigError("flex_rate: tau outside [0, 1]");
  if (beta <= 0.0) throw ConfigError("flex_rate: beta must be positive");
  // alpha'(tau)/(1 - alpha(tau)) = beta e^{-beta tau} / e^{-beta tau}
  return beta;
}

double beta_from_irmsd(double irmsd, const GlobalSchedule& schedule, double completion,
                       double t_floor) {
  if (irmsd <= 0.0) throw ConfigError("beta_from_irmsd: irmsd must be positive");
  if (!(completion > 0.0 && completion < 1.0))
    throw ConfigError("beta_from_irmsd: completion must be in (0, 1)");
  const double span = std::log(schedule.sigma_tr_max / schedule.sigma_tr_min);
  const double t_star =
      std::clamp(std::log(irmsd / schedule.sigma_tr_min) / span, t_floor, 1.0);
  return -std::log1p(-completion) / t_star;
}

}  // namespace hadiff
