// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "hadiff/forward_diffusion.hpp"
#include "hadiff/geometry.hpp"
#include "hadiff/rng.hpp"
#include "hadiff/schedules.hpp"
#include "hadiff/score_model.hpp"

namespace hadiff {

/// Residue-flow stepping rule. The flow matches residuals s = alpha(tau) t0
/// along the interpolated path, so the update fraction that keeps a sampled
/// state on that path is (alpha(tau) - alpha(tau - dt)) / alpha(tau) — a rate
/// that grows sharply as tau -> 0. ConstantBeta applies the literal
/// alpha'/(1-alpha) = beta formula instead (capped at full landing); it
/// overshoots the path early in reverse time whenever beta dt is not small.
enum class FlexRateMode { PathConsistent, ConstantBeta };

struct SamplerConfig {
  int n_steps = 40;
  bool stochastic = true;
  int n_candidates = 1;
  std::uint64_t seed = 0;
  GlobalSchedule schedule;
  FlexRateMode flex_mode = FlexRateMode::PathConsistent;
  std::optional<double> irmsd_override;  // bypasses the iRMSD regressor

  void validate() const {
    if (n_steps < 2) throw ConfigError("sampler: n_steps must be >= 2");
    if (n_candidates < 1) throw ConfigError("sampler: need at least one candidate");
    schedule.validate();
  }
};

struct Trajectory {
  std::vector<ComplexState> states;                // n_steps + 1 snapshots
  std::vector<ProductPoint> increments;            // applied updates per step
  std::vector<std::pair<double, double>> times;    // (t, tau) at which each step was scored
};

/// Score supplier at a state and time; the network or a test oracle.
using ScoreFn =
    std::function<ScoreOutput(const ComplexState&, double t, double tau, double beta)>;

/// Random initial pose: ligand uniformly re-oriented about its centroid, then
/// displaced by an isotropic Gaussian of scale sigma_tr_max; residue
/// configuration stays at the unbound endpoint. Rotation is drawn before the
/// translation.
ComplexState sampler_initialize(const ComplexState& unbound, const GlobalSchedule& schedule,
                                Rng& rng);

/// One coupled reverse step: Euler flow update on every residue frame at rate
/// flex_rate(tau, beta), Kabsch disentanglement of the ligand, then the
/// reverse-SDE global translation/rotation (noise only in stochastic mode).
ComplexState sampler_step(const ComplexState& state, double t, double tau, double dt,
                          const ScoreOutput& score, double beta, const SamplerConfig& config,
                          Rng& rng, ProductPoint* increments = nullptr);

struct SampleResult {
  ComplexState final_state;
  Trajectory trajectory;
  double clddt = 0.0;
  bool clddt_valid = false;
  double beta = 0.0;
};

/// Reverse-time generation from t = tau = 1 to 0 on a uniform grid, then a
/// confidence evaluation of the near-final structure at time 1 - 1/n_steps.
/// `initial_override` replaces sampler_initialize (tests, restarts).
SampleResult sample_trajectory(const ComplexState& unbound, const ScoreFn& score_fn, double beta,
                               const SamplerConfig& config, Rng& rng,
                               const ComplexState* initial_override = nullptr);

/// Descending by score, ties by candidate index.
std::vector<int> rank_candidates(const std::vector<double>& clddt_scores);

struct SamplerOutput {
  std::vector<SampleResult> candidates;  // generation order
  std::vector<int> ranking;              // candidate indices, best first
  double beta = 0.0;
  double predicted_irmsd = 0.0;
};

/// Full pipeline: beta from the iRMSD regressor (or override), N candidates
/// with independent substreams, ranked by predicted clddt. `threads` > 1
/// parallelizes across candidates without changing results.
SamplerOutput run_sampler(const ComplexState& unbound, const ComplexFeatures& features,
                          const ScoreModel& model, const IrmsdPredictor* irmsd_model,
                          const SamplerConfig& config, int threads = 1);

}  // namespace hadiff
