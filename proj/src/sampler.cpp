// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace hadiff {

namespace {

bool finite(const MatX& m) { return m.allFinite(); }

void check_score_finite(const ScoreOutput& s, int step_index) {
  if (!s.global_tr.allFinite() || !s.global_rot.allFinite() || !finite(s.receptor_tr) ||
      !finite(s.receptor_rot) || !finite(s.ligand_tr) || !finite(s.ligand_rot))
    throw std::runtime_error("sampler: non-finite score at step " + std::to_string(step_index));
}

}  // namespace

ComplexState sampler_initialize(const ComplexState& unbound, const GlobalSchedule& schedule,
                                Rng& rng) {
  unbound.validate();
  const Mat3 orientation = uniform_so3_sample(rng);
  const Vec3 dx = schedule.sigma_tr_max * rng.normal3();
  ComplexState out = apply_rigid_rotation(orientation, unbound);
  return apply_global_translation(dx, out);
}

ComplexState sampler_step(const ComplexState& state, double t, double tau, double dt,
                          const ScoreOutput& score, double beta, const SamplerConfig& config,
                          Rng& rng, ProductPoint* increments) {
  if (dt <= 0.0) throw ConfigError("sampler_step: dt must be positive");
  const int n_r = static_cast<int>(state.receptor.size());
  const int n_l = static_cast<int>(state.ligand.size());
  if (score.receptor_tr.rows() != n_r || score.ligand_tr.rows() != n_l)
    throw CorrespondenceError("sampler_step: score dimensions do not match state");

  ProductPoint inc = ProductPoint::identity(n_r, n_l);

  // (1) Euler flow update on every residue frame. PathConsistent applies the
  // exact per-step fraction of the interpolated residual; ConstantBeta uses
  // the constant-rate form, capped at full landing so the explicit step can
  // never overshoot past the prediction (beta dt can exceed 2 when the
  // near-rigid beta clamp meets a coarse grid).
  double rate = 0.0;
  if (config.flex_mode == FlexRateMode::PathConsistent) {
    const double a_now = alpha(tau, beta);
    const double a_next = alpha(std::max(tau - dt, 0.0), beta);
    rate = a_now > 1e-12 ? (a_now - a_next) / a_now : 0.0;
  } else {
    rate = std::min(flex_rate(tau, beta) * dt, 1.0);
  }
  ComplexState updated = state;
  for (int i = 0; i < n_r; ++i) {
    const Vec3 dtr = rate * score.receptor_tr.row(i).transpose();
    const Vec3 drot = rate * score.receptor_rot.row(i).transpose();
    updated.receptor.frames[i].position += dtr;
    updated.receptor.frames[i].orientation =
        exp_so3(drot) * updated.receptor.frames[i].orientation;
    inc.receptor_local[i] = LocalTransform{dtr, exp_so3(drot)};
  }
  std::vector<Frame> pre_update_ligand = state.ligand.frames;
  for (int i = 0; i < n_l; ++i) {
    const Vec3 dtr = rate * score.ligand_tr.row(i).transpose();
    const Vec3 drot = rate * score.ligand_rot.row(i).transpose();
    updated.ligand.frames[i].position += dtr;
    updated.ligand.frames[i].orientation = exp_so3(drot) * updated.ligand.frames[i].orientation;
  }

  // (2) Remove the rigid component the flow update introduced on the ligand.
  auto [aligned, removed] = kabsch_disentangle(updated.ligand.frames, pre_update_ligand);
  updated.ligand.frames = std::move(aligned);
  for (int i = 0; i < n_l; ++i) {
    inc.ligand_local[i] =
        LocalTransform{updated.ligand.frames[i].position - pre_update_ligand[i].position,
                       updated.ligand.frames[i].orientation *
                           pre_update_ligand[i].orientation.transpose()};
  }
  (void)removed;

  // (3) Reverse-SDE global updates; g(t)^2 = d sigma^2/dt for the geometric
  // schedule. Deterministic mode keeps the drift and drops the noise.
  const double g2_tr = sigma_squared_rate(t, SigmaKind::Translation, config.schedule);
  const double g2_rot = sigma_squared_rate(t, SigmaKind::Rotation, config.schedule);
  Vec3 dx = g2_tr * dt * score.global_tr;
  Vec3 drot = g2_rot * dt * score.global_rot;
  if (config.stochastic) {
    dx += std::sqrt(g2_tr * dt) * rng.normal3();
    drot += std::sqrt(g2_rot * dt) * rng.normal3();
  }
  const Mat3 rot = exp_so3(drot);
  updated = apply_rigid_rotation(rot, updated);
  updated = apply_global_translation(dx, updated);
  inc.global_translation = dx;
  inc.global_rotation = rot;

  if (increments != nullptr) *increments = std::move(inc);
  return updated;
}

SampleResult sample_trajectory(const ComplexState& unbound, const ScoreFn& score_fn, double beta,
                               const SamplerConfig& config, Rng& rng,
                               const ComplexState* initial_override) {
  config.validate();
  const int n = config.n_steps;
  const double dt = 1.0 / n;

  SampleResult result;
  result.beta = beta;
  ComplexState state =
      initial_override ? *initial_override : sampler_initialize(unbound, config.schedule, rng);
  result.trajectory.states.push_back(state);

  for (int k = 0; k < n; ++k) {
    const double t = 1.0 - k * dt;
    const double tau = t;
    const ScoreOutput score = score_fn(state, t, tau, beta);
    check_score_finite(score, k);
    ProductPoint inc;
    state = sampler_step(state, t, tau, dt, score, beta, config, rng, &inc);
    result.trajectory.states.push_back(state);
    result.trajectory.increments.push_back(std::move(inc));
    result.trajectory.times.emplace_back(t, tau);
  }

  // Confidence readout: the structure one step before the end, fed at the
  // out-of-distribution time 1 - eps with eps = 1/n_steps.
  const double eps = dt;
  const ComplexState& conf_state = result.trajectory.states[n - 1];
  const ScoreOutput conf = score_fn(conf_state, 1.0 - eps, 1.0 - eps, beta);
  result.clddt = conf.clddt;
  result.clddt_valid = conf.clddt_valid;
  result.final_state = result.trajectory.states.back();
  return result;
}

std::vector<int> rank_candidates(const std::vector<double>& clddt_scores) {
  if (clddt_scores.empty()) throw ConfigError("rank_candidates: no candidates");
  std::vector<int> order(clddt_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (clddt_scores[a] != clddt_scores[b]) return clddt_scores[a] > clddt_scores[b];
    return a < b;
  });
  return order;
}

SamplerOutput run_sampler(const ComplexState& unbound, const ComplexFeatures& features,
                          const ScoreModel& model, const IrmsdPredictor* irmsd_model,
                          const SamplerConfig& config, int threads) {
  config.validate();
  SamplerOutput out;
  if (config.irmsd_override) {
    out.predicted_irmsd = *config.irmsd_override;
  } else {
    if (irmsd_model == nullptr)
      throw ConfigError("run_sampler: no iRMSD source (regressor missing and no override)");
    out.predicted_irmsd = irmsd_model->predict(unbound, features);
  }
  out.beta = beta_from_irmsd(out.predicted_irmsd, config.schedule);

  const ScoreFn score_fn = [&](const ComplexState& state, double t, double tau,
                               double beta) -> ScoreOutput {
    return model.forward(state, t, tau, beta, features, config.schedule);
  };

  out.candidates.resize(config.n_candidates);
  const Rng base = Rng::seeded(config.seed);
  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      Rng stream = base.fork(static_cast<std::uint64_t>(i));
      out.candidates[i] = sample_trajectory(unbound, score_fn, out.beta, config, stream);
    }
  };
  const int n_threads = std::max(1, std::min(threads, config.n_candidates));
  if (n_threads == 1) {
    worker(0, config.n_candidates);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (config.n_candidates + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
      const int b = w * chunk;
      const int e = std::min(config.n_candidates, b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<double> scores(config.n_candidates);
  for (int i = 0; i < config.n_candidates; ++i)
    scores[i] = out.candidates[i].clddt_valid ? out.candidates[i].clddt : -1.0;
  out.ranking = rank_candidates(scores);
  return out;
}

}  // namespace hadiff
