// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <memory>

#include "hadiff/metrics.hpp"
#include "hadiff/sampler.hpp"
#include "synthetic.hpp"

using namespace hadiff;

namespace {

ScoreOutput zero_score(const ComplexState& state) {
  ScoreOutput s;
  s.receptor_tr = MatX::Zero(state.receptor.size(), 3);
  s.receptor_rot = MatX::Zero(state.receptor.size(), 3);
  s.ligand_tr = MatX::Zero(state.ligand.size(), 3);
  s.ligand_rot = MatX::Zero(state.ligand.size(), 3);
  return s;
}

/// Closed-form oracle: global scores from the known target pose, residue
/// scores equal to the exact residuals toward the bound configuration.
ScoreFn make_oracle(const ComplexState& bound, const ComplexState& unbound,
                    const GlobalSchedule& schedule) {
  return [=](const ComplexState& state, double t, double tau, double beta) -> ScoreOutput {
    ScoreOutput s = zero_score(state);
    const double sig_tr = sigma(t, SigmaKind::Translation, schedule);
    const double sig_rot = sigma(t, SigmaKind::Rotation, schedule);

    // rigid offset of the current ligand from the bound ligand
    const auto cur = state.ligand.positions();
    const auto tgt = bound.ligand.positions();
    const RigidTransform align = kabsch(cur, tgt);  // current -> bound
    const Mat3 r_off = align.rotation.transpose();  // bound -> current
    s.global_tr = -(state.ligand.centroid() - bound.ligand.centroid()) / (sig_tr * sig_tr);
    s.global_rot = igso3_score(r_off, sig_rot);

    // exact residue residuals toward the bound state, receptor direct and
    // ligand measured against the r_off-rotated reference
    const ResidueEndpoints ep = residue_targets_from_states(bound, unbound, Mat3::Identity());
    for (std::size_t i = 0; i < state.receptor.size(); ++i) {
      s.receptor_tr.row(i) =
          (bound.receptor.frames[i].position - state.receptor.frames[i].position).transpose();
      s.receptor_rot.row(i) = log_so3(bound.receptor.frames[i].orientation *
                                      state.receptor.frames[i].orientation.transpose())
                                  .transpose();
    }
    // ligand flexing residual: compare internal configurations after removing
    // the rigid offset (positions relative to centroids in the bound frame)
    const Vec3 cur_com = state.ligand.centroid();
    const Vec3 tgt_com = bound.ligand.centroid();
    for (std::size_t i = 0; i < state.ligand.size(); ++i) {
      const Vec3 aligned_pos =
          align.rotation * (state.ligand.frames[i].position - cur_com) + tgt_com;
      s.ligand_tr.row(i) =
          (align.rotation.transpose() * (bound.ligand.frames[i].position - aligned_pos))
              .transpose();
      const Mat3 aligned_ori = align.rotation * state.ligand.frames[i].orientation;
      const Mat3 residual = bound.ligand.frames[i].orientation * aligned_ori.transpose();
      // express the rotation residual in the current (unaligned) frame
      s.ligand_rot.row(i) =
          log_so3(align.rotation.transpose() * residual * align.rotation).transpose();
    }
    (void)beta;
    (void)tau;
    (void)ep;
    return s;
  };
}

struct OracleSetup {
  ComplexState bound, unbound;
  GlobalSchedule schedule;
  SamplerConfig config;
  ScoreFn oracle;
  double beta = 0.0;  // from the measured unbound-vs-bound iRMSD, as in the pipeline
};

OracleSetup make_oracle_setup(std::uint64_t seed, double flex = 0.2) {
  OracleSetup o;
  auto synth = testsupport::make_case(10, 8, flex, seed);
  o.bound = synth.bound;
  o.unbound = superpose_unbound(synth.unbound, synth.bound);
  o.config.n_steps = 40;
  o.config.stochastic = false;
  o.config.schedule = o.schedule;
  o.oracle = make_oracle(o.bound, o.unbound, o.schedule);
  o.beta = beta_from_irmsd(std::max(unbound_irmsd(o.unbound, o.bound), 0.75), o.schedule);
  return o;
}

}  // namespace

TEST_CASE("initialize: determinism, receptor fixed, displacement moments") {
  auto synth = testsupport::make_case(8, 6, 0.15, 1);
  GlobalSchedule schedule;
  Rng a = Rng::seeded(7), b = Rng::seeded(7);
  const ComplexState s1 = sampler_initialize(synth.unbound, schedule, a);
  const ComplexState s2 = sampler_initialize(synth.unbound, schedule, b);
  for (std::size_t i = 0; i < s1.ligand.size(); ++i)
    CHECK((s1.ligand.frames[i].position - s2.ligand.frames[i].position).norm() == 0.0);
  for (std::size_t i = 0; i < s1.receptor.size(); ++i)
    CHECK((s1.receptor.frames[i].position - synth.unbound.receptor.frames[i].position).norm() ==
          0.0);

  Rng rng = Rng::seeded(11);
  const Vec3 base_com = synth.unbound.ligand.centroid();
  double acc = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const ComplexState s = sampler_initialize(synth.unbound, schedule, rng);
    acc += (s.ligand.centroid() - base_com).squaredNorm();
  }
  const double expected = 3.0 * schedule.sigma_tr_max * schedule.sigma_tr_max;
  CHECK(std::abs(acc / n - expected) / expected < 0.05);
}

TEST_CASE("step: zero score in deterministic mode changes nothing") {
  auto synth = testsupport::make_case(7, 6, 0.2, 2);
  SamplerConfig config;
  config.stochastic = false;
  Rng rng(3);
  const ScoreOutput zero = zero_score(synth.bound);
  const ComplexState out = sampler_step(synth.bound, 0.5, 0.5, 0.025, zero, 2.0, config, rng);
  for (std::size_t i = 0; i < synth.bound.ligand.size(); ++i) {
    CHECK((out.ligand.frames[i].position - synth.bound.ligand.frames[i].position).norm() < 1e-9);
    CHECK((out.ligand.frames[i].orientation - synth.bound.ligand.frames[i].orientation).norm() <
          1e-9);
  }
}

TEST_CASE("step: non-finite scores abort with the step index") {
  auto synth = testsupport::make_case(5, 4, 0.2, 3);
  SamplerConfig config;
  config.stochastic = false;
  ScoreFn bad = [&](const ComplexState& state, double, double, double) {
    ScoreOutput s = zero_score(state);
    s.global_tr = Vec3(std::nan(""), 0, 0);
    return s;
  };
  Rng rng(5);
  CHECK_THROWS_WITH_AS(sample_trajectory(synth.unbound, bad, 2.0, config, rng),
                       doctest::Contains("step 0"), std::runtime_error);
}

TEST_CASE("step: Kabsch disentanglement decouples residue and global updates") {
  auto synth = testsupport::make_case(8, 7, 0.25, 4);
  const ComplexState bound = synth.bound;
  const ComplexState unbound = superpose_unbound(synth.unbound, bound);
  GlobalSchedule schedule;
  SamplerConfig config;
  config.stochastic = false;
  config.schedule = schedule;
  ScoreFn oracle = make_oracle(bound, unbound, schedule);

  Rng rng(7);
  ComplexState state = sampler_initialize(unbound, schedule, rng);
  const ScoreOutput score = oracle(state, 1.0, 1.0, 3.0);

  // internal (pairwise-distance) change produced by a step must be identical
  // whether or not the global update runs, since the global part is a rigid
  // motion of the ligand
  SamplerConfig no_global = config;
  ScoreOutput residue_only = score;
  residue_only.global_tr.setZero();
  residue_only.global_rot.setZero();
  Rng r1(9), r2(9);
  const ComplexState with_global =
      sampler_step(state, 1.0, 1.0, 0.025, score, 3.0, config, r1);
  const ComplexState without_global =
      sampler_step(state, 1.0, 1.0, 0.025, residue_only, 3.0, no_global, r2);
  for (std::size_t i = 0; i < state.ligand.size(); ++i)
    for (std::size_t j = i + 1; j < state.ligand.size(); ++j) {
      const double a =
          (with_global.ligand.frames[i].position - with_global.ligand.frames[j].position).norm();
      const double b = (without_global.ligand.frames[i].position -
                        without_global.ligand.frames[j].position)
                           .norm();
      CHECK(std::abs(a - b) < 1e-8);
    }
}

TEST_CASE("oracle sampling: translation converges to the target") {
  OracleSetup o = make_oracle_setup(5, 0.0);
  Rng rng = Rng::seeded(13);
  const SampleResult result = sample_trajectory(o.unbound, o.oracle, o.beta, o.config, rng);
  CHECK((result.final_state.ligand.centroid() - o.bound.ligand.centroid()).norm() < 0.1);
}

TEST_CASE("oracle sampling: exact residue flow reaches the bound configuration") {
  OracleSetup o = make_oracle_setup(6, 0.25);
  Rng rng = Rng::seeded(17);
  const SampleResult result = sample_trajectory(o.unbound, o.oracle, o.beta, o.config, rng);
  // internal configuration: superpose the final ligand onto bound and compare
  const auto fin = result.final_state.ligand.positions();
  const auto tgt = o.bound.ligand.positions();
  const RigidTransform t = kabsch(fin, tgt);
  std::vector<Vec3> aligned;
  for (const auto& p : fin) aligned.push_back(t.apply(p));
  CHECK(rmsd_aligned(aligned, tgt) < 1e-3);
  // receptor flexing (no global component) lands on the bound receptor
  double acc = 0.0;
  for (std::size_t i = 0; i < o.bound.receptor.size(); ++i)
    acc += (result.final_state.receptor.frames[i].position -
            o.bound.receptor.frames[i].position)
               .squaredNorm();
  CHECK(std::sqrt(acc / o.bound.receptor.size()) < 1e-3);
  // tau endpoint: residual magnitudes vanish
  const ScoreOutput last = o.oracle(result.final_state, 0.01, 0.01, o.beta);
  CHECK(last.receptor_tr.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("oracle sampling: end-to-end iRMSD") {
  OracleSetup o = make_oracle_setup(7, 0.2);
  int hits = 0;
  for (int run = 0; run < 20; ++run) {
    Rng rng = Rng::seeded(1000 + run);
    const SampleResult result = sample_trajectory(o.unbound, o.oracle, o.beta, o.config, rng);
    if (irmsd(result.final_state, o.bound) < 0.5) ++hits;
  }
  CHECK(hits >= 19);
}

TEST_CASE("sampling trajectories: bookkeeping and determinism") {
  OracleSetup o = make_oracle_setup(8, 0.15);
  Rng a = Rng::seeded(21), b = Rng::seeded(21);
  const SampleResult r1 = sample_trajectory(o.unbound, o.oracle, o.beta, o.config, a);
  const SampleResult r2 = sample_trajectory(o.unbound, o.oracle, o.beta, o.config, b);
  CHECK(r1.trajectory.states.size() == static_cast<std::size_t>(o.config.n_steps) + 1);
  CHECK(r1.trajectory.increments.size() == static_cast<std::size_t>(o.config.n_steps));
  for (std::size_t k = 0; k < r1.trajectory.states.size(); ++k)
    for (std::size_t i = 0; i < r1.trajectory.states[k].ligand.size(); ++i)
      CHECK((r1.trajectory.states[k].ligand.frames[i].position -
             r2.trajectory.states[k].ligand.frames[i].position)
                .norm() == 0.0);
}

TEST_CASE("sampling equivariance with the oracle score (deterministic mode)") {
  OracleSetup o = make_oracle_setup(9, 0.2);
  const Mat3 q = exp_so3(Vec3(0.8, -0.4, 0.3));

  auto rotate_state = [&](const ComplexState& s) {
    ComplexState out = s;
    for (ChainState* ch : {&out.receptor, &out.ligand})
      for (auto& f : ch->frames) {
        f.position = q * f.position;
        f.orientation = q * f.orientation;
      }
    return out;
  };
  const ComplexState bound_q = rotate_state(o.bound);
  const ComplexState unbound_q = rotate_state(o.unbound);
  const ScoreFn oracle_q = make_oracle(bound_q, unbound_q, o.schedule);

  // identical explicit initial states related by q (bypassing initialize)
  Rng rng(31);
  const ComplexState init = sampler_initialize(o.unbound, o.schedule, rng);
  const ComplexState init_q = rotate_state(init);

  Rng ra(1), rb(1);
  const SampleResult base = sample_trajectory(o.unbound, o.oracle, o.beta, o.config, ra, &init);
  const SampleResult rotated =
      sample_trajectory(unbound_q, oracle_q, o.beta, o.config, rb, &init_q);
  for (std::size_t k = 0; k < base.trajectory.states.size(); ++k)
    for (std::size_t i = 0; i < base.trajectory.states[k].ligand.size(); ++i) {
      const Vec3 expect = q * base.trajectory.states[k].ligand.frames[i].position;
      CHECK((rotated.trajectory.states[k].ligand.frames[i].position - expect).norm() < 1e-4);
    }
}

TEST_CASE("rank_candidates") {
  CHECK(rank_candidates({0.4}) == std::vector<int>{0});
  CHECK(rank_candidates({0.2, 0.9, 0.5}) == std::vector<int>({1, 2, 0}));
  CHECK(rank_candidates({0.3, 0.3, 0.1}) == std::vector<int>({0, 1, 2}));

  // invariance under strictly increasing transforms
  Rng rng(41);
  std::vector<double> scores;
  for (int i = 0; i < 10; ++i) scores.push_back(rng.uniform());
  std::vector<double> squashed;
  for (double s : scores) squashed.push_back(std::tanh(3.0 * s) + 2.0);
  CHECK(rank_candidates(scores) == rank_candidates(squashed));
  CHECK_THROWS_AS(rank_candidates({}), ConfigError);
}
