// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "hadiff/losses.hpp"
#include "hadiff/metrics.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace hadiff;

namespace {

ComplexState move_all(const ComplexState& s, const Mat3& q, const Vec3& t) {
  ComplexState out = s;
  for (ChainState* ch : {&out.receptor, &out.ligand})
    for (auto& f : ch->frames) {
      f.position = q * f.position + t;
      f.orientation = q * f.orientation;
    }
  return out;
}

/// Independent Kabsch (quaternion method of Horn) for the irmsd double
/// implementation oracle.
Mat3 horn_rotation(const std::vector<Vec3>& mobile, const std::vector<Vec3>& reference) {
  Vec3 mc = Vec3::Zero(), rc = Vec3::Zero();
  for (std::size_t i = 0; i < mobile.size(); ++i) {
    mc += mobile[i];
    rc += reference[i];
  }
  mc /= mobile.size();
  rc /= reference.size();
  Mat3 s = Mat3::Zero();
  for (std::size_t i = 0; i < mobile.size(); ++i)
    s += (mobile[i] - mc) * (reference[i] - rc).transpose();
  Eigen::Matrix4d k;
  k << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), s(1, 1) - s(0, 0) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), s(2, 2) - s(0, 0) - s(1, 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(k);
  Eigen::Vector4d q = solver.eigenvectors().col(3);  // largest eigenvalue
  return testoracle::quat_to_matrix(Eigen::Vector4d(q(0), q(1), q(2), q(3))).transpose();
}

double horn_irmsd(const ComplexState& pred, const ComplexState& truth, double cutoff) {
  const int n_r = static_cast<int>(truth.receptor.size());
  std::vector<Vec3> p, q;
  for (int i = 0; i < n_r; ++i) {
    bool in_iface = false;
    for (std::size_t j = 0; j < truth.ligand.size(); ++j)
      if ((truth.receptor.frames[i].position - truth.ligand.frames[j].position).norm() < cutoff)
        in_iface = true;
    if (in_iface) {
      p.push_back(pred.receptor.frames[i].position);
      q.push_back(truth.receptor.frames[i].position);
    }
  }
  for (std::size_t j = 0; j < truth.ligand.size(); ++j) {
    bool in_iface = false;
    for (int i = 0; i < n_r; ++i)
      if ((truth.receptor.frames[i].position - truth.ligand.frames[j].position).norm() < cutoff)
        in_iface = true;
    if (in_iface) {
      p.push_back(pred.ligand.frames[j].position);
      q.push_back(truth.ligand.frames[j].position);
    }
  }
  const Mat3 rot = horn_rotation(p, q);
  Vec3 pc = Vec3::Zero(), qc = Vec3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    pc += p[i];
    qc += q[i];
  }
  pc /= p.size();
  qc /= q.size();
  // the optimal rotation is rot or its transpose depending on the quaternion
  // convention; the minimum over both is the superposed RMSD either way
  double best = 1e300;
  for (const Mat3& r : {rot, Mat3(rot.transpose())}) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      acc += (r * (p[i] - pc) + qc - q[i]).squaredNorm();
    best = std::min(best, std::sqrt(acc / p.size()));
  }
  return best;
}

}  // namespace

TEST_CASE("crmsd: zeros, rigid-transform removal, single outlier") {
  auto synth = testsupport::make_case(10, 8, 0.2, 1);
  const ComplexState truth = synth.bound;

  CHECK(crmsd(truth, truth) == doctest::Approx(0.0).epsilon(1e-12));

  const Mat3 q = exp_so3(Vec3(0.9, -0.2, 0.5));
  CHECK(crmsd(move_all(truth, q, Vec3(8, -3, 2)), truth) < 1e-9);

  // single outlier: with the displacement along the residue's centroid
  // direction the optimal superposition correction is O(1/n); at n = 18 the
  // oracle value is d sqrt(n-1)/n
  ComplexState pred = truth;
  const int k = 4;
  Vec3 dir = truth.receptor.frames[k].position;
  {
    Vec3 centroid = Vec3::Zero();
    int n = 0;
    for (const ChainState* ch : {&truth.receptor, &truth.ligand})
      for (const auto& f : ch->frames) {
        centroid += f.position;
        ++n;
      }
    centroid /= n;
    dir = (truth.receptor.frames[k].position - centroid).normalized();
  }
  const double d = 1e-3;
  pred.receptor.frames[k].position += d * dir;
  const double n_total = 18.0;
  const double expected = d * std::sqrt(n_total - 1.0) / n_total;
  CHECK(std::abs(crmsd(pred, truth) - expected) < 2e-7 * expected + 1e-12);
}

TEST_CASE("irmsd: restriction to the truth interface") {
  auto synth = testsupport::make_case(12, 9, 0.2, 2);
  const ComplexState truth = synth.bound;
  CHECK(irmsd(truth, truth) == doctest::Approx(0.0).epsilon(1e-12));

  // perturbing non-interface residues leaves irmsd unchanged
  const std::vector<int> iface = interface_residues(truth, kIrmsdInterfaceCutoff);
  ComplexState pred = truth;
  Rng rng(3);
  for (auto& f : pred.receptor.frames) f.position += 0.2 * rng.normal3();
  const double base = irmsd(pred, truth);
  ComplexState pred2 = pred;
  bool touched = false;
  for (int i = 0; i < static_cast<int>(truth.receptor.size()); ++i) {
    if (std::find(iface.begin(), iface.end(), i) == iface.end()) {
      pred2.receptor.frames[i].position += 50.0 * rng.normal3();
      touched = true;
    }
  }
  if (touched) CHECK(irmsd(pred2, truth) == doctest::Approx(base).epsilon(1e-12));

  // empty interface is an error
  ComplexState apart = truth;
  for (auto& f : apart.ligand.frames) f.position += Vec3(500, 0, 0);
  CHECK_THROWS_AS(irmsd(truth, apart), DegenerateGeometryError);
}

TEST_CASE("irmsd matches an independently coded superposition") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto synth = testsupport::make_case(11, 9, 0.25, 100 + trial);
    ComplexState pred = synth.bound;
    for (auto& f : pred.receptor.frames) f.position += 0.5 * rng.normal3();
    for (auto& f : pred.ligand.frames) f.position += 0.5 * rng.normal3();
    const double ours = irmsd(pred, synth.bound);
    const double oracle = horn_irmsd(pred, synth.bound, kIrmsdInterfaceCutoff);
    CHECK(std::abs(ours - oracle) < 1e-9);
  }
}

TEST_CASE("clddt: identity, saturation, hand-enumerated toy case") {
  auto synth = testsupport::make_case(9, 8, 0.2, 3);
  const ComplexState truth = synth.bound;
  bool defined = false;
  CHECK(clddt(truth, truth, &defined) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(defined);

  // every inter-chain distance perturbed by more than 8 A scores 0
  ComplexState wrecked = truth;
  for (auto& f : wrecked.ligand.frames) f.position += Vec3(100, 0, 0);
  CHECK(clddt(wrecked, truth) == doctest::Approx(0.0));

  // 3-contact toy case with per-contact errors (0.3, 3.0, 9.0):
  // per-threshold preserved fractions sum to (4 + 2 + 0)/4 per contact
  ComplexState toy_truth;
  toy_truth.receptor.chain_id = "A";
  toy_truth.ligand.chain_id = "B";
  auto add_res = [](ChainState& c, const Vec3& p) {
    Frame f;
    f.position = p;
    c.frames.push_back(f);
    c.residue_ids.push_back(static_cast<int>(c.frames.size()));
    c.aa_types.push_back(0);
  };
  add_res(toy_truth.receptor, Vec3(0, 0, 0));
  add_res(toy_truth.receptor, Vec3(0, 40, 0));
  add_res(toy_truth.receptor, Vec3(0, 80, 0));
  add_res(toy_truth.ligand, Vec3(5, 0, 0));
  add_res(toy_truth.ligand, Vec3(5, 40, 0));
  add_res(toy_truth.ligand, Vec3(5, 80, 0));
  ComplexState toy_pred = toy_truth;
  toy_pred.ligand.frames[0].position.x() += 0.3;
  toy_pred.ligand.frames[1].position.x() += 3.0;
  toy_pred.ligand.frames[2].position.x() += 9.0;
  // contacts are exactly the three 5 A pairs; thresholds {0.5,2,4,8}:
  // contact 1 preserved at all 4, contact 2 at {4,8}, contact 3 at none
  const double expected = (4.0 / 4 + 2.0 / 4 + 0.0 / 4) / 3.0;
  CHECK(clddt(toy_pred, toy_truth) == doctest::Approx(expected).epsilon(1e-12));

  // monotone under a growing perturbation ladder
  double prev = 1.1;
  for (double mag : {0.0, 0.5, 1.5, 3.0, 6.0, 12.0}) {
    ComplexState pred = truth;
    Rng rng(7);
    for (auto& f : pred.ligand.frames) f.position += mag * rng.unit_vector();
    const double v = clddt(pred, truth);
    CHECK(v <= prev + 1e-9);
    prev = v;
  }
}

TEST_CASE("metrics are invariant under a common rigid transform") {
  auto synth = testsupport::make_case(10, 8, 0.25, 4);
  ComplexState pred = synth.bound;
  Rng rng(9);
  for (auto& f : pred.ligand.frames) f.position += 0.8 * rng.normal3();
  const ComplexState truth = synth.bound;

  const double c0 = crmsd(pred, truth);
  const double i0 = irmsd(pred, truth);
  const double l0 = clddt(pred, truth);
  const Mat3 q = exp_so3(Vec3(1.2, 0.4, -0.8));
  const Vec3 t(10, 20, -5);
  CHECK(std::abs(crmsd(move_all(pred, q, t), move_all(truth, q, t)) - c0) < 1e-9);
  CHECK(std::abs(irmsd(move_all(pred, q, t), move_all(truth, q, t)) - i0) < 1e-9);
  CHECK(std::abs(clddt(move_all(pred, q, t), move_all(truth, q, t)) - l0) < 1e-9);
}

TEST_CASE("difficulty classification") {
  // unbound = bound: iRMSD 0, fnonnat 0 -> rigid
  auto synth = testsupport::make_case(10, 8, 0.0, 5);
  ComplexState unbound_rigid = synth.bound;
  CHECK(classify_difficulty(unbound_rigid, synth.bound) == Difficulty::Rigid);

  // strong flexing -> difficult (iRMSD above 2.2)
  auto flexed = testsupport::make_case(12, 10, 0.9, 6);
  const double i = unbound_irmsd(flexed.unbound, flexed.bound);
  const Difficulty d = classify_difficulty(flexed.unbound, flexed.bound);
  if (i > 2.2) CHECK(d == Difficulty::Difficult);

  // moderate flexing in (1.5, 2.2] with conserved contacts -> medium
  for (std::uint64_t seed = 20; seed < 40; ++seed) {
    auto medium = testsupport::make_case(12, 10, 0.45, seed);
    const double im = unbound_irmsd(medium.unbound, medium.bound);
    if (im > 1.6 && im < 2.1) {
      CHECK(classify_difficulty(medium.unbound, medium.bound) != Difficulty::Rigid);
      break;
    }
  }

  // label depends only on geometry: permuting input residue order of both
  // structures consistently cannot change it
  auto synth2 = testsupport::make_case(9, 7, 0.3, 7);
  const Difficulty base = classify_difficulty(synth2.unbound, synth2.bound);
  ComplexState ub = synth2.unbound, bb = synth2.bound;
  std::reverse(ub.receptor.frames.begin(), ub.receptor.frames.end());
  std::reverse(ub.receptor.residue_ids.begin(), ub.receptor.residue_ids.end());
  std::reverse(ub.receptor.aa_types.begin(), ub.receptor.aa_types.end());
  std::reverse(bb.receptor.frames.begin(), bb.receptor.frames.end());
  std::reverse(bb.receptor.residue_ids.begin(), bb.receptor.residue_ids.end());
  std::reverse(bb.receptor.aa_types.begin(), bb.receptor.aa_types.end());
  CHECK(classify_difficulty(ub, bb) == base);
}

TEST_CASE("fnonnat") {
  auto synth = testsupport::make_case(10, 8, 0.0, 8);
  CHECK(fnonnat(synth.bound, synth.bound) == 0.0);
  ComplexState apart = synth.bound;
  for (auto& f : apart.ligand.frames) f.position += Vec3(300, 0, 0);
  CHECK(fnonnat(apart, synth.bound) == 0.0);  // no predicted contacts at all
  // shifted ligand creating wrong contacts
  ComplexState shifted = synth.bound;
  for (auto& f : shifted.ligand.frames) f.position += Vec3(0, 0, 5.0);
  CHECK(fnonnat(shifted, synth.bound) > 0.0);
}

TEST_CASE("summarize") {
  const SummaryStats s = summarize({2.0, 4.0, 6.0, 20.0});
  CHECK(s.mean == doctest::Approx(8.0));
  CHECK(s.median == doctest::Approx(5.0));
  CHECK(s.fraction_below_10 == doctest::Approx(75.0));
  CHECK(s.stddev == doctest::Approx(std::sqrt((36 + 16 + 4 + 144) / 4.0)));
}
