// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hadiff/losses.hpp"

namespace hadiff {

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Rigid: return "rigid";
    case Difficulty::Medium: return "medium";
    case Difficulty::Difficult: return "difficult";
  }
  return "unknown";
}

namespace {

std::vector<Vec3> all_positions(const ComplexState& s) {
  std::vector<Vec3> out = s.receptor.positions();
  const auto lig = s.ligand.positions();
  out.insert(out.end(), lig.begin(), lig.end());
  return out;
}

const Vec3& position_at(const ComplexState& s, int global_index) {
  const int n_r = static_cast<int>(s.receptor.size());
  return global_index < n_r ? s.receptor.frames[global_index].position
                            : s.ligand.frames[global_index - n_r].position;
}

void check_same_shape(const ComplexState& a, const ComplexState& b, const char* what) {
  if (a.receptor.size() != b.receptor.size() || a.ligand.size() != b.ligand.size())
    throw CorrespondenceError(std::string(what) + ": residue correspondence mismatch");
}

}  // namespace

double crmsd(const ComplexState& pred, const ComplexState& truth) {
  check_same_shape(pred, truth, "crmsd");
  const auto p = all_positions(pred);
  const auto q = all_positions(truth);
  const RigidTransform t = kabsch(p, q);
  std::vector<Vec3> aligned(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) aligned[i] = t.apply(p[i]);
  return rmsd_aligned(aligned, q);
}

double irmsd(const ComplexState& pred, const ComplexState& truth, double interface_cutoff) {
  check_same_shape(pred, truth, "irmsd");
  const std::vector<int> iface = interface_residues(truth, interface_cutoff);
  if (iface.size() < 3)
    throw DegenerateGeometryError("irmsd: interface has fewer than 3 residues");
  std::vector<Vec3> p, q;
  p.reserve(iface.size());
  q.reserve(iface.size());
  for (int idx : iface) {
    p.push_back(position_at(pred, idx));
    q.push_back(position_at(truth, idx));
  }
  const RigidTransform t = kabsch(p, q);
  for (auto& v : p) v = t.apply(v);
  return rmsd_aligned(p, q);
}

double clddt(const ComplexState& pred, const ComplexState& truth, bool* defined,
             double inclusion_radius) {
  check_same_shape(pred, truth, "clddt");
  const int n_r = static_cast<int>(truth.receptor.size());
  const int n_l = static_cast<int>(truth.ligand.size());
  const double r2 = inclusion_radius * inclusion_radius;

  int considered = 0;
  double preserved = 0.0;
  for (int i = 0; i < n_r; ++i) {
    for (int j = 0; j < n_l; ++j) {
      const Vec3& ti = truth.receptor.frames[i].position;
      const Vec3& tj = truth.ligand.frames[j].position;
      if ((ti - tj).squaredNorm() > r2) continue;
      const double dt = (ti - tj).norm();
      const double dp =
          (pred.receptor.frames[i].position - pred.ligand.frames[j].position).norm();
      const double diff = std::abs(dp - dt);
      int hits = 0;
      for (double thr : kClddtThresholds)
        if (diff <= thr) ++hits;
      preserved += static_cast<double>(hits) / static_cast<double>(kClddtThresholds.size());
      ++considered;
    }
  }
  if (defined != nullptr) *defined = considered > 0;
  if (considered == 0) return 0.0;
  return preserved / considered;
}

double fnonnat(const ComplexState& pred, const ComplexState& truth, double contact_cutoff) {
  check_same_shape(pred, truth, "fnonnat");
  const int n_r = static_cast<int>(truth.receptor.size());
  const int n_l = static_cast<int>(truth.ligand.size());
  const double c2 = contact_cutoff * contact_cutoff;
  int pred_contacts = 0, nonnative = 0;
  for (int i = 0; i < n_r; ++i) {
    for (int j = 0; j < n_l; ++j) {
      const bool in_pred =
          (pred.receptor.frames[i].position - pred.ligand.frames[j].position).squaredNorm() < c2;
      if (!in_pred) continue;
      ++pred_contacts;
      const bool in_truth =
          (truth.receptor.frames[i].position - truth.ligand.frames[j].position).squaredNorm() < c2;
      if (!in_truth) ++nonnative;
    }
  }
  if (pred_contacts == 0) return 0.0;
  return static_cast<double>(nonnative) / pred_contacts;
}

double unbound_irmsd(const ComplexState& unbound, const ComplexState& bound) {
  const ComplexState aligned = superpose_unbound(unbound, bound);
  return irmsd(aligned, bound);
}

Difficulty classify_difficulty(const ComplexState& unbound, const ComplexState& bound) {
  const ComplexState aligned = superpose_unbound(unbound, bound);
  const double i = irmsd(aligned, bound);
  const double f = fnonnat(aligned, bound);
  if (i <= 1.5 && f <= 0.4) return Difficulty::Rigid;
  if (i > 2.2) return Difficulty::Difficult;
  return Difficulty::Medium;
}

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  double sum = 0.0, below = 0.0;
  for (double v : values) {
    sum += v;
    if (v < 10.0) below += 1.0;
  }
  s.mean = sum / n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / n);
  s.fraction_below_10 = 100.0 * below / n;
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  s.median = (m % 2 == 1) ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
  return s;
}

}  // namespace hadiff
