// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace hadiff {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

Mat3 exp_so3(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  const Mat3 k = skew(axis_angle);
  double a, b;  // sin(t)/t, (1-cos(t))/t^2
  if (theta < 1e-8) {
    a = 1.0 - theta * theta / 6.0;
    b = 0.5 - theta * theta / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Mat3::Identity() + a * k + b * (k * k);
}

Vec3 log_so3(const Mat3& R) {
  const double trace = R.trace();
  const Vec3 axial(0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)),
                   0.5 * (R(1, 0) - R(0, 1)));
  const double sin_theta = axial.norm();
  const double cos_theta = 0.5 * (trace - 1.0);
  const double theta = std::atan2(sin_theta, cos_theta);

  if (trace <= -1.0 + 1e-6) {
    // Near angle pi the antisymmetric part vanishes; recover the axis from
    // the symmetric part B = (R + I)/2 = uu^T + O(pi - theta).
    const Mat3 b = 0.5 * (R + Mat3::Identity());
    int k = 0;
    b.diagonal().maxCoeff(&k);
    Vec3 u = Vec3::Zero();
    u[k] = std::sqrt(std::max(b(k, k), 0.0));
    if (u[k] > 0) {
      for (int j = 0; j < 3; ++j) {
        if (j != k) u[j] = b(j, k) / u[k];
      }
    }
    double n = u.norm();
    if (n < 1e-12) return Vec3::Zero();  // not reachable for a valid rotation
    u /= n;
    // Deterministic sign: first component of magnitude > tolerance is positive.
    for (int j = 0; j < 3; ++j) {
      if (std::abs(u[j]) > 1e-12) {
        if (u[j] < 0) u = -u;
        break;
      }
    }
    return theta * u;
  }

  if (theta < 1e-8) {
    return axial;  // theta/sin(theta) = 1 + O(theta^2)
  }
  return (theta / sin_theta) * axial;
}

Mat3 geodesic_interpolate(const Mat3& r0, const Mat3& r1, double s) {
  if (s == 0.0) return r0;
  if (s == 1.0) return r1;
  return exp_so3(s * log_so3(r1 * r0.transpose())) * r0;
}

bool is_rotation(const Mat3& R, double tol) {
  const double ortho = (R.transpose() * R - Mat3::Identity()).norm();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

double geodesic_distance(const Mat3& r0, const Mat3& r1) {
  return log_so3(r1 * r0.transpose()).norm();
}

Frame frame_from_backbone(const Vec3& n, const Vec3& ca, const Vec3& c) {
  const Vec3 v1 = c - ca;
  const Vec3 v2 = n - ca;
  const double n1 = v1.norm();
  if (n1 < 1e-8) throw DegenerateGeometryError("frame_from_backbone: C coincides with CA");
  const Vec3 e1 = v1 / n1;
  Vec3 u2 = v2 - v2.dot(e1) * e1;
  const double n2 = u2.norm();
  if (n2 < 1e-8) throw DegenerateGeometryError("frame_from_backbone: N collinear with CA-C");
  const Vec3 e2 = u2 / n2;
  const Vec3 e3 = e1.cross(e2);
  Frame f;
  f.position = ca;
  f.orientation.col(0) = e1;
  f.orientation.col(1) = e2;
  f.orientation.col(2) = e3;
  return f;
}

std::vector<Vec3> ChainState::positions() const {
  std::vector<Vec3> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.position);
  return out;
}

Vec3 ChainState::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& f : frames) c += f.position;
  return c / static_cast<double>(frames.size());
}

void ComplexState::validate() const {
  auto check = [](const ChainState& ch, const char* name) {
    if (ch.frames.empty())
      throw CorrespondenceError(std::string(name) + ": chain has no residues");
    if (ch.residue_ids.size() != ch.frames.size() || ch.aa_types.size() != ch.frames.size())
      throw CorrespondenceError(std::string(name) + ": metadata length mismatch");
  };
  check(receptor, "receptor");
  check(ligand, "ligand");
}

ProductPoint ProductPoint::identity(std::size_t n_receptor, std::size_t n_ligand) {
  ProductPoint p;
  p.receptor_local.assign(n_receptor, LocalTransform{});
  p.ligand_local.assign(n_ligand, LocalTransform{});
  return p;
}

RigidTransform kabsch(std::span<const Vec3> mobile, std::span<const Vec3> reference,
                      std::span<const double> weights) {
  const std::size_t n = mobile.size();
  if (n != reference.size()) throw CorrespondenceError("kabsch: size mismatch");
  if (n < 3) throw DegenerateGeometryError("kabsch: need at least 3 points");
  if (!weights.empty() && weights.size() != n)
    throw CorrespondenceError("kabsch: weight length mismatch");

  double wsum = 0.0;
  Vec3 mc = Vec3::Zero(), rc = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    wsum += w;
    mc += w * mobile[i];
    rc += w * reference[i];
  }
  if (wsum <= 0.0) throw DegenerateGeometryError("kabsch: nonpositive total weight");
  mc /= wsum;
  rc /= wsum;

  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    cov += w * (reference[i] - rc) * (mobile[i] - mc).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (sigma(1) <= 1e-12 * std::max(sigma(0), 1.0))
    throw DegenerateGeometryError("kabsch: singular configuration (rank-deficient covariance)");

  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  RigidTransform t;
  t.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  t.translation = rc - t.rotation * mc;
  return t;
}

double rmsd_aligned(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) throw CorrespondenceError("rmsd_aligned: size mismatch");
  if (a.empty()) throw CorrespondenceError("rmsd_aligned: empty point set");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]).squaredNorm();
  return std::sqrt(acc / static_cast<double>(a.size()));
}

ComplexState apply_global_translation(const Vec3& t, const ComplexState& state) {
  ComplexState out = state;
  for (auto& f : out.ligand.frames) f.position += t;
  return out;
}

ComplexState apply_rigid_rotation(const Mat3& R, const ComplexState& state) {
  ComplexState out = state;
  const Vec3 center = state.ligand.centroid();
  for (auto& f : out.ligand.frames) {
    f.position = R * (f.position - center) + center;
    f.orientation = R * f.orientation;
  }
  return out;
}

ComplexState apply_residue_transforms(const std::vector<LocalTransform>& receptor_local,
                                      const std::vector<LocalTransform>& ligand_local,
                                      const ComplexState& state) {
  if (receptor_local.size() != state.receptor.size() ||
      ligand_local.size() != state.ligand.size())
    throw CorrespondenceError("apply_residue_transforms: local transform count mismatch");
  ComplexState out = state;
  for (std::size_t i = 0; i < receptor_local.size(); ++i) {
    out.receptor.frames[i].position += receptor_local[i].translation;
    out.receptor.frames[i].orientation =
        receptor_local[i].rotation * state.receptor.frames[i].orientation;
  }
  for (std::size_t i = 0; i < ligand_local.size(); ++i) {
    out.ligand.frames[i].position += ligand_local[i].translation;
    out.ligand.frames[i].orientation =
        ligand_local[i].rotation * state.ligand.frames[i].orientation;
  }
  return out;
}

ComplexState apply_composite(const ProductPoint& point, const ComplexState& state) {
  ComplexState flexed = apply_residue_transforms(point.receptor_local, point.ligand_local, state);
  ComplexState rotated = apply_rigid_rotation(point.global_rotation, flexed);
  return apply_global_translation(point.global_translation, rotated);
}

std::pair<std::vector<Frame>, RigidTransform> kabsch_disentangle(
    const std::vector<Frame>& updated_ligand, const std::vector<Frame>& pre_update_ligand) {
  if (updated_ligand.size() != pre_update_ligand.size())
    throw CorrespondenceError("kabsch_disentangle: frame count mismatch");
  std::vector<Vec3> mob, ref;
  mob.reserve(updated_ligand.size());
  ref.reserve(updated_ligand.size());
  for (const auto& f : updated_ligand) mob.push_back(f.position);
  for (const auto& f : pre_update_ligand) ref.push_back(f.position);

  const RigidTransform align = kabsch(mob, ref);
  std::vector<Frame> aligned;
  aligned.reserve(updated_ligand.size());
  for (const auto& f : updated_ligand) aligned.push_back(align.apply(f));
  return {std::move(aligned), align.inverse()};
}

}  // namespace hadiff
