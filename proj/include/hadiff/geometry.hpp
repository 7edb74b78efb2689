// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hadiff/types.hpp"

namespace hadiff {

// ---------------------------------------------------------------------------
// Rotations (SO(3), rotation-matrix representation)
// ---------------------------------------------------------------------------

/// Rodrigues exponential of an axis-angle vector. exp_so3(0) = I.
Mat3 exp_so3(const Vec3& axis_angle);

/// Principal logarithm, angle in [0, pi]. Near angle pi the axis is taken
/// from the symmetric part of R with a fixed sign convention (first nonzero
/// component positive) so that results are reproducible.
Vec3 log_so3(const Mat3& R);

/// Geodesic between rotations: R(s) = exp(s log(R1 R0^T)) R0, s in [0, 1].
Mat3 geodesic_interpolate(const Mat3& r0, const Mat3& r1, double s);

/// Frobenius check of R^T R = I and det = +1.
bool is_rotation(const Mat3& R, double tol = 1e-10);

/// Angle of the relative rotation between two rotations.
double geodesic_distance(const Mat3& r0, const Mat3& r1);

// ---------------------------------------------------------------------------
// Frames and complex states
// ---------------------------------------------------------------------------

/// One residue's rigid coordinate system: CA position plus the orientation of
/// the backbone N-CA-C triangle.
struct Frame {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
};

/// Gram-Schmidt frame from backbone atoms: e1 = normalize(C - CA),
/// e2 = orthonormal part of (N - CA), e3 = e1 x e2. Columns of the returned
/// orientation are (e1, e2, e3).
Frame frame_from_backbone(const Vec3& n, const Vec3& ca, const Vec3& c);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Frame apply(const Frame& f) const {
    return Frame{apply(f.position), rotation * f.orientation};
  }
  RigidTransform inverse() const {
    return RigidTransform{rotation.transpose(), -(rotation.transpose() * translation)};
  }
  static RigidTransform identity() { return {}; }
};

/// One chain of residue frames plus residue metadata.
struct ChainState {
  std::string chain_id;
  std::vector<Frame> frames;
  std::vector<int> residue_ids;
  std::vector<int> aa_types;  // 0..19 standard, 20 unknown

  std::size_t size() const { return frames.size(); }
  std::vector<Vec3> positions() const;
  Vec3 centroid() const;
};

/// Receptor + ligand frames; the point on the complex manifold.
struct ComplexState {
  ChainState receptor;
  ChainState ligand;

  void validate() const;  // throws CorrespondenceError on metadata mismatch
};

struct LocalTransform {
  Vec3 translation = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
};

/// Transformation tuple on P = R^3 x SO(3) x (R^3 x SO(3))^(n_r + n_l).
struct ProductPoint {
  Vec3 global_translation = Vec3::Zero();
  Mat3 global_rotation = Mat3::Identity();
  std::vector<LocalTransform> receptor_local;
  std::vector<LocalTransform> ligand_local;

  static ProductPoint identity(std::size_t n_receptor, std::size_t n_ligand);
};

// ---------------------------------------------------------------------------
// Superposition
// ---------------------------------------------------------------------------

/// Weighted Kabsch superposition: the rigid transform minimizing the weighted
/// RMSD of `mobile` onto `reference`. Proper rotation enforced. Throws
/// DegenerateGeometryError when the cross-covariance is rank-deficient
/// (collinear or coincident point sets).
RigidTransform kabsch(std::span<const Vec3> mobile, std::span<const Vec3> reference,
                      std::span<const double> weights = {});

/// RMSD between equal-length point sets, no superposition.
double rmsd_aligned(std::span<const Vec3> a, std::span<const Vec3> b);

// ---------------------------------------------------------------------------
// Hierarchical transforms (ligand-global + per-residue local)
// ---------------------------------------------------------------------------

/// Translate the ligand by t; receptor untouched.
ComplexState apply_global_translation(const Vec3& t, const ComplexState& state);

/// Rotate the ligand about its own CA centroid; receptor untouched.
ComplexState apply_rigid_rotation(const Mat3& R, const ComplexState& state);

/// Per-residue frame updates x_i + t_i, R_i O_i on both chains.
ComplexState apply_residue_transforms(const std::vector<LocalTransform>& receptor_local,
                                      const std::vector<LocalTransform>& ligand_local,
                                      const ComplexState& state);

/// Composite action: residue-level first, then ligand rotation about the
/// (post-residue-update) ligand centroid, then ligand translation.
ComplexState apply_composite(const ProductPoint& point, const ComplexState& state);

/// Superpose `updated` ligand frames back onto their pre-update configuration
/// (Kabsch on CA positions), returning the aligned frames and the removed
/// rigid component. Re-applying the removed component to the aligned frames
/// reproduces the input.
std::pair<std::vector<Frame>, RigidTransform> kabsch_disentangle(
    const std::vector<Frame>& updated_ligand, const std::vector<Frame>& pre_update_ligand);

}  // namespace hadiff
