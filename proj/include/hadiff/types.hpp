// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace hadiff {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Bad run configuration or CLI usage.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed input file (PDB, manifest, embeddings, binary containers).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Geometrically ill-posed input (collinear Kabsch sets, zero-length frame legs, ...).
struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bound/unbound residue correspondence mismatch.
struct CorrespondenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Elastic network split into more than one rigid component.
struct ConnectivityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hadiff
