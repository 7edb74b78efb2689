// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hadiff/autodiff.hpp"
#include "hadiff/geometry.hpp"
#include "hadiff/graph.hpp"
#include "hadiff/rng.hpp"
#include "hadiff/schedules.hpp"
#include "hadiff/so3_stats.hpp"

namespace hadiff {

// ---------------------------------------------------------------------------
// Spherical harmonics (norm-normalized real basis)
// ---------------------------------------------------------------------------

/// Components of the real spherical harmonics of a direction, scaled so that
/// each degree's component vector has unit Euclidean norm for any unit input:
///   degree 0: 1
///   degree 1: (x, y, z)
///   degree 2: (sqrt3 xy, sqrt3 yz, (3z^2-1)/2, sqrt3 zx, (sqrt3/2)(x^2-y^2))
struct SphericalHarmonics {
  double y0 = 1.0;
  Vec3 y1 = Vec3::Zero();
  Eigen::Matrix<double, 5, 1> y2 = Eigen::Matrix<double, 5, 1>::Zero();
};

/// Throws DegenerateGeometryError for |v| < 1e-8; normalizes internally.
SphericalHarmonics spherical_harmonics(const Vec3& v);

/// Traceless symmetric matrix u u^T - I/3 of the normalized direction; the
/// degree-2 components above are a fixed linear recombination of its entries.
Mat3 sh2_matrix(const Vec3& v);

// ---------------------------------------------------------------------------
// Model configuration and parameters
// ---------------------------------------------------------------------------

struct ModelConfig {
  int n_scalars = 16;    // invariant channels added per message block
  int n_vectors = 4;     // degree-1 channels per parity per message block
  int n_layers = 4;      // interaction layers
  int hidden_dim = 64;   // MLP hidden width
  int edge_embed_dim = 32;
  int esm_dim = 32;      // width of the optional evolutionary embedding slot
  int time_dim = 32;     // sinusoidal time embedding size (even)
  int rbf_count = 32;
  double center_rbf_cutoff = 30.0;  // RBF span for the center-of-mass readout
  double clddt_radius = 15.0;       // interface-edge inclusion radius for clddt
  // iRMSD regressor
  int irmsd_dim = 16;
  int irmsd_layers = 2;

  bool operator==(const ModelConfig&) const = default;

  int node_input_dim() const { return kAminoAcidTypes + esm_dim + 1 + time_dim + 1; }
  int edge_input_dim() const { return rbf_count + 1; }
  int scalar_dim_at(int layer) const { return n_scalars * (1 + 2 * layer); }
  int vector_dim_at(int layer) const { return 2 * layer * n_vectors; }
};

/// Named tensors; bit-exact serializable (see checkpoint.hpp).
struct ModelParams {
  ModelConfig config;
  std::map<std::string, MatX> tensors;

  static ModelParams init(const ModelConfig& config, Rng& rng);

  const MatX& at(const std::string& name) const;
  double* data(const std::string& name);
};

/// (name, rows, cols) inventory implied by a configuration; init and the
/// checkpoint reader both follow it.
std::vector<std::tuple<std::string, int, int>> param_shapes(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

struct ScoreOutput {
  Vec3 global_tr = Vec3::Zero();
  Vec3 global_rot = Vec3::Zero();
  MatX receptor_tr;   // n_r x 3
  MatX receptor_rot;  // n_r x 3
  MatX ligand_tr;     // n_l x 3
  MatX ligand_rot;    // n_l x 3
  double clddt = 0.0;
  bool clddt_valid = false;
};

/// Tape handles to every head, for building training losses.
struct TapeOutputs {
  ad::Value global_tr;     // 1 x 3
  ad::Value global_rot;    // 1 x 3
  ad::Value residue_tr;    // (n_r + n_l) x 3, receptor rows first
  ad::Value residue_rot;   // (n_r + n_l) x 3
  ad::Value clddt;         // 1 x 1 pooled over interface edges
  bool clddt_valid = false;
  std::map<std::string, ad::Value> params;  // leaf handles by tensor name
};

// ---------------------------------------------------------------------------
// Score-and-confidence network
// ---------------------------------------------------------------------------

class ScoreModel {
 public:
  ScoreModel(ModelParams params, std::shared_ptr<const IGSO3Table> table);

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const IGSO3Table& table() const { return *table_; }

  /// Full forward pass at diffusion times (t, tau) with flexing rate beta.
  ScoreOutput forward(const ComplexState& state, double time_global, double time_local,
                      double beta, const ComplexFeatures& features,
                      const GlobalSchedule& schedule) const;

  /// Same computation, left on the caller's tape. When `with_grad` the
  /// parameter leaves require gradients.
  TapeOutputs forward_on_tape(ad::Tape& tape, const ComplexState& state, double time_global,
                              double time_local, double beta, const ComplexFeatures& features,
                              const GlobalSchedule& schedule, bool with_grad) const;

  static ScoreOutput extract(const ad::Tape& tape, const TapeOutputs& out, int n_receptor);

 private:
  ModelParams params_;
  std::shared_ptr<const IGSO3Table> table_;
};

// ---------------------------------------------------------------------------
// Invariant iRMSD regressor (adaptive-schedule input)
// ---------------------------------------------------------------------------

class IrmsdPredictor {
 public:
  explicit IrmsdPredictor(ModelParams params);

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  /// Predicted interface RMSD (> 0) from the two unbound chains; invariant
  /// under independent rigid motions of either chain (intra edges only).
  double predict(const ComplexState& unbound, const ComplexFeatures& features) const;

  ad::Value predict_on_tape(ad::Tape& tape, const ComplexState& unbound,
                            const ComplexFeatures& features, bool with_grad,
                            std::map<std::string, ad::Value>* param_handles = nullptr) const;

  static ModelParams init(const ModelConfig& config, Rng& rng);
  static std::vector<std::tuple<std::string, int, int>> param_shapes(const ModelConfig& config);

 private:
  ModelParams params_;
};

}  // namespace hadiff
