// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "hadiff/types.hpp"

namespace hadiff::ad {

// Small reverse-mode tape over Eigen matrices. Graphs are rebuilt per
// evaluation; values and gradients are dense MatX. Row blocks of width 3
// ("3-blocks") encode per-row 3-vectors channel-major: column i*3+d holds
// channel i, spatial component d.

class Tape;

struct Value {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value input(MatX v, bool requires_grad);
  Value constant(MatX v) { return input(std::move(v), false); }

  const MatX& value(Value v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() root w.r.t. `v` (zeros if unreached).
  MatX gradient(Value v) const;

  void backward(Value root);  // root must be 1x1

  bool requires_grad(Value v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // internal plumbing for op implementations
  Value make(MatX value, bool requires_grad, std::function<void(Tape&)> back);
  MatX& grad_ref(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }

 private:
  struct Node {
    MatX value;
    MatX grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementwise / linear algebra
// ---------------------------------------------------------------------------

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);         // Hadamard
Value scale(Value a, double c);
Value matmul(Value a, Value b);
Value add_rowvec(Value x, Value b);  // broadcast 1 x c over rows
Value concat_cols(const std::vector<Value>& parts);
Value slice_cols(Value a, Eigen::Index start, Eigen::Index count);

Value silu(Value x);
Value logistic(Value x);
Value softplus(Value x);
Value square(Value x);
Value clamp_max(Value x, double cap);

Value sum_all(Value x);    // 1x1
Value mean_all(Value x);   // 1x1
Value sum_squares(Value x);  // 1x1
Value mean_rows(Value x);  // 1 x c

// ---------------------------------------------------------------------------
// Row indexing
// ---------------------------------------------------------------------------

Value rows_gather(Value a, std::vector<int> idx);
Value rows_scatter_sum(Value a, std::vector<int> dst, Eigen::Index n_rows);
Value rowwise_scale(Value a, VecX w);  // constant per-row factors

// ---------------------------------------------------------------------------
// Per-row 3-vector ops (constant geometry on the right)
// ---------------------------------------------------------------------------

/// out(e, i) = sum_d V(e, 3i+d) * y(e, d)
Value dot3(Value v3blocks, const MatX& y);
/// out(e, 3i+d) = S(e, i) * y(e, d)
Value outer3(Value scalars, const MatX& y);
/// out 3-block i = y(e) x v_i(e)
Value cross3(Value v3blocks, const MatX& y);
/// out 3-block i = M(e) * v_i(e), M row-major 3x3 per row (E x 9)
Value matvec3(Value v3blocks, const MatX& m9);

/// Batched per-row mixing: out(e, o*block+d) = sum_i W(e, o*n_in+i) X(e, i*block+d)
Value edge_mix(Value weights, Value x, int n_out, int n_in, int block);

/// Per-row Euclidean norm of an n x 3 matrix, smoothed by eps: sqrt(|v|^2 + eps^2).
Value norm_rows3(Value v, double eps = 1e-9);
/// Scale each row of V (n x c) by the per-row scalar s (n x 1).
Value mul_rows(Value v, Value s);
Value div_rows(Value v, Value s);

// ---------------------------------------------------------------------------
// Normalization layers
// ---------------------------------------------------------------------------

/// Standard batch norm over rows per column; gamma/beta are 1 x c parameters.
Value batch_norm_scalars(Value x, Value gamma, Value beta, double eps = 1e-5);
/// Norm-based equivariant batch norm for 3-block features: each channel is
/// divided by its mean row norm and scaled by gamma (1 x c). No mean
/// subtraction, no bias.
Value batch_norm_vectors(Value v3blocks, Value gamma, double eps = 1e-5);

// ---------------------------------------------------------------------------
// Rotation-valued ops
// ---------------------------------------------------------------------------

/// Rodrigues map per row: (n x 3) axis-angle -> (n x 9) row-major rotations.
Value rotvec_to_matrix(Value v);
/// out = R^T d per row; R is (m x 9) row-major, d is (m x 3).
Value apply_rot_transpose(Value r9, Value d);

}  // namespace hadiff::ad
