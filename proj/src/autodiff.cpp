// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/autodiff.hpp"

#include <cmath>
#include <utility>

namespace hadiff::ad {

namespace {

void check_same_tape(Value a, Value b) {
  if (a.tape != b.tape) throw std::logic_error("ad: values from different tapes");
}

}  // namespace

Value Tape::input(MatX v, bool requires_grad) {
  nodes_.push_back(Node{std::move(v), MatX(), requires_grad, nullptr});
  return Value{this, static_cast<int>(nodes_.size() - 1)};
}

Value Tape::make(MatX value, bool requires_grad, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(value), MatX(), requires_grad,
                        requires_grad ? std::move(back) : nullptr});
  return Value{this, static_cast<int>(nodes_.size() - 1)};
}

MatX& Tape::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = MatX::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

MatX Tape::gradient(Value v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return MatX::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Value root) {
  if (root.tape != this) throw std::logic_error("ad: backward root from another tape");
  const Node& r = nodes_[root.id];
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw std::logic_error("ad: backward root must be scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_ref(root.id)(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() > 0) n.backward(*this);
  }
}

// ---------------------------------------------------------------------------

Value add(Value a, Value b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  MatX out = t.value(a) + t.value(b);
  const int ia = a.id, ib = b.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    if (tp.requires_grad(Value{&tp, ia})) tp.grad_ref(ia) += g;
    if (tp.requires_grad(Value{&tp, ib})) tp.grad_ref(ib) += g;
  });
}

Value sub(Value a, Value b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  MatX out = t.value(a) - t.value(b);
  const int ia = a.id, ib = b.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    if (tp.requires_grad(Value{&tp, ia})) tp.grad_ref(ia) += g;
    if (tp.requires_grad(Value{&tp, ib})) tp.grad_ref(ib) -= g;
  });
}

Value mul(Value a, Value b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  MatX out = t.value(a).cwiseProduct(t.value(b));
  const int ia = a.id, ib = b.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    if (tp.requires_grad(Value{&tp, ia})) tp.grad_ref(ia) += g.cwiseProduct(tp.value(Value{&tp, ib}));
    if (tp.requires_grad(Value{&tp, ib})) tp.grad_ref(ib) += g.cwiseProduct(tp.value(Value{&tp, ia}));
  });
}

Value scale(Value a, double c) {
  Tape& t = *a.tape;
  MatX out = c * t.value(a);
  const int ia = a.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a), [=](Tape& tp) {
    tp.grad_ref(ia) += c * tp.grad_ref(self);
  });
}

Value matmul(Value a, Value b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  MatX out = t.value(a) * t.value(b);
  const int ia = a.id, ib = b.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    if (tp.requires_grad(Value{&tp, ia})) tp.grad_ref(ia) += g * tp.value(Value{&tp, ib}).transpose();
    if (tp.requires_grad(Value{&tp, ib})) tp.grad_ref(ib) += tp.value(Value{&tp, ia}).transpose() * g;
  });
}

Value add_rowvec(Value x, Value b) {
  check_same_tape(x, b);
  Tape& t = *x.tape;
  MatX out = t.value(x).rowwise() + t.value(b).row(0);
  const int ix = x.id, ib = b.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x) || t.requires_grad(b), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    if (tp.requires_grad(Value{&tp, ix})) tp.grad_ref(ix) += g;
    if (tp.requires_grad(Value{&tp, ib})) tp.grad_ref(ib).row(0) += g.colwise().sum();
  });
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw std::logic_error("ad: concat_cols of nothing");
  Tape& t = *parts[0].tape;
  Eigen::Index rows = t.value(parts[0]).rows(), cols = 0;
  bool any_grad = false;
  for (Value p : parts) {
    check_same_tape(parts[0], p);
    cols += t.value(p).cols();
    any_grad = any_grad || t.requires_grad(p);
  }
  MatX out(rows, cols);
  Eigen::Index at = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offs, widths;
  for (Value p : parts) {
    const MatX& v = t.value(p);
    out.middleCols(at, v.cols()) = v;
    ids.push_back(p.id);
    offs.push_back(at);
    widths.push_back(v.cols());
    at += v.cols();
  }
  const int self = static_cast<int>(t.size());
  return t.make(std::move(out), any_grad, [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(Value{&tp, ids[k]}))
        tp.grad_ref(ids[k]) += g.middleCols(offs[k], widths[k]);
    }
  });
}

Value slice_cols(Value a, Eigen::Index start, Eigen::Index count) {
  Tape& t = *a.tape;
  MatX out = t.value(a).middleCols(start, count);
  const int ia = a.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a), [=](Tape& tp) {
    tp.grad_ref(ia).middleCols(start, count) += tp.grad_ref(self);
  });
}

Value silu(Value x) {
  Tape& t = *x.tape;
  const MatX& v = t.value(x);
  MatX sig = (1.0 + (-v.array()).exp()).inverse().matrix();
  MatX out = v.cwiseProduct(sig);
  const int ix = x.id, self = static_cast<int>(t.size());
  MatX deriv = sig.array() * (1.0 + v.array() * (1.0 - sig.array()));
  return t.make(std::move(out), t.requires_grad(x), [=, d = std::move(deriv)](Tape& tp) {
    tp.grad_ref(ix) += tp.grad_ref(self).cwiseProduct(d);
  });
}

Value logistic(Value x) {
  Tape& t = *x.tape;
  MatX out = (1.0 + (-t.value(x).array()).exp()).inverse().matrix();
  const int ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x), [=](Tape& tp) {
    const MatX& y = tp.value(Value{&tp, self});
    tp.grad_ref(ix) +=
        tp.grad_ref(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

Value softplus(Value x) {
  Tape& t = *x.tape;
  const MatX& v = t.value(x);
  MatX out = v.unaryExpr([](double a) {
    if (a > 30.0) return a;
    if (a < -30.0) return std::exp(a);
    return std::log1p(std::exp(a));
  });
  const int ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x), [=](Tape& tp) {
    const MatX& vin = tp.value(Value{&tp, ix});
    MatX sig = (1.0 + (-vin.array()).exp()).inverse().matrix();
    tp.grad_ref(ix) += tp.grad_ref(self).cwiseProduct(sig);
  });
}

Value square(Value x) {
  Tape& t = *x.tape;
  MatX out = t.value(x).array().square().matrix();
  const int ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x), [=](Tape& tp) {
    tp.grad_ref(ix) += 2.0 * tp.grad_ref(self).cwiseProduct(tp.value(Value{&tp, ix}));
  });
}

Value clamp_max(Value x, double cap) {
  Tape& t = *x.tape;
  MatX out = t.value(x).cwiseMin(cap);
  const int ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x), [=](Tape& tp) {
    const MatX& vin = tp.value(Value{&tp, ix});
    const MatX& g = tp.grad_ref(self);
    MatX& gx = tp.grad_ref(ix);
    for (Eigen::Index i = 0; i < vin.rows(); ++i)
      for (Eigen::Index j = 0; j < vin.cols(); ++j)
        if (vin(i, j) < cap) gx(i, j) += g(i, j);
  });
}

Value sum_all(Value x) {
  Tape& t = *x.tape;
  MatX out(1, 1);
  out(0, 0) = t.value(x).sum();
  const int ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x), [=](Tape& tp) {
    tp.grad_ref(ix).array() += tp.grad_ref(self)(0, 0);
  });
}

Value mean_all(Value x) {
  Tape& t = *x.tape;
  const double n = static_cast<double>(t.value(x).size());
  return scale(sum_all(x), 1.0 / n);
}

Value sum_squares(Value x) {
  Tape& t = *x.tape;
  MatX out(1, 1);
  out(0, 0) = t.value(x).squaredNorm();
  const int ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x), [=](Tape& tp) {
    tp.grad_ref(ix) += 2.0 * tp.grad_ref(self)(0, 0) * tp.value(Value{&tp, ix});
  });
}

Value mean_rows(Value x) {
  Tape& t = *x.tape;
  const Eigen::Index n = t.value(x).rows();
  MatX out = t.value(x).colwise().mean();
  const int ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(x), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    tp.grad_ref(ix) += (1.0 / static_cast<double>(n)) * g.replicate(n, 1);
  });
}

Value rows_gather(Value a, std::vector<int> idx) {
  Tape& t = *a.tape;
  const MatX& v = t.value(a);
  MatX out(static_cast<Eigen::Index>(idx.size()), v.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(k) = v.row(idx[k]);
  const int ia = a.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a), [=, ix = std::move(idx)](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    MatX& ga = tp.grad_ref(ia);
    for (std::size_t k = 0; k < ix.size(); ++k) ga.row(ix[k]) += g.row(k);
  });
}

Value rows_scatter_sum(Value a, std::vector<int> dst, Eigen::Index n_rows) {
  Tape& t = *a.tape;
  const MatX& v = t.value(a);
  if (static_cast<Eigen::Index>(dst.size()) != v.rows())
    throw std::logic_error("ad: scatter index length mismatch");
  MatX out = MatX::Zero(n_rows, v.cols());
  for (std::size_t k = 0; k < dst.size(); ++k) out.row(dst[k]) += v.row(k);
  const int ia = a.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a), [=, ix = std::move(dst)](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    MatX& ga = tp.grad_ref(ia);
    for (std::size_t k = 0; k < ix.size(); ++k) ga.row(k) += g.row(ix[k]);
  });
}

Value rowwise_scale(Value a, VecX w) {
  Tape& t = *a.tape;
  const MatX& v = t.value(a);
  if (w.size() != v.rows()) throw std::logic_error("ad: rowwise_scale length mismatch");
  MatX out = w.asDiagonal() * v;
  const int ia = a.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(a), [=, ww = std::move(w)](Tape& tp) {
    tp.grad_ref(ia) += ww.asDiagonal() * tp.grad_ref(self);
  });
}

Value dot3(Value v3blocks, const MatX& y) {
  Tape& t = *v3blocks.tape;
  const MatX& v = t.value(v3blocks);
  const Eigen::Index e = v.rows(), c = v.cols() / 3;
  MatX out = MatX::Zero(e, c);
  for (Eigen::Index r = 0; r < e; ++r)
    for (Eigen::Index i = 0; i < c; ++i)
      out(r, i) = v(r, 3 * i) * y(r, 0) + v(r, 3 * i + 1) * y(r, 1) + v(r, 3 * i + 2) * y(r, 2);
  const int iv = v3blocks.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v3blocks), [=, yy = y](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    MatX& gv = tp.grad_ref(iv);
    for (Eigen::Index r = 0; r < e; ++r)
      for (Eigen::Index i = 0; i < c; ++i)
        for (int d = 0; d < 3; ++d) gv(r, 3 * i + d) += g(r, i) * yy(r, d);
  });
}

Value outer3(Value scalars, const MatX& y) {
  Tape& t = *scalars.tape;
  const MatX& s = t.value(scalars);
  const Eigen::Index e = s.rows(), c = s.cols();
  MatX out(e, 3 * c);
  for (Eigen::Index r = 0; r < e; ++r)
    for (Eigen::Index i = 0; i < c; ++i)
      for (int d = 0; d < 3; ++d) out(r, 3 * i + d) = s(r, i) * y(r, d);
  const int is = scalars.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(scalars), [=, yy = y](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    MatX& gs = tp.grad_ref(is);
    for (Eigen::Index r = 0; r < e; ++r)
      for (Eigen::Index i = 0; i < c; ++i)
        gs(r, i) += g(r, 3 * i) * yy(r, 0) + g(r, 3 * i + 1) * yy(r, 1) + g(r, 3 * i + 2) * yy(r, 2);
  });
}

Value cross3(Value v3blocks, const MatX& y) {
  Tape& t = *v3blocks.tape;
  const MatX& v = t.value(v3blocks);
  const Eigen::Index e = v.rows(), c = v.cols() / 3;
  MatX out(e, v.cols());
  for (Eigen::Index r = 0; r < e; ++r) {
    const Vec3 yr = y.row(r).transpose();
    for (Eigen::Index i = 0; i < c; ++i) {
      const Vec3 vi = v.block<1, 3>(r, 3 * i).transpose();
      out.block<1, 3>(r, 3 * i) = yr.cross(vi).transpose();
    }
  }
  const int iv = v3blocks.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v3blocks), [=, yy = y](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    MatX& gv = tp.grad_ref(iv);
    for (Eigen::Index r = 0; r < e; ++r) {
      const Vec3 yr = yy.row(r).transpose();
      for (Eigen::Index i = 0; i < c; ++i) {
        const Vec3 gi = g.block<1, 3>(r, 3 * i).transpose();
        gv.block<1, 3>(r, 3 * i) += gi.cross(yr).transpose();  // d(y x v)/dv^T g = g x y
      }
    }
  });
}

Value matvec3(Value v3blocks, const MatX& m9) {
  Tape& t = *v3blocks.tape;
  const MatX& v = t.value(v3blocks);
  const Eigen::Index e = v.rows(), c = v.cols() / 3;
  MatX out(e, v.cols());
  for (Eigen::Index r = 0; r < e; ++r) {
    Mat3 m;
    m << m9(r, 0), m9(r, 1), m9(r, 2), m9(r, 3), m9(r, 4), m9(r, 5), m9(r, 6), m9(r, 7), m9(r, 8);
    for (Eigen::Index i = 0; i < c; ++i) {
      const Vec3 vi = v.block<1, 3>(r, 3 * i).transpose();
      out.block<1, 3>(r, 3 * i) = (m * vi).transpose();
    }
  }
  const int iv = v3blocks.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v3blocks), [=, mm = m9](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    MatX& gv = tp.grad_ref(iv);
    for (Eigen::Index r = 0; r < e; ++r) {
      Mat3 m;
      m << mm(r, 0), mm(r, 1), mm(r, 2), mm(r, 3), mm(r, 4), mm(r, 5), mm(r, 6), mm(r, 7), mm(r, 8);
      for (Eigen::Index i = 0; i < c; ++i) {
        const Vec3 gi = g.block<1, 3>(r, 3 * i).transpose();
        gv.block<1, 3>(r, 3 * i) += (m.transpose() * gi).transpose();
      }
    }
  });
}

Value edge_mix(Value weights, Value x, int n_out, int n_in, int block) {
  check_same_tape(weights, x);
  Tape& t = *weights.tape;
  const MatX& w = t.value(weights);
  const MatX& v = t.value(x);
  const Eigen::Index e = w.rows();
  if (v.rows() != e || w.cols() != static_cast<Eigen::Index>(n_out) * n_in ||
      v.cols() != static_cast<Eigen::Index>(n_in) * block)
    throw std::logic_error("ad: edge_mix shape mismatch");
  MatX out = MatX::Zero(e, static_cast<Eigen::Index>(n_out) * block);
  for (Eigen::Index r = 0; r < e; ++r)
    for (int o = 0; o < n_out; ++o)
      for (int i = 0; i < n_in; ++i) {
        const double wv = w(r, o * n_in + i);
        for (int d = 0; d < block; ++d) out(r, o * block + d) += wv * v(r, i * block + d);
      }
  const int iw = weights.id, ix = x.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(weights) || t.requires_grad(x), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& wv = tp.value(Value{&tp, iw});
    const MatX& xv = tp.value(Value{&tp, ix});
    const bool need_w = tp.requires_grad(Value{&tp, iw});
    const bool need_x = tp.requires_grad(Value{&tp, ix});
    for (Eigen::Index r = 0; r < e; ++r)
      for (int o = 0; o < n_out; ++o)
        for (int i = 0; i < n_in; ++i) {
          double acc = 0.0;
          for (int d = 0; d < block; ++d) acc += g(r, o * block + d) * xv(r, i * block + d);
          if (need_w) tp.grad_ref(iw)(r, o * n_in + i) += acc;
          if (need_x) {
            const double wij = wv(r, o * n_in + i);
            for (int d = 0; d < block; ++d)
              tp.grad_ref(ix)(r, i * block + d) += g(r, o * block + d) * wij;
          }
        }
  });
}

Value norm_rows3(Value v, double eps) {
  Tape& t = *v.tape;
  const MatX& x = t.value(v);
  MatX out(x.rows(), 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out(r, 0) = std::sqrt(x.row(r).squaredNorm() + eps * eps);
  const int iv = v.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& xv = tp.value(Value{&tp, iv});
    const MatX& o = tp.value(Value{&tp, self});
    MatX& gv = tp.grad_ref(iv);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) gv.row(r) += (g(r, 0) / o(r, 0)) * xv.row(r);
  });
}

Value mul_rows(Value v, Value s) {
  check_same_tape(v, s);
  Tape& t = *v.tape;
  const MatX& x = t.value(v);
  const MatX& f = t.value(s);
  MatX out = f.col(0).asDiagonal() * x;
  const int iv = v.id, is = s.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v) || t.requires_grad(s), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& xv = tp.value(Value{&tp, iv});
    const MatX& fv = tp.value(Value{&tp, is});
    if (tp.requires_grad(Value{&tp, iv})) tp.grad_ref(iv) += fv.col(0).asDiagonal() * g;
    if (tp.requires_grad(Value{&tp, is})) {
      MatX& gs = tp.grad_ref(is);
      for (Eigen::Index r = 0; r < xv.rows(); ++r) gs(r, 0) += g.row(r).dot(xv.row(r));
    }
  });
}

Value div_rows(Value v, Value s) {
  check_same_tape(v, s);
  Tape& t = *v.tape;
  const MatX& x = t.value(v);
  const MatX& f = t.value(s);
  MatX out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = x.row(r) / f(r, 0);
  const int iv = v.id, is = s.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v) || t.requires_grad(s), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& fv = tp.value(Value{&tp, is});
    const MatX& o = tp.value(Value{&tp, self});
    if (tp.requires_grad(Value{&tp, iv})) {
      MatX& gv = tp.grad_ref(iv);
      for (Eigen::Index r = 0; r < g.rows(); ++r) gv.row(r) += g.row(r) / fv(r, 0);
    }
    if (tp.requires_grad(Value{&tp, is})) {
      MatX& gs = tp.grad_ref(is);
      for (Eigen::Index r = 0; r < g.rows(); ++r)
        gs(r, 0) -= g.row(r).dot(o.row(r)) / fv(r, 0);
    }
  });
}

Value batch_norm_scalars(Value x, Value gamma, Value beta, double eps) {
  check_same_tape(x, gamma);
  check_same_tape(x, beta);
  Tape& t = *x.tape;
  const MatX& v = t.value(x);
  const Eigen::Index n = v.rows(), c = v.cols();
  Eigen::RowVectorXd mu = v.colwise().mean();
  Eigen::RowVectorXd var(c);
  for (Eigen::Index j = 0; j < c; ++j) var(j) = (v.col(j).array() - mu(j)).square().mean();
  Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  MatX xhat = ((v.rowwise() - mu).array().rowwise() * inv_std.array()).matrix();
  MatX out = ((xhat.array().rowwise() * t.value(gamma).row(0).array()).rowwise() +
              t.value(beta).row(0).array())
                 .matrix();
  const int ix = x.id, ig = gamma.id, ib = beta.id, self = static_cast<int>(t.size());
  return t.make(std::move(out),
                t.requires_grad(x) || t.requires_grad(gamma) || t.requires_grad(beta),
                [=, xh = std::move(xhat), istd = std::move(inv_std)](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& gam = tp.value(Value{&tp, ig});
    if (tp.requires_grad(Value{&tp, ib})) tp.grad_ref(ib).row(0) += g.colwise().sum();
    if (tp.requires_grad(Value{&tp, ig}))
      tp.grad_ref(ig).row(0) += g.cwiseProduct(xh).colwise().sum();
    if (tp.requires_grad(Value{&tp, ix})) {
      MatX gxhat = (g.array().rowwise() * gam.row(0).array()).matrix();
      Eigen::RowVectorXd mean_g = gxhat.colwise().mean();
      Eigen::RowVectorXd mean_gx = gxhat.cwiseProduct(xh).colwise().mean();
      MatX dx = gxhat;
      dx.rowwise() -= mean_g;
      dx -= (xh.array().rowwise() * mean_gx.array()).matrix();
      tp.grad_ref(ix) += (dx.array().rowwise() * istd.array()).matrix();
    }
    (void)n;
  });
}

Value batch_norm_vectors(Value v3blocks, Value gamma, double eps) {
  check_same_tape(v3blocks, gamma);
  Tape& t = *v3blocks.tape;
  const MatX& v = t.value(v3blocks);
  const Eigen::Index n = v.rows(), c = v.cols() / 3;
  MatX norms(n, c);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index i = 0; i < c; ++i)
      norms(r, i) = std::sqrt(v.block<1, 3>(r, 3 * i).squaredNorm() + 1e-24);
  Eigen::RowVectorXd mean_norm = norms.colwise().mean();
  const MatX& gam = t.value(gamma);
  MatX out(n, v.cols());
  for (Eigen::Index i = 0; i < c; ++i) {
    const double s = gam(0, i) / (mean_norm(i) + eps);
    out.middleCols(3 * i, 3) = s * v.middleCols(3 * i, 3);
  }
  const int iv = v3blocks.id, ig = gamma.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v3blocks) || t.requires_grad(gamma),
                [=, nm = std::move(norms), mn = std::move(mean_norm)](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& vv = tp.value(Value{&tp, iv});
    const MatX& ga = tp.value(Value{&tp, ig});
    for (Eigen::Index i = 0; i < c; ++i) {
      const double denom = mn(i) + eps;
      const double gdotv = g.middleCols(3 * i, 3).cwiseProduct(vv.middleCols(3 * i, 3)).sum();
      if (tp.requires_grad(Value{&tp, ig})) tp.grad_ref(ig)(0, i) += gdotv / denom;
      if (tp.requires_grad(Value{&tp, iv})) {
        const double s = ga(0, i) / denom;
        MatX& gv = tp.grad_ref(iv);
        gv.middleCols(3 * i, 3) += s * g.middleCols(3 * i, 3);
        // through the mean norm: d mean/d v_r = v_r / (n |v_r|)
        const double dmean = -gdotv * ga(0, i) / (denom * denom);
        for (Eigen::Index r = 0; r < n; ++r)
          gv.block<1, 3>(r, 3 * i) +=
              (dmean / static_cast<double>(n) / nm(r, i)) * vv.block<1, 3>(r, 3 * i);
      }
    }
  });
}

namespace {

struct RodriguesCoeffs {
  double a, b, a_over_theta_prime, b_over_theta_prime;  // a' / theta, b' / theta
};

RodriguesCoeffs rodrigues_coeffs(double theta) {
  RodriguesCoeffs c;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    c.a = 1.0 - t2 / 6.0;
    c.b = 0.5 - t2 / 24.0;
    c.a_over_theta_prime = -1.0 / 3.0 + t2 / 30.0;
    c.b_over_theta_prime = -1.0 / 12.0 + t2 / 180.0;
  } else {
    const double s = std::sin(theta), co = std::cos(theta);
    c.a = s / theta;
    c.b = (1.0 - co) / (theta * theta);
    c.a_over_theta_prime = (theta * co - s) / (theta * theta * theta);
    c.b_over_theta_prime = (theta * s - 2.0 * (1.0 - co)) / (theta * theta * theta * theta);
  }
  return c;
}

Mat3 skew3(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

Value rotvec_to_matrix(Value v) {
  Tape& t = *v.tape;
  const MatX& x = t.value(v);
  const Eigen::Index n = x.rows();
  MatX out(n, 9);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vec3 w = x.row(r).transpose();
    const double theta = w.norm();
    const RodriguesCoeffs c = rodrigues_coeffs(theta);
    const Mat3 k = skew3(w);
    const Mat3 rot = Mat3::Identity() + c.a * k + c.b * (k * k);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out(r, 3 * i + j) = rot(i, j);
  }
  const int iv = v.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(v), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& xv = tp.value(Value{&tp, iv});
    MatX& gv = tp.grad_ref(iv);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
      const Vec3 w = xv.row(r).transpose();
      const double theta = w.norm();
      const RodriguesCoeffs c = rodrigues_coeffs(theta);
      const Mat3 k = skew3(w);
      const Mat3 k2 = k * k;
      Mat3 gm;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) gm(i, j) = g(r, 3 * i + j);
      const double gk = (gm.array() * k.array()).sum();
      const double gk2 = (gm.array() * k2.array()).sum();
      for (int d = 0; d < 3; ++d) {
        Vec3 e = Vec3::Zero();
        e(d) = 1.0;
        const Mat3 ek = skew3(e);
        const double g_ek = (gm.array() * ek.array()).sum();
        const double g_mix = (gm.array() * (ek * k + k * ek).array()).sum();
        gv(r, d) += c.a_over_theta_prime * w(d) * gk + c.a * g_ek +
                    c.b_over_theta_prime * w(d) * gk2 + c.b * g_mix;
      }
    }
  });
}

Value apply_rot_transpose(Value r9, Value d) {
  check_same_tape(r9, d);
  Tape& t = *r9.tape;
  const MatX& rm = t.value(r9);
  const MatX& dm = t.value(d);
  const Eigen::Index m = rm.rows();
  MatX out(m, 3);
  for (Eigen::Index r = 0; r < m; ++r) {
    Mat3 rot;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) rot(i, j) = rm(r, 3 * i + j);
    out.row(r) = (rot.transpose() * dm.row(r).transpose()).transpose();
  }
  const int ir = r9.id, id = d.id, self = static_cast<int>(t.size());
  return t.make(std::move(out), t.requires_grad(r9) || t.requires_grad(d), [=](Tape& tp) {
    const MatX& g = tp.grad_ref(self);
    const MatX& rv = tp.value(Value{&tp, ir});
    const MatX& dv = tp.value(Value{&tp, id});
    for (Eigen::Index r = 0; r < rv.rows(); ++r) {
      Mat3 rot;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) rot(i, j) = rv(r, 3 * i + j);
      const Vec3 gr = g.row(r).transpose();
      const Vec3 drow = dv.row(r).transpose();
      if (tp.requires_grad(Value{&tp, id}))
        tp.grad_ref(id).row(r) += (rot * gr).transpose();
      if (tp.requires_grad(Value{&tp, ir})) {
        // out_a = sum_b R(b,a) d_b  =>  dR(b,a) += g_a d_b
        MatX& grm = tp.grad_ref(ir);
        for (int b = 0; b < 3; ++b)
          for (int a = 0; a < 3; ++a) grm(r, 3 * b + a) += gr(a) * drow(b);
      }
    }
  });
}

}  // namespace hadiff::ad
