// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/score_model.hpp"

#include <cmath>
#include <tuple>

namespace hadiff {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

}  // namespace

SphericalHarmonics spherical_harmonics(const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-8) throw DegenerateGeometryError("spherical_harmonics: degenerate direction");
  const Vec3 u = v / n;
  SphericalHarmonics sh;
  sh.y0 = 1.0;
  sh.y1 = u;
  const double x = u.x(), y = u.y(), z = u.z();
  sh.y2 << kSqrt3 * x * y, kSqrt3 * y * z, 0.5 * (3.0 * z * z - 1.0), kSqrt3 * z * x,
      0.5 * kSqrt3 * (x * x - y * y);
  return sh;
}

Mat3 sh2_matrix(const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-8) throw DegenerateGeometryError("sh2_matrix: degenerate direction");
  const Vec3 u = v / n;
  return u * u.transpose() - Mat3::Identity() / 3.0;
}

// ---------------------------------------------------------------------------
// Tensor-product path table
// ---------------------------------------------------------------------------

namespace {

enum class BaseKind { S_Y0, Vo_dotY1, S_Y1, Vo_Y0, Vo_Y2, Ve_crossY1, Ve_Y0, Vo_crossY1, Ve_Y2 };
enum Target { kTargetS = 0, kTargetVo = 1, kTargetVe = 2 };

struct Path {
  BaseKind kind;
  int in_width;
  int out_width;
  int target;
  int block;  // 1 for scalars, 3 for vectors
};

// Fixed path order; weight layout in the psi-MLP output follows it.
std::vector<Path> make_paths(int s_in, int v_in, int s_out, int v_out) {
  std::vector<Path> p;
  if (s_out > 0) {
    p.push_back({BaseKind::S_Y0, s_in, s_out, kTargetS, 1});
    if (v_in > 0) p.push_back({BaseKind::Vo_dotY1, v_in, s_out, kTargetS, 1});
  }
  if (v_out > 0) {
    p.push_back({BaseKind::S_Y1, s_in, v_out, kTargetVo, 3});
    if (v_in > 0) {
      p.push_back({BaseKind::Vo_Y0, v_in, v_out, kTargetVo, 3});
      p.push_back({BaseKind::Vo_Y2, v_in, v_out, kTargetVo, 3});
      p.push_back({BaseKind::Ve_crossY1, v_in, v_out, kTargetVo, 3});
      p.push_back({BaseKind::Ve_Y0, v_in, v_out, kTargetVe, 3});
      p.push_back({BaseKind::Vo_crossY1, v_in, v_out, kTargetVe, 3});
      p.push_back({BaseKind::Ve_Y2, v_in, v_out, kTargetVe, 3});
    }
  }
  return p;
}

int weight_count(const std::vector<Path>& paths) {
  int n = 0;
  for (const auto& p : paths) n += p.in_width * p.out_width;
  return n;
}

struct Mlp {
  ad::Value w0, b0, w1, b1;
};

Mlp mlp_handles(const std::map<std::string, ad::Value>& params, const std::string& prefix) {
  return Mlp{params.at(prefix + ".w0"), params.at(prefix + ".b0"), params.at(prefix + ".w1"),
             params.at(prefix + ".b1")};
}

ad::Value mlp_apply(const Mlp& m, ad::Value x) {
  using namespace ad;
  return add_rowvec(matmul(silu(add_rowvec(matmul(x, m.w0), m.b0)), m.w1), m.b1);
}

struct TPOut {
  ad::Value s, vo, ve;
  bool has_s = false, has_vo = false, has_ve = false;
};

/// weights: E x sum(in*out); bases built from provider features and the
/// constant edge harmonics. Per-path contributions are scaled by
/// 1/sqrt(in_width) and per-target sums by 1/sqrt(path count).
TPOut tensor_product(ad::Tape& tape, ad::Value weights, ad::Value s_prov, ad::Value vo_prov,
                     ad::Value ve_prov, const MatX& y1, const MatX& y2m,
                     const std::vector<Path>& paths) {
  using namespace ad;
  TPOut out;
  int offset = 0;
  int count_per_target[3] = {0, 0, 0};
  for (const auto& p : paths) count_per_target[p.target]++;
  for (const auto& p : paths) {
    Value w = slice_cols(weights, offset, static_cast<Eigen::Index>(p.in_width) * p.out_width);
    offset += p.in_width * p.out_width;
    Value base;
    switch (p.kind) {
      case BaseKind::S_Y0: base = s_prov; break;
      case BaseKind::Vo_dotY1: base = dot3(vo_prov, y1); break;
      case BaseKind::S_Y1: base = outer3(s_prov, y1); break;
      case BaseKind::Vo_Y0: base = vo_prov; break;
      case BaseKind::Vo_Y2: base = matvec3(vo_prov, y2m); break;
      case BaseKind::Ve_crossY1: base = cross3(ve_prov, y1); break;
      case BaseKind::Ve_Y0: base = ve_prov; break;
      case BaseKind::Vo_crossY1: base = cross3(vo_prov, y1); break;
      case BaseKind::Ve_Y2: base = matvec3(ve_prov, y2m); break;
    }
    Value contrib = scale(edge_mix(w, base, p.out_width, p.in_width, p.block),
                          1.0 / std::sqrt(static_cast<double>(p.in_width)));
    auto accumulate = [&](ad::Value& slot, bool& flag) {
      slot = flag ? add(slot, contrib) : contrib;
      flag = true;
    };
    if (p.target == kTargetS) accumulate(out.s, out.has_s);
    if (p.target == kTargetVo) accumulate(out.vo, out.has_vo);
    if (p.target == kTargetVe) accumulate(out.ve, out.has_ve);
  }
  for (int tgt = 0; tgt < 3; ++tgt) {
    if (count_per_target[tgt] < 2) continue;
    const double norm = 1.0 / std::sqrt(static_cast<double>(count_per_target[tgt]));
    if (tgt == kTargetS && out.has_s) out.s = scale(out.s, norm);
    if (tgt == kTargetVo && out.has_vo) out.vo = scale(out.vo, norm);
    if (tgt == kTargetVe && out.has_ve) out.ve = scale(out.ve, norm);
  }
  (void)tape;
  return out;
}

struct EdgeGroup {
  std::string key;                 // rr, rl, ll, lr (receiver type, provider type)
  std::vector<int> recv_full;      // full node-matrix row per edge
  std::vector<int> prov_full;
  std::vector<int> recv_local;     // receiver row within the group block
  int n_recv = 0;
  int recv_offset = 0;
  MatX y1;                         // E x 3 normalized edge directions
  MatX y2m;                        // E x 9
  MatX edge_input;                 // E x (rbf + 1)
  VecX inv_count;                  // n_recv
  bool intra = false;
};

EdgeGroup make_group(const std::string& key, const ResidueGraph& graph, int n_recv,
                     int recv_offset, int prov_offset, bool intra) {
  EdgeGroup g;
  g.key = key;
  g.intra = intra;
  g.n_recv = n_recv;
  g.recv_offset = recv_offset;
  const int e = graph.edge_count();
  g.recv_full.resize(e);
  g.prov_full.resize(e);
  g.recv_local.resize(e);
  g.y1.resize(e, 3);
  g.y2m.resize(e, 9);
  g.edge_input = graph.edge_features;
  VecX counts = VecX::Zero(n_recv);
  for (int k = 0; k < e; ++k) {
    const auto [i, j] = graph.edges[k];
    g.recv_local[k] = i;
    g.recv_full[k] = recv_offset + i;
    g.prov_full[k] = prov_offset + j;
    counts(i) += 1.0;
    Vec3 d = graph.edge_vectors.row(k).transpose();
    double n = d.norm();
    if (n < 1e-8) {
      d = Vec3(1, 0, 0);  // coincident residues; direction is arbitrary
      n = 1.0;
    }
    const Vec3 u = d / n;
    g.y1.row(k) = u.transpose();
    const Mat3 m = u * u.transpose() - Mat3::Identity() / 3.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) g.y2m(k, 3 * a + b) = m(a, b);
  }
  g.inv_count.resize(n_recv);
  for (int i = 0; i < n_recv; ++i) g.inv_count(i) = counts(i) > 0 ? 1.0 / counts(i) : 0.0;
  return g;
}

/// Place a group block (n_recv rows) into an N-row matrix at recv_offset.
ad::Value place_block(ad::Tape& tape, ad::Value block, int n_recv, int recv_offset, int n_total) {
  std::vector<int> rows(n_recv);
  for (int i = 0; i < n_recv; ++i) rows[i] = recv_offset + i;
  (void)tape;
  return ad::rows_scatter_sum(block, std::move(rows), n_total);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter inventory
// ---------------------------------------------------------------------------

std::vector<std::tuple<std::string, int, int>> param_shapes(const ModelConfig& c) {
  std::vector<std::tuple<std::string, int, int>> shapes;
  auto mlp = [&](const std::string& prefix, int in, int out, int hidden) {
    shapes.emplace_back(prefix + ".w0", in, hidden);
    shapes.emplace_back(prefix + ".b0", 1, hidden);
    shapes.emplace_back(prefix + ".w1", hidden, out);
    shapes.emplace_back(prefix + ".b1", 1, out);
  };
  const int h = c.hidden_dim;
  mlp("embed.node", c.node_input_dim(), c.n_scalars, h);
  mlp("embed.edge.intra", c.edge_input_dim(), c.edge_embed_dim, h);
  mlp("embed.edge.inter", c.edge_input_dim(), c.edge_embed_dim, h);

  static const char* kGroups[4] = {"rr", "rl", "ll", "lr"};
  for (int l = 0; l < c.n_layers; ++l) {
    const int s_in = c.scalar_dim_at(l);
    const int v_in = c.vector_dim_at(l);
    const int nw = weight_count(make_paths(s_in, v_in, c.n_scalars, c.n_vectors));
    for (const char* g : kGroups) {
      const std::string base = "layer" + std::to_string(l) + "." + g;
      mlp(base + ".tp", c.edge_embed_dim + 2 * s_in, nw, h);
      shapes.emplace_back(base + ".bn.scalar.gamma", 1, c.n_scalars);
      shapes.emplace_back(base + ".bn.scalar.beta", 1, c.n_scalars);
      shapes.emplace_back(base + ".bn.odd.gamma", 1, c.n_vectors);
      shapes.emplace_back(base + ".bn.even.gamma", 1, c.n_vectors);
    }
  }

  const int s_fin = c.scalar_dim_at(c.n_layers);
  const int v_fin = c.vector_dim_at(c.n_layers);
  const int nw_out = weight_count(make_paths(s_fin, v_fin, 0, 2));
  for (const char* g : kGroups)
    mlp(std::string("out_tp.") + g + ".tp", c.edge_embed_dim + 2 * s_fin, nw_out, h);

  const int nw_com = weight_count(make_paths(s_fin, v_fin, 0, 2));
  mlp("com", c.rbf_count + s_fin, nw_com, h);

  for (const char* m : {"tr", "rot", "res_tr", "res_rot"})
    mlp(std::string("mag.") + m, 1 + c.time_dim, 1, h);

  mlp("clddt", 2 * s_fin + c.rbf_count, 1, h);
  return shapes;
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  ModelParams p;
  p.config = config;
  for (const auto& [name, rows, cols] : param_shapes(config)) {
    MatX m(rows, cols);
    if (name.find(".w") != std::string::npos) {
      const double std_dev = 1.0 / std::sqrt(static_cast<double>(rows));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std_dev * rng.normal();
    } else if (name.find("gamma") != std::string::npos) {
      m.setOnes();
    } else {
      m.setZero();
    }
    p.tensors.emplace(name, std::move(m));
  }
  return p;
}

const MatX& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("ModelParams: missing tensor " + name);
  return it->second;
}

double* ModelParams::data(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("ModelParams: missing tensor " + name);
  return it->second.data();
}

// ---------------------------------------------------------------------------
// ScoreModel
// ---------------------------------------------------------------------------

ScoreModel::ScoreModel(ModelParams params, std::shared_ptr<const IGSO3Table> table)
    : params_(std::move(params)), table_(std::move(table)) {
  if (!table_) throw ConfigError("ScoreModel: null IGSO3 table");
}

TapeOutputs ScoreModel::forward_on_tape(ad::Tape& tape, const ComplexState& state,
                                        double time_global, double time_local, double beta,
                                        const ComplexFeatures& features,
                                        const GlobalSchedule& schedule, bool with_grad) const {
  using namespace ad;
  state.validate();
  const ModelConfig& c = params_.config;
  const int n_r = static_cast<int>(state.receptor.size());
  const int n_l = static_cast<int>(state.ligand.size());
  const int n = n_r + n_l;

  const double sig_tr = sigma(time_global, SigmaKind::Translation, schedule);
  const double sig_rot = sigma(time_global, SigmaKind::Rotation, schedule);
  const double a = alpha(time_local, beta);

  // Graphs at the current noise level, with static edge features attached.
  GraphSet graphs = build_graphs(state, sig_tr);
  attach_edge_features(graphs.rr, &features.receptor.correlation, c.rbf_count);
  attach_edge_features(graphs.ll, &features.ligand.correlation, c.rbf_count);
  attach_edge_features(graphs.rl, nullptr, c.rbf_count);
  attach_edge_features(graphs.lr, nullptr, c.rbf_count);

  std::vector<EdgeGroup> groups;
  groups.push_back(make_group("rr", graphs.rr, n_r, 0, 0, true));
  groups.push_back(make_group("rl", graphs.rl, n_r, 0, n_r, false));
  groups.push_back(make_group("ll", graphs.ll, n_l, n_r, n_r, true));
  groups.push_back(make_group("lr", graphs.lr, n_l, n_r, 0, false));

  // Parameter leaves.
  TapeOutputs out;
  for (const auto& [name, tensor] : params_.tensors)
    out.params.emplace(name, tape.input(tensor, with_grad));

  // Node inputs: static scalars + time embedding + flexing level.
  const VecX temb = sinusoidal_time_embedding(time_global, c.time_dim);
  MatX node_input(n, c.node_input_dim());
  {
    MatX base_r = features.receptor.scalar_base();
    MatX base_l = features.ligand.scalar_base();
    if (base_r.rows() != n_r || base_l.rows() != n_l)
      throw CorrespondenceError("forward: feature row count mismatch");
    node_input.block(0, 0, n_r, base_r.cols()) = base_r;
    node_input.block(n_r, 0, n_l, base_l.cols()) = base_l;
    const int tcol = static_cast<int>(base_r.cols());
    node_input.middleCols(tcol, c.time_dim) = temb.transpose().replicate(n, 1);
    node_input.col(tcol + c.time_dim).setConstant(a);
  }

  Value s = mlp_apply(mlp_handles(out.params, "embed.node"), tape.constant(node_input));

  // Edge embeddings per group.
  std::vector<Value> edge_embed(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const Mlp m = mlp_handles(out.params, g.intra ? "embed.edge.intra" : "embed.edge.inter");
    edge_embed[gi] = mlp_apply(m, tape.constant(g.edge_input));
  }

  // Degree-1 features start empty; widths grow with each concatenation.
  Value vo, ve;
  int v_width = 0;

  const MatX time_rows = temb.transpose().replicate(n, 1);

  for (int l = 0; l < c.n_layers; ++l) {
    const int s_in = c.scalar_dim_at(l);
    const auto paths = make_paths(s_in, v_width, c.n_scalars, c.n_vectors);
    // from_rec = provider receptor (groups rr, lr); from_lig = rl, ll
    Value from_rec_s, from_rec_vo, from_rec_ve, from_lig_s, from_lig_vo, from_lig_ve;
    bool rec_set = false, lig_set = false;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      const std::string base = "layer" + std::to_string(l) + "." + g.key;
      Value s_recv = rows_gather(s, g.recv_full);
      Value s_prov = rows_gather(s, g.prov_full);
      Value psi_in = concat_cols({edge_embed[gi], s_recv, s_prov});
      Value weights = mlp_apply(mlp_handles(out.params, base + ".tp"), psi_in);
      Value vo_prov, ve_prov;
      if (v_width > 0) {
        vo_prov = rows_gather(vo, g.prov_full);
        ve_prov = rows_gather(ve, g.prov_full);
      }
      TPOut msg = tensor_product(tape, weights, s_prov, vo_prov, ve_prov, g.y1, g.y2m, paths);

      auto aggregate = [&](Value m_val, int width, int block) -> Value {
        Value agg = rows_scatter_sum(m_val, g.recv_local, g.n_recv);
        agg = rowwise_scale(agg, g.inv_count);
        (void)width;
        (void)block;
        return agg;
      };
      Value ms = aggregate(msg.s, c.n_scalars, 1);
      ms = batch_norm_scalars(ms, out.params.at(base + ".bn.scalar.gamma"),
                              out.params.at(base + ".bn.scalar.beta"));
      Value mvo, mve;
      if (msg.has_vo) {
        mvo = aggregate(msg.vo, c.n_vectors, 3);
        mvo = batch_norm_vectors(mvo, out.params.at(base + ".bn.odd.gamma"));
      } else {
        mvo = tape.constant(MatX::Zero(g.n_recv, 3 * c.n_vectors));
      }
      if (msg.has_ve) {
        mve = aggregate(msg.ve, c.n_vectors, 3);
        mve = batch_norm_vectors(mve, out.params.at(base + ".bn.even.gamma"));
      } else {
        mve = tape.constant(MatX::Zero(g.n_recv, 3 * c.n_vectors));
      }
      Value ps = place_block(tape, ms, g.n_recv, g.recv_offset, n);
      Value pvo = place_block(tape, mvo, g.n_recv, g.recv_offset, n);
      Value pve = place_block(tape, mve, g.n_recv, g.recv_offset, n);
      const bool provider_is_rec = (g.key == "rr" || g.key == "lr");
      if (provider_is_rec) {
        from_rec_s = rec_set ? add(from_rec_s, ps) : ps;
        from_rec_vo = rec_set ? add(from_rec_vo, pvo) : pvo;
        from_rec_ve = rec_set ? add(from_rec_ve, pve) : pve;
        rec_set = true;
      } else {
        from_lig_s = lig_set ? add(from_lig_s, ps) : ps;
        from_lig_vo = lig_set ? add(from_lig_vo, pvo) : pvo;
        from_lig_ve = lig_set ? add(from_lig_ve, pve) : pve;
        lig_set = true;
      }
    }
    s = concat_cols({s, from_rec_s, from_lig_s});
    if (v_width > 0) {
      vo = concat_cols({vo, from_rec_vo, from_lig_vo});
      ve = concat_cols({ve, from_rec_ve, from_lig_ve});
    } else {
      vo = concat_cols({from_rec_vo, from_lig_vo});
      ve = concat_cols({from_rec_ve, from_lig_ve});
    }
    v_width += 2 * c.n_vectors;
  }

  const int s_fin = c.scalar_dim_at(c.n_layers);

  // Residue heads: one more tensor-product layer, no batch norm (Eq. 4 form);
  // even and odd blocks from both provider types are summed per head.
  {
    const auto paths = make_paths(s_fin, v_width, 0, 2);
    Value acc_vo, acc_ve;
    bool any = false;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      const std::string base = "out_tp." + g.key + ".tp";
      Value psi_in =
          concat_cols({edge_embed[gi], rows_gather(s, g.recv_full), rows_gather(s, g.prov_full)});
      Value weights = mlp_apply(mlp_handles(out.params, base), psi_in);
      TPOut msg = tensor_product(tape, weights, rows_gather(s, g.prov_full),
                                 rows_gather(vo, g.prov_full), rows_gather(ve, g.prov_full),
                                 g.y1, g.y2m, paths);
      Value avo = rowwise_scale(rows_scatter_sum(msg.vo, g.recv_local, g.n_recv), g.inv_count);
      Value ave = rowwise_scale(rows_scatter_sum(msg.ve, g.recv_local, g.n_recv), g.inv_count);
      Value pvo = place_block(tape, avo, g.n_recv, g.recv_offset, n);
      Value pve = place_block(tape, ave, g.n_recv, g.recv_offset, n);
      acc_vo = any ? add(acc_vo, pvo) : pvo;
      acc_ve = any ? add(acc_ve, pve) : pve;
      any = true;
    }
    Value time_const = tape.constant(time_rows);
    auto head = [&](int channel, const char* mag_name) -> Value {
      Value v = add(slice_cols(acc_vo, 3 * channel, 3), slice_cols(acc_ve, 3 * channel, 3));
      Value norm = norm_rows3(v);
      Value mag_scale = mlp_apply(mlp_handles(out.params, std::string("mag.") + mag_name),
                                  concat_cols({norm, time_const}));
      return mul_rows(div_rows(v, norm), mag_scale);
    };
    out.residue_tr = head(0, "res_tr");
    out.residue_rot = head(1, "res_rot");
  }

  // Global heads: convolution of ligand nodes with their unweighted centroid.
  {
    const Vec3 center = state.ligand.centroid();
    MatX y1(n_l, 3), y2m(n_l, 9), rbf(n_l, c.rbf_count);
    for (int i = 0; i < n_l; ++i) {
      Vec3 d = state.ligand.frames[i].position - center;
      double dn = d.norm();
      Vec3 u = dn < 1e-8 ? Vec3(1, 0, 0) : Vec3(d / dn);
      y1.row(i) = u.transpose();
      const Mat3 m = u * u.transpose() - Mat3::Identity() / 3.0;
      for (int a2 = 0; a2 < 3; ++a2)
        for (int b2 = 0; b2 < 3; ++b2) y2m(i, 3 * a2 + b2) = m(a2, b2);
      rbf.row(i) = rbf_expand(dn, c.center_rbf_cutoff, c.rbf_count).transpose();
    }
    std::vector<int> lig_rows(n_l);
    for (int i = 0; i < n_l; ++i) lig_rows[i] = n_r + i;
    Value s_lig = rows_gather(s, lig_rows);
    Value psi_in = concat_cols({tape.constant(rbf), s_lig});
    Value weights = mlp_apply(mlp_handles(out.params, "com"), psi_in);
    const auto paths = make_paths(s_fin, v_width, 0, 2);
    TPOut msg = tensor_product(tape, weights, s_lig, rows_gather(vo, lig_rows),
                               rows_gather(ve, lig_rows), y1, y2m, paths);
    std::vector<int> to_zero(n_l, 0);
    Value sum_vo = scale(rows_scatter_sum(msg.vo, to_zero, 1), 1.0 / n_l);
    Value sum_ve = scale(rows_scatter_sum(msg.ve, to_zero, 1), 1.0 / n_l);

    Value temb_c = tape.constant(temb.transpose());
    auto head = [&](int channel, const char* mag_name, double rescale) -> Value {
      Value v = add(slice_cols(sum_vo, 3 * channel, 3), slice_cols(sum_ve, 3 * channel, 3));
      Value norm = norm_rows3(v);
      Value mag_scale = mlp_apply(mlp_handles(out.params, std::string("mag.") + mag_name),
                                  concat_cols({norm, temb_c}));
      return scale(mul_rows(div_rows(v, norm), mag_scale), rescale);
    };
    out.global_tr = head(0, "tr", 1.0 / sig_tr);
    out.global_rot = head(1, "rot", table_->expected_score_norm(sig_rot));
  }

  // clddt: invariant MLP over cross edges within the inclusion radius.
  {
    std::vector<int> r_rows, l_rows;
    std::vector<double> lengths;
    const auto& rl = graphs.rl;
    for (int k = 0; k < rl.edge_count(); ++k) {
      if (rl.edge_lengths(k) < c.clddt_radius) {
        r_rows.push_back(rl.edges[k].first);
        l_rows.push_back(n_r + rl.edges[k].second);
        lengths.push_back(rl.edge_lengths(k));
      }
    }
    if (r_rows.empty()) {
      out.clddt = tape.constant(MatX::Zero(1, 1));
      out.clddt_valid = false;
    } else {
      const int m = static_cast<int>(r_rows.size());
      MatX rbf(m, c.rbf_count);
      for (int k = 0; k < m; ++k)
        rbf.row(k) = rbf_expand(lengths[k], c.clddt_radius, c.rbf_count).transpose();
      Value in = concat_cols({rows_gather(s, r_rows), rows_gather(s, l_rows), tape.constant(rbf)});
      Value per_edge = logistic(mlp_apply(mlp_handles(out.params, "clddt"), in));
      out.clddt = mean_all(per_edge);
      out.clddt_valid = true;
    }
  }
  return out;
}

ScoreOutput ScoreModel::extract(const ad::Tape& tape, const TapeOutputs& out, int n_receptor) {
  ScoreOutput s;
  s.global_tr = tape.value(out.global_tr).row(0).transpose();
  s.global_rot = tape.value(out.global_rot).row(0).transpose();
  const MatX& rt = tape.value(out.residue_tr);
  const MatX& rr = tape.value(out.residue_rot);
  const int n = static_cast<int>(rt.rows());
  s.receptor_tr = rt.topRows(n_receptor);
  s.receptor_rot = rr.topRows(n_receptor);
  s.ligand_tr = rt.bottomRows(n - n_receptor);
  s.ligand_rot = rr.bottomRows(n - n_receptor);
  s.clddt = tape.value(out.clddt)(0, 0);
  s.clddt_valid = out.clddt_valid;
  return s;
}

ScoreOutput ScoreModel::forward(const ComplexState& state, double time_global, double time_local,
                                double beta, const ComplexFeatures& features,
                                const GlobalSchedule& schedule) const {
  ad::Tape tape;
  TapeOutputs out = forward_on_tape(tape, state, time_global, time_local, beta, features,
                                    schedule, /*with_grad=*/false);
  return extract(tape, out, static_cast<int>(state.receptor.size()));
}

// ---------------------------------------------------------------------------
// IrmsdPredictor
// ---------------------------------------------------------------------------

std::vector<std::tuple<std::string, int, int>> IrmsdPredictor::param_shapes(
    const ModelConfig& c) {
  std::vector<std::tuple<std::string, int, int>> shapes;
  auto mlp = [&](const std::string& prefix, int in, int out, int hidden) {
    shapes.emplace_back(prefix + ".w0", in, hidden);
    shapes.emplace_back(prefix + ".b0", 1, hidden);
    shapes.emplace_back(prefix + ".w1", hidden, out);
    shapes.emplace_back(prefix + ".b1", 1, out);
  };
  const int h = c.hidden_dim;
  const int d = c.irmsd_dim;
  const int base_dim = kAminoAcidTypes + c.esm_dim + 1;
  mlp("irmsd.embed.node", base_dim, d, h);
  mlp("irmsd.embed.edge", c.edge_input_dim(), c.edge_embed_dim, h);
  for (int l = 0; l < c.irmsd_layers; ++l) {
    mlp("irmsd.layer" + std::to_string(l) + ".msg", c.edge_embed_dim + 2 * d, d, h);
    mlp("irmsd.layer" + std::to_string(l) + ".upd", 2 * d, d, h);
  }
  mlp("irmsd.readout", 2 * d, 1, h);
  return shapes;
}

ModelParams IrmsdPredictor::init(const ModelConfig& config, Rng& rng) {
  ModelParams p;
  p.config = config;
  for (const auto& [name, rows, cols] : param_shapes(config)) {
    MatX m(rows, cols);
    if (name.find(".w") != std::string::npos) {
      const double std_dev = 1.0 / std::sqrt(static_cast<double>(rows));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std_dev * rng.normal();
    } else {
      m.setZero();
    }
    p.tensors.emplace(name, std::move(m));
  }
  return p;
}

IrmsdPredictor::IrmsdPredictor(ModelParams params) : params_(std::move(params)) {}

ad::Value IrmsdPredictor::predict_on_tape(ad::Tape& tape, const ComplexState& unbound,
                                          const ComplexFeatures& features, bool with_grad,
                                          std::map<std::string, ad::Value>* param_handles) const {
  using namespace ad;
  unbound.validate();
  const ModelConfig& c = params_.config;
  const int n_r = static_cast<int>(unbound.receptor.size());
  const int n_l = static_cast<int>(unbound.ligand.size());
  const int n = n_r + n_l;

  ResidueGraph rr = build_intra_graph(unbound.receptor);
  ResidueGraph ll = build_intra_graph(unbound.ligand);
  attach_edge_features(rr, &features.receptor.correlation, c.rbf_count);
  attach_edge_features(ll, &features.ligand.correlation, c.rbf_count);
  EdgeGroup grr = make_group("rr", rr, n_r, 0, 0, true);
  EdgeGroup gll = make_group("ll", ll, n_l, n_r, n_r, true);

  std::map<std::string, ad::Value> params;
  for (const auto& [name, tensor] : params_.tensors) params.emplace(name, tape.input(tensor, with_grad));

  MatX base(n, kAminoAcidTypes + c.esm_dim + 1);
  base.topRows(n_r) = features.receptor.scalar_base();
  base.bottomRows(n_l) = features.ligand.scalar_base();
  Value s = mlp_apply(mlp_handles(params, "irmsd.embed.node"), tape.constant(base));

  const Mlp edge_mlp = mlp_handles(params, "irmsd.embed.edge");
  Value err = mlp_apply(edge_mlp, tape.constant(grr.edge_input));
  Value ell = mlp_apply(edge_mlp, tape.constant(gll.edge_input));

  for (int l = 0; l < c.irmsd_layers; ++l) {
    const Mlp msg_mlp = mlp_handles(params, "irmsd.layer" + std::to_string(l) + ".msg");
    const Mlp upd_mlp = mlp_handles(params, "irmsd.layer" + std::to_string(l) + ".upd");
    auto chain_messages = [&](const EdgeGroup& g, Value embed) -> Value {
      Value in = concat_cols({embed, rows_gather(s, g.recv_full), rows_gather(s, g.prov_full)});
      Value m = mlp_apply(msg_mlp, in);
      Value agg = rowwise_scale(rows_scatter_sum(m, g.recv_local, g.n_recv), g.inv_count);
      return place_block(tape, agg, g.n_recv, g.recv_offset, n);
    };
    Value m = add(chain_messages(grr, err), chain_messages(gll, ell));
    s = add(s, mlp_apply(upd_mlp, concat_cols({s, m})));
  }

  std::vector<int> r_rows(n_r), l_rows(n_l);
  for (int i = 0; i < n_r; ++i) r_rows[i] = i;
  for (int i = 0; i < n_l; ++i) l_rows[i] = n_r + i;
  Value pooled = concat_cols({mean_rows(rows_gather(s, r_rows)), mean_rows(rows_gather(s, l_rows))});
  if (param_handles != nullptr) *param_handles = std::move(params);
  return softplus(mlp_apply(mlp_handles(param_handles ? *param_handles : params, "irmsd.readout"),
                            pooled));
}

double IrmsdPredictor::predict(const ComplexState& unbound, const ComplexFeatures& features) const {
  ad::Tape tape;
  ad::Value v = predict_on_tape(tape, unbound, features, false);
  return tape.value(v)(0, 0);
}

}  // namespace hadiff
