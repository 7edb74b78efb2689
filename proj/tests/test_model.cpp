// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <memory>

#include "hadiff/checkpoint.hpp"
#include "hadiff/score_model.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace hadiff;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_scalars = 6;
  c.n_vectors = 2;
  c.n_layers = 2;
  c.hidden_dim = 16;
  c.edge_embed_dim = 8;
  c.esm_dim = 4;
  c.time_dim = 8;
  c.rbf_count = 8;
  c.irmsd_dim = 8;
  c.irmsd_layers = 2;
  return c;
}

std::shared_ptr<const IGSO3Table> small_table() {
  static auto table = std::make_shared<IGSO3Table>([] {
    IGSO3Params p;
    p.n_eps = 32;
    p.n_omega = 1024;
    return IGSO3Table::build(p);
  }());
  return table;
}

struct Setup {
  ComplexState state;
  ComplexFeatures features;
  GlobalSchedule schedule;
};

Setup make_setup(int n_r, int n_l, std::uint64_t seed, const ModelConfig& config) {
  auto synth = testsupport::make_case(n_r, n_l, 0.12, seed);
  Setup s;
  s.state = synth.bound;
  s.features.receptor =
      compute_chain_features(s.state.receptor, std::nullopt, config.esm_dim, 15.0, 10);
  s.features.ligand =
      compute_chain_features(s.state.ligand, std::nullopt, config.esm_dim, 15.0, 10);
  return s;
}

ComplexState transform_state(const ComplexState& state, const Mat3& q, const Vec3& t) {
  ComplexState out = state;
  for (ChainState* ch : {&out.receptor, &out.ligand})
    for (auto& f : ch->frames) {
      f.position = q * f.position + t;
      f.orientation = q * f.orientation;
    }
  return out;
}

}  // namespace

TEST_CASE("spherical harmonics: conventions and Wigner equivariance") {
  const SphericalHarmonics z = spherical_harmonics(Vec3(0, 0, 2.0));
  CHECK(z.y0 == 1.0);
  CHECK((z.y1 - Vec3(0, 0, 1)).norm() < 1e-14);
  CHECK(std::abs(z.y2(2) - 1.0) < 1e-14);  // (3z^2-1)/2 at z=1

  CHECK(spherical_harmonics(Vec3(1, 2, 3)).y0 == 1.0);
  CHECK_THROWS_AS(spherical_harmonics(Vec3(1e-9, 0, 0)), DegenerateGeometryError);

  Rng rng(3);
  for (int k = 0; k < 40; ++k) {
    const Vec3 v = rng.normal3();
    if (v.norm() < 1e-3) continue;
    const Mat3 q = exp_so3(rng.uniform(0, M_PI) * rng.unit_vector());
    const SphericalHarmonics a = spherical_harmonics(v);
    const SphericalHarmonics b = spherical_harmonics(q * v);
    CHECK(std::abs(b.y0 - a.y0) < 1e-12);
    CHECK((b.y1 - testoracle::wigner_d(q, 1) * a.y1).norm() < 1e-10);
    CHECK((b.y2 - testoracle::wigner_d(q, 2) * a.y2).norm() < 1e-10);
    // unit norms per degree
    CHECK(std::abs(a.y1.norm() - 1.0) < 1e-12);
    CHECK(std::abs(a.y2.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("forward: translation invariance") {
  const ModelConfig config = tiny_config();
  Rng rng(11);
  ScoreModel model(ModelParams::init(config, rng), small_table());
  Setup s = make_setup(7, 6, 1, config);

  const ScoreOutput base = model.forward(s.state, 0.6, 0.6, 3.0, s.features, s.schedule);
  const ComplexState moved = transform_state(s.state, Mat3::Identity(), Vec3(100, 0, 0));
  const ScoreOutput shifted = model.forward(moved, 0.6, 0.6, 3.0, s.features, s.schedule);

  CHECK((base.global_tr - shifted.global_tr).norm() < 1e-6);
  CHECK((base.global_rot - shifted.global_rot).norm() < 1e-6);
  CHECK((base.receptor_tr - shifted.receptor_tr).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((base.ligand_rot - shifted.ligand_rot).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(base.clddt == doctest::Approx(shifted.clddt).epsilon(1e-9));
}

TEST_CASE("forward: rotation equivariance over random parameters (output contract)") {
  const ModelConfig config = tiny_config();
  Setup s = make_setup(8, 6, 2, config);
  Rng rng(17);
  for (int draw = 0; draw < 3; ++draw) {
    ScoreModel model(ModelParams::init(config, rng), small_table());
    const ScoreOutput base = model.forward(s.state, 0.45, 0.45, 2.0, s.features, s.schedule);
    for (int k = 0; k < 3; ++k) {
      const Mat3 q = exp_so3(rng.uniform(0.1, M_PI - 0.1) * rng.unit_vector());
      const Vec3 t = 10.0 * rng.normal3();
      const ComplexState moved = transform_state(s.state, q, t);
      const ScoreOutput rotated = model.forward(moved, 0.45, 0.45, 2.0, s.features, s.schedule);

      auto rel = [](double num, double den) { return num / std::max(den, 1e-12); };
      CHECK(rel((rotated.global_tr - q * base.global_tr).norm(), base.global_tr.norm()) < 1e-5);
      CHECK(rel((rotated.global_rot - q * base.global_rot).norm(), base.global_rot.norm()) <
            1e-5);
      const MatX exp_rec = base.receptor_tr * q.transpose();
      CHECK(rel((rotated.receptor_tr - exp_rec).norm(), exp_rec.norm()) < 1e-5);
      const MatX exp_lig = base.ligand_rot * q.transpose();
      CHECK(rel((rotated.ligand_rot - exp_lig).norm(), exp_lig.norm()) < 1e-5);
      CHECK(std::abs(rotated.clddt - base.clddt) < 1e-8);
      CHECK(rotated.clddt_valid == base.clddt_valid);
    }
  }
}

TEST_CASE("forward: determinism") {
  const ModelConfig config = tiny_config();
  Rng rng(23);
  ScoreModel model(ModelParams::init(config, rng), small_table());
  Setup s = make_setup(6, 5, 3, config);
  const ScoreOutput a = model.forward(s.state, 0.3, 0.3, 4.0, s.features, s.schedule);
  const ScoreOutput b = model.forward(s.state, 0.3, 0.3, 4.0, s.features, s.schedule);
  CHECK((a.global_tr - b.global_tr).norm() == 0.0);
  CHECK((a.receptor_tr - b.receptor_tr).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.clddt == b.clddt);
}

TEST_CASE("forward: mirrored input is finite (parity smoke)") {
  const ModelConfig config = tiny_config();
  Rng rng(29);
  ScoreModel model(ModelParams::init(config, rng), small_table());
  Setup s = make_setup(6, 5, 4, config);
  ComplexState mirrored = s.state;
  for (ChainState* ch : {&mirrored.receptor, &mirrored.ligand})
    for (auto& f : ch->frames) {
      f.position = -f.position;
      // keep det +1 after the improper flip
      Mat3 o = -f.orientation;
      o.col(2) = o.col(0).cross(o.col(1));
      f.orientation = o;
    }
  const ScoreOutput out = model.forward(mirrored, 0.5, 0.5, 2.0, s.features, s.schedule);
  CHECK(out.global_tr.allFinite());
  CHECK(out.receptor_tr.allFinite());
  CHECK(out.ligand_rot.allFinite());
}

TEST_CASE("forward: empty interface still yields global heads") {
  const ModelConfig config = tiny_config();
  Rng rng(31);
  ScoreModel model(ModelParams::init(config, rng), small_table());
  Setup s = make_setup(6, 5, 5, config);
  ComplexState far = s.state;
  for (auto& f : far.ligand.frames) f.position += Vec3(500, 0, 0);
  GlobalSchedule sched;
  const ScoreOutput out = model.forward(far, 0.1, 0.1, 2.0, s.features, sched);
  CHECK(out.global_tr.allFinite());
  CHECK(out.global_rot.allFinite());
  CHECK_FALSE(out.clddt_valid);
}

TEST_CASE("iRMSD regressor: positivity and per-chain rigid invariance") {
  const ModelConfig config = tiny_config();
  Rng rng(37);
  IrmsdPredictor predictor(IrmsdPredictor::init(config, rng));
  Setup s = make_setup(7, 6, 6, config);

  const double base = predictor.predict(s.state, s.features);
  CHECK(base > 0.0);

  Rng rng2(41);
  for (int k = 0; k < 5; ++k) {
    ComplexState moved = s.state;
    const Mat3 q = exp_so3(rng2.uniform(0, M_PI) * rng2.unit_vector());
    const Vec3 t = 20.0 * rng2.normal3();
    for (auto& f : moved.ligand.frames) {  // move only the ligand
      f.position = q * f.position + t;
      f.orientation = q * f.orientation;
    }
    CHECK(std::abs(predictor.predict(moved, s.features) - base) < 1e-6);
  }
}

TEST_CASE("checkpoint: bit-exact roundtrip") {
  const ModelConfig config = tiny_config();
  Rng rng(43);
  ModelParams score = ModelParams::init(config, rng);
  ModelParams irmsd = IrmsdPredictor::init(config, rng);

  const std::string path =
      (std::filesystem::temp_directory_path() / "hadiff_ckpt_test.bin").string();
  save_checkpoint(path, score, irmsd);
  auto [score2, irmsd2] = load_checkpoint(path);

  CHECK(score2.config == config);
  REQUIRE(score2.tensors.size() == score.tensors.size());
  for (const auto& [name, tensor] : score.tensors) {
    const MatX& other = score2.at(name);
    REQUIRE(other.rows() == tensor.rows());
    CHECK(std::memcmp(other.data(), tensor.data(), sizeof(double) * tensor.size()) == 0);
  }
  for (const auto& [name, tensor] : irmsd.tensors) {
    CHECK(std::memcmp(irmsd2.at(name).data(), tensor.data(), sizeof(double) * tensor.size()) ==
          0);
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.bin"), ParseError);
}

TEST_CASE("parameter inventory is consistent with init") {
  const ModelConfig config = tiny_config();
  Rng rng(47);
  const ModelParams p = ModelParams::init(config, rng);
  const auto shapes = param_shapes(config);
  CHECK(p.tensors.size() == shapes.size());
  for (const auto& [name, rows, cols] : shapes) {
    const MatX& m = p.at(name);
    CHECK(m.rows() == rows);
    CHECK(m.cols() == cols);
  }
}
