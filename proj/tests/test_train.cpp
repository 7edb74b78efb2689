// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <memory>

#include "hadiff/metrics.hpp"
#include "hadiff/train.hpp"
#include "synthetic.hpp"

using namespace hadiff;

namespace {

ModelConfig grad_config() {
  ModelConfig c;
  c.n_scalars = 4;
  c.n_vectors = 2;
  c.n_layers = 2;
  c.hidden_dim = 8;
  c.edge_embed_dim = 6;
  c.esm_dim = 2;
  c.time_dim = 4;
  c.rbf_count = 6;
  c.irmsd_dim = 6;
  c.irmsd_layers = 1;
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

struct GradSetup {
  ComplexState bound;
  ComplexState unbound;
  ComplexFeatures features;
  GlobalSchedule schedule;
  NoisedSample sample;
};

GradSetup make_grad_setup(const ModelConfig& config, std::uint64_t seed) {
  GradSetup g;
  auto synth = testsupport::make_case(3, 3, 0.25, seed);
  g.bound = synth.bound;
  g.unbound = superpose_unbound(synth.unbound, synth.bound);
  g.features.receptor =
      compute_chain_features(g.bound.receptor, std::nullopt, config.esm_dim, 15.0, 6);
  g.features.ligand =
      compute_chain_features(g.bound.ligand, std::nullopt, config.esm_dim, 15.0, 6);
  Rng rng = Rng::seeded(seed + 1000);
  g.sample = forward_noise(g.bound, g.unbound, 0.55, 0.55, 3.0, g.schedule, *small_table(), rng);
  return g;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences (subsampled)") {
  const ModelConfig config = grad_config();
  Rng rng(7);
  ScoreModel model(ModelParams::init(config, rng), small_table());
  GradSetup g = make_grad_setup(config, 3);
  const LossWeights weights;

  std::map<std::string, MatX> grads;
  const LossBreakdown tape_losses = loss_and_gradients(model, g.sample, g.bound, g.features,
                                                       g.schedule, weights, &grads);

  // plain path must agree with the tape values
  const LossBreakdown plain = compute_losses(model, g.sample, g.bound, g.features, g.schedule,
                                             weights);
  CHECK(std::abs(plain.total - tape_losses.total) < 1e-10 * std::max(1.0, plain.total));
  CHECK(std::abs(plain.ifape - tape_losses.ifape) < 1e-10);
  CHECK(std::abs(plain.clddt - tape_losses.clddt) < 1e-10);

  // weighted-sum identity
  CHECK(std::abs(tape_losses.total -
                 (weights.diffusion * tape_losses.diffusion_sum() +
                  weights.ifape * tape_losses.ifape + weights.lddt * tape_losses.clddt)) <
        1e-12 * std::max(1.0, tape_losses.total));

  const double h = 1e-4;
  int checked = 0;
  Rng pick(99);
  for (auto& [name, tensor] : model.params().tensors) {
    const MatX& grad = grads.at(name);
    const int samples = std::min<int>(4, static_cast<int>(tensor.size()));
    for (int s = 0; s < samples; ++s) {
      const Eigen::Index flat =
          static_cast<Eigen::Index>(pick.bits() % static_cast<std::uint64_t>(tensor.size()));
      double* p = model.params().data(name) + flat;
      const double saved = *p;
      *p = saved + h;
      const double up = compute_losses(model, g.sample, g.bound, g.features, g.schedule,
                                       weights).total;
      *p = saved - h;
      const double dn = compute_losses(model, g.sample, g.bound, g.features, g.schedule,
                                       weights).total;
      *p = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double an = grad.data()[flat];
      CHECK(std::abs(fd - an) < 1e-3 * std::max({1.0, std::abs(fd), std::abs(an)}));
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("iRMSD regressor gradients match finite differences") {
  const ModelConfig config = grad_config();
  Rng rng(13);
  IrmsdPredictor predictor(IrmsdPredictor::init(config, rng));
  GradSetup g = make_grad_setup(config, 5);

  ad::Tape tape;
  std::map<std::string, ad::Value> handles;
  ad::Value pred = predictor.predict_on_tape(tape, g.unbound, g.features, true, &handles);
  const double target = 1.25;
  ad::Value loss = ad::square(ad::sub(pred, tape.constant(MatX::Constant(1, 1, target))));
  tape.backward(loss);

  auto eval = [&]() {
    const double p = predictor.predict(g.unbound, g.features);
    return (p - target) * (p - target);
  };
  const double h = 1e-5;
  Rng pick(5);
  for (auto& [name, handle] : handles) {
    const MatX grad = tape.gradient(handle);
    MatX& tensor = predictor.params().tensors.at(name);
    for (int s = 0; s < 3; ++s) {
      const Eigen::Index flat =
          static_cast<Eigen::Index>(pick.bits() % static_cast<std::uint64_t>(tensor.size()));
      const double saved = tensor.data()[flat];
      tensor.data()[flat] = saved + h;
      const double up = eval();
      tensor.data()[flat] = saved - h;
      const double dn = eval();
      tensor.data()[flat] = saved;
      const double fd = (up - dn) / (2.0 * h);
      CHECK(std::abs(fd - grad.data()[flat]) <
            1e-3 * std::max({1.0, std::abs(fd), std::abs(grad.data()[flat])}));
    }
  }
}

TEST_CASE("Adam reduces a quadratic") {
  ModelConfig config = grad_config();
  ModelParams params;
  params.config = config;
  params.tensors.emplace("x", MatX::Constant(2, 2, 5.0));
  Adam opt(0.05);
  for (int i = 0; i < 400; ++i) {
    std::map<std::string, MatX> grads;
    grads["x"] = 2.0 * params.tensors.at("x");
    opt.update(params, grads);
  }
  CHECK(params.tensors.at("x").cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("short toy training reduces the loss") {
  ModelConfig config = grad_config();
  Rng rng(21);
  ScoreModel model(ModelParams::init(config, rng), small_table());
  IrmsdPredictor predictor(IrmsdPredictor::init(config, rng));

  std::vector<LoadedCase> cases;
  for (int i = 0; i < 2; ++i) {
    auto synth = testsupport::make_case(6, 5, 0.2, 100 + i);
    LoadedCase lc;
    lc.case_id = "toy" + std::to_string(i);
    lc.bound = synth.bound;
    lc.unbound = synth.unbound;
    lc.unbound_superposed = superpose_unbound(synth.unbound, synth.bound);
    lc.features.receptor =
        compute_chain_features(lc.unbound.receptor, std::nullopt, config.esm_dim, 15.0, 8);
    lc.features.ligand =
        compute_chain_features(lc.unbound.ligand, std::nullopt, config.esm_dim, 15.0, 8);
    lc.true_irmsd = std::max(irmsd(lc.unbound_superposed, lc.bound), 1e-6);
    cases.push_back(std::move(lc));
  }

  TrainOptions options;
  options.steps = 60;
  options.learning_rate = 3e-3;
  options.seed = 11;
  const TrainResult result = train_toy(model, predictor, cases, options);

  // averaged loss over the last 10 steps vs the first 10 (noisy objective)
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 10; ++i) early += result.history[i].total;
  for (int i = options.steps - 10; i < options.steps; ++i) late += result.history[i].total;
  CHECK(late < early);
}
