// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hadiff/losses.hpp"
#include "hadiff/manifest.hpp"
#include "hadiff/score_model.hpp"

namespace hadiff {

/// Adam over named tensors; state keyed by tensor name.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void update(ModelParams& params, const std::map<std::string, MatX>& grads);
  void set_learning_rate(double lr) { lr_ = lr; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int step_ = 0;
  std::map<std::string, MatX> m_, v_;
};

/// Training losses for one noised sample, computed on the forward pass
/// without a tape (reporting, finite differences).
LossBreakdown compute_losses(const ScoreModel& model, const NoisedSample& sample,
                             const ComplexState& bound, const ComplexFeatures& features,
                             const GlobalSchedule& schedule, const LossWeights& weights);

/// Same losses on the tape; analytic gradients of the total w.r.t. every
/// parameter are accumulated into *grads (added to existing entries).
LossBreakdown loss_and_gradients(const ScoreModel& model, const NoisedSample& sample,
                                 const ComplexState& bound, const ComplexFeatures& features,
                                 const GlobalSchedule& schedule, const LossWeights& weights,
                                 std::map<std::string, MatX>* grads);

struct TrainOptions {
  int steps = 2000;
  double learning_rate = 1e-3;
  double irmsd_learning_rate = 1e-3;
  std::uint64_t seed = 0;
  LossWeights weights;
  GlobalSchedule schedule;
  int log_every = 50;
  // step-decay: multiply the rate by lr_drop_factor after lr_drop_fraction
  // of the steps (1.0 disables)
  double lr_drop_fraction = 0.7;
  double lr_drop_factor = 0.25;
};

struct TrainResult {
  double initial_total = 0.0;  // mean over cases at step 0
  double final_total = 0.0;    // mean over the last logged window
  std::vector<LossBreakdown> history;  // one averaged breakdown per step
};

using TrainLogger = std::function<void(int step, const LossBreakdown&)>;

/// Overfit the score model (and the iRMSD regressor) on a small set of cases.
/// Draws one shared diffusion time u ~ U(0,1) per case per step (t = tau = u).
TrainResult train_toy(ScoreModel& model, IrmsdPredictor& irmsd_model,
                      const std::vector<LoadedCase>& cases, const TrainOptions& options,
                      const TrainLogger& logger = nullptr);

}  // namespace hadiff
