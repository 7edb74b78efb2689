// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/train.hpp"

#include <cmath>

#include "hadiff/metrics.hpp"

namespace hadiff {

void Adam::update(ModelParams& params, const std::map<std::string, MatX>& grads) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, step_);
  const double bc2 = 1.0 - std::pow(beta2_, step_);
  for (const auto& [name, g] : grads) {
    MatX& p = params.tensors.at(name);
    MatX& m = m_.try_emplace(name, MatX::Zero(p.rows(), p.cols())).first->second;
    MatX& v = v_.try_emplace(name, MatX::Zero(p.rows(), p.cols())).first->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    const MatX m_hat = m / bc1;
    const MatX v_hat = v / bc2;
    p -= lr_ * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
  }
}

namespace {

/// FAPE pair list over the bound interface (ordered pairs, a != b).
struct FapePairs {
  std::vector<int> frame_idx;   // a
  std::vector<int> point_idx;   // b
  MatX bound_local;             // m x 3 target local coordinates
  MatX frame_ori_t;             // m x 9 transposed bound-frame orientations of the *current* state
};

const Frame& frame_at(const ComplexState& s, int global_index) {
  const int n_r = static_cast<int>(s.receptor.size());
  return global_index < n_r ? s.receptor.frames[global_index]
                            : s.ligand.frames[global_index - n_r];
}

FapePairs build_fape_pairs(const ComplexState& bound, const ComplexState& current) {
  const std::vector<int> iface = interface_residues(bound);
  FapePairs out;
  for (int a : iface)
    for (int b : iface) {
      if (a == b) continue;
      out.frame_idx.push_back(a);
      out.point_idx.push_back(b);
    }
  const int m = static_cast<int>(out.frame_idx.size());
  out.bound_local.resize(m, 3);
  out.frame_ori_t.resize(m, 9);
  for (int k = 0; k < m; ++k) {
    const Frame& fa_b = frame_at(bound, out.frame_idx[k]);
    const Frame& fb_b = frame_at(bound, out.point_idx[k]);
    out.bound_local.row(k) =
        (fa_b.orientation.transpose() * (fb_b.position - fa_b.position)).transpose();
    const Mat3 ot = frame_at(current, out.frame_idx[k]).orientation.transpose();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out.frame_ori_t(k, 3 * i + j) = ot(i, j);
  }
  return out;
}

MatX positions_matrix(const ComplexState& s) {
  const int n_r = static_cast<int>(s.receptor.size());
  const int n_l = static_cast<int>(s.ligand.size());
  MatX x(n_r + n_l, 3);
  for (int i = 0; i < n_r; ++i) x.row(i) = s.receptor.frames[i].position.transpose();
  for (int i = 0; i < n_l; ++i) x.row(n_r + i) = s.ligand.frames[i].position.transpose();
  return x;
}

struct TapeLosses {
  ad::Value total;
  LossBreakdown values;
};

TapeLosses build_losses_on_tape(ad::Tape& tape, const TapeOutputs& out,
                                const NoisedSample& sample, const ComplexState& bound,
                                const ScoreModel& model, const GlobalSchedule& schedule,
                                const LossWeights& weights) {
  using namespace ad;
  const ComplexState& state = sample.noisy_state;
  const int n_r = static_cast<int>(state.receptor.size());
  const int n_l = static_cast<int>(state.ligand.size());
  const double sig_tr = sigma(sample.time_global, SigmaKind::Translation, schedule);
  const double sig_rot = sigma(sample.time_global, SigmaKind::Rotation, schedule);
  const TargetSet& tg = sample.targets;

  // Variance-weighted global score matching.
  Value l_tr = scale(
      sum_squares(sub(out.global_tr, tape.constant(tg.global_tr_score.transpose()))),
      sig_tr * sig_tr);
  const double rot_norm = model.table().expected_score_norm(sig_rot);
  Value l_rot = scale(
      sum_squares(sub(out.global_rot, tape.constant(tg.global_rot_score.transpose()))),
      1.0 / (rot_norm * rot_norm));

  // Residue flow-matching terms.
  std::vector<int> rec_rows(n_r), lig_rows(n_l);
  for (int i = 0; i < n_r; ++i) rec_rows[i] = i;
  for (int i = 0; i < n_l; ++i) lig_rows[i] = n_r + i;
  auto cfm = [&](Value heads, const std::vector<int>& rows, const MatX& target) {
    Value diff = sub(rows_gather(heads, rows), tape.constant(target));
    return scale(sum_squares(diff), 1.0 / static_cast<double>(rows.size()));
  };
  Value l_cfm_tr_rec = cfm(out.residue_tr, rec_rows, tg.receptor_tr_residual);
  Value l_cfm_rot_rec = cfm(out.residue_rot, rec_rows, tg.receptor_rot_residual);
  Value l_cfm_tr_lig = cfm(out.residue_tr, lig_rows, tg.ligand_tr_residual);
  Value l_cfm_rot_lig = cfm(out.residue_rot, lig_rows, tg.ligand_rot_residual);

  // Interface FAPE on the fully-flexed prediction (known global displacement
  // removed from the ligand).
  const FapePairs pairs = build_fape_pairs(bound, state);
  Value l_fape;
  bool have_fape = !pairs.frame_idx.empty();
  if (have_fape) {
    MatX offset = MatX::Zero(n_r + n_l, 3);
    for (int i = 0; i < n_l; ++i) offset.row(n_r + i) = -sample.noise_dx.transpose();
    Value pred_pos =
        add(add(tape.constant(positions_matrix(state)), out.residue_tr), tape.constant(offset));
    Value pred_rot9 = rotvec_to_matrix(out.residue_rot);
    Value d = sub(rows_gather(pred_pos, pairs.point_idx), rows_gather(pred_pos, pairs.frame_idx));
    Value in_frame = apply_rot_transpose(rows_gather(pred_rot9, pairs.frame_idx), d);
    Value local = matvec3(in_frame, pairs.frame_ori_t);
    Value err = norm_rows3(sub(local, tape.constant(pairs.bound_local)));
    l_fape = scale(sum_all(clamp_max(err, kFapeClamp)),
                   1.0 / (static_cast<double>(pairs.frame_idx.size()) * kFapeScale));
  } else {
    l_fape = tape.constant(MatX::Zero(1, 1));
  }

  // Confidence regression vs the true contact lDDT of the noisy structure.
  bool clddt_defined = false;
  const double true_clddt = clddt(state, bound, &clddt_defined);
  Value l_clddt;
  if (out.clddt_valid && clddt_defined) {
    l_clddt = square(sub(out.clddt, tape.constant(MatX::Constant(1, 1, true_clddt))));
  } else {
    l_clddt = tape.constant(MatX::Zero(1, 1));
  }

  Value diffusion = add(add(add(l_tr, l_rot), add(l_cfm_tr_rec, l_cfm_rot_rec)),
                        add(l_cfm_tr_lig, l_cfm_rot_lig));
  Value total = add(add(scale(diffusion, weights.diffusion), scale(l_fape, weights.ifape)),
                    scale(l_clddt, weights.lddt));

  TapeLosses out_losses;
  out_losses.total = total;
  LossBreakdown& b = out_losses.values;
  b.global_tr = tape.value(l_tr)(0, 0);
  b.global_rot = tape.value(l_rot)(0, 0);
  b.res_tr_receptor = tape.value(l_cfm_tr_rec)(0, 0);
  b.res_rot_receptor = tape.value(l_cfm_rot_rec)(0, 0);
  b.res_tr_ligand = tape.value(l_cfm_tr_lig)(0, 0);
  b.res_rot_ligand = tape.value(l_cfm_rot_lig)(0, 0);
  b.ifape = tape.value(l_fape)(0, 0);
  b.clddt = tape.value(l_clddt)(0, 0);
  b.total = tape.value(total)(0, 0);
  return out_losses;
}

}  // namespace

LossBreakdown compute_losses(const ScoreModel& model, const NoisedSample& sample,
                             const ComplexState& bound, const ComplexFeatures& features,
                             const GlobalSchedule& schedule, const LossWeights& weights) {
  const ComplexState& state = sample.noisy_state;
  const ScoreOutput pred = model.forward(state, sample.time_global, sample.time_local,
                                         sample.beta_used, features, schedule);
  const double sig_tr = sigma(sample.time_global, SigmaKind::Translation, schedule);
  const double sig_rot = sigma(sample.time_global, SigmaKind::Rotation, schedule);
  const auto global_losses = loss_global(pred, sample.targets, sig_tr, sig_rot, model.table());
  const auto cfm_losses = loss_cfm(pred, sample.targets);

  const ComplexState flexed =
      build_flexed_prediction(state, pred.receptor_tr, pred.receptor_rot, pred.ligand_tr,
                              pred.ligand_rot, sample.noise_dx);
  bool empty_iface = false;
  const double ifape = loss_ifape(flexed, bound, &empty_iface);

  bool clddt_defined = false;
  const double true_clddt = clddt(state, bound, &clddt_defined);
  const double l_clddt =
      (pred.clddt_valid && clddt_defined) ? loss_clddt(pred.clddt, true_clddt) : 0.0;

  return total_loss(global_losses, cfm_losses, empty_iface ? 0.0 : ifape, l_clddt, weights);
}

LossBreakdown loss_and_gradients(const ScoreModel& model, const NoisedSample& sample,
                                 const ComplexState& bound, const ComplexFeatures& features,
                                 const GlobalSchedule& schedule, const LossWeights& weights,
                                 std::map<std::string, MatX>* grads) {
  ad::Tape tape;
  TapeOutputs out =
      model.forward_on_tape(tape, sample.noisy_state, sample.time_global, sample.time_local,
                            sample.beta_used, features, schedule, /*with_grad=*/grads != nullptr);
  TapeLosses losses =
      build_losses_on_tape(tape, out, sample, bound, model, schedule, weights);
  if (grads != nullptr) {
    tape.backward(losses.total);
    for (const auto& [name, handle] : out.params) {
      MatX g = tape.gradient(handle);
      auto [it, inserted] = grads->try_emplace(name, std::move(g));
      if (!inserted) it->second += tape.gradient(handle);
    }
  }
  return losses.values;
}

TrainResult train_toy(ScoreModel& model, IrmsdPredictor& irmsd_model,
                      const std::vector<LoadedCase>& cases, const TrainOptions& options,
                      const TrainLogger& logger) {
  if (cases.empty()) throw ConfigError("train_toy: no cases");
  Rng rng = Rng::seeded(options.seed);
  Adam opt(options.learning_rate);
  Adam irmsd_opt(options.irmsd_learning_rate);

  TrainResult result;
  result.history.reserve(options.steps);

  const int drop_at = static_cast<int>(options.lr_drop_fraction * options.steps);
  for (int step = 0; step < options.steps; ++step) {
    if (step == drop_at && options.lr_drop_factor != 1.0 && drop_at > 0 &&
        drop_at < options.steps) {
      opt.set_learning_rate(opt.learning_rate() * options.lr_drop_factor);
      irmsd_opt.set_learning_rate(irmsd_opt.learning_rate() * options.lr_drop_factor);
    }
    std::map<std::string, MatX> grads;
    LossBreakdown mean{};
    for (const auto& lc : cases) {
      const double u = rng.uniform();
      const double beta =
          beta_from_irmsd(lc.irmsd_override.value_or(lc.true_irmsd), options.schedule);
      NoisedSample sample = forward_noise(lc.bound, lc.unbound_superposed, u, u, beta,
                                          options.schedule, model.table(), rng);
      sample.beta_used = beta;
      const LossBreakdown b = loss_and_gradients(model, sample, lc.bound, lc.features,
                                                 options.schedule, options.weights, &grads);
      mean.global_tr += b.global_tr;
      mean.global_rot += b.global_rot;
      mean.res_tr_receptor += b.res_tr_receptor;
      mean.res_rot_receptor += b.res_rot_receptor;
      mean.res_tr_ligand += b.res_tr_ligand;
      mean.res_rot_ligand += b.res_rot_ligand;
      mean.ifape += b.ifape;
      mean.clddt += b.clddt;
      mean.total += b.total;
    }
    const double inv = 1.0 / static_cast<double>(cases.size());
    mean.global_tr *= inv;
    mean.global_rot *= inv;
    mean.res_tr_receptor *= inv;
    mean.res_rot_receptor *= inv;
    mean.res_tr_ligand *= inv;
    mean.res_rot_ligand *= inv;
    mean.ifape *= inv;
    mean.clddt *= inv;
    mean.total *= inv;
    for (auto& [name, g] : grads) g *= inv;
    opt.update(model.params(), grads);

    // iRMSD regressor: squared error against the measured unbound-vs-bound
    // interface RMSD.
    {
      std::map<std::string, MatX> igrads;
      for (const auto& lc : cases) {
        ad::Tape tape;
        std::map<std::string, ad::Value> handles;
        ad::Value pred = irmsd_model.predict_on_tape(tape, lc.unbound, lc.features, true, &handles);
        ad::Value err = ad::square(
            ad::sub(pred, tape.constant(MatX::Constant(1, 1, lc.true_irmsd))));
        tape.backward(err);
        for (const auto& [name, handle] : handles) {
          MatX g = tape.gradient(handle);
          auto [it, inserted] = igrads.try_emplace(name, std::move(g));
          if (!inserted) it->second += tape.gradient(handle);
        }
      }
      for (auto& [name, g] : igrads) g *= inv;
      irmsd_opt.update(irmsd_model.params(), igrads);
    }

    result.history.push_back(mean);
    if (step == 0) result.initial_total = mean.total;
    if (logger && (step % options.log_every == 0 || step == options.steps - 1))
      logger(step, mean);
  }
  if (!result.history.empty()) result.final_total = result.history.back().total;
  return result;
}

}  // namespace hadiff
