// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/forward_diffusion.hpp"

#include <cmath>

namespace hadiff {

namespace {

void check_correspondence(const ChainState& a, const ChainState& b, const char* what) {
  if (a.size() != b.size())
    throw CorrespondenceError(std::string(what) + ": residue count mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.aa_types[i] != b.aa_types[i])
      throw CorrespondenceError(std::string(what) + ": amino-acid type mismatch at index " +
                                std::to_string(i));
  }
}

}  // namespace

ResidueEndpoints residue_targets_from_states(const ComplexState& bound,
                                             const ComplexState& unbound_superposed,
                                             const Mat3& global_rotation) {
  check_correspondence(bound.receptor, unbound_superposed.receptor, "receptor");
  check_correspondence(bound.ligand, unbound_superposed.ligand, "ligand");

  const int n_r = static_cast<int>(bound.receptor.size());
  const int n_l = static_cast<int>(bound.ligand.size());
  ResidueEndpoints out;
  out.receptor_tr.resize(n_r, 3);
  out.receptor_rot.resize(n_r);
  out.ligand_tr.resize(n_l, 3);
  out.ligand_rot.resize(n_l);

  for (int i = 0; i < n_r; ++i) {
    const Frame& fb = bound.receptor.frames[i];
    const Frame& fu = unbound_superposed.receptor.frames[i];
    out.receptor_tr.row(i) = (fb.position - fu.position).transpose();
    out.receptor_rot[i] = fb.orientation * fu.orientation.transpose();
  }

  const Vec3 center = unbound_superposed.ligand.centroid();
  for (int i = 0; i < n_l; ++i) {
    const Frame& fb = bound.ligand.frames[i];
    const Frame& fu = unbound_superposed.ligand.frames[i];
    const Vec3 rotated_pos = global_rotation * (fu.position - center) + center;
    const Mat3 rotated_ori = global_rotation * fu.orientation;
    out.ligand_tr.row(i) = (fb.position - rotated_pos).transpose();
    out.ligand_rot[i] = fb.orientation * rotated_ori.transpose();
  }
  return out;
}

NoisedSample forward_noise_with(const ComplexState& bound, const ComplexState& unbound,
                                double t, double tau, double beta,
                                const GlobalSchedule& schedule, const Vec3& noise_dx,
                                const Mat3& noise_rot) {
  if (t < 0.0 || t > 1.0 || tau < 0.0 || tau > 1.0)
    throw ConfigError("forward_noise: times outside [0, 1]");

  const ResidueEndpoints ep = residue_targets_from_states(bound, unbound, noise_rot);
  const double a = alpha(tau, beta);
  const double sig_tr = sigma(t, SigmaKind::Translation, schedule);
  const double sig_rot = sigma(t, SigmaKind::Rotation, schedule);

  const int n_r = static_cast<int>(bound.receptor.size());
  const int n_l = static_cast<int>(bound.ligand.size());

  NoisedSample sample;
  sample.time_global = t;
  sample.time_local = tau;
  sample.beta_used = beta;
  sample.noise_dx = noise_dx;
  sample.noise_rot = noise_rot;
  sample.noisy_state = unbound;

  TargetSet& tg = sample.targets;
  tg.receptor_tr_residual.resize(n_r, 3);
  tg.receptor_rot_residual.resize(n_r, 3);
  tg.ligand_tr_residual.resize(n_l, 3);
  tg.ligand_rot_residual.resize(n_l, 3);

  // Receptor: interpolate residue transforms between bound (tau = 0) and the
  // unbound endpoint (zero transform) with weight alpha.
  for (int i = 0; i < n_r; ++i) {
    const Vec3 t0 = ep.receptor_tr.row(i).transpose();
    const Vec3 r0_log = log_so3(ep.receptor_rot[i]);
    const Vec3 t_tau = (1.0 - a) * t0;
    const Mat3 r_tau = exp_so3((1.0 - a) * r0_log);
    Frame& f = sample.noisy_state.receptor.frames[i];
    const Frame& fu = unbound.receptor.frames[i];
    f.position = fu.position + t_tau;
    f.orientation = r_tau * fu.orientation;
    tg.receptor_tr_residual.row(i) = (a * t0).transpose();
    tg.receptor_rot_residual.row(i) = (a * r0_log).transpose();
  }

  // Ligand: residue transforms defined against the rotated unbound reference,
  // then the global translation on top.
  const Vec3 center = unbound.ligand.centroid();
  for (int i = 0; i < n_l; ++i) {
    const Vec3 t0 = ep.ligand_tr.row(i).transpose();
    const Vec3 r0_log = log_so3(ep.ligand_rot[i]);
    const Vec3 t_tau = (1.0 - a) * t0;
    const Mat3 r_tau = exp_so3((1.0 - a) * r0_log);
    Frame& f = sample.noisy_state.ligand.frames[i];
    const Frame& fu = unbound.ligand.frames[i];
    const Vec3 rotated_pos = noise_rot * (fu.position - center) + center;
    f.position = rotated_pos + t_tau + noise_dx;
    f.orientation = r_tau * noise_rot * fu.orientation;
    tg.ligand_tr_residual.row(i) = (a * t0).transpose();
    tg.ligand_rot_residual.row(i) = (a * r0_log).transpose();
  }

  tg.global_tr_score = -noise_dx / (sig_tr * sig_tr);
  tg.global_rot_score = igso3_score(noise_rot, sig_rot);
  return sample;
}

NoisedSample forward_noise(const ComplexState& bound, const ComplexState& unbound, double t,
                           double tau, double beta, const GlobalSchedule& schedule,
                           const IGSO3Table& table, Rng& rng) {
  const double sig_tr = sigma(t, SigmaKind::Translation, schedule);
  const double sig_rot = sigma(t, SigmaKind::Rotation, schedule);
  const Vec3 dx = sig_tr * rng.normal3();
  const Mat3 rot = table.sample(Mat3::Identity(), sig_rot, rng);
  return forward_noise_with(bound, unbound, t, tau, beta, schedule, dx, rot);
}

ComplexState superpose_unbound(const ComplexState& unbound, const ComplexState& bound) {
  check_correspondence(bound.receptor, unbound.receptor, "receptor");
  check_correspondence(bound.ligand, unbound.ligand, "ligand");
  ComplexState out = unbound;
  auto align_chain = [](const ChainState& mobile, const ChainState& reference) {
    const auto mob = mobile.positions();
    const auto ref = reference.positions();
    const RigidTransform t = kabsch(mob, ref);
    ChainState aligned = mobile;
    for (auto& f : aligned.frames) f = t.apply(f);
    return aligned;
  };
  out.receptor = align_chain(unbound.receptor, bound.receptor);
  out.ligand = align_chain(unbound.ligand, bound.ligand);
  return out;
}

ComplexState build_flexed_prediction(const ComplexState& current, const MatX& receptor_tr,
                                     const MatX& receptor_rot, const MatX& ligand_tr,
                                     const MatX& ligand_rot, const Vec3& global_offset) {
  const int n_r = static_cast<int>(current.receptor.size());
  const int n_l = static_cast<int>(current.ligand.size());
  if (receptor_tr.rows() != n_r || receptor_rot.rows() != n_r || ligand_tr.rows() != n_l ||
      ligand_rot.rows() != n_l)
    throw CorrespondenceError("build_flexed_prediction: residual shape mismatch");

  ComplexState out = current;
  for (int i = 0; i < n_r; ++i) {
    Frame& f = out.receptor.frames[i];
    f.position += receptor_tr.row(i).transpose();
    f.orientation = exp_so3(receptor_rot.row(i).transpose()) * f.orientation;
  }
  for (int i = 0; i < n_l; ++i) {
    Frame& f = out.ligand.frames[i];
    f.position += ligand_tr.row(i).transpose() - global_offset;
    f.orientation = exp_so3(ligand_rot.row(i).transpose()) * f.orientation;
  }
  return out;
}

}  // namespace hadiff
