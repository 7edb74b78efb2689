// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hadiff/checkpoint.hpp"
#include "hadiff/config.hpp"
#include "hadiff/losses.hpp"
#include "hadiff/manifest.hpp"
#include "hadiff/metrics.hpp"
#include "hadiff/pdb_io.hpp"
#include "hadiff/sampler.hpp"
#include "hadiff/train.hpp"

namespace py = pybind11;
using namespace hadiff;

namespace {

ComplexState state_from_arrays(const MatX& receptor_ca, const MatX& ligand_ca) {
  auto chain_from = [](const MatX& ca, const std::string& id) {
    if (ca.cols() != 3 || ca.rows() < 1)
      throw ConfigError("state_from_arrays: coordinates must be n x 3");
    ChainState chain;
    chain.chain_id = id;
    for (Eigen::Index i = 0; i < ca.rows(); ++i) {
      Frame f;
      f.position = ca.row(i).transpose();
      chain.frames.push_back(f);
      chain.residue_ids.push_back(static_cast<int>(i) + 1);
      chain.aa_types.push_back(20);
    }
    return chain;
  };
  ComplexState s;
  s.receptor = chain_from(receptor_ca, "A");
  s.ligand = chain_from(ligand_ca, "B");
  return s;
}

MatX chain_positions(const ChainState& chain) {
  MatX out(static_cast<Eigen::Index>(chain.size()), 3);
  for (std::size_t i = 0; i < chain.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = chain.frames[i].position.transpose();
  return out;
}

}  // namespace

PYBIND11_MODULE(_hadiff, m) {
  m.doc() = "hierarchical adaptive diffusion docking core";

  // rotations
  m.def("exp_so3", &exp_so3, py::arg("axis_angle"));
  m.def("log_so3", &log_so3, py::arg("rotation"));
  m.def("geodesic_interpolate", &geodesic_interpolate, py::arg("r0"), py::arg("r1"), py::arg("s"));
  m.def("is_rotation", &is_rotation, py::arg("rotation"), py::arg("tol") = 1e-10);

  m.def(
      "kabsch",
      [](const MatX& mobile, const MatX& reference) {
        if (mobile.cols() != 3 || reference.cols() != 3)
          throw ConfigError("kabsch: coordinates must be n x 3");
        std::vector<Vec3> mob, ref;
        for (Eigen::Index i = 0; i < mobile.rows(); ++i) mob.push_back(mobile.row(i).transpose());
        for (Eigen::Index i = 0; i < reference.rows(); ++i)
          ref.push_back(reference.row(i).transpose());
        const RigidTransform t = kabsch(mob, ref);
        return py::make_tuple(t.rotation, t.translation);
      },
      py::arg("mobile"), py::arg("reference"));

  // IGSO(3)
  m.def("igso3_density", &igso3_density, py::arg("omega"), py::arg("eps"));
  m.def(
      "igso3_score",
      [](const Mat3& r_rel, double eps) -> Vec3 { return igso3_score(r_rel, eps); },
      py::arg("r_rel"), py::arg("eps"));
  m.def(
      "uniform_so3_sample",
      [](std::uint64_t seed) {
        Rng rng(seed);
        return uniform_so3_sample(rng);
      },
      py::arg("seed"));

  py::class_<IGSO3Table, std::shared_ptr<IGSO3Table>>(m, "IGSO3Table")
      .def_static("build", [] { return IGSO3Table::build(); })
      .def_static("build_or_load",
                  [](const std::string& path) { return IGSO3Table::build_or_load(path); })
      .def("expected_score_norm", &IGSO3Table::expected_score_norm)
      .def("sample",
           [](const IGSO3Table& t, const Mat3& mean, double eps, std::uint64_t seed) {
             Rng rng(seed);
             return t.sample(mean, eps, rng);
           })
      .def("save", &IGSO3Table::save);

  // schedules
  py::class_<GlobalSchedule>(m, "GlobalSchedule")
      .def(py::init<>())
      .def_readwrite("sigma_tr_min", &GlobalSchedule::sigma_tr_min)
      .def_readwrite("sigma_tr_max", &GlobalSchedule::sigma_tr_max)
      .def_readwrite("sigma_rot_min", &GlobalSchedule::sigma_rot_min)
      .def_readwrite("sigma_rot_max", &GlobalSchedule::sigma_rot_max);
  m.def(
      "sigma",
      [](double t, const std::string& kind, const GlobalSchedule& s) {
        return sigma(t, kind == "rotation" ? SigmaKind::Rotation : SigmaKind::Translation, s);
      },
      py::arg("t"), py::arg("kind"), py::arg("schedule"));
  m.def("alpha", &alpha, py::arg("tau"), py::arg("beta"));
  m.def("flex_rate", &flex_rate, py::arg("tau"), py::arg("beta"));
  m.def(
      "beta_from_irmsd",
      [](double irmsd, const GlobalSchedule& s) { return beta_from_irmsd(irmsd, s); },
      py::arg("irmsd"), py::arg("schedule"));

  // NMA
  m.def(
      "anm_msf",
      [](const MatX& ca, double cutoff, int modes) {
        std::vector<Vec3> coords;
        for (Eigen::Index i = 0; i < ca.rows(); ++i) coords.push_back(ca.row(i).transpose());
        const NormalModes nm = compute_modes(build_anm_hessian(coords, cutoff), modes);
        return msf(nm);
      },
      py::arg("ca"), py::arg("cutoff") = kAnmCutoff, py::arg("modes") = kAnmModeCount);
  m.def(
      "anm_cross_correlation",
      [](const MatX& ca, double cutoff, int modes) {
        std::vector<Vec3> coords;
        for (Eigen::Index i = 0; i < ca.rows(); ++i) coords.push_back(ca.row(i).transpose());
        const NormalModes nm = compute_modes(build_anm_hessian(coords, cutoff), modes);
        return cross_correlation(nm);
      },
      py::arg("ca"), py::arg("cutoff") = kAnmCutoff, py::arg("modes") = kAnmModeCount);

  // graph features
  m.def("rbf_expand", &rbf_expand, py::arg("d"), py::arg("cutoff"), py::arg("k") = kRbfCount);
  m.def("sinusoidal_time_embedding", &sinusoidal_time_embedding, py::arg("time"), py::arg("dim"));

  // metrics (array-level convenience: CA coordinates per chain)
  m.def(
      "crmsd",
      [](const MatX& pred_r, const MatX& pred_l, const MatX& true_r, const MatX& true_l) {
        return crmsd(state_from_arrays(pred_r, pred_l), state_from_arrays(true_r, true_l));
      },
      py::arg("pred_receptor"), py::arg("pred_ligand"), py::arg("true_receptor"),
      py::arg("true_ligand"));
  m.def(
      "irmsd",
      [](const MatX& pred_r, const MatX& pred_l, const MatX& true_r, const MatX& true_l) {
        return irmsd(state_from_arrays(pred_r, pred_l), state_from_arrays(true_r, true_l));
      },
      py::arg("pred_receptor"), py::arg("pred_ligand"), py::arg("true_receptor"),
      py::arg("true_ligand"));
  m.def(
      "clddt",
      [](const MatX& pred_r, const MatX& pred_l, const MatX& true_r, const MatX& true_l) {
        bool defined = false;
        const double v =
            clddt(state_from_arrays(pred_r, pred_l), state_from_arrays(true_r, true_l), &defined);
        return py::make_tuple(v, defined);
      },
      py::arg("pred_receptor"), py::arg("pred_ligand"), py::arg("true_receptor"),
      py::arg("true_ligand"));

  // structure io
  py::class_<ChainState>(m, "ChainState")
      .def_property_readonly("chain_id", [](const ChainState& c) { return c.chain_id; })
      .def_property_readonly("positions", &chain_positions)
      .def_property_readonly("residue_ids", [](const ChainState& c) { return c.residue_ids; })
      .def("__len__", [](const ChainState& c) { return c.size(); });
  m.def("load_chain", &load_chain, py::arg("path"));
  m.def(
      "write_chain_pdb",
      [](const std::string& path, const ChainState& receptor, const ChainState& ligand) {
        ComplexState s;
        s.receptor = receptor;
        s.ligand = ligand;
        write_pdb(path, s);
      },
      py::arg("path"), py::arg("receptor"), py::arg("ligand"));

  m.attr("__version__") = "0.1.0";
}
