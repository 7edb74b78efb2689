// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "hadiff/geometry.hpp"

namespace hadiff {

inline constexpr std::array<double, 4> kClddtThresholds = {0.5, 2.0, 4.0, 8.0};  // Angstrom
inline constexpr double kClddtInclusionRadius = 15.0;  // truth-structure contact radius
inline constexpr double kIrmsdInterfaceCutoff = 10.0;
inline constexpr double kContactCutoff = 8.0;  // CA proxy for heavy-atom contacts

enum class Difficulty { Rigid, Medium, Difficult };

std::string to_string(Difficulty d);

/// CA RMSD over both chains after Kabsch superposition of the full complex.
double crmsd(const ComplexState& pred, const ComplexState& truth);

/// CA RMSD over truth-interface residues (cross-chain CA distance < cutoff)
/// after Kabsch superposition on those residues only. Throws
/// DegenerateGeometryError when the interface is empty.
double irmsd(const ComplexState& pred, const ComplexState& truth,
             double interface_cutoff = kIrmsdInterfaceCutoff);

/// Contact lDDT over inter-chain CA pairs within the inclusion radius in
/// truth, averaged over the four tolerance thresholds. `defined` (when given)
/// is cleared if the truth contact set is empty.
double clddt(const ComplexState& pred, const ComplexState& truth, bool* defined = nullptr,
             double inclusion_radius = kClddtInclusionRadius);

/// Fraction of predicted cross-chain contacts absent from the truth (0 when
/// the prediction has no contacts).
double fnonnat(const ComplexState& pred, const ComplexState& truth,
               double contact_cutoff = kContactCutoff);

/// Docking difficulty from the chain-wise superposed unbound pair vs truth:
/// rigid when iRMSD <= 1.5 and fnonnat <= 0.4, difficult when iRMSD > 2.2,
/// medium otherwise.
Difficulty classify_difficulty(const ComplexState& unbound, const ComplexState& bound);

/// iRMSD between the chain-wise superposed unbound complex and the bound one
/// (the quantity the difficulty classification and the adaptive schedule use).
double unbound_irmsd(const ComplexState& unbound, const ComplexState& bound);

struct CaseMetrics {
  std::string case_id;
  double crmsd = 0.0;
  double irmsd = 0.0;
  double clddt = 0.0;
  bool clddt_defined = false;
  Difficulty difficulty = Difficulty::Rigid;
};

struct SummaryStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double fraction_below_10 = 0.0;  // percentage in [0, 100]
};

SummaryStats summarize(std::vector<double> values);

}  // namespace hadiff
