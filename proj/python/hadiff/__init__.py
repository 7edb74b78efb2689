# Copyright (c) 2026 The hadiff Authors
# SPDX-License-Identifier: Apache-2.0
"""Python surface of the hadiff docking core."""

from _hadiff import (  # noqa: F401
    GlobalSchedule,
    IGSO3Table,
    alpha,
    anm_cross_correlation,
    anm_msf,
    beta_from_irmsd,
    clddt,
    crmsd,
    exp_so3,
    flex_rate,
    geodesic_interpolate,
    igso3_density,
    igso3_score,
    irmsd,
    is_rotation,
    kabsch,
    load_chain,
    log_so3,
    rbf_expand,
    sigma,
    sinusoidal_time_embedding,
    uniform_so3_sample,
    write_chain_pdb,
)

__all__ = [
    "GlobalSchedule",
    "IGSO3Table",
    "alpha",
    "anm_cross_correlation",
    "anm_msf",
    "beta_from_irmsd",
    "clddt",
    "crmsd",
    "exp_so3",
    "flex_rate",
    "geodesic_interpolate",
    "igso3_density",
    "igso3_score",
    "irmsd",
    "is_rotation",
    "kabsch",
    "load_chain",
    "log_so3",
    "rbf_expand",
    "sigma",
    "sinusoidal_time_embedding",
    "uniform_so3_sample",
    "write_chain_pdb",
]
