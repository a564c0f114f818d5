"""Estimator parameter bundles and named configuration presets."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import RANGE_MAX_M, RANGE_MIN_M, SystemConfig


@dataclass(frozen=True)
class AlgoParams:
    """Knobs of the estimation pipeline (shared by all methods in a trial)."""

    l_pre: int = 10  # detected paths per subregion / per greedy solve
    g_theta: int = 60
    g_phi: int = 30
    g_r: int = 10  # radial samples of the 3D baseline's codebook
    r_fix_m: float = 6.0  # reference radius of the angular codebook
    newton_iters: int = 10
    cyclic_rounds: int = 1  # re-refinement passes over earlier atoms per detection
    alpha_th_rad: float = math.radians(10.0)
    tau_max_s: float = 115e-9
    g_tau: int = 400
    ospa_cutoff_m: float = 3.0
    r_grid_min_m: float = RANGE_MIN_M
    r_grid_max_m: float = RANGE_MAX_M


def desk_preset():
    """Small profile: a full SNR sweep finishes in minutes on a laptop."""
    config = SystemConfig(
        ports_per_axis=(16, 16),
        subregion_division=(2, 2),
        slots_per_frame=32,
        pilot_subcarriers=32,
        num_paths=3,
    )
    algo = AlgoParams(l_pre=6, g_theta=30, g_phi=15)
    return config, algo


def paper_preset():
    """Full-scale profile: 32x32 ports, 6 paths, dense angular codebook."""
    config = SystemConfig(
        ports_per_axis=(32, 32),
        subregion_division=(2, 2),
        slots_per_frame=128,
        pilot_subcarriers=32,
        num_paths=6,
    )
    algo = AlgoParams(l_pre=10, g_theta=60, g_phi=30)
    return config, algo


PRESETS = {"desk": desk_preset, "paper": paper_preset}
