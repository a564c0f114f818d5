"""The four estimation methods compared by the harness.

``nomp_lsrc`` is the subregion pipeline with Newton-refined angles;
``omp_lsrc`` is the same pipeline with grid-only angles; ``omp2d`` and
``omp3d`` run one greedy recovery over the full region with the angular and
polar codebooks respectively.  Every method feeds its position estimates
through the same delay/gain refinement stage so the reconstructed channels
are comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ce_refine import DelayGrid, refine_channel, stack_measurements
from .dictionary import build_angular_grid, build_polar_grid, dictionary_matrix
from .geometry import Measurement, PortGrid, SystemConfig
from .lsrc import ScattererEstimate, codebook_bearings, run_lsrc
from .nomp import LSTSQ_RCOND, AngleEstimateTable, estimate_angles, nomp_subregion
from .presets import AlgoParams

METHOD_NAMES = ("nomp_lsrc", "omp_lsrc", "omp2d", "omp3d")


@dataclass(frozen=True)
class BaselineResult:
    """One method's output on one measurement."""

    method: str
    scatterers: tuple  # surviving ScattererEstimate with delay/gain attached
    h_hat: np.ndarray  # (N, K)
    n_clu: int  # cardinality of the reported scatterer set

    @property
    def positions(self) -> np.ndarray:
        """(n, 3) Cartesian positions of the reported scatterers."""
        if not self.scatterers:
            return np.zeros((0, 3))
        return np.array([s.cartesian_m for s in self.scatterers])


def mmv_omp(y: np.ndarray, dict_sel: np.ndarray, l_pre: int):
    """Greedy multiple-snapshot OMP over an already port-selected codebook.

    Per iteration: pick the column with the largest summed correlation power
    against the residual (lowest index on ties), jointly re-fit all selected
    columns by LS against the original block, update the residual.  Exactly
    ``l_pre`` iterations are run.

    Returns (support list, coefficient matrix, residual).
    """
    if dict_sel.shape[1] < l_pre:
        raise ValueError("codebook has fewer columns than requested detections")
    residual = y.copy()
    support: list[int] = []
    coef = np.zeros((0, y.shape[1]), dtype=complex)
    for _ in range(l_pre):
        scores = np.sum(np.abs(dict_sel.conj().T @ residual) ** 2, axis=1)
        support.append(int(np.argmax(scores)))
        gamma = dict_sel[:, support]
        coef, *_ = np.linalg.lstsq(gamma, y, rcond=LSTSQ_RCOND)
        residual = y - gamma @ coef
    return support, coef, residual


def _estimate_from_spherical(p) -> ScattererEstimate:
    return ScattererEstimate(
        cartesian_m=_sph_to_cart(p), radial_distance_m=float(p[0]),
        elevation_rad=float(p[1]), azimuth_rad=float(p[2]),
    )


def _sph_to_cart(p):
    from .geometry import spherical_to_cartesian

    return spherical_to_cartesian(np.asarray(p, dtype=float))


def _delay_grid(params: AlgoParams) -> DelayGrid:
    return DelayGrid(tau_max_s=params.tau_max_s, g_tau=params.g_tau)


def _finish(method, measurement, estimates, grid, config, params) -> BaselineResult:
    refined = refine_channel(measurement, estimates, grid, config, _delay_grid(params))
    return BaselineResult(
        method=method,
        scatterers=refined.surviving_scatterers,
        h_hat=refined.h_hat,
        n_clu=len(refined.surviving_scatterers),
    )


def run_nomp_lsrc(measurement: Measurement, grid: PortGrid, config: SystemConfig,
                  params: AlgoParams) -> BaselineResult:
    """Subregion Newton-refined angles, ray-cluster localization, refinement."""
    ang = build_angular_grid(params.g_theta, params.g_phi, params.r_fix_m)
    table = estimate_angles(measurement, ang, grid, config.wavelength_m,
                            params.l_pre, params.newton_iters, params.cyclic_rounds)
    bearings = codebook_bearings(table, grid, params.r_fix_m)
    located, _ = run_lsrc(bearings, grid, params.alpha_th_rad)
    return _finish("nomp_lsrc", measurement, located, grid, config, params)


def run_omp_lsrc(measurement: Measurement, grid: PortGrid, config: SystemConfig,
                 params: AlgoParams) -> BaselineResult:
    """Grid-only subregion angles (no Newton step), then the same pipeline."""
    ang = build_angular_grid(params.g_theta, params.g_phi, params.r_fix_m)
    Q = len(measurement.per_subregion_pilots)
    theta = np.empty((params.l_pre, Q))
    phi = np.empty((params.l_pre, Q))
    for q in range(Q):
        theta[:, q], phi[:, q], _ = nomp_subregion(
            measurement, q, ang, grid, config.wavelength_m, params.l_pre, n_newton=0
        )
    table = AngleEstimateTable(theta_hat=theta, phi_hat=phi)
    bearings = codebook_bearings(table, grid, params.r_fix_m)
    located, _ = run_lsrc(bearings, grid, params.alpha_th_rad)
    return _finish("omp_lsrc", measurement, located, grid, config, params)


def run_omp2d(measurement: Measurement, grid: PortGrid, config: SystemConfig,
              params: AlgoParams) -> BaselineResult:
    """Full-region greedy recovery over the angular codebook.

    The angle atoms carry the codebook's reference radius as their distance
    estimate, the only distance this method possesses.
    """
    ang = build_angular_grid(params.g_theta, params.g_phi, params.r_fix_m)
    stacked = stack_measurements(measurement)
    dict_sel = dictionary_matrix(ang, grid, config.wavelength_m,
                                 port_indices=stacked.port_index_list)
    support, _, _ = mmv_omp(stacked.y, dict_sel, params.l_pre)
    # atoms re-picked on a vanishing residual would split one path's gain
    # across copies and get mass-pruned; feed each atom once
    estimates = [_estimate_from_spherical(ang.positions[g]) for g in dict.fromkeys(support)]
    return _finish("omp2d", measurement, estimates, grid, config, params)


def run_omp3d(measurement: Measurement, grid: PortGrid, config: SystemConfig,
              params: AlgoParams) -> BaselineResult:
    """Full-region greedy recovery over the polar (angle x radius) codebook."""
    polar = build_polar_grid(params.g_theta, params.g_phi, params.g_r,
                             params.r_grid_min_m, params.r_grid_max_m)
    stacked = stack_measurements(measurement)
    dict_sel = dictionary_matrix(polar, grid, config.wavelength_m,
                                 port_indices=stacked.port_index_list)
    support, _, _ = mmv_omp(stacked.y, dict_sel, params.l_pre)
    estimates = [_estimate_from_spherical(polar.positions[g]) for g in dict.fromkeys(support)]
    return _finish("omp3d", measurement, estimates, grid, config, params)


METHODS = {
    "nomp_lsrc": run_nomp_lsrc,
    "omp_lsrc": run_omp_lsrc,
    "omp2d": run_omp2d,
    "omp3d": run_omp3d,
}
