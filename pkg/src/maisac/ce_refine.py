"""Sensing-assisted wideband channel refinement.

Given localized scatterers, the per-subregion pilot blocks are stacked into
one tall measurement, projected onto the steering vectors at the estimated
positions to expose each path's frequency response, and each response row is
matched against a delay grid to recover delay and complex gain.  Paths whose
gain power falls below 10% of the strongest are pruned, and the full N x K
channel is rebuilt from the survivors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .geometry import Measurement, PortGrid, SystemConfig, delay_response, steering_matrix

log = logging.getLogger(__name__)

PRUNE_POWER_FRACTION = 0.1


@dataclass(frozen=True)
class StackedMeasurement:
    """All subregion pilot blocks stacked row-wise, subregion-major.

    Row order follows the concatenated visited-port lists (each ascending
    within its subregion), so row i of ``y`` is the observation of port
    ``port_index_list[i]``, consistent with selecting those rows of the
    identity matrix in the same order.
    """

    y: np.ndarray  # (M, K_c), M = Q * N_T
    port_index_list: np.ndarray  # (M,)
    pilot_subcarrier_set: np.ndarray  # (K_c,)


@dataclass(frozen=True)
class DelayGrid:
    """Uniform delay candidates d * tau_max / G_tau for d = 1..G_tau."""

    tau_max_s: float
    g_tau: int

    @property
    def samples(self) -> np.ndarray:
        return np.arange(1, self.g_tau + 1) * (self.tau_max_s / self.g_tau)


@dataclass(frozen=True)
class RefinedChannel:
    """Reconstructed channel and the scatterers that survived pruning."""

    h_hat: np.ndarray  # (N, K)
    surviving_scatterers: tuple
    all_pruned: bool = False


def stack_measurements(measurement: Measurement) -> StackedMeasurement:
    blocks = measurement.per_subregion_pilots
    k_c = {b.shape[1] for b in blocks}
    if len(k_c) != 1:
        raise ValueError(f"inconsistent pilot-subcarrier counts across blocks: {sorted(k_c)}")
    return StackedMeasurement(
        y=np.concatenate(blocks, axis=0),
        port_index_list=np.concatenate(measurement.visited_port_sets),
        pilot_subcarrier_set=measurement.pilot_subcarrier_set,
    )


def project_gains(stacked: StackedMeasurement, estimates, grid: PortGrid, wavelength: float) -> np.ndarray:
    """LS-project the stacked measurement onto the estimated steering vectors.

    Column ell of the steering stack is evaluated at estimate ell's full
    position (its own radius, not the dictionary's reference distance) and
    then row-selected to the visited ports.  Returns the (N_est, K_c)
    coefficient matrix.
    """
    if not estimates:
        raise ValueError("at least one scatterer estimate is required")
    positions = np.array([e.spherical for e in estimates])
    psi = steering_matrix(positions, grid.coordinates[stacked.port_index_list], wavelength)
    x_sam, _, rank, _ = np.linalg.lstsq(psi, stacked.y, rcond=None)
    if rank < psi.shape[1]:
        log.warning("steering stack is rank-deficient (%d < %d); LS used a thresholded pseudo-inverse",
                    rank, psi.shape[1])
    return x_sam


def estimate_delay_gain(x_row: np.ndarray, dgrid: DelayGrid, pilot_set: np.ndarray,
                        subcarrier_spacing_hz: float, num_subcarriers: int):
    """Best delay-grid candidate and its scalar-LS gain for one response row.

    For each candidate delay the gain is the scalar least-squares fit of the
    row onto the pilot-sampled delay response, and the candidate with the
    smallest residual wins (lowest index on ties).
    """
    f_full = delay_response(dgrid.samples, num_subcarriers, subcarrier_spacing_hz)
    f_sam = f_full[np.asarray(pilot_set, dtype=np.intp), :].T  # (G_tau, K_c)
    norms = np.sum(np.abs(f_sam) ** 2, axis=1)
    gains = (f_sam.conj() @ x_row) / norms
    resid = x_row[None, :] - gains[:, None] * f_sam
    errors = np.sum(np.abs(resid) ** 2, axis=1)
    d_opt = int(np.argmin(errors))
    return float(dgrid.samples[d_opt]), complex(gains[d_opt])


def prune_and_reconstruct(estimates, grid: PortGrid, config: SystemConfig) -> RefinedChannel:
    """Drop weak paths and rebuild the full channel from the survivors.

    A path survives when its gain power is at least 10% of the maximum gain
    power.  With no input estimates the zero channel is returned, flagged.
    """
    estimates = [e for e in estimates]
    shape = (grid.num_ports, config.num_subcarriers)
    if not estimates:
        return RefinedChannel(h_hat=np.zeros(shape, dtype=complex),
                              surviving_scatterers=(), all_pruned=True)
    powers = np.array([abs(e.complex_gain) ** 2 for e in estimates])
    keep = powers >= PRUNE_POWER_FRACTION * powers.max()
    survivors = [e for e, k in zip(estimates, keep) if k]
    positions = np.array([e.spherical for e in survivors])
    gains = np.array([e.complex_gain for e in survivors])
    delays = np.array([e.delay_s for e in survivors])
    a_hat = steering_matrix(positions, grid.coordinates, config.wavelength_m)
    f_hat = delay_response(delays, config.num_subcarriers, config.subcarrier_spacing_hz)
    h_hat = (a_hat * gains[None, :]) @ f_hat.T
    return RefinedChannel(h_hat=h_hat, surviving_scatterers=tuple(survivors))


def refine_channel(measurement: Measurement, estimates, grid: PortGrid,
                   config: SystemConfig, dgrid: DelayGrid) -> RefinedChannel:
    """Full refinement pass: stack, project, fit delays/gains, prune, rebuild."""
    if not estimates:
        return prune_and_reconstruct([], grid, config)
    stacked = stack_measurements(measurement)
    x_sam = project_gains(stacked, estimates, grid, config.wavelength_m)
    fitted = []
    for est, row in zip(estimates, x_sam):
        delay, gain = estimate_delay_gain(
            row, dgrid, stacked.pilot_subcarrier_set,
            config.subcarrier_spacing_hz, config.num_subcarriers,
        )
        fitted.append(est.with_delay_gain(delay, gain))
    return prune_and_reconstruct(fitted, grid, config)
