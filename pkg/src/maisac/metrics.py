"""Scoring: channel NMSE, matched angle/distance MAE, and the OSPA metric."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.optimize import linear_sum_assignment

# Sentinel MAE values reported when no truth/estimate pair matches within the
# cutoff, so that averages over trials stay finite.
UNMATCHED_ANGLE_MAE_DEG = 90.0


@dataclass(frozen=True)
class MetricRecord:
    """One method's scores for one trial at one operating point."""

    method: str
    snr_db: float
    cr_ports: float  # visited ports / total ports
    cr_subcarriers: float  # pilot subcarriers / total subcarriers
    subregion_div: str  # e.g. "2x2"
    trial: int
    nmse: float
    angle_mae_deg: float
    distance_mae_m: float
    ospa_m: float
    n_clu: int
    runtime_ms: float
    scene_hash: str


CSV_COLUMNS = tuple(f.name for f in fields(MetricRecord))


def nmse(h_hat: np.ndarray, h: np.ndarray) -> float:
    """Squared Frobenius error of h_hat normalized by the power of h."""
    return float(np.linalg.norm(h_hat - h) ** 2 / np.linalg.norm(h) ** 2)


def min_cost_assignment(cost: np.ndarray):
    """Exact minimum-cost assignment of the m rows to distinct columns (m <= n).

    Returns (row_indices, col_indices) such that pairing row i with column
    col_indices[i] minimizes the total cost over all injective assignments.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] > cost.shape[1]:
        raise ValueError(f"need an m x n cost matrix with m <= n, got {cost.shape}")
    rows, cols = linear_sum_assignment(cost)
    return rows, cols


def ospa(truth: np.ndarray, estimate: np.ndarray, psi: float) -> float:
    """Optimal-subpattern-assignment distance between two point sets.

    Point-to-point distances are truncated at the cutoff ``psi``; unmatched
    points of the larger set each cost ``psi``; the total is averaged over
    the larger cardinality.  Two empty sets have distance 0.
    """
    x = np.asarray(truth, dtype=float).reshape(-1, 3)
    y = np.asarray(estimate, dtype=float).reshape(-1, 3)
    if x.shape[0] > y.shape[0]:
        x, y = y, x
    m, n = x.shape[0], y.shape[0]
    if n == 0:
        return 0.0
    if m == 0:
        return float(psi)
    d = np.minimum(psi, np.linalg.norm(x[:, None, :] - y[None, :, :], axis=2))
    rows, cols = min_cost_assignment(d)
    return float((d[rows, cols].sum() + psi * (n - m)) / n)


def matched_mae(truth_scatterers, estimates, psi: float):
    """Angle and radial-distance MAE over optimally matched pairs.

    Truth and estimates are matched on 3D position with the OSPA-style
    truncated cost; only pairs closer than ``psi`` (untruncated) count.  The
    angle error of a pair is (|d_theta| + |d_phi|) / 2 in degrees.  With no
    matched pair, sentinel values (90 degrees, psi meters) are returned.
    """
    truth = list(truth_scatterers)
    ests = list(estimates)
    if not truth or not ests:
        return UNMATCHED_ANGLE_MAE_DEG, float(psi)
    tp = np.array([t.cartesian for t in truth])
    ep = np.array([e.cartesian_m for e in ests])
    dist = np.linalg.norm(tp[:, None, :] - ep[None, :, :], axis=2)
    cost = np.minimum(psi, dist)
    if cost.shape[0] <= cost.shape[1]:
        rows, cols = min_cost_assignment(cost)
        pairs = list(zip(rows, cols))
    else:
        rows, cols = min_cost_assignment(cost.T)
        pairs = [(j, i) for i, j in zip(rows, cols)]
    angle_errs = []
    dist_errs = []
    for i, j in pairs:
        if dist[i, j] >= psi:
            continue
        t, e = truth[i], ests[j]
        d_th = abs(t.elevation_rad - e.elevation_rad)
        d_ph = abs(t.azimuth_rad - e.azimuth_rad)
        angle_errs.append(np.degrees((d_th + d_ph) / 2.0))
        dist_errs.append(abs(t.radial_distance_m - e.radial_distance_m))
    if not angle_errs:
        return UNMATCHED_ANGLE_MAE_DEG, float(psi)
    return float(np.mean(angle_errs)), float(np.mean(dist_errs))
