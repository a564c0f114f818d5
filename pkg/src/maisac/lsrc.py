"""Scatterer localization from per-subregion bearing estimates.

Each subregion's angle estimate for a detected path defines a ray anchored at
that subregion's center.  Rays that point the same way (pairwise angle below
a threshold, checked complete-linkage) are grouped per path index; each group
of two or more rays is localized by minimizing the sum of squared
point-to-ray distances, a 3x3 linear system.  Groups whose rays are (near-)
parallel carry no range information and are rejected, as are solutions at
implausible radii.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import PortGrid, cartesian_to_spherical, spherical_to_cartesian
from .nomp import AngleEstimateTable

# Near-parallel ray bundles leave the localization system effectively
# singular; below this reciprocal condition number the solution is garbage.
RCOND_MIN = 1e-8
RADIUS_MIN_M = 0.1
RADIUS_MAX_M = 100.0


@dataclass(frozen=True)
class DirectionVector:
    """Unit bearing vector of one estimated path from one subregion."""

    v: np.ndarray  # unit 3-vector
    source_subregion: int
    source_path_index: int


@dataclass(frozen=True)
class Cluster:
    """Direction vectors (from distinct subregions) deemed to share a scatterer."""

    members: tuple  # DirectionVector, ascending subregion order

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ScattererEstimate:
    """Localized scatterer; delay and gain are attached by the refinement stage."""

    cartesian_m: np.ndarray  # (3,)
    radial_distance_m: float
    elevation_rad: float
    azimuth_rad: float
    delay_s: float | None = None
    complex_gain: complex | None = None

    @property
    def spherical(self) -> np.ndarray:
        return np.array([self.radial_distance_m, self.elevation_rad, self.azimuth_rad])

    def with_delay_gain(self, delay_s: float, complex_gain: complex) -> "ScattererEstimate":
        return replace(self, delay_s=float(delay_s), complex_gain=complex(complex_gain))


def from_cartesian(s) -> ScattererEstimate:
    s = np.asarray(s, dtype=float)
    r, th, ph = cartesian_to_spherical(s)
    return ScattererEstimate(
        cartesian_m=s, radial_distance_m=float(r), elevation_rad=float(th),
        azimuth_rad=float(ph),
    )


def direction_vector(theta: float, phi: float, subregion: int = 0, path_index: int = 0) -> DirectionVector:
    """Unit vector [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)]."""
    st = np.sin(theta)
    v = np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])
    return DirectionVector(v=v, source_subregion=subregion, source_path_index=path_index)


def pairwise_angle(v1: np.ndarray, v2: np.ndarray) -> float:
    return float(np.arccos(np.clip(np.dot(v1, v2), -1.0, 1.0)))


def cluster_dvs(dv_sets, alpha_th: float) -> list:
    """Greedy complete-linkage grouping of direction vectors per path index.

    ``dv_sets`` is an iterable of DV lists, one list per estimated path index
    (paths are never mixed).  Within a list, the unclustered DV with the
    lowest subregion index seeds a group, which absorbs every remaining DV
    whose angle to ALL current members stays below ``alpha_th``.  Groups of
    size >= 2 are kept; singletons are discarded.
    """
    clusters = []
    for dvs in dv_sets:
        remaining = sorted(dvs, key=lambda d: d.source_subregion)
        while remaining:
            seed = remaining.pop(0)
            members = [seed]
            kept = []
            for cand in remaining:
                if all(pairwise_angle(m.v, cand.v) < alpha_th for m in members):
                    members.append(cand)
                else:
                    kept.append(cand)
            remaining = kept
            if len(members) >= 2:
                clusters.append(Cluster(members=tuple(members)))
    return clusters


def solve_ray_ls(directions, origins):
    """Least-squares point minimizing summed squared ray distances.

    Solves sum_c (I - v_c v_c^T) s = sum_c (I - v_c v_c^T) o_c via a
    minimum-norm least-squares solve, so consistent singular systems (e.g.
    parallel rays with perpendicular offsets) still return a point on the
    solution set.  Returns (s_hat, e_loc, rcond) where e_loc is the summed
    squared distance at s_hat and rcond the reciprocal condition number of
    the system matrix.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    gamma = np.zeros((3, 3))
    rhs = np.zeros(3)
    for v, o in zip(directions, origins):
        proj = np.eye(3) - np.outer(v, v)
        gamma += proj
        rhs += proj @ o
    s_hat, *_ = np.linalg.lstsq(gamma, rhs, rcond=None)
    eig = np.linalg.eigvalsh(gamma)
    rcond = float(eig[0] / eig[-1]) if eig[-1] > 0 else 0.0
    e_loc = 0.0
    for v, o in zip(directions, origins):
        d = s_hat - o
        e_loc += float(np.sum((d - v * (v @ d)) ** 2))
    return s_hat, e_loc, rcond


def localize_cluster(cluster: Cluster, centers: np.ndarray):
    """Localize one cluster against its subregion centers.

    Returns a ScattererEstimate, or None when the ray geometry is degenerate
    (reciprocal condition number below RCOND_MIN, which includes any cluster
    of effectively parallel rays and the single-ray case) or the solution
    lands at an implausible radius.
    """
    directions = np.array([m.v for m in cluster.members])
    origins = np.array([centers[m.source_subregion] for m in cluster.members])
    s_hat, _, rcond = solve_ray_ls(directions, origins)
    if rcond < RCOND_MIN:
        return None
    r = float(np.linalg.norm(s_hat))
    if not RADIUS_MIN_M < r < RADIUS_MAX_M:
        return None
    return from_cartesian(s_hat)


def codebook_bearings(table: AngleEstimateTable, grid: PortGrid, r_fix: float) -> AngleEstimateTable:
    """Convert codebook-frame angle estimates into per-subregion bearings.

    A subregion's fit places the detected path at the codebook point
    r_fix * [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)] measured
    from the ARRAY center; the ray the localization stage needs is the one
    from the subregion's own center toward that fitted point.  Feeding the
    raw codebook angles instead makes rays from all subregions meet at
    (r_fix / (r_fix - r)) times the true position rather than at the
    scatterer itself.
    """
    theta = np.empty_like(table.theta_hat)
    phi = np.empty_like(table.phi_hat)
    for q in range(table.num_subregions):
        fitted = spherical_to_cartesian(
            np.column_stack(
                [
                    np.full(table.num_paths, float(r_fix)),
                    table.theta_hat[:, q],
                    table.phi_hat[:, q],
                ]
            )
        )
        bearing = cartesian_to_spherical(fitted - grid.subregion_centers[q])
        theta[:, q] = bearing[:, 1]
        phi[:, q] = bearing[:, 2]
    return AngleEstimateTable(theta_hat=theta, phi_hat=phi)


def run_lsrc(estimates: AngleEstimateTable, grid: PortGrid, alpha_th: float):
    """Cluster the angle table's rays and localize every valid cluster.

    Returns (scatterer_estimates, n_clusters) where n_clusters counts the
    valid (size >= 2) clusters found, of which degenerate ones contribute no
    estimate.
    """
    dv_sets = []
    for l in range(estimates.num_paths):
        dv_sets.append(
            [
                direction_vector(estimates.theta_hat[l, q], estimates.phi_hat[l, q],
                                 subregion=q, path_index=l)
                for q in range(estimates.num_subregions)
            ]
        )
    clusters = cluster_dvs(dv_sets, alpha_th)
    located = []
    for cluster in clusters:
        est = localize_cluster(cluster, grid.subregion_centers)
        if est is not None:
            located.append(est)
    return located, len(clusters)
