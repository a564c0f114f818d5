"""Angular- and polar-domain sampling grids and steering-vector codebooks.

The angular grid discretizes elevation/azimuth uniformly over (pi/6, 5*pi/6]
at a fixed radial distance; the polar grid adds radial samples and is used
only by the full-region 3D baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ANGLE_MAX, ANGLE_MIN, PortGrid, steering_matrix

ANGLE_SPAN = ANGLE_MAX - ANGLE_MIN  # 2*pi/3


@dataclass(frozen=True)
class AngularGrid:
    """G_theta x G_phi angle samples at one fixed radial distance.

    Sample g1 of the elevation axis is pi/6 + (2*pi/3) * g1 / G_theta for
    g1 = 1..G_theta (the lower endpoint is excluded, the upper included);
    azimuth likewise.  Flat sample order runs elevation-fastest:
    g = (g1-1) + (g2-1)*G_theta with 0-based storage.
    """

    g_theta: int
    g_phi: int
    r_fix_m: float
    theta_samples: np.ndarray  # (G_theta,)
    phi_samples: np.ndarray  # (G_phi,)
    positions: np.ndarray  # (G_theta*G_phi, 3) spherical

    @property
    def size(self) -> int:
        return self.g_theta * self.g_phi

    def flat_index(self, i_theta, i_phi):
        """0-based (elevation, azimuth) indices -> flat sample index."""
        return i_theta + i_phi * self.g_theta

    def unflatten(self, g):
        """Flat sample index -> 0-based (elevation, azimuth) indices."""
        return g % self.g_theta, g // self.g_theta


def build_angular_grid(g_theta: int, g_phi: int, r_fix: float) -> AngularGrid:
    if g_theta < 1 or g_phi < 1:
        raise ValueError("grid sizes must be >= 1")
    if not r_fix > 0:
        raise ValueError("r_fix must be positive")
    theta = ANGLE_MIN + ANGLE_SPAN * np.arange(1, g_theta + 1) / g_theta
    phi = ANGLE_MIN + ANGLE_SPAN * np.arange(1, g_phi + 1) / g_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    positions = np.column_stack(
        [np.full(tt.size, float(r_fix)), tt.ravel(order="F"), pp.ravel(order="F")]
    )
    return AngularGrid(
        g_theta=g_theta,
        g_phi=g_phi,
        r_fix_m=float(r_fix),
        theta_samples=theta,
        phi_samples=phi,
        positions=positions,
    )


@dataclass(frozen=True)
class PolarGrid:
    """Angular grid replicated over G_r radial samples (radius slowest)."""

    angular: AngularGrid
    radial_samples: np.ndarray  # (G_r,), strictly increasing
    positions: np.ndarray  # (G_theta*G_phi*G_r, 3) spherical

    @property
    def size(self) -> int:
        return self.angular.size * self.radial_samples.size


def build_polar_grid(g_theta: int, g_phi: int, g_r: int, r_min: float, r_max: float) -> PolarGrid:
    if g_r < 1:
        raise ValueError("g_r must be >= 1")
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    radial = np.linspace(r_min, r_max, g_r)
    angular = build_angular_grid(g_theta, g_phi, r_min)
    blocks = []
    for r in radial:
        block = angular.positions.copy()
        block[:, 0] = r
        blocks.append(block)
    return PolarGrid(angular=angular, radial_samples=radial, positions=np.vstack(blocks))


def dictionary_matrix(grid, ports: PortGrid, wavelength: float, restrict_to_subregion=None, port_indices=None) -> np.ndarray:
    """Steering-vector codebook over the selected ports, one column per sample.

    ``restrict_to_subregion`` selects one subregion's full port block;
    ``port_indices`` selects an explicit port subset (e.g. visited ports).
    With neither, all N ports are used.
    """
    if restrict_to_subregion is not None and port_indices is not None:
        raise ValueError("pass restrict_to_subregion or port_indices, not both")
    coords = ports.coordinates
    if restrict_to_subregion is not None:
        q = restrict_to_subregion
        if not 0 <= q < ports.num_subregions:
            raise ValueError(f"unknown subregion id {q}")
        coords = coords[ports.subregion_index_sets[q]]
    elif port_indices is not None:
        coords = coords[np.asarray(port_indices, dtype=np.intp)]
    return steering_matrix(grid.positions, coords, wavelength)
