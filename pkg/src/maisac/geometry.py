"""Port-grid geometry, near-field channel synthesis, and pilot measurement simulation.

Coordinate conventions
----------------------
Movable-antenna ports lie in the x-o-z plane (y = 0), centered on the origin.
A point in space is given either as a Cartesian 3-vector [x, y, z] (meters) or
as a spherical triple [r, theta, phi] with r the radial distance from the
array center, theta the elevation measured from the +z axis, and phi the
azimuth in the x-y plane:

    [x, y, z] = r * [sin(theta)cos(phi), sin(theta)sin(phi), cos(theta)]

Port indices are numbered subregion-major: the ports of subregion 0 occupy
indices 0 .. N/Q - 1, then subregion 1, and so on (within a subregion, x
varies fastest).  This keeps per-subregion row selections contiguous and the
stacked selection consistent with row-for-row identity-matrix slicing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

C_LIGHT = 3e8  # m/s, nominal: a 10 GHz carrier has exactly a 0.03 m wavelength

# Scene generator defaults: scatterer/user draws and the angular domain of
# the movement region's field of view.
ANGLE_MIN = np.pi / 6
ANGLE_MAX = 5 * np.pi / 6
RANGE_MIN_M = 2.0
RANGE_MAX_M = 12.28


class ConfigurationError(ValueError):
    """A SystemConfig cannot produce a consistent geometry or measurement."""


def spherical_to_cartesian(p):
    """[r, theta, phi] (or an (..., 3) stack of them) -> Cartesian [x, y, z]."""
    p = np.asarray(p, dtype=float)
    r, th, ph = p[..., 0], p[..., 1], p[..., 2]
    sin_th = np.sin(th)
    return np.stack(
        [r * sin_th * np.cos(ph), r * sin_th * np.sin(ph), r * np.cos(th)], axis=-1
    )


def cartesian_to_spherical(s):
    """Cartesian [x, y, z] (or an (..., 3) stack) -> [r, theta, phi]."""
    s = np.asarray(s, dtype=float)
    r = np.linalg.norm(s, axis=-1)
    theta = np.arccos(np.clip(s[..., 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
    phi = np.arctan2(s[..., 1], s[..., 0])
    return np.stack([r, theta, phi], axis=-1)


@dataclass(frozen=True)
class SystemConfig:
    """System-level parameters of the movable-antenna OFDM setup.

    ``ports_per_axis`` counts ports along (x, z); ``subregion_division``
    splits those axes into (Dx, Dz) rectangular blocks, one movable antenna
    per block.  ``slots_per_frame`` is the number of distinct ports each
    antenna visits during one pilot frame.
    """

    carrier_freq_hz: float = 10e9
    num_subcarriers: int = 64
    subcarrier_spacing_hz: float = 200e3
    ports_per_axis: tuple[int, int] = (32, 32)
    port_spacing_m: float = 0.015
    subregion_division: tuple[int, int] = (2, 2)
    slots_per_frame: int = 128
    pilot_subcarriers: int = 32
    num_paths: int = 6
    snr_db: float = 20.0
    rng_seed: int = 0
    pilot_pattern: str = "uniform"  # or "random"

    @property
    def wavelength_m(self) -> float:
        return C_LIGHT / self.carrier_freq_hz

    @property
    def num_ports(self) -> int:
        return self.ports_per_axis[0] * self.ports_per_axis[1]

    @property
    def num_subregions(self) -> int:
        return self.subregion_division[0] * self.subregion_division[1]

    def validate(self):
        nx, nz = self.ports_per_axis
        dx, dz = self.subregion_division
        if self.carrier_freq_hz <= 0 or self.port_spacing_m <= 0:
            raise ConfigurationError("carrier frequency and port spacing must be positive")
        if nx < dx or nz < dz or nx % dx or nz % dz:
            raise ConfigurationError(
                f"subregion division {dx}x{dz} does not evenly tile the "
                f"{nx}x{nz} port grid"
            )
        if self.slots_per_frame > self.num_ports // self.num_subregions:
            raise ConfigurationError(
                f"slots_per_frame={self.slots_per_frame} exceeds the "
                f"{self.num_ports // self.num_subregions} ports per subregion"
            )
        if self.pilot_subcarriers > self.num_subcarriers:
            raise ConfigurationError("pilot_subcarriers exceeds num_subcarriers")
        if self.pilot_pattern not in ("uniform", "random"):
            raise ConfigurationError(f"unknown pilot_pattern {self.pilot_pattern!r}")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        """Build from config-file keys; port spacing may be given in wavelengths."""
        d = dict(d)
        if "port_spacing_in_wavelengths" in d:
            lam = C_LIGHT / d.get("carrier_freq_hz", cls.carrier_freq_hz)
            d["port_spacing_m"] = d.pop("port_spacing_in_wavelengths") * lam
        for key in ("ports_per_axis", "subregion_division"):
            if key in d:
                d[key] = tuple(d[key])
        if d.get("snr_db") is None:
            d["snr_db"] = math.inf
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()


@dataclass(frozen=True)
class PortGrid:
    """Discretized antenna-movement region partitioned into Q subregions."""

    coordinates: np.ndarray  # (N, 3) port positions, y == 0
    subregion_index_sets: tuple  # Q int arrays, disjoint, union = range(N)
    subregion_centers: np.ndarray  # (Q, 3) arithmetic means of block ports

    @property
    def num_ports(self) -> int:
        return self.coordinates.shape[0]

    @property
    def num_subregions(self) -> int:
        return len(self.subregion_index_sets)


def build_port_grid(config: SystemConfig) -> PortGrid:
    """Lay out the port grid centered at the origin and split it into blocks.

    Raises ConfigurationError when the subregion division does not evenly
    tile the grid.
    """
    config.validate()
    nx, nz = config.ports_per_axis
    dx, dz = config.subregion_division
    d = config.port_spacing_m

    xs = (np.arange(nx) - (nx - 1) / 2.0) * d
    zs = (np.arange(nz) - (nz - 1) / 2.0) * d
    bx_size, bz_size = nx // dx, nz // dz

    coords = []
    index_sets = []
    centers = []
    n = 0
    for bz in range(dz):
        for bx in range(dx):
            block = []
            for iz in range(bz * bz_size, (bz + 1) * bz_size):
                for ix in range(bx * bx_size, (bx + 1) * bx_size):
                    coords.append((xs[ix], 0.0, zs[iz]))
                    block.append(n)
                    n += 1
            index_sets.append(np.array(block, dtype=np.intp))
            centers.append(np.mean([coords[i] for i in block], axis=0))
    return PortGrid(
        coordinates=np.array(coords, dtype=float),
        subregion_index_sets=tuple(index_sets),
        subregion_centers=np.array(centers, dtype=float),
    )


def rayleigh_distance(config: SystemConfig) -> float:
    """Near-field boundary 2*D^2/lambda with D the larger side of the region."""
    nx, nz = config.ports_per_axis
    aperture = max(nx, nz) * config.port_spacing_m
    return 2.0 * aperture**2 / config.wavelength_m


def steering_vector(position, grid, wavelength: float) -> np.ndarray:
    """Near-field steering vector of a point source at spherical ``position``.

    Entry n is exp(-j*2*pi/wavelength * (||r_n - s|| - r)), i.e. the phase
    of the wavefront at port n relative to the array center.  ``grid`` may be
    a PortGrid or an (N, 3) array of port coordinates.

    Raises ValueError for a non-positive radial distance.
    """
    p = np.asarray(position, dtype=float)
    if not p[0] > 0:
        raise ValueError(f"radial distance must be positive, got {p[0]}")
    coords = grid.coordinates if isinstance(grid, PortGrid) else np.asarray(grid)
    s = spherical_to_cartesian(p)
    dist = np.linalg.norm(coords - s, axis=-1)
    return np.exp(-2j * np.pi / wavelength * (dist - p[0]))


def steering_matrix(positions, coords, wavelength: float) -> np.ndarray:
    """Stack steering vectors column-wise for (L, 3) spherical ``positions``.

    ``coords`` is an (N, 3) port-coordinate array; the result is (N, L).
    Large position sets are processed in chunks to bound peak memory.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if np.any(positions[:, 0] <= 0):
        raise ValueError("radial distances must be positive")
    coords = np.asarray(coords, dtype=float)
    s = spherical_to_cartesian(positions)  # (L, 3)
    k = 2.0 * np.pi / wavelength
    out = np.empty((coords.shape[0], s.shape[0]), dtype=complex)
    chunk = max(1, int(8e6 // max(coords.shape[0], 1)))
    for lo in range(0, s.shape[0], chunk):
        hi = min(lo + chunk, s.shape[0])
        dist = np.linalg.norm(coords[:, None, :] - s[None, lo:hi, :], axis=-1)
        out[:, lo:hi] = np.exp(-1j * k * (dist - positions[lo:hi, 0][None, :]))
    return out


@dataclass(frozen=True)
class Scatterer:
    """One resolvable propagation path: position, complex gain, and delay."""

    radial_distance_m: float
    elevation_rad: float
    azimuth_rad: float
    complex_gain: complex
    delay_s: float

    @property
    def spherical(self) -> np.ndarray:
        return np.array([self.radial_distance_m, self.elevation_rad, self.azimuth_rad])

    @property
    def cartesian(self) -> np.ndarray:
        return spherical_to_cartesian(self.spherical)


@dataclass(frozen=True)
class Scene:
    """Ground truth for one trial: hidden scatterers plus the user position."""

    scatterers: tuple
    user_position: np.ndarray  # spherical [r, theta, phi]

    @property
    def positions(self) -> np.ndarray:
        """(L, 3) Cartesian scatterer positions."""
        return np.array([sc.cartesian for sc in self.scatterers])


def generate_scene(config: SystemConfig, rng, tau_max_s: float = 115e-9) -> Scene:
    """Draw a random scene: L scatterers and a user, geometric delays.

    Radial distances ~ U(2, 12.28) m and both angles ~ U(pi/6, 5*pi/6) for
    scatterers and user alike; complex gains are unit-power circular Gaussian.
    The delay of path l is (user-to-scatterer + scatterer-to-array-center)
    propagation time, clipped to [0, tau_max_s].
    """
    rng = np.random.default_rng(rng)
    L = config.num_paths
    r = rng.uniform(RANGE_MIN_M, RANGE_MAX_M, L)
    th = rng.uniform(ANGLE_MIN, ANGLE_MAX, L)
    ph = rng.uniform(ANGLE_MIN, ANGLE_MAX, L)
    gains = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0)
    user = np.array(
        [
            rng.uniform(RANGE_MIN_M, RANGE_MAX_M),
            rng.uniform(ANGLE_MIN, ANGLE_MAX),
            rng.uniform(ANGLE_MIN, ANGLE_MAX),
        ]
    )
    user_cart = spherical_to_cartesian(user)
    scatterers = []
    for l in range(L):
        pos = spherical_to_cartesian([r[l], th[l], ph[l]])
        tau = (np.linalg.norm(user_cart - pos) + r[l]) / C_LIGHT
        scatterers.append(
            Scatterer(
                radial_distance_m=r[l],
                elevation_rad=th[l],
                azimuth_rad=ph[l],
                complex_gain=complex(gains[l]),
                delay_s=float(np.clip(tau, 0.0, tau_max_s)),
            )
        )
    return Scene(scatterers=tuple(scatterers), user_position=user)


@dataclass(frozen=True)
class ChannelMatrix:
    """Wideband channel H (N x K) with its steering/gain/delay factors.

    H equals steering @ diag(gains) @ delay_response.T by construction; the
    delay response uses the baseband frequency grid f_k = k * subcarrier
    spacing (k = 0 .. K-1), folding the constant carrier-phase term of each
    path into its complex gain.
    """

    entries: np.ndarray  # (N, K)
    steering: np.ndarray  # (N, L), unit-modulus columns
    gains: np.ndarray  # (L,)
    delay_response: np.ndarray  # (K, L)


def delay_response(delays, num_subcarriers: int, subcarrier_spacing_hz: float) -> np.ndarray:
    """(K, L) matrix with columns exp(-j*2*pi*f_k*tau_l), f_k = k*spacing."""
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    f = np.arange(num_subcarriers) * subcarrier_spacing_hz
    return np.exp(-2j * np.pi * f[:, None] * delays[None, :])


def synthesize_channel(scatterers, grid: PortGrid, config: SystemConfig) -> ChannelMatrix:
    """Superpose the L scatterer paths into the N x K channel matrix."""
    scatterers = list(scatterers)
    if not scatterers:
        raise ValueError("at least one scatterer is required")
    positions = np.array([sc.spherical for sc in scatterers])
    gains = np.array([sc.complex_gain for sc in scatterers])
    delays = np.array([sc.delay_s for sc in scatterers])
    A = steering_matrix(positions, grid.coordinates, config.wavelength_m)
    F = delay_response(delays, config.num_subcarriers, config.subcarrier_spacing_hz)
    H = (A * gains[None, :]) @ F.T
    return ChannelMatrix(entries=H, steering=A, gains=gains, delay_response=F)


def pilot_subcarrier_indices(config: SystemConfig, rng=None) -> np.ndarray:
    """K_c pilot subcarrier indices; uniformly spaced unless pattern='random'."""
    K, Kc = config.num_subcarriers, config.pilot_subcarriers
    if config.pilot_pattern == "random":
        rng = np.random.default_rng(rng)
        return np.sort(rng.choice(K, size=Kc, replace=False)).astype(np.intp)
    return np.floor(np.arange(Kc) * K / Kc).astype(np.intp)


def noise_power_for_snr(signal: np.ndarray, snr_db: float) -> float:
    """Per-entry noise variance giving the requested mean-power SNR."""
    if not np.isfinite(snr_db):
        return 0.0
    p_sig = float(np.mean(np.abs(signal) ** 2))
    return p_sig * 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True)
class Measurement:
    """Per-subregion pilot matrices and the selections that produced them.

    ``visited_port_sets[q]`` lists the ports (ascending) visited by subregion
    q's antenna; row t of ``per_subregion_pilots[q]`` is the corresponding
    channel row observed on the ``pilot_subcarrier_set`` columns.
    """

    per_subregion_pilots: tuple  # Q arrays, each (N_T, K_c)
    visited_port_sets: tuple  # Q int arrays, each (N_T,), pairwise disjoint
    pilot_subcarrier_set: np.ndarray  # (K_c,)
    noise_power: float


def simulate_measurement(channel, grid: PortGrid, config: SystemConfig, rng_seed=None) -> Measurement:
    """Simulate one pilot frame: random port visits, pilot columns, AWGN.

    For each subregion, N_T ports are drawn uniformly without replacement
    (then sorted ascending); all subregions share one pilot-subcarrier set.
    The noise variance is set from config.snr_db against the mean power of
    the noiseless stacked measurement.  Deterministic given the seed.
    """
    config.validate()
    H = channel.entries if isinstance(channel, ChannelMatrix) else np.asarray(channel)
    rng = np.random.default_rng(config.rng_seed if rng_seed is None else rng_seed)
    n_t = config.slots_per_frame

    visited = []
    for q, idx_set in enumerate(grid.subregion_index_sets):
        if n_t > idx_set.size:
            raise ConfigurationError(
                f"slots_per_frame={n_t} exceeds subregion {q} size {idx_set.size}"
            )
        pick = rng.choice(idx_set, size=n_t, replace=False)
        visited.append(np.sort(pick))
    pilots = pilot_subcarrier_indices(config, rng)

    clean = [H[np.ix_(iq, pilots)] for iq in visited]
    sigma2 = noise_power_for_snr(np.concatenate(clean, axis=0), config.snr_db)
    blocks = []
    for y in clean:
        if sigma2 > 0:
            noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
            y = y + np.sqrt(sigma2 / 2.0) * noise
        blocks.append(y)
    return Measurement(
        per_subregion_pilots=tuple(blocks),
        visited_port_sets=tuple(visited),
        pilot_subcarrier_set=pilots,
        noise_power=sigma2,
    )
