"""Per-subregion multi-snapshot Newtonized OMP over the angular grid.

Each subregion solves a greedy sparse recovery on its own pilot block: pick
the best on-grid steering atom by correlation, refine its elevation/azimuth
off-grid with a safeguarded Newton ascent of the correlation objective, then
re-fit all selected atoms jointly by least squares and update the residual.
The radial coordinate stays fixed at the grid's reference distance; only the
two angles are refined.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import AngularGrid, dictionary_matrix
from .geometry import ANGLE_MAX, ANGLE_MIN, Measurement, PortGrid, steering_vector

# Joint LS re-fits use a thresholded pseudo-inverse so that refined atoms
# that land (near-)coincident with an earlier pick stay solvable.
LSTSQ_RCOND = 1e-10


@dataclass(frozen=True)
class AngleEstimateTable:
    """Elevation/azimuth estimates, one column per subregion, L_pre rows."""

    theta_hat: np.ndarray  # (L_pre, Q), radians
    phi_hat: np.ndarray  # (L_pre, Q), radians

    @property
    def num_paths(self) -> int:
        return self.theta_hat.shape[0]

    @property
    def num_subregions(self) -> int:
        return self.theta_hat.shape[1]


@dataclass
class NompWorkState:
    """Greedy solver state for one subregion."""

    residual: np.ndarray  # (N_T, K_c)
    selected_atoms: np.ndarray  # (N, n_selected) full-aperture steering vectors
    selected_positions: list  # spherical triples of the selected atoms
    coefficients: np.ndarray | None = None  # (n_selected, K_c) joint LS fit
    residual_norms: list = field(default_factory=list)  # after each detection


def _phase_derivatives(p, port_coords, wavelength):
    """Steering phase psi_n and its first/second derivatives in (theta, phi).

    psi_n = -(2*pi/wavelength) * (||r_n - s(p)|| - r) with s the Cartesian
    point of spherical p; r is held fixed.  Returns (a, d1, d2) where a is
    the steering vector, d1[i] = d psi/d p_i (2 arrays of length N) and
    d2[i][j] the symmetric second derivatives.
    """
    r, th, ph = float(p[0]), float(p[1]), float(p[2])
    k = 2.0 * np.pi / wavelength
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)

    s = r * np.array([st * cp, st * sp, ct])
    s_th = r * np.array([ct * cp, ct * sp, -st])
    s_ph = r * np.array([-st * sp, st * cp, 0.0])
    s_thth = -s
    s_thph = r * np.array([-ct * sp, ct * cp, 0.0])
    s_phph = r * np.array([-st * cp, -st * sp, 0.0])

    diff = s[None, :] - port_coords  # (N, 3)
    d = np.linalg.norm(diff, axis=1)
    if np.any(d == 0):
        raise ValueError("source position coincides with a port")
    u = diff / d[:, None]

    def d_first(sv):
        return u @ sv

    def d_second(svi, svj, svij, d_i, d_j):
        return (svi @ svj - d_i * d_j) / d + u @ svij

    d_th = d_first(s_th)
    d_ph = d_first(s_ph)
    d_thth = d_second(s_th, s_th, s_thth, d_th, d_th)
    d_thph = d_second(s_th, s_ph, s_thph, d_th, d_ph)
    d_phph = d_second(s_ph, s_ph, s_phph, d_ph, d_ph)

    a = np.exp(-1j * k * (d - r))
    d1 = (-k * d_th, -k * d_ph)
    d2 = ((-k * d_thth, -k * d_thph), (-k * d_thph, -k * d_phph))
    return a, d1, d2


def objective_j(p, y_res, port_coords, wavelength) -> float:
    """Multi-snapshot correlation power of the steering atom at p.

    Equals ||y_res^H a_sel(p)||_2^2 where a_sel is the steering vector over
    the given (visited) port coordinates.
    """
    a = steering_vector(p, np.asarray(port_coords), wavelength)
    c = y_res.conj().T @ a
    return float(np.real(np.vdot(c, c)))


def grad_hess_j(p, y_res, port_coords, wavelength):
    """Analytic gradient (2,) and symmetric Hessian (2, 2) of objective_j
    with respect to (theta, phi); the radial coordinate is held fixed."""
    a, d1, d2 = _phase_derivatives(p, np.asarray(port_coords), wavelength)
    yh = y_res.conj().T  # (K_c, N_T)

    aq = yh @ a
    aq_1 = [yh @ (1j * d1[i] * a) for i in range(2)]
    grad = np.array([2.0 * np.real(np.vdot(aq, aq_1[i])) for i in range(2)])

    hess = np.empty((2, 2))
    for i in range(2):
        for j in range(i, 2):
            a_ij = (1j * d2[i][j] - d1[i] * d1[j]) * a
            aq_ij = yh @ a_ij
            hess[i, j] = 2.0 * np.real(np.vdot(aq_1[i], aq_1[j]) + np.vdot(aq, aq_ij))
            hess[j, i] = hess[i, j]
    return grad, hess


def newton_refine(p0, y_res, port_coords, wavelength, n_iters: int,
                  grad_step: float = 0.05) -> np.ndarray:
    """Safeguarded Newton ascent of objective_j in (theta, phi) from p0.

    A Newton step is accepted only when the Hessian is negative definite and
    the objective strictly improves; otherwise a backtracking gradient-ascent
    step (up to 10 halvings of ``grad_step``) is tried, and failing that the
    point is kept.  Angles are clamped to [pi/6, 5*pi/6].  The objective
    never decreases across iterations.
    """
    port_coords = np.asarray(port_coords)
    p = np.asarray(p0, dtype=float).copy()
    j_cur = objective_j(p, y_res, port_coords, wavelength)
    for _ in range(n_iters):
        grad, hess = grad_hess_j(p, y_res, port_coords, wavelength)
        gnorm = np.linalg.norm(grad)
        if not np.isfinite(gnorm) or gnorm <= 1e-13 * max(j_cur, 1e-300):
            break  # stationary (e.g. already on the peak)

        accepted = False
        # Newton step, valid only on a locally concave objective.
        neg_definite = hess[0, 0] < 0 and np.linalg.det(hess) > 0
        if neg_definite:
            step = np.linalg.solve(hess, grad)
            cand = p.copy()
            cand[1:] = np.clip(p[1:] - step, ANGLE_MIN, ANGLE_MAX)
            j_cand = objective_j(cand, y_res, port_coords, wavelength)
            if j_cand > j_cur:
                p, j_cur, accepted = cand, j_cand, True
        if not accepted:
            direction = grad / gnorm
            step = grad_step
            for _ in range(10):
                cand = p.copy()
                cand[1:] = np.clip(p[1:] + step * direction, ANGLE_MIN, ANGLE_MAX)
                j_cand = objective_j(cand, y_res, port_coords, wavelength)
                if j_cand > j_cur:
                    p, j_cur, accepted = cand, j_cand, True
                    break
                step *= 0.5
        if not accepted:
            break  # no ascent direction found; keep the current point
    return p


def _cell_size(grid: AngularGrid) -> float:
    """Coarse-grid cell size (radians) used to scale fallback ascent steps."""
    span = ANGLE_MAX - ANGLE_MIN
    return span / max(grid.g_theta, grid.g_phi)


def nomp_subregion(measurement: Measurement, q: int, grid: AngularGrid,
                   ports: PortGrid, wavelength: float, l_pre: int,
                   n_newton: int, cyclic_rounds: int = 1,
                   dict_q: np.ndarray | None = None):
    """Greedy angle estimation on subregion q's pilot block.

    Runs exactly ``l_pre`` iterations: on-grid correlation argmax (lowest
    flat index wins ties), ``n_newton`` refinement steps, then a joint LS
    re-fit of all atoms selected so far against the original block and a
    residual update.  After each detection, ``cyclic_rounds`` passes
    re-refine every atom against the residual plus its own contribution;
    without this, atoms detected early keep the bias induced by paths that
    were only subtracted later, and that bias is coherent across subregions
    (it wrecks downstream ray intersection).  A re-refined atom is kept only
    if the joint-LS residual does not grow.  ``dict_q`` may pass a
    precomputed codebook over the visited ports to avoid rebuilding it.

    Returns (theta_hat (l_pre,), phi_hat (l_pre,), NompWorkState).
    """
    y_q = measurement.per_subregion_pilots[q]
    visited = measurement.visited_port_sets[q]
    if y_q.shape[0] != visited.size:
        raise ValueError("pilot block row count does not match visited ports")
    coords = ports.coordinates[visited]
    if dict_q is None:
        dict_q = dictionary_matrix(grid, ports, wavelength, port_indices=visited)

    grad_step = 0.5 * _cell_size(grid)
    state = NompWorkState(
        residual=y_q.copy(),
        selected_atoms=np.empty((ports.num_ports, 0), dtype=complex),
        selected_positions=[],
    )

    def refit():
        gamma = state.selected_atoms[visited, :]
        # rcond keeps the joint fit stable when refined atoms (near-)coincide
        coef, *_ = np.linalg.lstsq(gamma, y_q, rcond=LSTSQ_RCOND)
        state.coefficients = coef
        state.residual = y_q - gamma @ coef
        return gamma

    for _ in range(l_pre):
        scores = np.sum(np.abs(dict_q.conj().T @ state.residual) ** 2, axis=1)
        g_star = int(np.argmax(scores))  # first occurrence = lowest flat index
        p_hat = newton_refine(
            grid.positions[g_star], state.residual, coords, wavelength,
            n_iters=n_newton, grad_step=grad_step,
        )
        state.selected_atoms = np.column_stack(
            [state.selected_atoms, steering_vector(p_hat, ports, wavelength)]
        )
        state.selected_positions.append(p_hat)
        gamma = refit()

        if n_newton > 0:
            for _ in range(cyclic_rounds):
                for i in range(len(state.selected_positions)):
                    y_i = state.residual + np.outer(gamma[:, i], state.coefficients[i])
                    p_i = newton_refine(state.selected_positions[i], y_i, coords,
                                        wavelength, n_iters=n_newton, grad_step=grad_step)
                    old_atom = state.selected_atoms[:, i].copy()
                    old_norm = np.linalg.norm(state.residual)
                    state.selected_atoms[:, i] = steering_vector(p_i, ports, wavelength)
                    new_gamma = refit()
                    if np.linalg.norm(state.residual) <= old_norm:
                        state.selected_positions[i] = p_i
                        gamma = new_gamma
                    else:
                        state.selected_atoms[:, i] = old_atom
                        gamma = refit()
        state.residual_norms.append(float(np.linalg.norm(state.residual)))

    theta_hat = np.array([p[1] for p in state.selected_positions])
    phi_hat = np.array([p[2] for p in state.selected_positions])
    return theta_hat, phi_hat, state


def estimate_angles(measurement: Measurement, grid: AngularGrid, ports: PortGrid,
                    wavelength: float, l_pre: int, n_newton: int,
                    cyclic_rounds: int = 1) -> AngleEstimateTable:
    """Run the subregion solver on every block and collect the angle tables."""
    Q = len(measurement.per_subregion_pilots)
    theta = np.empty((l_pre, Q))
    phi = np.empty((l_pre, Q))
    for q in range(Q):
        theta[:, q], phi[:, q], _ = nomp_subregion(
            measurement, q, grid, ports, wavelength, l_pre, n_newton, cyclic_rounds
        )
    return AngleEstimateTable(theta_hat=theta, phi_hat=phi)
