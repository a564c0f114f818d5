import numpy as np
import pytest

from maisac.geometry import (
    SystemConfig,
    build_port_grid,
    cartesian_to_spherical,
    spherical_to_cartesian,
)
from maisac.lsrc import (
    Cluster,
    DirectionVector,
    ScattererEstimate,
    cluster_dvs,
    codebook_bearings,
    direction_vector,
    localize_cluster,
    pairwise_angle,
    run_lsrc,
    solve_ray_ls,
)
from maisac.nomp import AngleEstimateTable

CFG = SystemConfig(ports_per_axis=(16, 16), subregion_division=(2, 2),
                   slots_per_frame=32, pilot_subcarriers=16)
PORTS = build_port_grid(CFG)


def test_direction_vector_axis_cases():
    assert np.allclose(direction_vector(np.pi / 2, np.pi / 2).v, [0, 1, 0], atol=1e-15)
    assert np.allclose(direction_vector(np.pi / 2, np.pi / 6).v,
                       [np.sqrt(3) / 2, 0.5, 0], atol=1e-15)


def test_direction_vector_unit_norm():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = direction_vector(rng.uniform(0.3, 2.8), rng.uniform(0.3, 2.8)).v
        assert abs(np.linalg.norm(v) - 1.0) < 1e-14


def _dv(v, q, l=0):
    return DirectionVector(v=np.asarray(v, dtype=float), source_subregion=q,
                           source_path_index=l)


def test_identical_dvs_form_one_cluster():
    v = direction_vector(1.1, 0.9).v
    dvs = [_dv(v, q) for q in range(4)]
    clusters = cluster_dvs([dvs], np.deg2rad(10))
    assert len(clusters) == 1 and clusters[0].size == 4


def test_wide_separated_dvs_all_discarded():
    dvs = [_dv([1, 0, 0], 0), _dv([0, 1, 0], 1), _dv([0, 0, 1], 2), _dv([-1, 0, 0], 3)]
    assert cluster_dvs([dvs], np.deg2rad(10)) == []


def _prescribed_angle_triplet():
    # pairwise angles exactly {5, 5, 9} degrees
    half = np.deg2rad(4.5)
    v2 = np.array([np.sin(half), np.cos(half), 0.0])
    v3 = np.array([-np.sin(half), np.cos(half), 0.0])
    lift = np.arccos(np.cos(np.deg2rad(5.0)) / np.cos(half))
    v1 = np.array([0.0, np.cos(lift), np.sin(lift)])
    return v1, v2, v3


def test_complete_linkage_acceptance():
    v1, v2, v3 = _prescribed_angle_triplet()
    assert abs(np.rad2deg(pairwise_angle(v1, v2)) - 5) < 1e-9
    assert abs(np.rad2deg(pairwise_angle(v1, v3)) - 5) < 1e-9
    assert abs(np.rad2deg(pairwise_angle(v2, v3)) - 9) < 1e-9
    dvs = [_dv(v1, 0), _dv(v2, 1), _dv(v3, 2)]
    clusters = cluster_dvs([dvs], np.deg2rad(10))
    assert len(clusters) == 1 and clusters[0].size == 3
    # at an 8-degree threshold the 9-degree pair breaks complete linkage
    clusters8 = cluster_dvs([dvs], np.deg2rad(8))
    assert len(clusters8) == 1 and clusters8[0].size == 2


def test_clusters_never_mix_path_indices():
    v = direction_vector(1.0, 1.0).v
    set_a = [_dv(v, q, l=0) for q in range(2)]
    set_b = [_dv(v, q, l=1) for q in range(2)]
    clusters = cluster_dvs([set_a, set_b], np.deg2rad(10))
    assert len(clusters) == 2
    for c in clusters:
        assert len({m.source_path_index for m in c.members}) == 1


def test_two_ray_exact_intersection():
    s_star = np.array([0.5, 2.0, 0.0])
    o1, o2 = np.zeros(3), np.array([1.0, 0.0, 0.0])
    v1 = (s_star - o1) / np.linalg.norm(s_star - o1)
    v2 = (s_star - o2) / np.linalg.norm(s_star - o2)
    s_hat, e_loc, rcond = solve_ray_ls([v1, v2], [o1, o2])
    assert np.linalg.norm(s_hat - s_star) < 1e-9
    assert e_loc < 1e-18
    assert rcond > 1e-3


def test_parallel_rays_midpoint_line_solution():
    v = np.array([0.0, 1.0, 0.0])
    o1 = np.zeros(3)
    offset = np.array([0.4, 0.0, 0.0])  # perpendicular to the ray direction
    s_hat, e_loc, rcond = solve_ray_ls([v, v], [o1, offset])
    # minimum-norm solution sits on the midpoint line
    assert np.allclose(s_hat, [0.2, 0.0, 0.0], atol=1e-12)
    assert abs(e_loc - 2 * 0.2**2) < 1e-12  # analytic perpendicular-offset energy
    assert rcond < 1e-12


def test_projector_properties():
    rng = np.random.default_rng(1)
    vs = [direction_vector(rng.uniform(0.6, 2.5), rng.uniform(0.6, 2.5)).v
          for _ in range(4)]
    gamma = sum(np.eye(3) - np.outer(v, v) for v in vs)
    eig = np.linalg.eigvalsh(gamma)
    assert eig[0] > -1e-12 and eig[-1] <= len(vs) + 1e-12
    for v in vs:
        proj = np.eye(3) - np.outer(v, v)
        assert np.linalg.norm(proj @ proj - proj) < 1e-12


def test_localized_point_is_local_minimum():
    rng = np.random.default_rng(2)
    s_star = np.array([1.0, 5.0, 1.5])
    origins = PORTS.subregion_centers
    dirs = [(s_star - o) / np.linalg.norm(s_star - o) for o in origins]
    dirs = [d + rng.normal(0, 1e-3, 3) for d in dirs]
    dirs = [d / np.linalg.norm(d) for d in dirs]
    s_hat, e_loc, _ = solve_ray_ls(dirs, origins)

    def energy(s):
        total = 0.0
        for v, o in zip(dirs, origins):
            d = s - o
            total += np.sum((d - v * (v @ d)) ** 2)
        return total

    for _ in range(1000):
        delta = rng.normal(0, 1, 3)
        delta *= 1e-3 / np.linalg.norm(delta)
        assert energy(s_hat + delta) >= e_loc - 1e-15


def test_localize_cluster_rejections():
    centers = PORTS.subregion_centers
    v = direction_vector(1.2, 0.9).v
    parallel = Cluster(members=tuple(_dv(v, q) for q in range(4)))
    assert localize_cluster(parallel, centers) is None
    # rays meeting 5 cm from the origin violate the radial clamp
    s_near = np.array([0.03, 0.04, 0.0])
    members = []
    for q, o in enumerate(centers[:2]):
        b = s_near - o
        members.append(_dv(b / np.linalg.norm(b), q))
    too_close = Cluster(members=tuple(members))
    assert localize_cluster(too_close, centers) is None


def test_run_lsrc_exact_bearings():
    s_star = spherical_to_cartesian([5.0, 1.2, 0.9])
    theta = np.zeros((1, 4))
    phi = np.zeros((1, 4))
    for q in range(4):
        b = s_star - PORTS.subregion_centers[q]
        _, theta[0, q], phi[0, q] = cartesian_to_spherical(b)
    ests, n_clu = run_lsrc(AngleEstimateTable(theta, phi), PORTS, np.deg2rad(10))
    assert n_clu == 1 and len(ests) == 1
    assert np.linalg.norm(ests[0].cartesian_m - s_star) < 1e-6
    est = ests[0]
    assert np.linalg.norm(spherical_to_cartesian(est.spherical) - est.cartesian_m) < 1e-12


def test_run_lsrc_parallel_tables_rejected():
    table = AngleEstimateTable(np.full((1, 4), 1.2), np.full((1, 4), 0.9))
    ests, n_clu = run_lsrc(table, PORTS, np.deg2rad(10))
    assert n_clu == 1 and ests == []


def test_run_lsrc_noisy_cluster_count_range():
    # six ray bundles around three targets plus junk rows: every reported
    # cluster has >= 2 members and the count stays within the row budget
    rng = np.random.default_rng(3)
    targets = [spherical_to_cartesian([r, t, p]) for r, t, p in
               [(5.0, 1.1, 0.9), (8.0, 1.9, 2.0), (3.5, 1.5, 1.3)]]
    l_pre = 6
    theta = np.zeros((l_pre, 4))
    phi = np.zeros((l_pre, 4))
    for l in range(l_pre):
        for q in range(4):
            if l < 3:
                b = targets[l] - PORTS.subregion_centers[q]
                b = b / np.linalg.norm(b) + rng.normal(0, 2e-3, 3)
                _, theta[l, q], phi[l, q] = cartesian_to_spherical(b)
            else:
                theta[l, q] = rng.uniform(0.6, 2.5)
                phi[l, q] = rng.uniform(0.6, 2.5)
    ests, n_clu = run_lsrc(AngleEstimateTable(theta, phi), PORTS, np.deg2rad(10))
    assert 3 <= n_clu <= l_pre * 2
    assert len(ests) >= 3


def test_codebook_bearings_geometry():
    # the converted angles are exactly the bearings of the fitted codebook
    # points from each subregion center
    r_fix = 6.0
    theta = np.array([[1.3, 1.4, 1.5, 1.6]])
    phi = np.array([[0.9, 1.0, 1.1, 1.2]])
    out = codebook_bearings(AngleEstimateTable(theta, phi), PORTS, r_fix)
    for q in range(4):
        fitted = spherical_to_cartesian([r_fix, theta[0, q], phi[0, q]])
        b = fitted - PORTS.subregion_centers[q]
        _, th_b, ph_b = cartesian_to_spherical(b)
        assert abs(out.theta_hat[0, q] - th_b) < 1e-12
        assert abs(out.phi_hat[0, q] - ph_b) < 1e-12


def test_cluster_invariant_to_duplicate_removal():
    v = direction_vector(1.3, 1.1).v
    w = direction_vector(1.31, 1.11).v
    base = [_dv(v, 0), _dv(w, 1), _dv(v, 2)]
    c1 = cluster_dvs([base], np.deg2rad(10))
    assert len(c1) == 1 and c1[0].size == 3
