import numpy as np
import pytest

from maisac.geometry import (
    ConfigurationError,
    Scatterer,
    SystemConfig,
    build_port_grid,
    cartesian_to_spherical,
    generate_scene,
    pilot_subcarrier_indices,
    rayleigh_distance,
    simulate_measurement,
    spherical_to_cartesian,
    steering_vector,
    synthesize_channel,
)
from maisac.presets import paper_preset


def test_rayleigh_distance_full_scale():
    config, _ = paper_preset()
    assert abs(rayleigh_distance(config) - 15.36) < 1e-9
    assert abs(config.wavelength_m - 0.03) < 1e-15


def test_two_by_two_grid_is_centered():
    cfg = SystemConfig(ports_per_axis=(2, 2), port_spacing_m=1.0,
                       subregion_division=(1, 1), slots_per_frame=4,
                       pilot_subcarriers=8, num_subcarriers=8)
    grid = build_port_grid(cfg)
    assert np.allclose(grid.subregion_centers[0], [0.0, 0.0, 0.0])
    assert np.allclose(grid.coordinates[:, 1], 0.0)


def test_subregion_partition_counts():
    cfg = SystemConfig(ports_per_axis=(4, 4), subregion_division=(2, 2),
                       slots_per_frame=4, pilot_subcarriers=8)
    grid = build_port_grid(cfg)
    assert grid.num_subregions == 4
    all_idx = np.concatenate(grid.subregion_index_sets)
    assert len(all_idx) == 16
    assert len(np.unique(all_idx)) == 16
    for s in grid.subregion_index_sets:
        assert s.size == 4


def test_uneven_division_rejected():
    cfg = SystemConfig(ports_per_axis=(6, 6), subregion_division=(4, 2),
                       slots_per_frame=2)
    with pytest.raises(ConfigurationError):
        build_port_grid(cfg)


def test_subregion_centers_are_block_means():
    cfg = SystemConfig(ports_per_axis=(8, 8), subregion_division=(2, 2),
                       slots_per_frame=4)
    grid = build_port_grid(cfg)
    for q, idx in enumerate(grid.subregion_index_sets):
        assert np.allclose(grid.subregion_centers[q], grid.coordinates[idx].mean(axis=0))


def test_steering_at_origin_port_is_unity():
    # a 1x1 grid has its single port exactly at the array center
    cfg = SystemConfig(ports_per_axis=(1, 1), subregion_division=(1, 1),
                       slots_per_frame=1)
    grid = build_port_grid(cfg)
    a = steering_vector([3.7, 1.1, 0.9], grid, 0.03)
    assert abs(a[0] - 1.0) < 1e-14


def test_steering_unit_modulus():
    cfg = SystemConfig(ports_per_axis=(16, 16), slots_per_frame=32)
    grid = build_port_grid(cfg)
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = [rng.uniform(2, 12), rng.uniform(0.6, 2.5), rng.uniform(0.6, 2.5)]
        a = steering_vector(p, grid, 0.03)
        assert np.max(np.abs(np.abs(a) - 1.0)) < 1e-14


def test_steering_far_field_limit_matches_plane_wave():
    config, _ = paper_preset()
    grid = build_port_grid(config)
    lam = config.wavelength_m
    theta, phi = 1.1, 0.7
    a = steering_vector([1e6, theta, phi], grid, lam)
    u = spherical_to_cartesian([1.0, theta, phi])
    plane = np.exp(2j * np.pi / lam * (grid.coordinates @ u))
    gap = np.max(np.abs(np.angle(a * np.conj(plane))))
    assert gap < 1e-3


def test_steering_rejects_nonpositive_radius():
    cfg = SystemConfig(ports_per_axis=(2, 2), subregion_division=(1, 1), slots_per_frame=2)
    grid = build_port_grid(cfg)
    with pytest.raises(ValueError):
        steering_vector([0.0, 1.0, 1.0], grid, 0.03)
    with pytest.raises(ValueError):
        steering_vector([-2.0, 1.0, 1.0], grid, 0.03)


def test_spherical_cartesian_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = np.array([rng.uniform(0.5, 20), rng.uniform(np.pi / 6, 5 * np.pi / 6),
                      rng.uniform(np.pi / 6, 5 * np.pi / 6)])
        s = spherical_to_cartesian(p)
        back = cartesian_to_spherical(s)
        assert np.linalg.norm(spherical_to_cartesian(back) - s) < 1e-12


def _default_scene_config(**kw):
    base = dict(ports_per_axis=(8, 8), subregion_division=(2, 2),
                slots_per_frame=8, pilot_subcarriers=16, num_subcarriers=64,
                num_paths=3, snr_db=float("inf"))
    base.update(kw)
    return SystemConfig(**base)


def test_single_path_channel_columns_are_steering():
    cfg = _default_scene_config(num_paths=1)
    grid = build_port_grid(cfg)
    sc = Scatterer(5.0, 1.2, 0.8, 1.0 + 0j, 0.0)
    ch = synthesize_channel([sc], grid, cfg)
    a = steering_vector(sc.spherical, grid, cfg.wavelength_m)
    for k in range(cfg.num_subcarriers):
        assert np.allclose(ch.entries[:, k], a, atol=1e-14)


def test_channel_is_sum_of_single_path_channels():
    cfg = _default_scene_config(num_paths=2)
    grid = build_port_grid(cfg)
    s1 = Scatterer(4.0, 1.0, 0.9, 0.7 - 0.2j, 30e-9)
    s2 = Scatterer(7.0, 1.8, 2.1, -0.3 + 1.1j, 80e-9)
    both = synthesize_channel([s1, s2], grid, cfg).entries
    parts = synthesize_channel([s1], grid, cfg).entries + synthesize_channel([s2], grid, cfg).entries
    assert np.allclose(both, parts, atol=1e-12)


def test_channel_factorization_against_direct_sum():
    cfg = _default_scene_config(num_paths=6)
    grid = build_port_grid(cfg)
    scene = generate_scene(cfg, np.random.default_rng(7))
    ch = synthesize_channel(scene.scatterers, grid, cfg)
    # direct superposition, built independently of the factored path
    f = np.arange(cfg.num_subcarriers) * cfg.subcarrier_spacing_hz
    brute = np.zeros_like(ch.entries)
    for sc in scene.scatterers:
        a = steering_vector(sc.spherical, grid, cfg.wavelength_m)
        brute += sc.complex_gain * np.outer(a, np.exp(-2j * np.pi * f * sc.delay_s))
    assert np.linalg.norm(ch.entries - brute) / np.linalg.norm(brute) < 1e-12
    recon = (ch.steering * ch.gains[None, :]) @ ch.delay_response.T
    assert np.linalg.norm(ch.entries - recon) / np.linalg.norm(ch.entries) < 1e-12
    assert np.max(np.abs(np.abs(ch.steering) - 1.0)) < 1e-14


def test_channel_invariant_to_scatterer_order():
    cfg = _default_scene_config(num_paths=4)
    grid = build_port_grid(cfg)
    scene = generate_scene(cfg, np.random.default_rng(11))
    sc = list(scene.scatterers)
    h1 = synthesize_channel(sc, grid, cfg).entries
    h2 = synthesize_channel(sc[::-1], grid, cfg).entries
    assert np.linalg.norm(h1 - h2) / np.linalg.norm(h1) < 1e-12


def test_noiseless_measurement_is_exact_selection():
    cfg = _default_scene_config()
    grid = build_port_grid(cfg)
    scene = generate_scene(cfg, np.random.default_rng(2))
    ch = synthesize_channel(scene.scatterers, grid, cfg)
    m = simulate_measurement(ch, grid, cfg, rng_seed=5)
    assert m.noise_power == 0.0
    for q, y in enumerate(m.per_subregion_pilots):
        expected = ch.entries[np.ix_(m.visited_port_sets[q], m.pilot_subcarrier_set)]
        assert np.array_equal(y, expected)


def test_measurement_determinism_and_disjoint_ports():
    cfg = _default_scene_config(snr_db=10.0)
    grid = build_port_grid(cfg)
    scene = generate_scene(cfg, np.random.default_rng(2))
    ch = synthesize_channel(scene.scatterers, grid, cfg)
    m1 = simulate_measurement(ch, grid, cfg, rng_seed=5)
    m2 = simulate_measurement(ch, grid, cfg, rng_seed=5)
    for a, b in zip(m1.per_subregion_pilots, m2.per_subregion_pilots):
        assert np.array_equal(a, b)
    seen = np.concatenate(m1.visited_port_sets)
    assert len(np.unique(seen)) == seen.size
    for q, iq in enumerate(m1.visited_port_sets):
        assert np.all(np.isin(iq, grid.subregion_index_sets[q]))
        assert np.all(np.diff(iq) > 0)


def test_noise_variance_matches_snr():
    # 0 dB SNR on unit-power entries: empirical variance within 5% over >=1e5 samples
    cfg = SystemConfig(ports_per_axis=(32, 32), subregion_division=(2, 2),
                       slots_per_frame=128, pilot_subcarriers=64,
                       num_subcarriers=64, snr_db=0.0)
    grid = build_port_grid(cfg)
    rng = np.random.default_rng(0)
    h = np.exp(1j * rng.uniform(0, 2 * np.pi, (grid.num_ports, 64)))
    errors = []
    sigma2 = None
    for seed in range(4):
        m = simulate_measurement(h, grid, cfg, rng_seed=11 + seed)
        sigma2 = m.noise_power
        noisy = np.concatenate(m.per_subregion_pilots, axis=0)
        clean = np.concatenate(
            [h[np.ix_(iq, m.pilot_subcarrier_set)] for iq in m.visited_port_sets], axis=0
        )
        errors.append((noisy - clean).ravel())
    errors = np.concatenate(errors)
    assert errors.size >= 1e5
    empirical = np.mean(np.abs(errors) ** 2)
    assert abs(empirical - sigma2) / sigma2 < 0.05
    assert abs(sigma2 - 1.0) < 0.05  # unit signal power at 0 dB


def test_oversized_slot_count_rejected():
    cfg = _default_scene_config(slots_per_frame=17)  # subregions hold 16 ports
    with pytest.raises(ConfigurationError):
        build_port_grid(cfg)


def test_uniform_pilot_pattern_spacing():
    cfg = _default_scene_config(num_subcarriers=64, pilot_subcarriers=32)
    idx = pilot_subcarrier_indices(cfg)
    assert idx.size == 32
    assert np.all(np.diff(idx) == 2)
    cfg_r = _default_scene_config(num_subcarriers=64, pilot_subcarriers=32,
                                  pilot_pattern="random")
    idx_r = pilot_subcarrier_indices(cfg_r, rng=3)
    assert idx_r.size == 32 and len(np.unique(idx_r)) == 32


def test_scene_generator_ranges_and_delays():
    cfg = _default_scene_config(num_paths=50)
    tau_max = 115e-9
    scene = generate_scene(cfg, np.random.default_rng(123), tau_max)
    for sc in scene.scatterers:
        assert 2.0 <= sc.radial_distance_m <= 12.28
        assert np.pi / 6 <= sc.elevation_rad <= 5 * np.pi / 6
        assert np.pi / 6 <= sc.azimuth_rad <= 5 * np.pi / 6
        assert 0.0 <= sc.delay_s <= tau_max
        assert np.linalg.norm(
            spherical_to_cartesian(cartesian_to_spherical(sc.cartesian)) - sc.cartesian
        ) < 1e-12


def test_config_from_dict_wavelength_spacing():
    cfg = SystemConfig.from_dict({
        "carrier_freq_hz": 10e9, "num_subcarriers": 64,
        "subcarrier_spacing_hz": 200e3, "ports_per_axis": [32, 32],
        "port_spacing_in_wavelengths": 0.5, "subregion_division": [2, 2],
        "slots_per_frame": 128, "pilot_subcarriers": 32, "num_paths": 6,
        "rng_seed": 1,
    })
    assert abs(cfg.port_spacing_m - 0.015) < 1e-15
    with pytest.raises(ConfigurationError):
        SystemConfig.from_dict({"not_a_key": 1})
