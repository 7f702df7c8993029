import math

import numpy as np
import pytest

from equibound import estimate_mi, sample_joint
from equibound.flem import (
    FlemConfig,
    RingGeometry,
    SpectralLibrary,
    build_model,
    default_signatures,
    direction_angles,
    psbr_sweep,
    signal_means,
)
from equibound.report import EE_LOWER, EE_UPPER


def test_defaults():
    cfg = FlemConfig()
    model = build_model(cfg)
    assert cfg.M == 32 and model.M == 32
    assert model.prior.entropy() / math.log(2) == pytest.approx(5.0, abs=1e-12)
    assert cfg.variance == 50.0
    assert model.channel.n_dims == cfg.imagers * cfg.bands == 64
    assert FlemConfig(bg_fluctuation_mode="variance").variance == 30.0


def test_default_signatures():
    S = default_signatures()
    assert S.shape == (8, 4)
    np.testing.assert_allclose(S.sum(axis=1), 1.0, atol=1e-15)
    assert len({tuple(r) for r in S}) == 8 and np.all(S >= 0)
    G = default_signatures(6)
    assert G.shape == (8, 6) and np.allclose(G.sum(axis=1), 1)
    SpectralLibrary(G)


def test_library_validation():
    with pytest.raises(ValueError):
        SpectralLibrary(np.array([[0.5, 0.5], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        SpectralLibrary(np.array([[0.6, 0.5]]))
    with pytest.raises(ValueError):
        SpectralLibrary(np.array([[1.2, -0.2]]))


def test_ring_geometry():
    ring = RingGeometry(16)
    a = ring.angles
    assert np.all(np.diff(a) > 0) and a[0] >= 0 and a[-1] < 2 * np.pi
    with pytest.raises(ValueError):
        RingGeometry(3)
    g = ring.obliquity(a[3])
    assert g[3] == 1.0 and np.all(g >= 0) and np.count_nonzero(g > 1e-12) == 7


def test_config_validation():
    with pytest.raises(ValueError):
        FlemConfig(psbr=-1.0)
    with pytest.raises(ValueError):
        FlemConfig(prior=(0.5, 0.5))
    with pytest.raises(ValueError):
        FlemConfig(bg_fluctuation_mode="other")
    p = np.full(32, 1 / 32)
    p[0], p[1] = 2 / 32, 0.0
    assert not build_model(FlemConfig(prior=tuple(p))).prior.is_uniform


def test_head_on_normalisation():
    cfg = FlemConfig(psbr=2.5)
    ring = RingGeometry(cfg.imagers)
    for trace in default_signatures():
        # an imager looking straight at the source has obliquity 1
        excess = cfg.s_peak * ring.obliquity(ring.angles[5])[5] * trace
        assert excess.sum() == pytest.approx(cfg.s_peak, abs=1e-9)


def test_signal_means_layout():
    cfg = FlemConfig(psbr=1.0)
    means = signal_means(cfg)
    assert means.shape == (32, 64)
    assert np.all(means >= cfg.bg_mean)
    ring = RingGeometry(cfg.imagers)
    phi = direction_angles(cfg.directions, cfg.imagers)[2]
    k = 3
    expected = cfg.bg_mean + cfg.s_peak * np.outer(ring.obliquity(phi), default_signatures()[k])
    np.testing.assert_allclose(means[2 * 8 + k], expected.ravel())
    # no flash direction lines up exactly with an imager
    assert np.all(np.abs(np.cos(ring.angles[:, None] - direction_angles(4, 16)[None, :])) < 1)


def test_psbr_zero_is_noninformative():
    b = sample_joint(build_model(FlemConfig(psbr=0.0)), 2000, 0)
    assert abs(estimate_mi(b).mean) < 1e-12


def test_rotation_symmetry():
    a = sample_joint(build_model(FlemConfig(psbr=1.5)), 30_000, 5)
    b = sample_joint(build_model(FlemConfig(psbr=1.5, angle_offset=0.37)), 30_000, 6)
    ea, eb = estimate_mi(a), estimate_mi(b)
    assert abs(ea.mean - eb.mean) <= 3 * math.hypot(ea.std_error, eb.std_error)


def test_sweep_limits():
    (p0, r0), (p1, r1) = psbr_sweep(FlemConfig(), [0.0, 100.0], 3000, 1)
    assert p0 == 0.0 and p1 == 100.0
    assert r0["MI"].fmi == pytest.approx(0.0, abs=1e-12)
    for row in r0.of_kind(EE_UPPER):
        assert row.fmi <= 3 * row.std_error / row.h_prior + 1e-12
    assert abs(r1["MI"].fmi - 1) <= 3 * r1["MI"].std_error / r1.h_prior + 1e-9
    for row in r1.of_kind(EE_UPPER):
        assert abs(row.fmi - 1) <= 3 * row.std_error / row.h_prior + 1e-9


def test_sweep_is_deterministic_and_ordered():
    a = psbr_sweep(FlemConfig(), [2.0, 0.5], 2000, 3)
    b = psbr_sweep(FlemConfig(), [2.0, 0.5], 2000, 3, workers=1)
    assert [p for p, _ in a] == [2.0, 0.5]
    assert all(ra.rows == rb.rows for (_, ra), (_, rb) in zip(a, b))
    with pytest.raises(ValueError):
        psbr_sweep(FlemConfig(), [], 10, 0)


def test_sweep_sandwich_and_chains():
    for _, rep in psbr_sweep(FlemConfig(), [0.5, 2.0], 20_000, 7):
        ee = rep["EE"]
        for row in rep.of_kind(EE_LOWER):
            assert row.value <= ee.value + 3 * math.hypot(row.std_error, ee.std_error)
        for row in rep.of_kind(EE_UPPER):
            assert row.value >= ee.value - 3 * math.hypot(row.std_error, ee.std_error)
        assert rep["FMB"].value <= rep["FMB1"].value <= rep["FMB2"].value
        assert rep["Fano2"].value <= rep["Fano1"].value <= rep["Fano"].value
