import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fringeprof.metrics import error_count, error_rate, fit_plane, plane_flatness_rms, sphere_fit, step_heights


def test_error_rate_oracles():
    Phi = np.linspace(0, 10, 100).reshape(10, 10)
    assert error_rate(Phi, Phi) == 0.0
    bad = Phi.copy()
    bad[3, 4] += 2 * np.pi
    assert error_rate(bad, Phi) == 0.01


def test_error_rate_ignores_nan_and_warns_when_empty():
    Phi = np.array([[np.nan, 1.0]])
    assert error_count(Phi, np.array([[5.0, 1.0]])) == (0, 1)
    with pytest.warns(RuntimeWarning):
        assert np.isnan(error_rate(np.full((1, 1), np.nan), np.zeros((1, 1))))


def test_flatness_perfect_and_noisy():
    ys, xs = np.mgrid[0:120, 0:120]
    h = 0.01 * xs - 0.02 * ys + 3
    region = np.ones(h.shape, bool)
    assert plane_flatness_rms(h, region) < 1e-12
    noisy = h + np.random.default_rng(0).normal(0, 0.05, h.shape)
    assert plane_flatness_rms(noisy, region) == pytest.approx(0.05, rel=0.1)
    np.testing.assert_allclose(fit_plane(h, region), (0.01, -0.02, 3.0), atol=1e-12)


def test_fit_plane_degenerate():
    with pytest.raises(ValueError):
        fit_plane(np.zeros((1, 5)), np.ones((1, 5), bool))


def _sphere_points(c, R, n=400, cap=False, seed=0):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    if cap:
        d[:, 2] = np.abs(d[:, 2])
    return np.asarray(c) + R * d


def test_sphere_fit_exact():
    c, R, rms = sphere_fit(_sphere_points((1, 2, 3), 12.6994))
    np.testing.assert_allclose(c, (1, 2, 3), atol=1e-9)
    assert R == pytest.approx(12.6994, abs=1e-9)
    assert rms < 1e-9


def test_sphere_fit_half_cap():
    _, R, _ = sphere_fit(_sphere_points((0, 0, -5), 20.0, cap=True))
    assert R == pytest.approx(20.0, rel=1e-3)


def test_sphere_fit_degenerate():
    with pytest.raises(ValueError):
        sphere_fit(np.zeros((3, 3)))
    with pytest.raises(ValueError, match="coplanar"):
        sphere_fit(np.column_stack([np.arange(10.0), np.arange(10.0) ** 2, np.zeros(10)]))


@settings(max_examples=30, deadline=None)
@given(offset=st.floats(-50, 50))
def test_step_heights_translation_invariant(offset):
    h = np.zeros((10, 40))
    h[:, 10:20], h[:, 20:30], h[:, 30:] = 30, 60, 90
    bands = [np.zeros(h.shape, bool) for _ in range(4)]
    for i, b in enumerate(bands):
        b[:, 10 * i : 10 * i + 10] = True
    np.testing.assert_allclose(step_heights(h, bands), [0, 30, 60, 90], atol=1e-9)
    np.testing.assert_allclose(step_heights(h + offset, bands), [0, 30, 60, 90], atol=1e-9)


def test_step_heights_empty_band():
    with pytest.raises(ValueError, match="band 1"):
        step_heights(np.zeros((3, 3)), [np.ones((3, 3), bool), np.zeros((3, 3), bool)])
