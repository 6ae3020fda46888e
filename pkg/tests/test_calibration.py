import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fringeprof.calibration import (
    PlaneMeasurement,
    apply_phase_height,
    fit_phase_height,
    in_calibrated_range,
    is_monotone,
    load_model,
    measure_reference,
    save_model,
)
from fringeprof.patterns import PatternSpec
from fringeprof.simulator import OpticalModel, Plane, pattern_bank, reference_phase, render_capture, truth_phase_shift

HEIGHTS = (30.0, 60.0, 90.0, 120.0)


def _planes_from(fn, shape=(4, 5)):
    return [PlaneMeasurement(h, np.full(shape, fn(h))) for h in HEIGHTS]


def _dphi_for(u, v, w, h):
    # Solve u + v/d + w/d**2 = 1/h for the positive root d.
    a, b, c = u - 1.0 / h, v, w
    if c == 0:
        return -b / a
    return (-b - np.sqrt(b * b - 4 * a * c)) / (2 * a)


def test_simulator_model_gives_zero_w():
    m = OpticalModel(K=0.1, L=1000.0)
    cal = fit_phase_height(_planes_from(lambda h: truth_phase_shift(m, h)))
    np.testing.assert_allclose(cal.u, -1.0 / m.L, atol=1e-12)
    np.testing.assert_allclose(cal.v, m.K, rtol=1e-9)
    np.testing.assert_allclose(cal.w, 0.0, atol=1e-12)
    assert np.nanmax(cal.residual) < 1e-9


def test_model_consistent_recovery():
    u, v, w = -2e-3, 0.12, 0.05
    planes = _planes_from(lambda h: _dphi_for(u, v, w, h))
    cal = fit_phase_height(planes)
    np.testing.assert_allclose(cal.u, u, atol=1e-10)
    np.testing.assert_allclose(cal.v, v, rtol=1e-8)
    np.testing.assert_allclose(cal.w, w, rtol=1e-6)
    assert np.nanmax(cal.residual) < 1e-9
    for p in planes:
        np.testing.assert_allclose(apply_phase_height(cal, p.delta_phi), p.h, atol=1e-6)


def test_quadratic_perturbation_fits_nonzero_w():
    m = OpticalModel(quadratic=2e-4)
    planes = _planes_from(lambda h: truth_phase_shift(m, h))
    full = fit_phase_height(planes)
    assert np.all(np.abs(full.w) > 1e-6)
    # Restricted w=0 fit for comparison.
    d = np.array([p.delta_phi[0, 0] for p in planes])
    A = np.column_stack([np.ones(4), 1 / d])
    coef, *_ = np.linalg.lstsq(A, 1 / np.array(HEIGHTS), rcond=None)
    r0 = np.sqrt(np.mean((A @ coef - 1 / np.array(HEIGHTS)) ** 2))
    assert full.residual[0, 0] < r0


def test_apply_reference_and_calibration_planes():
    m = OpticalModel()
    cal = fit_phase_height(_planes_from(lambda h: truth_phase_shift(m, h)))
    d30 = np.full(cal.shape, truth_phase_shift(m, 30.0))
    np.testing.assert_allclose(apply_phase_height(cal, d30), 30.0, atol=1e-9)
    np.testing.assert_array_equal(apply_phase_height(cal, np.zeros(cal.shape)), 0.0)


def test_apply_diagnostics_and_nan():
    m = OpticalModel()
    cal = fit_phase_height(_planes_from(lambda h: truth_phase_shift(m, h), shape=(1, 3)))
    d = np.array([[np.nan, truth_phase_shift(m, 200.0), truth_phase_shift(m, 50.0)]])
    h, diag = apply_phase_height(cal, d, return_diagnostics=True)
    assert np.isnan(h[0, 0])
    assert diag["extrapolated"] == 1
    assert in_calibrated_range(cal, d).tolist() == [[False, False, True]]


def test_uncalibrated_pixels_stay_nan():
    planes = _planes_from(lambda h: 0.1 * h)
    bad = planes[0].delta_phi.copy()
    bad[0, 0] = np.nan
    planes[0] = PlaneMeasurement(30.0, bad)
    cal = fit_phase_height(planes)
    assert not cal.calibrated[0, 0]
    assert np.isnan(apply_phase_height(cal, np.full(cal.shape, 3.0))[0, 0])


def test_fit_argument_checks():
    with pytest.raises(ValueError, match="at least 3"):
        fit_phase_height(_planes_from(lambda h: 0.1 * h)[:2])
    with pytest.raises(ValueError):
        PlaneMeasurement(0.0, np.zeros((1, 1)))
    with pytest.raises(ValueError, match="distinct"):
        fit_phase_height([PlaneMeasurement(30.0, np.ones((1, 1)))] * 3)


def test_monotone_on_simulator_model():
    m = OpticalModel()
    cal = fit_phase_height(_planes_from(lambda h: truth_phase_shift(m, h)))
    assert is_monotone(cal).all()


@settings(max_examples=50, deadline=None)
@given(h=st.floats(30, 120))
def test_roundtrip_within_range(h):
    m = OpticalModel()
    cal = fit_phase_height(_planes_from(lambda x: truth_phase_shift(m, x), shape=(1, 1)))
    assert apply_phase_height(cal, np.array([[truth_phase_shift(m, h)]]))[0, 0] == pytest.approx(h, abs=1e-6)


def test_save_load_roundtrip(tmp_path):
    m = OpticalModel()
    cal = fit_phase_height(_planes_from(lambda h: truth_phase_shift(m, h)), Phi_ref=np.zeros((4, 5)))
    save_model(cal, tmp_path / "cal")
    back = load_model(tmp_path / "cal")
    assert back.heights == HEIGHTS
    np.testing.assert_allclose(back.v, cal.v.astype(np.float32))
    assert "calibrated_pixels = 20" in (tmp_path / "cal" / "calib_manifest.txt").read_text()
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "missing")


def _reference_frames(spec, model, dither=True):
    bank = pattern_bank(spec, dither=dither)
    roles = ["S1", "S2", "S3"] + [f"G{b}" for b in range(1, spec.n_gray_bits + 1)]
    return [render_capture(Plane(0.0), 0, bank[r], spec, model) for r in roles]


def test_measure_reference_ideal_is_ramp():
    spec = PatternSpec(20, 8, 3, proj_height=8)
    frames = _reference_frames(spec, OpticalModel(), dither=False)
    Phi = measure_reference(frames, n_bits=3)
    np.testing.assert_allclose(Phi, reference_phase(spec), atol=1e-9)
    k = np.floor(spec.coordinate() / 20) + 1
    assert np.all(Phi - 2 * np.pi * k > -np.pi) and np.all(Phi - 2 * np.pi * k <= np.pi)


def test_measure_reference_deterministic_across_seeds():
    spec = PatternSpec(20, 8, 3, proj_height=8)
    a = measure_reference(_reference_frames(spec, OpticalModel(defocus_sigma=2.0, seed=1)), n_bits=3)
    b = measure_reference(_reference_frames(spec, OpticalModel(defocus_sigma=2.0, seed=2)), n_bits=3)
    np.testing.assert_array_equal(a, b)


def test_measure_reference_bootstrap_beats_traditional_under_blur():
    spec = PatternSpec(70, 16, 4, proj_height=8)
    frames = _reference_frames(spec, OpticalModel(defocus_sigma=2.0))
    truth = reference_phase(spec)
    boot = measure_reference(frames, n_bits=4)
    trad = measure_reference(frames, n_bits=4, method="traditional")
    assert np.isfinite(boot).all()
    assert np.nanmax(np.abs(boot - truth)) < np.pi
    assert np.nanmax(np.abs(trad - truth)) > np.pi


def test_measure_reference_checks_frames():
    with pytest.raises(ValueError):
        measure_reference([np.zeros((2, 2))] * 3)
    with pytest.raises(ValueError):
        measure_reference([np.zeros((2, 2))] * 5, n_bits=3)
