import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fringeprof.patterns import PatternSpec, gen_sinusoid
from fringeprof.sequence import make_schedule
from fringeprof.simulator import (
    Composite,
    OpticalModel,
    Plane,
    SphereCap,
    Steps,
    gen_capture_sequence,
    height_for_phase_shift,
    pattern_bank,
    reference_phase,
    render_capture,
    shadow_mask,
    truth_absolute_phase,
    truth_phase_shift,
)

SPEC = PatternSpec(20, 8, 3, proj_height=6)
IDEAL = OpticalModel(shadows=False)


def test_truth_phase_shift_oracles():
    m = OpticalModel(K=0.2, L=1000.0)
    assert truth_phase_shift(m, 0.0) == 0.0
    assert truth_phase_shift(m, 30.0) == pytest.approx(5.825242718446602, rel=1e-15)
    assert truth_phase_shift(m, 60.0) > truth_phase_shift(m, 30.0)


@given(st.floats(0, 400))
def test_height_inverse(h):
    m = OpticalModel()
    assert height_for_phase_shift(m, truth_phase_shift(m, h)) == pytest.approx(h, abs=1e-9)


def test_identity_path_reproduces_pattern():
    for n in (1, 2, 3):
        img = render_capture(Plane(0.0), 0, pattern_bank(SPEC, dither=False)[f"S{n}"], SPEC, IDEAL)
        np.testing.assert_allclose(img, gen_sinusoid(SPEC, n), atol=1e-12)


def test_identity_path_for_rasters():
    pat = pattern_bank(SPEC)["S1"]
    np.testing.assert_array_equal(render_capture(Plane(0.0), 0, pat, SPEC, IDEAL), pat)


def test_full_period_displacement_is_invisible():
    model = OpticalModel(shadows=False)
    h = height_for_phase_shift(model, 2 * np.pi)
    f = pattern_bank(SPEC, dither=False)["S2"]
    a = render_capture(Plane(0.0), 0, f, SPEC, model)
    b = render_capture(Plane(h), 0, f, SPEC, model)
    interior = np.s_[:, : 7 * 20]
    np.testing.assert_allclose(a[interior], b[interior], atol=1e-9)


def test_fixed_seed_is_deterministic():
    m = OpticalModel(noise_sigma=0.05, defocus_sigma=1.5, seed=7)
    f = pattern_bank(SPEC)["S1"]
    a = render_capture(SphereCap(cx=80, cy=3, radius_mm=10, apex_mm=5), 3, f, SPEC, m)
    b = render_capture(SphereCap(cx=80, cy=3, radius_mm=10, apex_mm=5), 3, f, SPEC, m)
    assert a.tobytes() == b.tobytes()
    c = render_capture(SphereCap(cx=80, cy=3, radius_mm=10, apex_mm=5), 4, f, SPEC, m)
    assert a.tobytes() != c.tobytes()


def test_output_clipped_to_unit_range():
    m = OpticalModel(noise_sigma=0.5, seed=1)
    img = render_capture(Plane(0.0), 0, pattern_bank(SPEC)["S1"], SPEC, m)
    assert img.min() >= 0 and img.max() <= 1


def test_sequence_roles_cycle():
    frames = gen_capture_sequence(Plane(0.0), make_schedule(4, 4), PatternSpec(20, 8, 4, proj_height=2), IDEAL)
    assert len(frames) == 16
    assert [f.role for f in frames[:8]] == ["S1", "S2", "S3", "G1", "S1", "S2", "S3", "G2"]


def test_static_scene_s1_frames_identical():
    frames = gen_capture_sequence(Plane(10.0), make_schedule(3, 3), SPEC, IDEAL)
    s1 = [f.data for f in frames if f.role == "S1"]
    for img in s1[1:]:
        np.testing.assert_array_equal(img, s1[0])


def test_velocity_shifts_scene_by_drift():
    scene = SphereCap(cx=80, cy=3, radius_mm=10, apex_mm=5, velocity=0.2)
    moved = scene.height_map(SPEC.shape, t=4, axis=1, mm_per_px=0.2)
    ref = SphereCap(cx=80.8, cy=3, radius_mm=10, apex_mm=5).height_map(SPEC.shape, 0, 1, 0.2)
    np.testing.assert_allclose(moved, ref, atol=1e-12)


def test_s1_of_group2_is_shifted_group1_on_ramp_scene():
    # Linear phase in x: S1 at t=4 equals S1 at t=0 sampled 0.8 px upstream.
    class Ramp(Plane):
        def _height(self, xs, ys, axis, mm_per_px, t):
            return 0.05 * xs

    spec = PatternSpec(40, 4, 2, proj_height=1)
    model = OpticalModel(K=0.1, L=1e12, shadows=False)
    scene = Ramp(velocity=0.2)
    f = pattern_bank(spec, dither=False)["S1"]
    a = render_capture(scene, 0, f, spec, model)
    b = render_capture(scene, 4, f, spec, model)
    hb = Ramp().height_map(spec.shape, 0) - 0.05 * 0.8
    c = render_capture(Plane(), 0, f, spec, model, heights=hb)
    np.testing.assert_allclose(b, c, atol=1e-9)
    assert not np.allclose(a, b)


def test_steps_validation():
    with pytest.raises(ValueError, match="overlap"):
        Steps(bands=((0, 10, 1), (5, 20, 2)))
    with pytest.raises(ValueError):
        Steps(bands=((10, 5, 1),))


def test_composite_is_upper_envelope():
    a, b = Plane(h=3.0), Steps(bands=((2, 4, 7.0),))
    hm = Composite(parts=(a, b)).height_map((1, 6))
    np.testing.assert_array_equal(hm, [[3, 3, 7, 7, 3, 3]])


def test_sphere_cap_apex():
    cap = SphereCap(cx=10, cy=10, radius_mm=4, apex_mm=2)
    hm = cap.height_map((21, 21), mm_per_px=1.0)
    assert hm[10, 10] == pytest.approx(2.0)
    assert hm[0, 0] == 0.0


def test_shadow_mask_descending_edge():
    pos = np.array([[0.5, 1.5, 9.0, 10.0, 4.5, 5.5, 11.5]])
    np.testing.assert_array_equal(shadow_mask(pos, 1), [[0, 0, 0, 0, 1, 1, 0]])


def test_model_validation():
    with pytest.raises(ValueError):
        OpticalModel(K=0)
    with pytest.raises(ValueError):
        OpticalModel(noise_sigma=-1)
    with pytest.raises(ValueError):
        OpticalModel(reflectivity=np.zeros((2, 2)))


def test_velocity_is_keyword_only():
    assert Plane(5.0).h == 5.0 and Plane(5.0).velocity == 0.0


def test_reference_phase_and_truth():
    spec = PatternSpec(20, 4, 2)
    Phi = reference_phase(spec)
    assert Phi[0, 0] == pytest.approx(2 * np.pi * 0.5 / 20 + np.pi)
    truth = truth_absolute_phase(Plane(0.0), 0, spec, OpticalModel())
    np.testing.assert_array_equal(truth, Phi)
    shifted = truth_absolute_phase(Plane(5.0), 0, spec, OpticalModel())
    assert np.isnan(shifted[0, -1])


@settings(max_examples=20, deadline=None)
@given(h=st.floats(0, 200), sigma=st.floats(0, 3))
def test_plane_renders_in_range(h, sigma):
    m = OpticalModel(defocus_sigma=sigma)
    img = render_capture(Plane(h), 0, pattern_bank(SPEC)["G1"], SPEC, m)
    lit = np.isfinite(img)
    assert np.all((img[lit] >= 0) & (img[lit] <= 1))
