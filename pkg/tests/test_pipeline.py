from dataclasses import replace

import numpy as np
import pytest

from conftest import clean_mask
from fringeprof.config import ConfigError, RunConfig
from fringeprof.io import read_ply
from fringeprof.metrics import error_count
from fringeprof.patterns import PatternSpec
from fringeprof.pipeline import (
    CSV_SCHEMA,
    Report,
    calibrate_simulated,
    points_from_height,
    run_compare,
    run_stream,
    simulate_stream,
    unwrap_frames,
)
from fringeprof.sequence import Frame
from fringeprof.simulator import OpticalModel, Plane, Steps, absolute_phase_from_height, reference_phase

SPEC = PatternSpec(70, 16, 4, proj_height=6)
MODEL = OpticalModel(defocus_sigma=2.0)


@pytest.fixture(scope="module")
def calib():
    return calibrate_simulated(SPEC, MODEL)


def test_calibration_planes_roundtrip(calib):
    assert calib.Phi_ref is not None
    assert calib.calibrated.mean() > 0.8
    assert np.nanmax(calib.residual) < 1e-3


def test_static_steps_match_truth(calib):
    scene = Steps(bands=((280, 560, 30.0), (560, 840, 60.0)))
    cfg = RunConfig(spec=SPEC, model=MODEL, scene=scene, n_groups=4)
    frames, truth = simulate_stream(cfg)
    results, report = run_stream(cfg, frames, calib, truth)
    assert len(results) == 1 and report.records[0]["valid_points"] > 0
    res = results[0]
    clean = clean_mask(truth[4], SPEC, MODEL)
    Phi_truth = absolute_phase_from_height(truth[4], SPEC, MODEL)
    assert error_count(res.Phi, Phi_truth, clean)[0] == 0
    # Errors left in the raw count sit in the blurred shadow fringe.
    assert report.records[0]["errors"] <= 4 * SPEC.proj_height
    for a, b, z in ((300, 540, 30.0), (580, 820, 60.0)):
        assert np.nanmean(res.h[:, a:b]) == pytest.approx(z, abs=0.01)


def test_tripu_equals_traditional_on_aligned_data(calib):
    cfg = RunConfig(spec=SPEC, model=OpticalModel(), scene=Plane(h=45.0), dither=False)
    frames, _ = simulate_stream(cfg)
    f = {fr.role: fr.data for fr in frames[12:16]}
    grays = [fr.data for fr in frames if fr.role.startswith("G")]
    sins = [f["S1"], f["S2"], f["S3"]]
    Phi_ref = reference_phase(SPEC)
    a, _, _ = unwrap_frames(sins, grays, Phi_ref, method="tripu")
    b, _, _ = unwrap_frames(sins, grays, Phi_ref, method="traditional")
    ok = np.isfinite(a) & np.isfinite(b)
    assert ok.mean() > 0.8
    np.testing.assert_allclose(a[ok], b[ok], atol=1e-9)


def test_baselines_need_extra_sets():
    z = [np.zeros((2, 2))] * 3
    with pytest.raises(ConfigError, match="unit-frequency"):
        unwrap_frames(z, z, None, method="two_frequency", n_periods=16)
    with pytest.raises(ConfigError, match="period pattern set"):
        unwrap_frames(z, z, None, method="two_wavelength", n_periods=16)
    with pytest.raises(ConfigError, match="reference"):
        unwrap_frames(z, z, None, method="tripu")


def test_failed_frame_is_recorded_and_stream_continues(calib):
    cfg = RunConfig(spec=SPEC, model=MODEL, n_groups=5)
    frames, truth = simulate_stream(cfg)
    frames[17] = Frame(17, frames[17].role, np.zeros((2, 2)))  # group 5 S2 has the wrong size
    results, report = run_stream(cfg, frames, calib, truth)
    assert [r.group_index for r in results] == [4, 5]
    assert results[1].error is not None
    assert report.totals["failed"] == 1


def test_report_totals_are_sums():
    r = Report()
    r.add({"group": 4, "errors": 2, "valid_points": 10, "rms_mm": 0.1})
    r.add({"group": 5, "errors": 0, "valid_points": 30, "rms_mm": 0.2})
    assert r.totals == {"errors": 2, "valid_points": 40}
    assert r.error_rate == 0.05


def test_points_layout():
    h = np.array([[1.0, 2.0], [3.0, np.nan]])
    p = points_from_height(h, 0.5)
    np.testing.assert_array_equal(p[:3], [[0, 0, 1], [0.5, 0, 2], [0, 0.5, 3]])


def test_compare_writes_outputs(tmp_path, calib):
    cfg = RunConfig(spec=SPEC, model=replace(MODEL, noise_sigma=0.02, seed=3),
                    scene=Steps(bands=((280, 840, 40.0),)))
    rows = run_compare(cfg, calib=calib, out_dir=tmp_path)
    assert [r["method"] for r in rows] == ["tripu", "traditional", "two_frequency", "two_wavelength"]
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    assert lines[0] == CSV_SCHEMA and len(lines) == 6
    assert rows[0]["errors"] < rows[1]["errors"]
    assert read_ply(tmp_path / "tripu.ply").shape[1] == 3
    assert (tmp_path / "labels_tripu.pgm").exists()
