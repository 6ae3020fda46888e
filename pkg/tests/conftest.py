import numpy as np
import pytest

from fringeprof.fringe import wrapped_triple
from fringeprof.graycode import OrderMap
from fringeprof.tripu import reference_wrapped


def ramp_case(P=40.0, n_periods=8, n_bits=3, rows=1, shift=None, B=0.5, boundary_shift=None):
    """Ideal fringe ramp with an independently displaced order staircase.

    `shift` (scalar or per-row array, px) moves all k boundaries relative to
    the phase branch cuts; `boundary_shift` (length ``n_periods - 1``) moves
    each interior boundary separately. Returns ``(triple, k, ref, Phi_truth)``.
    """
    width = int(round(P * n_periods))
    v = np.arange(width, dtype=np.float64)[None, :] + 0.5
    v = np.broadcast_to(v, (rows, width))
    theta = 2 * np.pi * v / P + np.pi / 3
    frames = [0.5 + B * np.cos(theta + 2 * np.pi * n / 3) for n in range(3)]
    triple = wrapped_triple(*frames, b_threshold=0.0)
    d = np.zeros((rows, 1)) if shift is None else np.broadcast_to(np.asarray(shift, float).reshape(-1, 1), (rows, 1))
    if boundary_shift is None:
        kk = np.clip(np.floor((v - d) / P).astype(np.int64) + 1, 1, n_periods)
    else:
        b = P * np.arange(1, n_periods) + np.asarray(boundary_shift, float)
        kk = 1 + (v[..., None] >= b).sum(axis=-1)
    k = OrderMap(k=kk, valid=np.ones(kk.shape, bool), n_bits=n_bits)
    Phi_truth = 2 * np.pi * v / P + np.pi
    # The reference plane phase is the undisplaced ramp.
    ref = reference_wrapped(Phi_truth, k)
    return triple, k, ref, Phi_truth


@pytest.fixture
def ramp():
    return ramp_case


def clean_mask(h_truth, spec, model, radius=None):
    """Pixels farther than `radius` (default 3 blur sigmas) from a height
    discontinuity or a shadow, where blur mixes unrelated phases."""
    from scipy import ndimage

    from fringeprof.simulator import shadow_mask, truth_phase_shift

    if radius is None:
        radius = int(np.ceil(3 * model.defocus_sigma)) + 1
    pos = spec.coordinate() + truth_phase_shift(model, h_truth) * spec.period_px / (2 * np.pi)
    jump = np.zeros(h_truth.shape, bool)
    d = np.abs(np.diff(pos, axis=spec.axis)) > 2.0
    if spec.axis == 1:
        jump[:, 1:] |= d
        jump[:, :-1] |= d
    else:
        jump[1:] |= d
        jump[:-1] |= d
    bad = jump | shadow_mask(pos, spec.axis)
    return ~ndimage.binary_dilation(bad, iterations=radius) if bad.any() else ~bad


# Acceptance reporting: tests marked ``criterion(n, title)`` roll up into one
# PASS/FAIL line per criterion at the end of the run. An expected failure
# counts as FAIL.
_CRITERIA = {}


def pytest_runtest_logreport(report):
    n = getattr(report, "criterion", None)
    if n is None:
        return
    entry = _CRITERIA.setdefault(n, {"title": report.criterion_title, "ok": True, "notes": []})
    if report.when == "call" or report.outcome != "passed":
        if hasattr(report, "wasxfail"):
            entry["ok"] = False
            entry["notes"].append(f"xfail: {report.wasxfail}")
        elif report.outcome != "passed":
            entry["ok"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep = outcome.get_result()
        rep.criterion = mark.args[0]
        rep.criterion_title = mark.args[1] if len(mark.args) > 1 else ""


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        for note in e["notes"]:
            line += f"  [{note}]"
        terminalreporter.write_line(line)
