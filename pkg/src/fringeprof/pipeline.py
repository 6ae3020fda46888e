"""End-to-end reconstruction, simulated calibration and method comparison."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import tripu
from .calibration import (
    DEFAULT_HEIGHTS,
    PlaneMeasurement,
    apply_phase_height,
    fit_phase_height,
    in_calibrated_range,
    measure_reference,
)
from .config import ConfigError, RunConfig
from .fringe import wrapped_triple
from .graycode import decode_orders
from .io import read_pgm, write_pgm, write_ply
from .metrics import error_count
from .sequence import GROUP_SIZE, Frame, WarmupError, assemble, make_schedule
from .simulator import (
    Plane,
    absolute_phase_from_height,
    gen_capture_sequence,
    pattern_bank,
    render_capture,
)

logger = logging.getLogger(__name__)

__all__ = [
    "FrameResult",
    "Report",
    "unwrap_frames",
    "reconstruct_frame",
    "points_from_height",
    "render_static",
    "calibrate_simulated",
    "simulate_stream",
    "run_stream",
    "run_compare",
    "CSV_SCHEMA",
]

CSV_SCHEMA = "# fringeprof compare schema=1"
_COMPARE_COLUMNS = ("method", "noise_sigma", "defocus_sigma", "error_rate", "errors", "valid_points", "rms_mm")


@dataclass
class FrameResult:
    """Output of one reconstruction; `error` is set when the frame failed."""

    group_index: int
    Phi: Optional[np.ndarray] = field(default=None, repr=False)
    h: Optional[np.ndarray] = field(default=None, repr=False)
    points: Optional[np.ndarray] = field(default=None, repr=False)
    regions: Optional[tripu.RegionLabels] = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class Report:
    """Per-frame metric records plus their totals."""

    records: list = field(default_factory=list)

    def add(self, record):
        self.records.append(dict(record))

    @property
    def totals(self):
        out = {}
        for rec in self.records:
            for key, value in rec.items():
                if isinstance(value, (int, np.integer)) and not isinstance(value, bool) and key != "group":
                    out[key] = out.get(key, 0) + int(value)
        return out

    @property
    def error_rate(self):
        t = self.totals
        n = t.get("valid_points", 0)
        return t.get("errors", 0) / n if n else float("nan")


def _load(data):
    if isinstance(data, np.ndarray):
        return data
    return read_pgm(data)


def unwrap_frames(sinusoids, grays, Phi_ref, method="tripu", axis=1, b_threshold=0.02,
                  edge_radius=2, correct=True, extras=None, n_periods=None):
    """Absolute phase from one group of captured frames.

    Parameters
    ----------
    sinusoids : sequence of 3 ndarray
    grays : sequence of ndarray
        Gray frames, most significant bit first.
    Phi_ref : ndarray
        Reference-plane absolute phase (Tri-PU only).
    method : {"tripu", "traditional", "two_frequency", "two_wavelength"}
    extras : dict, optional
        ``"unit"``: three frames of the one-period set (two_frequency);
        ``"f15"``: three frames of the ``n_periods - 1`` set (two_wavelength).
    n_periods : int, optional
        High frequency for the baselines.

    Returns
    -------
    Phi : ndarray
    regions : RegionLabels or None
    diag : dict
    """
    extras = extras or {}
    triple = wrapped_triple(*sinusoids, b_threshold=b_threshold)
    diag = {}
    regions = None
    if method in ("tripu", "traditional"):
        k = decode_orders(list(grays), triple.A, triple.valid)
        diag["out_of_table"] = k.out_of_table
        if method == "traditional":
            Phi = tripu.unwrap_traditional(triple.phi2, k)
        else:
            if Phi_ref is None:
                raise ConfigError("tripu needs a reference phase")
            ref = tripu.reference_wrapped(Phi_ref, k)
            regions = tripu.divide_regions(triple, k, ref, edge_radius=edge_radius, correct=correct, axis=axis)
            Phi = tripu.unwrap_tripu(triple, k, regions)
            diag["unusable_lines"] = regions.unusable
    elif method == "two_frequency":
        if "unit" not in extras:
            raise ConfigError("two_frequency needs the unit-frequency pattern set")
        if n_periods is None:
            raise ConfigError("two_frequency needs n_periods")
        unit = wrapped_triple(*extras["unit"], b_threshold=b_threshold)
        Phi = tripu.unwrap_two_frequency(triple.phi2, unit.phi2, n_periods)
        Phi = np.where(triple.valid & unit.valid, Phi, np.nan)
    elif method == "two_wavelength":
        if "f15" not in extras:
            raise ConfigError("two_wavelength needs the (n_periods - 1)-period pattern set")
        if n_periods is None:
            raise ConfigError("two_wavelength needs n_periods")
        low = wrapped_triple(*extras["f15"], b_threshold=b_threshold)
        Phi = tripu.unwrap_two_wavelength(low.phi2, triple.phi2, f_h=n_periods)
        Phi = np.where(triple.valid & low.valid, Phi, np.nan)
    else:
        raise ConfigError(f"unknown method {method!r}")
    diag["invalid_pixels"] = int(np.isnan(Phi).sum())
    return Phi, regions, diag


def points_from_height(h, mm_per_px):
    """``(x*mm_per_px, y*mm_per_px, h)`` rows for every pixel, row-major."""
    ys, xs = np.indices(h.shape)
    return np.column_stack([xs.ravel() * mm_per_px, ys.ravel() * mm_per_px, h.ravel()])


def reconstruct_frame(assembly, model, cfg, extras=None):
    """Phase, height and point cloud for one assembled group.

    Parameters
    ----------
    assembly : GroupAssembly
    model : CalibModel
        Must carry ``Phi_ref``.
    cfg : RunConfig
    extras : dict, optional
        Extra pattern sets for the baseline methods, see :func:`unwrap_frames`.
    """
    sins = [_load(f.data) for f in assembly.sinusoids]
    grays = [_load(f.data) for f in assembly.gray_list()]
    if model.Phi_ref is None:
        raise ConfigError("calibration model carries no reference phase")
    Phi, regions, diag = unwrap_frames(
        sins, grays, model.Phi_ref, method=cfg.method, axis=cfg.spec.axis, b_threshold=cfg.b_threshold,
        edge_radius=cfg.edge_radius, correct=cfg.correct, extras=extras, n_periods=cfg.spec.n_periods,
    )
    h, hdiag = apply_phase_height(model, Phi - model.Phi_ref, return_diagnostics=True)
    diag.update(hdiag)
    return FrameResult(
        group_index=assembly.group_index,
        Phi=Phi,
        h=h,
        points=points_from_height(h, cfg.mm_per_px),
        regions=regions,
        diagnostics=diag,
    )


def render_static(scene, spec, model, roles, bank, t0=0):
    """Render `roles` from `bank` at consecutive frame times starting at `t0`."""
    return [render_capture(scene, t0 + i, bank[r], spec, model, frame_index=t0 + i) for i, r in enumerate(roles)]


def _main_roles(spec):
    return ["S1", "S2", "S3"] + [f"G{b}" for b in range(1, spec.n_gray_bits + 1)]


def calibrate_simulated(spec, model, heights=DEFAULT_HEIGHTS, dither=True, b_threshold=0.02, edge_radius=2):
    """Measure the reference plane and fit the phase-to-height model in simulation.

    Captures are rendered without noise (the reference and calibration planes
    stand in for averaged measurements).
    """
    quiet = replace(model, noise_sigma=0.0)
    bank = pattern_bank(spec, dither=dither)
    roles = _main_roles(spec)
    ref_frames = render_static(Plane(h=0.0), spec, quiet, roles, bank)
    Phi_ref = measure_reference(ref_frames, n_bits=spec.n_gray_bits, b_threshold=b_threshold,
                                axis=spec.axis, edge_radius=edge_radius)
    planes = []
    for h in heights:
        frames = render_static(Plane(h=float(h)), spec, quiet, roles, bank)
        Phi, _, _ = unwrap_frames(frames[:3], frames[3:], Phi_ref, axis=spec.axis,
                                  b_threshold=b_threshold, edge_radius=edge_radius)
        planes.append(PlaneMeasurement(h=float(h), delta_phi=Phi - Phi_ref))
    return fit_phase_height(planes, Phi_ref=Phi_ref)


def _truth_time(j):
    """Frame time of the middle sinusoid of group `j`."""
    return GROUP_SIZE * (j - 1) + 1


def simulate_stream(cfg):
    """Render the time-overlapping stream for `cfg`.

    Returns the frames and a dict mapping each group index to its
    ground-truth height map (at the group's middle sinusoid).
    """
    schedule = make_schedule(cfg.n_groups, cfg.spec.n_gray_bits)
    frames = gen_capture_sequence(cfg.scene, schedule, cfg.spec, cfg.model, dither=cfg.dither)
    truth = {
        j: cfg.scene.height_map(cfg.spec.shape, _truth_time(j), cfg.spec.axis, cfg.mm_per_px)
        for j in range(1, cfg.n_groups + 1)
    }
    return frames, truth


def _score(Phi, h, Phi_truth, h_truth, calib):
    """Order errors, valid points and the height RMS.

    The RMS runs over error-free pixels whose phase lies inside the
    calibrated range; the rational model is not trusted when extrapolating.
    """
    errors, valid = error_count(Phi, Phi_truth)
    with np.errstate(invalid="ignore"):
        good = np.isfinite(Phi) & np.isfinite(Phi_truth) & (np.abs(Phi - Phi_truth) <= np.pi)
        good &= np.isfinite(h) & np.isfinite(h_truth)
        good &= in_calibrated_range(calib, Phi - calib.Phi_ref)
    rms = float(np.sqrt(np.mean((h[good] - h_truth[good]) ** 2))) if good.any() else float("nan")
    return errors, valid, rms


def run_stream(cfg, frames, calib, truth=None, n_groups=None):
    """Reconstruct every group of a frame stream.

    Frame-level failures are recorded in the result and report, and the
    stream continues. `truth` maps group index to a true height map; when
    given, records carry error counts and height RMS.
    """
    frames = list(frames)
    if n_groups is None:
        n_groups = max((f.group for f in frames), default=0)
    results = []
    report = Report()
    for j in range(1, n_groups + 1):
        try:
            asm = assemble(frames, j, n_bits=cfg.spec.n_gray_bits, policy=cfg.policy)
        except WarmupError:
            continue
        try:
            res = reconstruct_frame(asm, calib, cfg)
        except (ValueError, LookupError, OSError) as exc:
            logger.warning("group %d failed: %s", j, exc)
            res = FrameResult(group_index=j, error=str(exc))
            report.add({"group": j, "failed": 1})
            results.append(res)
            continue
        rec = {"group": j, "failed": 0, "max_staleness": max(asm.staleness.values())}
        rec.update(res.diagnostics)
        if truth is not None and j in truth:
            h_truth = truth[j]
            Phi_truth = absolute_phase_from_height(h_truth, cfg.spec, cfg.model)
            errors, valid, rms = _score(res.Phi, res.h, Phi_truth, h_truth, calib)
            rec.update(errors=errors, valid_points=valid, rms_mm=rms)
        report.add(rec)
        results.append(res)
    return results, report


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.6g}"


def run_compare(cfg, calib=None, out_dir=None):
    """Analyze one rendered capture set with all four unwrapping methods.

    The main sinusoids and Gray frames, a one-period set and an
    ``(n_periods - 1)``-period set are rendered once, at consecutive frame
    times, and every method reads the same frames. Returns a list of row
    dicts; with `out_dir`, writes ``compare.csv``, ``labels_tripu.pgm`` and
    one PLY per method.
    """
    spec, model = cfg.spec, cfg.model
    if calib is None:
        calib = calibrate_simulated(spec, model, cfg.calib_heights, dither=cfg.dither,
                                    b_threshold=cfg.b_threshold, edge_radius=cfg.edge_radius)
    main = pattern_bank(spec, dither=cfg.dither)
    unit = pattern_bank(spec.with_periods(1), dither=cfg.dither)
    f15 = pattern_bank(spec.with_periods(spec.n_periods - 1), dither=cfg.dither)
    bank = dict(main)
    bank.update({f"U{n}": unit[f"S{n}"] for n in (1, 2, 3)})
    bank.update({f"W{n}": f15[f"S{n}"] for n in (1, 2, 3)})
    roles = _main_roles(spec) + ["U1", "U2", "U3", "W1", "W2", "W3"]
    captured = dict(zip(roles, render_static(cfg.scene, spec, model, roles, bank)))

    h_truth = cfg.scene.height_map(spec.shape, 1, spec.axis, cfg.mm_per_px)
    Phi_truth = absolute_phase_from_height(h_truth, spec, model)
    sins = [captured[r] for r in ("S1", "S2", "S3")]
    grays = [captured[f"G{b}"] for b in range(1, spec.n_gray_bits + 1)]
    extras = {"unit": [captured[f"U{n}"] for n in (1, 2, 3)], "f15": [captured[f"W{n}"] for n in (1, 2, 3)]}

    rows, outputs = [], {}
    for method in ("tripu", "traditional", "two_frequency", "two_wavelength"):
        Phi, regions, _ = unwrap_frames(
            sins, grays, calib.Phi_ref, method=method, axis=spec.axis, b_threshold=cfg.b_threshold,
            edge_radius=cfg.edge_radius, correct=cfg.correct, extras=extras, n_periods=spec.n_periods,
        )
        h = apply_phase_height(calib, Phi - calib.Phi_ref)
        errors, valid, rms = _score(Phi, h, Phi_truth, h_truth, calib)
        rows.append({
            "method": method,
            "noise_sigma": model.noise_sigma,
            "defocus_sigma": model.defocus_sigma,
            "error_rate": errors / valid if valid else float("nan"),
            "errors": errors,
            "valid_points": valid,
            "rms_mm": rms,
        })
        outputs[method] = (h, regions)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = [CSV_SCHEMA, ",".join(_COMPARE_COLUMNS)]
        lines += [",".join(_fmt(r[c]) for c in _COMPARE_COLUMNS) for r in rows]
        (out / "compare.csv").write_text("\n".join(lines) + "\n")
        write_pgm(tripu.labels_to_image(outputs["tripu"][1].label), out / "labels_tripu.pgm")
        for method, (h, _) in outputs.items():
            write_ply(points_from_height(h, cfg.mm_per_px), out / f"{method}.ply")
    return rows


def frames_from_manifest(frames):
    """Turn manifest frames (file paths) into loaded :class:`Frame` objects."""
    return [Frame(f.index, f.role, _load(f.data)) for f in frames]
