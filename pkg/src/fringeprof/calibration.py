"""Phase-to-height calibration.

Height follows the per-pixel rational model

    1/h = u + v/dphi + w/dphi**2

where ``dphi`` is the absolute phase relative to the reference plane. The
three coefficients are fitted by least squares in the ``1/h`` domain from
planes of known nonzero height; the reference plane itself only supplies
``Phi_ref``.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._validation import check_raster, check_same_shape
from .fringe import wrapped_triple
from .graycode import decode_orders
from .io import read_raster, write_raster
from .tripu import unwrap_traditional

logger = logging.getLogger(__name__)

__all__ = [
    "CalibModel",
    "PlaneMeasurement",
    "measure_reference",
    "fit_phase_height",
    "apply_phase_height",
    "is_monotone",
    "in_calibrated_range",
    "save_model",
    "load_model",
    "DEFAULT_HEIGHTS",
    "EPS",
]

DEFAULT_HEIGHTS = (30.0, 60.0, 90.0, 120.0)
EPS = 1e-6
_RANK_TOL = 1e-12


@dataclass(frozen=True)
class PlaneMeasurement:
    h: float
    delta_phi: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"calibration planes need h > 0 (the h=0 plane is the reference), got {self.h}")


@dataclass(frozen=True)
class CalibModel:
    """Per-pixel phase-to-height coefficients.

    ``u`` (1/mm), ``v`` (rad/mm), ``w`` (rad^2/mm) are NaN at uncalibrated
    pixels. ``dphi_min``/``dphi_max`` bound the calibrated phase range and
    ``residual`` is the per-pixel RMS fit residual in the 1/h domain.
    """

    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    Phi_ref: Optional[np.ndarray] = field(default=None, repr=False)
    dphi_min: Optional[np.ndarray] = field(default=None, repr=False)
    dphi_max: Optional[np.ndarray] = field(default=None, repr=False)
    residual: Optional[np.ndarray] = field(default=None, repr=False)
    heights: tuple = ()
    rank_deficient: int = 0

    @property
    def shape(self):
        return self.u.shape

    @property
    def calibrated(self):
        return np.isfinite(self.u) & np.isfinite(self.v) & np.isfinite(self.w)

    def with_reference(self, Phi_ref):
        Phi_ref = check_raster(Phi_ref, "Phi_ref")
        check_same_shape(self.u, Phi_ref, names=("u", "Phi_ref"))
        return CalibModel(
            u=self.u,
            v=self.v,
            w=self.w,
            Phi_ref=Phi_ref,
            dphi_min=self.dphi_min,
            dphi_max=self.dphi_max,
            residual=self.residual,
            heights=self.heights,
            rank_deficient=self.rank_deficient,
        )


def measure_reference(frames, n_bits=None, b_threshold=0.02, axis=1, method="tripu", edge_radius=2):
    """Absolute phase ``Phi_ref`` of the reference plane.

    `frames` is ``[S1, S2, S3, G1, ..., GN]`` captured off the h=0 plane.
    No reference phase exists yet, so the tripartite division is bootstrapped
    with the pixel index along `axis` as a provisional reference: the division
    only compares reference values along one line of one order, and any
    increasing ramp orders those pixels the same way. This keeps blurred code
    edges from leaving 2*pi jumps at the first pixel of an order, which
    ``method="traditional"`` (plain ``phi2 + 2*pi*k``) does not guard against.
    """
    from .tripu import divide_regions, reference_wrapped, unwrap_tripu

    frames = [check_raster(f, "frame") for f in frames]
    if len(frames) < 4:
        raise ValueError("need three sinusoids and at least one Gray frame")
    check_same_shape(*frames)
    if method not in ("tripu", "traditional"):
        raise ValueError(f"unknown reference method {method!r}")
    triple = wrapped_triple(*frames[:3], b_threshold=b_threshold)
    grays = frames[3:]
    if n_bits is not None and len(grays) != n_bits:
        raise ValueError(f"expected {n_bits} Gray frames, got {len(grays)}")
    k = decode_orders(grays, triple.A, triple.valid)
    if method == "traditional":
        return unwrap_traditional(triple.phi2, k)
    ramp = np.indices(triple.phi2.shape)[axis].astype(np.float64)
    ref = reference_wrapped(ramp, k)
    regions = divide_regions(triple, k, ref, edge_radius=edge_radius, axis=axis)
    return unwrap_tripu(triple, k, regions)


def fit_phase_height(planes, eps=EPS, Phi_ref=None):
    """Least-squares fit of ``1/h = u + v/dphi + w/dphi**2`` at every pixel.

    Pixels where any plane has ``dphi <= eps`` (or NaN), or where the design
    matrix is rank deficient, are left uncalibrated (NaN).
    """
    planes = list(planes)
    if len(planes) < 3:
        raise ValueError(f"need at least 3 planes, got {len(planes)}")
    hs = np.array([p.h for p in planes], dtype=np.float64)
    if len(set(hs.tolist())) != len(hs):
        raise ValueError("plane heights must be distinct")
    D = np.stack([check_raster(p.delta_phi, "delta_phi") for p in planes])
    check_same_shape(*D)
    shape = D.shape[1:]
    with np.errstate(invalid="ignore"):
        usable = np.all(np.isfinite(D) & (D > eps), axis=0)
    x = 1.0 / D[:, usable].T  # (n_pix, n_planes)
    M = np.stack([np.ones_like(x), x, x * x], axis=-1)  # (n_pix, n_planes, 3)
    target = np.broadcast_to(1.0 / hs, x.shape)

    u = np.full(shape, np.nan)
    v = np.full(shape, np.nan)
    w = np.full(shape, np.nan)
    resid = np.full(shape, np.nan)
    n_def = 0
    if x.shape[0]:
        U, S, Vt = np.linalg.svd(M, full_matrices=False)
        full_rank = S[:, -1] > _RANK_TOL * S[:, 0]
        n_def = int((~full_rank).sum())
        Sinv = np.where(full_rank[:, None], 1.0 / np.where(S > 0, S, 1.0), 0.0)
        Utb = np.einsum("pnk,pn->pk", U, target)
        coef = np.einsum("pkj,pk->pj", Vt, Sinv * Utb)
        r = np.einsum("pnk,pk->pn", M, coef) - target
        rms = np.sqrt(np.mean(r * r, axis=1))
        coef[~full_rank] = np.nan
        rms[~full_rank] = np.nan
        u[usable], v[usable], w[usable] = coef.T
        resid[usable] = rms
    if n_def:
        logger.warning("fit_phase_height: %d rank-deficient pixels left uncalibrated", n_def)
    ok = np.isfinite(u)
    dmin = np.full(shape, np.nan)
    dmax = np.full(shape, np.nan)
    dmin[ok] = D[:, ok].min(axis=0)
    dmax[ok] = D[:, ok].max(axis=0)
    return CalibModel(
        u=u,
        v=v,
        w=w,
        Phi_ref=None if Phi_ref is None else check_raster(Phi_ref, "Phi_ref"),
        dphi_min=dmin,
        dphi_max=dmax,
        residual=resid,
        heights=tuple(hs.tolist()),
        rank_deficient=n_def,
    )


def apply_phase_height(model, delta_phi, eps=EPS, return_diagnostics=False):
    """Heights in mm from phase differences.

    ``dphi <= eps`` maps to 0 (on the reference plane); a non-positive
    denominator gives NaN. With `return_diagnostics` a dict of tallies
    (``extrapolated``, ``outside_model``, ``uncalibrated``) is returned too.
    """
    d = check_raster(delta_phi, "delta_phi")
    check_same_shape(model.u, d, names=("model", "delta_phi"))
    finite = np.isfinite(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        on_ref = finite & (d <= eps)
        dd = np.where(on_ref | ~finite, 1.0, d)
        denom = model.u + model.v / dd + model.w / (dd * dd)
        bad = finite & ~on_ref & ~(denom > 0)
        h = np.where(bad | ~finite, np.nan, 1.0 / np.where(denom > 0, denom, 1.0))
    h = np.where(on_ref, 0.0, h)
    uncal = finite & ~model.calibrated
    h = np.where(uncal, np.nan, h)
    extrap = 0
    if model.dphi_min is not None:
        with np.errstate(invalid="ignore"):
            extrap = int((finite & ~on_ref & model.calibrated & ((d < model.dphi_min) | (d > model.dphi_max))).sum())
    diag = {
        "extrapolated": extrap,
        "outside_model": int((bad & model.calibrated).sum()),
        "uncalibrated": int(uncal.sum()),
    }
    if diag["outside_model"]:
        logger.info("apply_phase_height: %d pixels outside model validity", diag["outside_model"])
    return (h, diag) if return_diagnostics else h


def in_calibrated_range(model, delta_phi):
    """Pixels whose phase difference lies inside the calibrated range."""
    if model.dphi_min is None:
        raise ValueError("model carries no calibrated phase range")
    d = check_raster(delta_phi, "delta_phi")
    with np.errstate(invalid="ignore"):
        return model.calibrated & (d >= model.dphi_min) & (d <= model.dphi_max)


def is_monotone(model, n_samples=64):
    """Pixels where ``h(dphi)`` is strictly increasing over the calibrated range.

    ``dh/d(dphi) > 0`` is equivalent to ``v*dphi + 2*w > 0`` (linear in
    ``dphi``), so both range ends decide it; the denominator must also stay
    positive, which is checked on a grid of `n_samples` points.
    """
    if model.dphi_min is None:
        raise ValueError("model carries no calibrated phase range")
    lo, hi = model.dphi_min, model.dphi_max
    with np.errstate(invalid="ignore"):
        ok = (model.v * lo + 2 * model.w > 0) & (model.v * hi + 2 * model.w > 0)
        for s in np.linspace(0.0, 1.0, n_samples):
            x = lo + s * (hi - lo)
            ok &= model.u + model.v / x + model.w / (x * x) > 0
    return ok & model.calibrated


_FILES = {"u": "u.frf", "v": "v.frf", "w": "w.frf", "Phi_ref": "phi_ref.frf",
          "dphi_min": "dphi_min.frf", "dphi_max": "dphi_max.frf", "residual": "residual.frf"}


def save_model(model, directory):
    """Persist as FRF rasters plus ``calib_manifest.txt`` (key = value)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, fname in _FILES.items():
        arr = getattr(model, name)
        if arr is not None:
            write_raster(arr, directory / fname)
    res = model.residual if model.residual is not None else np.full(model.shape, np.nan)
    finite = res[np.isfinite(res)]
    meta = {
        "heights_mm": ",".join(repr(h) for h in model.heights),
        "calibrated_pixels": int(model.calibrated.sum()),
        "rank_deficient": model.rank_deficient,
        "residual_max": repr(float(finite.max())) if finite.size else "nan",
        "residual_mean": repr(float(finite.mean())) if finite.size else "nan",
    }
    (directory / "calib_manifest.txt").write_text("".join(f"{k} = {v}\n" for k, v in meta.items()))


def load_model(directory):
    directory = Path(directory)
    if not (directory / "u.frf").exists():
        raise FileNotFoundError(f"no calibration model in {directory}")
    arrays = {}
    for name, fname in _FILES.items():
        p = directory / fname
        arrays[name] = read_raster(p) if p.exists() else None
    heights = ()
    meta = directory / "calib_manifest.txt"
    rank_def = 0
    if meta.exists():
        for line in meta.read_text().splitlines():
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key == "heights_mm" and value:
                heights = tuple(float(h) for h in value.split(","))
            elif key == "rank_deficient":
                rank_def = int(value)
    return CalibModel(heights=heights, rank_deficient=rank_def, **arrays)
