"""Accuracy metrics for reconstructed phase and height maps."""

import logging
import warnings

import numpy as np
from scipy import optimize

from ._validation import check_mask, check_raster, check_same_shape

logger = logging.getLogger(__name__)

__all__ = ["error_rate", "error_count", "fit_plane", "plane_flatness_rms", "sphere_fit", "step_heights"]


def _valid(Phi, Phi_truth, valid):
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(Phi) & np.isfinite(Phi_truth)
    if valid is not None:
        ok &= check_mask(valid, Phi.shape, "valid")
    return ok


def error_count(Phi, Phi_truth, valid=None):
    """``(errors, valid_points)``: pixels off by more than pi, and pixels compared."""
    Phi = check_raster(Phi, "Phi")
    Phi_truth = check_raster(Phi_truth, "Phi_truth")
    check_same_shape(Phi, Phi_truth, names=("Phi", "Phi_truth"))
    ok = _valid(Phi, Phi_truth, valid)
    err = ok & (np.abs(np.where(ok, Phi - Phi_truth, 0.0)) > np.pi)
    return int(err.sum()), int(ok.sum())


def error_rate(Phi, Phi_truth, valid=None):
    """Fraction of valid pixels whose absolute phase is off by more than pi.

    Pixels where either phase is NaN are not counted as valid. An empty
    valid set returns NaN with a warning.
    """
    errors, n = error_count(Phi, Phi_truth, valid)
    if n == 0:
        warnings.warn("error_rate: no valid pixels", RuntimeWarning, stacklevel=2)
        return float("nan")
    return errors / n


def fit_plane(h, region):
    """Least-squares plane ``z = a*x + b*y + c`` over `region`; returns ``(a, b, c)``."""
    h = check_raster(h, "h")
    region = check_mask(region, h.shape, "region") & np.isfinite(h)
    ys, xs = np.nonzero(region)
    if xs.size < 3:
        raise ValueError(f"plane fit needs >= 3 valid pixels, got {xs.size}")
    A = np.column_stack([xs, ys, np.ones(xs.size)]).astype(np.float64)
    coef, _, rank, _ = np.linalg.lstsq(A, h[region], rcond=None)
    if rank < 3:
        raise ValueError("plane fit region is degenerate (collinear pixels)")
    return tuple(coef)


def plane_flatness_rms(h, region):
    """RMS of residuals about the least-squares plane over `region` (mm)."""
    h = check_raster(h, "h")
    region = check_mask(region, h.shape, "region") & np.isfinite(h)
    a, b, c = fit_plane(h, region)
    ys, xs = np.nonzero(region)
    r = h[region] - (a * xs + b * ys + c)
    return float(np.sqrt(np.mean(r * r)))


def sphere_fit(points):
    """Least-squares sphere through 3-D points.

    An algebraic fit of ``|p|^2 = 2 c.p + d`` seeds a geometric refinement of
    the distances ``|p - c| - R``.

    Returns
    -------
    center : ndarray, shape (3,)
    radius : float
    rms : float
        RMS of the geometric residuals.
    """
    P = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    P = P[np.isfinite(P).all(axis=1)]
    if len(P) < 4:
        raise ValueError(f"sphere fit needs >= 4 points, got {len(P)}")
    A = np.column_stack([2 * P, np.ones(len(P))])
    b = (P * P).sum(axis=1)
    sol, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    if rank < 4 or sv[-1] <= 1e-12 * sv[0]:
        raise ValueError("sphere fit geometry is degenerate (coplanar points)")
    c0 = sol[:3]
    r0 = np.sqrt(sol[3] + c0 @ c0)

    def resid(p):
        return np.linalg.norm(P - p[:3], axis=1) - p[3]

    res = optimize.least_squares(resid, np.append(c0, r0), method="lm", xtol=1e-12, ftol=1e-12)
    center, radius = res.x[:3], float(abs(res.x[3]))
    r = resid(res.x)
    return center, radius, float(np.sqrt(np.mean(r * r)))


def step_heights(h, band_masks):
    """Mean height of each band above the plane fitted to the first band."""
    h = check_raster(h, "h")
    masks = [check_mask(m, h.shape, f"band {i}") & np.isfinite(h) for i, m in enumerate(band_masks)]
    if not masks:
        raise ValueError("no bands given")
    for i, m in enumerate(masks):
        if not m.any():
            raise ValueError(f"band {i} has no valid pixels")
    a, b, c = fit_plane(h, masks[0])
    ys, xs = np.mgrid[0 : h.shape[0], 0 : h.shape[1]]
    rel = h - (a * xs + b * ys + c)
    return [float(rel[m].mean()) for m in masks]
