"""Tripartite phase unwrapping and baseline temporal unwrappers.

Each fringe order ``A(i)`` is split into a low, middle and high part. The
middle part is where ``|phi2| < pi/3``; the rest is split, line by line along
the phase axis, by comparing the reference wrapped phase
``phi_ref = Phi_ref - 2*pi*k`` against its value at the critical point (the
pixel of ``A(i)`` with minimal ``|phi2|``). Low pixels are unwrapped from
``phi1``, middle pixels from ``phi2`` and high pixels from ``phi3``, so no
pixel ever uses a wrapped phase near its own branch cut.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._validation import check_mask, check_raster, check_same_shape
from .fringe import THIRD_TURN, wrap
from .graycode import OrderMap

__all__ = [
    "INVALID",
    "LOW",
    "MID",
    "HIGH",
    "LABEL_PGM_LEVELS",
    "ReferencePhase",
    "RegionLabels",
    "reference_wrapped",
    "edge_set",
    "critical_points",
    "correct_critical",
    "divide_regions",
    "unwrap_tripu",
    "unwrap_traditional",
    "unwrap_two_frequency",
    "unwrap_two_wavelength",
    "labels_to_image",
]

INVALID, LOW, MID, HIGH = 0, 1, 2, 3
LABEL_PGM_LEVELS = {INVALID: 0, LOW: 64, MID: 128, HIGH: 192}
TWO_PI = 2 * np.pi


def _lines(arr, axis):
    """View with the phase axis last: rows of the result are lines along it."""
    return arr if axis == 1 else arr.T


def _orders(k):
    if isinstance(k, OrderMap):
        return k.k, k.valid, 2**k.n_bits
    k = np.asarray(k)
    valid = k > 0
    return np.where(valid, k, 0), valid, int(k.max(initial=0))


@dataclass(frozen=True)
class ReferencePhase:
    """``phi_ref = Phi_ref - 2*pi*k`` (not rewrapped), NaN where k is invalid."""

    phi_ref: np.ndarray
    Phi_ref: np.ndarray


@dataclass(frozen=True)
class RegionLabels:
    """Tripartite division of every fringe order.

    Attributes
    ----------
    label : ndarray of int8
        One of ``INVALID, LOW, MID, HIGH`` per pixel.
    thresholds : ndarray, shape (n_orders, n_lines)
        ``phi_th`` for order ``i`` (row ``i - 1``) on each line along the
        phase axis; NaN where no usable critical point exists.
    critical_points : ndarray of int, shape (n_orders, n_lines)
        Phase-axis position of the critical point, -1 if none.
    unusable : int
        Number of ``(order, line)`` pairs that had order pixels but no usable
        critical point.
    """

    label: np.ndarray
    thresholds: np.ndarray
    critical_points: np.ndarray
    unusable: int = 0

    def counts(self):
        return {
            name: int((self.label == code).sum())
            for name, code in (("invalid", INVALID), ("low", LOW), ("mid", MID), ("high", HIGH))
        }


def reference_wrapped(Phi_ref, k):
    """Reference wrapped phase ``Phi_ref - 2*pi*k`` on valid order pixels."""
    Phi_ref = check_raster(Phi_ref, "Phi_ref")
    kk, valid, _ = _orders(k)
    check_same_shape(Phi_ref, kk, names=("Phi_ref", "k"))
    phi_ref = np.where(valid, Phi_ref - TWO_PI * kk, np.nan)
    return ReferencePhase(phi_ref=phi_ref, Phi_ref=Phi_ref)


def edge_set(k, valid, edge_radius):
    """Pixels within `edge_radius` (square window) of a different or invalid order."""
    k = np.asarray(k)
    valid = check_mask(valid, k.shape, "valid")
    if edge_radius <= 0:
        return np.zeros(k.shape, dtype=bool)
    lab = np.where(valid, k, -1).astype(np.int64)
    size = 2 * int(edge_radius) + 1
    hi = ndimage.maximum_filter(lab, size=size, mode="nearest")
    lo = ndimage.minimum_filter(lab, size=size, mode="nearest")
    return valid & (hi != lo)


def _argmin_per_line(score, candidates, n_orders, k_lines):
    """Position of the minimal score over each (order, line) candidate set."""
    n_lines = score.shape[0]
    pos = np.full((n_orders, n_lines), -1, dtype=np.int64)
    for i in range(1, n_orders + 1):
        sel = candidates & (k_lines == i)
        s = np.where(sel, score, np.inf)
        arg = np.argmin(s, axis=1)
        found = np.isfinite(s[np.arange(n_lines), arg])
        pos[i - 1] = np.where(found, arg, -1)
    return pos


def critical_points(phi2, k, valid, axis=1, n_orders=None):
    """Critical point of every order on every line: argmin of ``|phi2|``.

    Returns an int array of shape ``(n_orders, n_lines)``, -1 where the order
    has no valid pixel on that line.
    """
    phi2 = check_raster(phi2, "phi2")
    kk, kvalid, n_default = _orders(k)
    valid = check_mask(valid, phi2.shape) & kvalid
    n_orders = n_default if n_orders is None else n_orders
    score = np.abs(_lines(phi2, axis))
    return _argmin_per_line(score, _lines(valid, axis), n_orders, _lines(kk, axis))


def correct_critical(points, k, valid, edge_radius, phi2, axis=1):
    """Move critical points out of the order edge set ``E(i)``.

    A critical point lying within `edge_radius` of a pixel with a different or
    invalid order is replaced by the minimal-``|phi2|`` pixel of the same
    order and line outside ``E(i)``; if there is none the entry becomes -1
    (unusable).
    """
    points = np.asarray(points, dtype=np.int64)
    phi2 = check_raster(phi2, "phi2")
    kk, kvalid, _ = _orders(k)
    valid = check_mask(valid, phi2.shape) & kvalid
    E = _lines(edge_set(kk, valid, edge_radius), axis)
    if not E.any():
        return points.copy()
    n_orders = points.shape[0]
    has = points >= 0
    in_edge = np.zeros_like(has)
    in_edge[has] = E[np.nonzero(has)[1], points[has]]
    if not in_edge.any():
        return points.copy()
    score = np.abs(_lines(phi2, axis))
    interior = _argmin_per_line(score, _lines(valid, axis) & ~E, n_orders, _lines(kk, axis))
    out = points.copy()
    out[in_edge] = interior[in_edge]
    return out


def divide_regions(triple, k, ref, spec=None, edge_radius=2, correct=True, axis=None):
    """Tripartite regional division of every fringe order.

    Parameters
    ----------
    triple : WrappedTriple
    k : OrderMap
    ref : ReferencePhase
    spec : PatternSpec, optional
        Supplies the phase axis (``axis`` overrides it; default columns).
    edge_radius : int
        Width of the order edge set used by the critical-point correction.
    correct : bool
        Apply the critical-point correction.

    Returns
    -------
    RegionLabels
    """
    if axis is None:
        axis = spec.axis if spec is not None else 1
    phi2 = triple.phi2
    phi_ref = check_raster(ref.phi_ref, "phi_ref")
    kk, kvalid, n_orders = _orders(k)
    check_same_shape(phi2, kk, phi_ref, names=("phi2", "k", "phi_ref"))
    with np.errstate(invalid="ignore"):
        valid = triple.valid & kvalid & np.isfinite(phi_ref) & np.isfinite(phi2)
        mid = valid & (np.abs(phi2) < np.pi / 3)

    pts = critical_points(phi2, kk, valid, axis=axis, n_orders=n_orders)
    raw_present = pts >= 0
    if correct:
        pts = correct_critical(pts, kk, valid, edge_radius, phi2, axis=axis)

    L = _lines(phi_ref, axis)
    n_lines = L.shape[0]
    line_idx = np.arange(n_lines)
    thresholds = np.full(pts.shape, np.nan)
    ok = pts >= 0
    thresholds[ok] = L[np.nonzero(ok)[1], pts[ok]]

    k_l = _lines(kk, axis)
    v_l = _lines(valid, axis)
    th = np.full(k_l.shape, np.nan)
    rows = np.broadcast_to(line_idx[:, None], k_l.shape)
    th[v_l] = thresholds[k_l[v_l] - 1, rows[v_l]]
    usable = _lines(valid, axis) & np.isfinite(th)

    label_l = np.zeros(k_l.shape, dtype=np.int8)
    mid_l = _lines(mid, axis)
    with np.errstate(invalid="ignore"):
        # A pixel equal to the threshold goes low, except when it lies past
        # the period center (phi2 > 0): that happens at the critical point of
        # an order cut off before its middle third, whose visible pixels are
        # all high.
        tie_high = (L == th) & (_lines(phi2, axis) > 0)
        high_l = usable & ~mid_l & ((L > th) | tie_high)
        low_l = usable & ~mid_l & ~high_l
    label_l[low_l] = LOW
    label_l[high_l] = HIGH
    label_l[usable & mid_l] = MID
    label = label_l if axis == 1 else label_l.T
    unusable = int((raw_present & ~ok).sum())
    return RegionLabels(
        label=np.ascontiguousarray(label),
        thresholds=thresholds,
        critical_points=pts,
        unusable=unusable,
    )


def unwrap_tripu(triple, k, regions):
    """Absolute phase from the region-matched wrapped phase.

    ``phi1 + 2*pi*k - 2*pi/3`` on low pixels, ``phi2 + 2*pi*k`` on middle
    pixels, ``phi3 + 2*pi*k + 2*pi/3`` on high pixels and NaN elsewhere.
    """
    kk, _, _ = _orders(k)
    label = np.asarray(regions.label)
    check_same_shape(triple.phi2, kk, label, names=("phi", "k", "label"))
    Phi = np.full(label.shape, np.nan)
    low = label == LOW
    mid = label == MID
    high = label == HIGH
    Phi[low] = triple.phi1[low] + TWO_PI * kk[low] - THIRD_TURN
    Phi[mid] = triple.phi2[mid] + TWO_PI * kk[mid]
    Phi[high] = triple.phi3[high] + TWO_PI * kk[high] + THIRD_TURN
    return Phi


def unwrap_traditional(phi2, k):
    """Baseline ``phi2 + 2*pi*k``; NaN where either input is invalid."""
    phi2 = check_raster(phi2, "phi2")
    kk, valid, _ = _orders(k)
    check_same_shape(phi2, kk, names=("phi2", "k"))
    return np.where(valid, phi2 + TWO_PI * kk, np.nan)


def _orders_from_low(phi_high, Phi_low, f_h):
    """Order of `phi_high` predicted from an unambiguous unit-frequency phase."""
    return np.round((f_h * Phi_low - phi_high + np.pi) / TWO_PI)


def unwrap_two_frequency(phi_high, phi_unit, f_h):
    """Hierarchical two-frequency unwrapping.

    `phi_unit` comes from a one-period pattern set, so
    ``Phi_low = mod(phi_unit + pi, 2*pi)`` is already absolute. The order is
    ``round((f_h*Phi_low - phi_high + pi) / (2*pi))``, which numbers periods
    from 1 like the Gray-code order.
    """
    phi_high = check_raster(phi_high, "phi_high")
    phi_unit = check_raster(phi_unit, "phi_unit")
    check_same_shape(phi_high, phi_unit, names=("phi_high", "phi_unit"))
    Phi_low = np.mod(phi_unit + np.pi, TWO_PI)
    k = _orders_from_low(phi_high, Phi_low, f_h)
    return phi_high + TWO_PI * k


def unwrap_two_wavelength(phi_15, phi_16, f_h=16):
    """Heterodyne unwrapping from phases at ``f_h - 1`` and ``f_h`` periods.

    The beat ``mod(phi_16 - phi_15, 2*pi)`` has one period over the field and
    serves as the unit-frequency phase for :func:`unwrap_two_frequency`.
    """
    phi_15 = check_raster(phi_15, "phi_15")
    phi_16 = check_raster(phi_16, "phi_16")
    check_same_shape(phi_15, phi_16, names=("phi_15", "phi_16"))
    Phi_eq = np.mod(wrap(phi_16 - phi_15), TWO_PI)
    k = _orders_from_low(phi_16, Phi_eq, f_h)
    return phi_16 + TWO_PI * k


def labels_to_image(label):
    """Region labels as normalized gray levels (64/128/192 of 255, invalid 0)."""
    label = np.asarray(label)
    out = np.zeros(label.shape)
    for code, level in LABEL_PGM_LEVELS.items():
        out[label == code] = level / 255.0
    return out
