"""Synthetic projector-camera forward model.

Projector and camera share one pixel grid. A surface at height ``h`` shifts
the phase seen by a camera pixel by ``dphi(h) = K*h/(1 + h/L) + q*h**2``,
realized as a lateral displacement of the projected pattern along the phase
axis. Each capture is then blurred (defocus), scaled by reflectivity, given
seeded Gaussian noise and clamped to ``[0, 1]``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from ._validation import check_nonnegative, check_positive
from .patterns import dither_binarize, gen_sinusoid, gray_fn, sinusoid_fn
from .sequence import Frame

__all__ = [
    "SceneObject",
    "Plane",
    "Steps",
    "SphereCap",
    "Composite",
    "OpticalModel",
    "truth_phase_shift",
    "height_for_phase_shift",
    "pattern_bank",
    "render_capture",
    "gen_capture_sequence",
    "reference_phase",
    "truth_absolute_phase",
    "absolute_phase_from_height",
    "shadow_mask",
]


@dataclass(frozen=True)
class SceneObject:
    """Base scene: a height field drifting along the phase axis.

    `velocity` (keyword-only) is in pixels per frame; the height seen at
    frame ``t`` is the static height sampled ``velocity * t`` pixels upstream.
    """

    velocity: float = field(default=0.0, kw_only=True)

    def height_map(self, shape, t=0.0, axis=1, mm_per_px=1.0):
        h, w = shape
        ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
        return self._at(xs, ys, t, axis, mm_per_px)

    def _at(self, xs, ys, t, axis, mm_per_px):
        drift = self.velocity * t
        if drift:
            if axis == 1:
                xs = xs - drift
            else:
                ys = ys - drift
        return self._height(xs, ys, axis, mm_per_px, t)

    def _height(self, xs, ys, axis, mm_per_px, t):
        raise NotImplementedError


@dataclass(frozen=True)
class Plane(SceneObject):
    h: float = 0.0

    def _height(self, xs, ys, axis, mm_per_px, t):
        return np.full(xs.shape, float(self.h))


@dataclass(frozen=True)
class Steps(SceneObject):
    """Bands ``(start_px, end_px, h_mm)`` along the phase axis, 0 elsewhere."""

    bands: tuple = ()

    def __post_init__(self):
        ordered = sorted((float(a), float(b), float(h)) for a, b, h in self.bands)
        for (a0, b0, _), (a1, _, _) in zip(ordered, ordered[1:]):
            if a1 < b0:
                raise ValueError(f"step bands overlap: [{a0}, {b0}) and [{a1}, ...)")
        for a, b, h in ordered:
            if b <= a or h < 0:
                raise ValueError(f"invalid step band ({a}, {b}, {h})")
        object.__setattr__(self, "bands", tuple(ordered))

    def _height(self, xs, ys, axis, mm_per_px, t):
        u = xs if axis == 1 else ys
        out = np.zeros(u.shape)
        for a, b, h in self.bands:
            out[(u >= a) & (u < b)] = h
        return out


@dataclass(frozen=True)
class SphereCap(SceneObject):
    """Spherical cap of radius `radius_mm` centered at pixel ``(cx, cy)``.

    The apex is `apex_mm` above the reference plane; heights below 0 clip to 0.
    """

    cx: float = 0.0
    cy: float = 0.0
    radius_mm: float = 10.0
    apex_mm: float = 10.0

    def __post_init__(self):
        check_positive(self.radius_mm, "radius_mm")
        if not 0 < self.apex_mm <= 2 * self.radius_mm:
            raise ValueError(f"apex_mm must be in (0, 2*radius], got {self.apex_mm}")

    def _height(self, xs, ys, axis, mm_per_px, t):
        r2 = ((xs - self.cx) ** 2 + (ys - self.cy) ** 2) * mm_per_px**2
        R = self.radius_mm
        inside = r2 < R * R
        z = np.sqrt(np.where(inside, R * R - r2, 0.0)) + self.apex_mm - R
        return np.where(inside, np.maximum(z, 0.0), 0.0)


@dataclass(frozen=True)
class Composite(SceneObject):
    """Upper envelope of several objects; `velocity` adds to each part's own."""

    parts: tuple = ()

    def _height(self, xs, ys, axis, mm_per_px, t):
        out = np.zeros(xs.shape)
        for p in self.parts:
            out = np.maximum(out, p._at(xs, ys, t, axis, mm_per_px))
        return out


@dataclass(frozen=True)
class OpticalModel:
    """Forward-model parameters.

    Parameters
    ----------
    K : float
        Phase gain at ``h -> 0``, rad/mm.
    L : float
        Divergence scale, mm.
    defocus_sigma : float
        Gaussian blur sigma in pixels.
    noise_sigma : float
        Additive Gaussian noise in normalized intensity units.
    reflectivity : ndarray, optional
        Per-pixel factor in ``(0, 1]``; default 1.
    seed : int
        Noise seed; each frame draws from ``default_rng([seed, frame_index])``.
    quadratic : float
        Extra ``q*h**2`` term in the height-to-phase model (rad/mm^2).
    defocus_slope : float
        Blur sigma changes by this many px per px along the phase axis,
        measured from the middle of the field.
    mm_per_px : float
        Lateral sampling used for scene geometry.
    shadows : bool
        Pixels whose projector ray is intercepted by a higher surface
        upstream receive no light (see :func:`shadow_mask`).
    """

    K: float = 0.1
    L: float = 1000.0
    defocus_sigma: float = 0.0
    noise_sigma: float = 0.0
    reflectivity: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    seed: int = 0
    quadratic: float = 0.0
    defocus_slope: float = 0.0
    mm_per_px: float = 0.2
    shadows: bool = True

    def __post_init__(self):
        check_positive(self.K, "K")
        check_positive(self.L, "L")
        check_nonnegative(self.defocus_sigma, "defocus_sigma")
        check_nonnegative(self.noise_sigma, "noise_sigma")
        check_nonnegative(self.quadratic, "quadratic")
        check_positive(self.mm_per_px, "mm_per_px")
        if self.reflectivity is not None:
            r = np.asarray(self.reflectivity, dtype=np.float64)
            if r.ndim != 2 or not ((r > 0) & (r <= 1)).all():
                raise ValueError("reflectivity must be a 2-D raster with values in (0, 1]")

    @property
    def h_max(self):
        """Heights must stay well below the divergence scale."""
        return 0.5 * self.L


def truth_phase_shift(model, h):
    """Phase shift relative to the reference plane for height(s) `h` in mm."""
    h = np.asarray(h, dtype=np.float64)
    return model.K * h / (1.0 + h / model.L) + model.quadratic * h * h


def height_for_phase_shift(model, dphi):
    """Inverse of :func:`truth_phase_shift` (closed form, ``quadratic == 0`` only)."""
    if model.quadratic:
        raise ValueError("closed-form inverse needs quadratic == 0")
    dphi = np.asarray(dphi, dtype=np.float64)
    return dphi / (model.K - dphi / model.L)


def pattern_bank(spec, dither=True):
    """Projected patterns keyed by role.

    Dithered sinusoids are binary rasters; ideal sinusoids and Gray patterns
    are exact functions of the phase coordinate.
    """
    bank = {}
    for n in (1, 2, 3):
        bank[f"S{n}"] = dither_binarize(gen_sinusoid(spec, n)) if dither else sinusoid_fn(spec, n)
    for b in range(1, spec.n_gray_bits + 1):
        bank[f"G{b}"] = gray_fn(spec, b)
    return bank


def _sample(pattern, pos, spec):
    """Sample `pattern` at fractional phase coordinates `pos` (camera grid).

    Raster pixel ``i`` holds the value at coordinate ``i + 0.5``; samples
    between the outermost centers and the field edge take the edge value.
    """
    axis = spec.axis
    extent = spec.phase_extent
    off = (pos < 0) | (pos > extent)
    if callable(pattern):
        out = np.asarray(pattern(pos), dtype=np.float64)
        return np.where(off, np.nan, out)
    pat = np.asarray(pattern, dtype=np.float64)
    if pat.shape != spec.shape:
        raise ValueError(f"pattern shape {pat.shape} does not match camera grid {spec.shape}")
    p = pat if axis == 1 else pat.T
    q = (pos if axis == 1 else pos.T) - 0.5
    qc = np.clip(q, 0, extent - 1)
    i0 = np.minimum(np.floor(qc).astype(np.int64), extent - 2) if extent > 1 else np.zeros(qc.shape, np.int64)
    frac = qc - i0
    rows = np.arange(p.shape[0])[:, None]
    if extent > 1:
        val = p[rows, i0] * (1 - frac) + p[rows, i0 + 1] * frac
    else:
        val = p[rows, i0]
    val = val if axis == 1 else val.T
    return np.where(off, np.nan, val)


def shadow_mask(pos, axis):
    """Pixels in projector shadow.

    A projector ray reaching coordinate ``p`` stops at the first, highest,
    surface it meets, and higher surfaces see larger coordinates. So a pixel
    whose sampled coordinate lies below the running maximum of the
    coordinates upstream of it along the phase axis is shadowed.
    """
    q = pos if axis == 1 else pos.T
    upstream = np.maximum.accumulate(q, axis=1)
    shadow = np.zeros(q.shape, dtype=bool)
    shadow[:, 1:] = q[:, 1:] < upstream[:, :-1]
    return shadow if axis == 1 else shadow.T


def _blur(img, sigma, slope, spec):
    if sigma <= 0 and slope == 0:
        return img
    nan = np.isnan(img)
    filled = np.where(nan, 0.0, img)
    if slope == 0:
        out = ndimage.gaussian_filter(filled, sigma, mode="nearest")
    else:
        v = spec.coordinate()
        sig = np.maximum(sigma + slope * (v - spec.phase_extent / 2), 0.0)
        levels = np.linspace(sig.min(), sig.max(), max(2, int(np.ceil((sig.max() - sig.min()) / 0.1)) + 1))
        stack = np.stack([ndimage.gaussian_filter(filled, s, mode="nearest") if s > 0 else filled for s in levels])
        pos = np.interp(sig, levels, np.arange(levels.size))
        lo = np.minimum(np.floor(pos).astype(np.int64), levels.size - 2)
        w = pos - lo
        out = np.take_along_axis(stack, lo[None], 0)[0] * (1 - w) + np.take_along_axis(stack, lo[None] + 1, 0)[0] * w
    return np.where(nan, np.nan, out)


def render_capture(scene, t, pattern, spec, model, frame_index=None, heights=None):
    """Render one captured frame.

    Parameters
    ----------
    scene : SceneObject
    t : float
        Frame time (frame index units) used for scene drift.
    pattern : ndarray or callable
        Projected pattern on the shared grid, or a function of the phase
        coordinate evaluated exactly.
    spec : PatternSpec
    model : OpticalModel
    frame_index : int, optional
        Noise stream index; defaults to `t`.
    heights : ndarray, optional
        Precomputed height map for time `t`.

    Returns
    -------
    ndarray
        Intensities in ``[0, 1]``; NaN where the pattern sample falls off-field.
    """
    if heights is None:
        heights = scene.height_map(spec.shape, t, spec.axis, model.mm_per_px)
    pos = spec.coordinate() + truth_phase_shift(model, heights) * spec.period_px / (2 * np.pi)
    img = _sample(pattern, pos, spec)
    if model.shadows:
        img = np.where(shadow_mask(pos, spec.axis), 0.0, img)
    img = _blur(img, model.defocus_sigma, model.defocus_slope, spec)
    if model.reflectivity is not None:
        refl = np.asarray(model.reflectivity, dtype=np.float64)
        if refl.shape != img.shape:
            raise ValueError(f"reflectivity shape {refl.shape} does not match {img.shape}")
        img = img * refl
    if model.noise_sigma > 0:
        idx = int(t if frame_index is None else frame_index)
        rng = np.random.default_rng([int(model.seed), idx])
        img = img + rng.normal(0.0, model.noise_sigma, img.shape)
    return np.clip(img, 0.0, 1.0)


def gen_capture_sequence(scene, schedule, spec, model, dither=True, bank=None):
    """Render every scheduled pattern at its own frame time.

    Returns a list of :class:`~fringeprof.sequence.Frame` whose `data` is the
    captured raster.
    """
    entries = list(schedule)
    if not entries:
        raise ValueError("schedule is empty")
    if bank is None:
        bank = pattern_bank(spec, dither=dither)
    frames = []
    for j, role in enumerate(entries):
        img = render_capture(scene, j, bank[role], spec, model, frame_index=j)
        frames.append(Frame(index=j, role=role, data=img))
    return frames


def reference_phase(spec):
    """Ideal absolute phase of the reference plane, ``2*pi*v/P + pi``.

    Within order ``k`` this equals ``wrap(2*pi*v/P + pi) + 2*pi*k``.
    """
    return 2 * np.pi * spec.coordinate() / spec.period_px + np.pi


def absolute_phase_from_height(heights, spec, model):
    """Ground-truth absolute phase for a height map; NaN where the displaced
    sample leaves the coded span."""
    dphi = truth_phase_shift(model, heights)
    pos = spec.coordinate() + dphi * spec.period_px / (2 * np.pi)
    Phi = reference_phase(spec) + dphi
    off = (pos < 0) | (pos >= spec.n_periods * spec.period_px)
    return np.where(off, np.nan, Phi)


def truth_absolute_phase(scene, t, spec, model):
    """Ground-truth absolute phase at frame time `t`; NaN off-field."""
    heights = scene.height_map(spec.shape, t, spec.axis, model.mm_per_px)
    return absolute_phase_from_height(heights, spec, model)
