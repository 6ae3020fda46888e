"""Projected pattern generation: phase-shifted sinusoids and Gray codes.

All patterns share one convention. The phase coordinate ``v`` runs along
``PatternSpec.phase_axis`` and pixel ``i`` covers ``[i, i + 1)``, so it is
sampled at its center ``v = i + 0.5``. Fringe order ``k(v) = floor(v / P) + 1``
is 1-based. With the default ``phi0 = pi/3`` the wrapped phase recovered by
:func:`fringeprof.fringe.wrapped_phase` is ``wrap(2*pi*v/P + pi)``: its branch
cut sits exactly on the Gray codeword boundaries ``v = m*P`` and its zero on
the period centers. Because samples sit at pixel centers, no pixel of an
integer-period pattern lies on a branch cut. Coordinates past
``n_periods * P`` are dark in every pattern.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PatternSpec",
    "CodewordTable",
    "gray_encode",
    "gray_decode",
    "bayer_matrix",
    "gen_sinusoid",
    "sinusoid_fn",
    "gray_fn",
    "dither_binarize",
    "gen_gray_pattern",
    "build_codeword_table",
    "gen_pattern_stack",
    "verify_alignment",
]


@dataclass(frozen=True)
class PatternSpec:
    """Geometry of the projected pattern stack.

    Parameters
    ----------
    period_px : float
        Pixels per fringe period ``P`` (>= 8).
    n_periods : int
        Number of periods, at most ``2**n_gray_bits``.
    n_gray_bits : int
        Number of Gray-code patterns ``N``.
    phase_axis : {"x", "y"}
        ``"x"``: phase increases along columns (axis 1); ``"y"``: along rows.
    phi0 : float
        Initial phase offset in radians.
    proj_width, proj_height : int, optional
        Pattern size. The extent along the phase axis defaults to
        ``ceil(n_periods * period_px)``; the other extent defaults to 1.
    """

    period_px: float
    n_periods: int
    n_gray_bits: int
    phase_axis: str = "x"
    phi0: float = np.pi / 3
    proj_width: int = None
    proj_height: int = None

    def __post_init__(self):
        if self.phase_axis not in ("x", "y"):
            raise ValueError(f"phase_axis must be 'x' or 'y', got {self.phase_axis!r}")
        if not self.period_px >= 8:
            raise ValueError(f"period_px must be >= 8, got {self.period_px}")
        if not 1 <= self.n_gray_bits <= 16:
            raise ValueError(f"n_gray_bits must be in [1, 16], got {self.n_gray_bits}")
        if not 1 <= self.n_periods <= 2**self.n_gray_bits:
            raise ValueError(
                f"n_periods={self.n_periods} cannot be labeled by {self.n_gray_bits} Gray bits"
            )
        extent = int(np.ceil(self.n_periods * self.period_px - 1e-9))
        width, height = self.proj_width, self.proj_height
        if self.phase_axis == "x":
            width = extent if width is None else width
            height = 1 if height is None else height
        else:
            height = extent if height is None else height
            width = 1 if width is None else width
        object.__setattr__(self, "proj_width", int(width))
        object.__setattr__(self, "proj_height", int(height))
        if self.proj_width < 1 or self.proj_height < 1:
            raise ValueError("projector dimensions must be >= 1")
        if self.n_periods * self.period_px > self.phase_extent + 1e-9:
            raise ValueError(
                f"{self.n_periods} periods of {self.period_px} px exceed the "
                f"{self.phase_extent} px phase extent"
            )

    @property
    def shape(self):
        return (self.proj_height, self.proj_width)

    @property
    def phase_extent(self):
        return self.proj_width if self.phase_axis == "x" else self.proj_height

    @property
    def axis(self):
        """numpy axis index along which the phase increases."""
        return 1 if self.phase_axis == "x" else 0

    def coordinate(self):
        """Phase-axis coordinate ``v`` of every pixel center, shape ``(height, width)``."""
        h, w = self.shape
        if self.phase_axis == "x":
            return np.broadcast_to(np.arange(w, dtype=np.float64)[None, :] + 0.5, (h, w))
        return np.broadcast_to(np.arange(h, dtype=np.float64)[:, None] + 0.5, (h, w))

    def lit(self):
        """Pixels inside the coded span ``0 <= v < n_periods * P``."""
        return self.coordinate() < self.n_periods * self.period_px

    def with_periods(self, n_periods, period_px=None):
        """Same geometry with a different fringe frequency (used by baselines)."""
        if period_px is None:
            period_px = self.n_periods * self.period_px / n_periods
        return PatternSpec(
            period_px=period_px,
            n_periods=n_periods,
            n_gray_bits=self.n_gray_bits,
            phase_axis=self.phase_axis,
            phi0=self.phi0,
            proj_width=self.proj_width,
            proj_height=self.proj_height,
        )

    def to_manifest(self):
        return {
            "period_px": repr(float(self.period_px)),
            "n_periods": str(self.n_periods),
            "n_gray_bits": str(self.n_gray_bits),
            "phase_axis": self.phase_axis,
            "phi0": repr(float(self.phi0)),
            "proj_width": str(self.proj_width),
            "proj_height": str(self.proj_height),
        }

    @classmethod
    def from_manifest(cls, d):
        return cls(
            period_px=float(d["period_px"]),
            n_periods=int(d["n_periods"]),
            n_gray_bits=int(d["n_gray_bits"]),
            phase_axis=d.get("phase_axis", "x"),
            phi0=float(d.get("phi0", np.pi / 3)),
            proj_width=int(d["proj_width"]),
            proj_height=int(d["proj_height"]),
        )


def gray_encode(b):
    """Reflected-binary Gray codeword of integer(s) `b`."""
    b = np.asarray(b, dtype=np.int64)
    return b ^ (b >> 1)


def gray_decode(g, n_bits):
    """Inverse of :func:`gray_encode` (prefix XOR over `n_bits`)."""
    g = np.asarray(g, dtype=np.int64)
    b = g.copy()
    shift = 1
    while shift < n_bits:
        b ^= b >> shift
        shift <<= 1
    return b


@dataclass(frozen=True)
class CodewordTable:
    """Lookup between decoded value ``V`` and 1-based fringe order ``k``.

    ``k_to_v[k - 1]`` is ``V(k)`` and ``v_to_k[V]`` its inverse.
    """

    n_bits: int
    k_to_v: np.ndarray = field(repr=False)
    v_to_k: np.ndarray = field(repr=False)

    def lookup(self, V):
        """Map decoded values to orders; values outside the table map to 0."""
        V = np.asarray(V, dtype=np.int64)
        inside = (V >= 0) & (V < self.v_to_k.size)
        return np.where(inside, self.v_to_k[np.clip(V, 0, self.v_to_k.size - 1)], 0)

    def __len__(self):
        return self.k_to_v.size


def build_codeword_table(n_bits):
    if not 1 <= n_bits <= 16:
        raise ValueError(f"n_bits must be in [1, 16], got {n_bits}")
    k = np.arange(1, 2**n_bits + 1, dtype=np.int64)
    k_to_v = gray_encode(k - 1)
    v_to_k = np.empty_like(k_to_v)
    v_to_k[k_to_v] = k
    k_to_v.setflags(write=False)
    v_to_k.setflags(write=False)
    return CodewordTable(n_bits=n_bits, k_to_v=k_to_v, v_to_k=v_to_k)


def _check_shift(n):
    if n not in (1, 2, 3):
        raise ValueError(f"shift index must be 1, 2 or 3, got {n}")


def sinusoid_fn(spec, n):
    """Ideal fringe as a function of the (possibly fractional) phase coordinate.

    The returned callable maps ``(v, orth)`` arrays to intensities, so a
    renderer can sample it exactly instead of interpolating a raster.
    """
    _check_shift(n)
    span = spec.n_periods * spec.period_px
    shift = 2 * np.pi * (n - 1) / 3 + spec.phi0

    def f(v, orth=None):
        v = np.asarray(v, dtype=np.float64)
        value = 0.5 + 0.5 * np.cos(2 * np.pi * v / spec.period_px + shift)
        return np.where((v >= 0) & (v < span), value, 0.0)

    return f


def gen_sinusoid(spec, n):
    """Ideal phase-shifted fringe ``0.5 + 0.5*cos(2*pi*v/P + 2*pi*(n-1)/3 + phi0)``."""
    return sinusoid_fn(spec, n)(spec.coordinate())


def bayer_matrix(order=8):
    """Standard recursive Bayer index matrix with entries ``0 .. order**2 - 1``."""
    if order < 1 or order & (order - 1):
        raise ValueError(f"order must be a power of two, got {order}")
    m = np.zeros((1, 1), dtype=np.int64)
    while m.shape[0] < order:
        m = np.block([[4 * m, 4 * m + 2], [4 * m + 3, 4 * m + 1]])
    return m


_BAYER8 = bayer_matrix(8)


def dither_binarize(ideal):
    """Ordered dithering of a ``[0, 1]`` image against a tiled 8x8 Bayer matrix.

    A pixel at row ``y``, column ``x`` is 1 iff
    ``ideal > (bayer[x % 8, y % 8] + 0.5) / 64``.
    """
    ideal = np.asarray(ideal, dtype=np.float64)
    h, w = ideal.shape
    thresholds = (_BAYER8.T + 0.5) / 64.0
    tiled = np.tile(thresholds, (-(-h // 8), -(-w // 8)))[:h, :w]
    return (ideal > tiled).astype(np.float64)


def gray_fn(spec, bit):
    """Gray pattern for `bit` as a function of the phase coordinate."""
    N = spec.n_gray_bits
    if not 1 <= bit <= N:
        raise ValueError(f"bit must be in [1, {N}], got {bit}")
    span = spec.n_periods * spec.period_px

    def f(v, orth=None):
        v = np.asarray(v, dtype=np.float64)
        lit = (v >= 0) & (v < span)
        k = np.floor(np.where(lit, v, 0.0) / spec.period_px).astype(np.int64) + 1
        value = (gray_encode(k - 1) >> (N - bit)) & 1
        return np.where(lit, value, 0).astype(np.float64)

    return f


def gen_gray_pattern(spec, bit):
    """Gray-code pattern for `bit` (1 = most significant).

    The pattern carries bit `bit` of the reflected Gray codeword of order
    ``k(v) = floor(v / P) + 1``; it is constant within each period.
    """
    return gray_fn(spec, bit)(spec.coordinate())


def gen_pattern_stack(spec, dither=True):
    """Full projected stack as ``[(role, raster), ...]``: S1, S2, S3, G1..GN."""
    stack = []
    for n in (1, 2, 3):
        s = gen_sinusoid(spec, n)
        stack.append((f"S{n}", dither_binarize(s) if dither else s))
    for b in range(1, spec.n_gray_bits + 1):
        stack.append((f"G{b}", gen_gray_pattern(spec, b)))
    return stack


def verify_alignment(spec, atol=1e-9):
    """Check branch cuts of the ideal ``phi2`` against codeword boundaries.

    Returns True when, over the coded span, ``phi2 == wrap(2*pi*v/P + pi)``,
    ``|phi2| < pi/3`` exactly on the middle third of every period, and each
    decoded Gray order equals ``floor(v / P) + 1``.
    """
    from .fringe import wrapped_phase, wrap

    v = spec.coordinate()
    lit = spec.lit()
    phi2 = wrapped_phase(*(gen_sinusoid(spec, n) for n in (1, 2, 3)))
    expected = wrap(2 * np.pi * v / spec.period_px + np.pi)
    diff = np.abs(wrap(phi2 - expected))[lit]
    if not np.all(diff < atol):
        return False
    frac = (v / spec.period_px) % 1.0
    far = lit & (np.abs(frac - 1 / 3) > 1e-6) & (np.abs(frac - 2 / 3) > 1e-6)
    middle = (frac > 1 / 3) & (frac < 2 / 3)
    if not np.array_equal((np.abs(phi2) < np.pi / 3)[far], middle[far]):
        return False
    table = build_codeword_table(spec.n_gray_bits)
    V = np.zeros(spec.shape, dtype=np.int64)
    for b in range(1, spec.n_gray_bits + 1):
        V = (V << 1) | gen_gray_pattern(spec, b).astype(np.int64)
    k = table.lookup(V)
    k_true = np.floor(v / spec.period_px).astype(np.int64) + 1
    return bool(np.array_equal(k[lit], k_true[lit]))
