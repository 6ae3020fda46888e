"""Three-step phase-shifting analysis."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_raster, check_same_shape

__all__ = ["wrap", "wrapped_phase", "WrappedTriple", "wrapped_triple", "background", "modulation"]

SQRT3 = np.sqrt(3.0)
THIRD_TURN = 2 * np.pi / 3


def wrap(x):
    """Wrap angles into ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=np.float64), 2 * np.pi)


def wrapped_phase(I1, I2, I3):
    """Wrapped phase ``atan2(sqrt(3)*(I1 - I3), 2*I2 - I1 - I3)`` in ``(-pi, pi]``.

    Pixels where numerator and denominator both vanish (no modulation) are NaN.
    """
    I1 = check_raster(I1, "I1")
    I2 = check_raster(I2, "I2")
    I3 = check_raster(I3, "I3")
    check_same_shape(I1, I2, I3, names=("I1", "I2", "I3"))
    num = SQRT3 * (I1 - I3)
    den = 2 * I2 - I1 - I3
    phi = np.arctan2(num, den)
    phi = np.where(phi <= -np.pi, np.pi, phi)
    return np.where((num == 0) & (den == 0), np.nan, phi)


def background(I1, I2, I3):
    return (np.asarray(I1) + np.asarray(I2) + np.asarray(I3)) / 3.0


def modulation(I1, I2, I3):
    I1, I2, I3 = (np.asarray(a, dtype=np.float64) for a in (I1, I2, I3))
    return np.sqrt(3 * (I1 - I3) ** 2 + (2 * I2 - I1 - I3) ** 2) / 3.0


@dataclass(frozen=True)
class WrappedTriple:
    """Three staggered wrapped phases plus background, modulation and validity.

    ``phi1 = wrap(phi2 + 2*pi/3)`` and ``phi3 = wrap(phi2 - 2*pi/3)`` at every
    valid pixel; all three are NaN where ``valid`` is False.
    """

    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    A: np.ndarray
    B: np.ndarray
    valid: np.ndarray

    @property
    def shape(self):
        return self.phi2.shape


def wrapped_triple(I1, I2, I3, b_threshold=0.02):
    """Compute the three rotated-sequence wrapped phases.

    Parameters
    ----------
    I1, I2, I3 : ndarray
        Captured phase-shifted frames, normalized intensity.
    b_threshold : float
        Pixels with modulation ``B < b_threshold`` are invalid.
    """
    I1 = check_raster(I1, "I1")
    I2 = check_raster(I2, "I2")
    I3 = check_raster(I3, "I3")
    check_same_shape(I1, I2, I3, names=("I1", "I2", "I3"))
    with np.errstate(invalid="ignore"):
        A = background(I1, I2, I3)
        B = modulation(I1, I2, I3)
        phi1 = wrapped_phase(I2, I3, I1)
        phi2 = wrapped_phase(I1, I2, I3)
        phi3 = wrapped_phase(I3, I1, I2)
        valid = (B >= b_threshold) & np.isfinite(phi1) & np.isfinite(phi2) & np.isfinite(phi3)
    nan = np.nan
    return WrappedTriple(
        phi1=np.where(valid, phi1, nan),
        phi2=np.where(valid, phi2, nan),
        phi3=np.where(valid, phi3, nan),
        A=A,
        B=B,
        valid=valid,
    )
