"""scikit-learn style wrappers around the functional core.

``X`` is always a frame stack of shape ``(n_frames, height, width)``.

>>> unwrapper = TriPUUnwrapper(n_gray_bits=4).fit(reference_stack)   # doctest: +SKIP
>>> Phi = unwrapper.transform(object_stack)                           # doctest: +SKIP
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import calibration
from ._validation import check_stack
from .pipeline import unwrap_frames

__all__ = ["TriPUUnwrapper", "PhaseHeightCalibrator"]


def _check_stack(X, n_frames=None, name="X"):
    X = check_stack(X, name=name)
    if n_frames is not None and X.shape[0] != n_frames:
        raise ValueError(f"{name} holds {X.shape[0]} frames, expected {n_frames}")
    return X


class TriPUUnwrapper(TransformerMixin, BaseEstimator):
    """Absolute phase from ``[S1, S2, S3, G1, ..., GN]`` frame stacks.

    :meth:`fit` measures the reference-plane phase from a stack captured off
    the h=0 plane; :meth:`transform` unwraps object stacks against it.

    Parameters
    ----------
    n_gray_bits : int
    phase_axis : {"x", "y"}
    b_threshold : float
        Modulation below which pixels are invalid.
    edge_radius : int
        Edge-set width for the critical-point correction.
    correct : bool
        Apply the critical-point correction.
    method : {"tripu", "traditional"}
        Unwrapping rule; the reference stack is always measured with Tri-PU.

    Attributes
    ----------
    Phi_ref_ : ndarray
        Reference-plane absolute phase.
    """

    def __init__(self, n_gray_bits=4, phase_axis="x", b_threshold=0.02, edge_radius=2, correct=True,
                 method="tripu"):
        self.n_gray_bits = n_gray_bits
        self.phase_axis = phase_axis
        self.b_threshold = b_threshold
        self.edge_radius = edge_radius
        self.correct = correct
        self.method = method

    def _validate_params(self):
        if self.phase_axis not in ("x", "y"):
            raise ValueError(f"phase_axis must be 'x' or 'y', got {self.phase_axis!r}")
        if self.method not in ("tripu", "traditional"):
            raise ValueError(f"method must be 'tripu' or 'traditional', got {self.method!r}")
        if self.n_gray_bits < 1:
            raise ValueError(f"n_gray_bits must be >= 1, got {self.n_gray_bits}")

    @property
    def _axis(self):
        return 1 if self.phase_axis == "x" else 0

    def fit(self, X, y=None):
        self._validate_params()
        X = _check_stack(X, 3 + self.n_gray_bits)
        self.Phi_ref_ = calibration.measure_reference(
            list(X), n_bits=self.n_gray_bits, b_threshold=self.b_threshold, axis=self._axis,
            edge_radius=self.edge_radius,
        )
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "Phi_ref_")
        X = _check_stack(X, 3 + self.n_gray_bits)
        if X.shape[1:] != self.Phi_ref_.shape:
            raise ValueError(f"frame size {X.shape[1:]} does not match the fitted reference {self.Phi_ref_.shape}")
        Phi, _, _ = unwrap_frames(
            X[:3], X[3:], self.Phi_ref_, method=self.method, axis=self._axis, b_threshold=self.b_threshold,
            edge_radius=self.edge_radius, correct=self.correct,
        )
        return Phi

    def regions(self, X):
        """Region labels of the Tri-PU division for stack `X`."""
        check_is_fitted(self, "Phi_ref_")
        X = _check_stack(X, 3 + self.n_gray_bits)
        _, regions, _ = unwrap_frames(
            X[:3], X[3:], self.Phi_ref_, method="tripu", axis=self._axis, b_threshold=self.b_threshold,
            edge_radius=self.edge_radius, correct=self.correct,
        )
        return regions


class PhaseHeightCalibrator(BaseEstimator):
    """Per-pixel ``1/h = u + v/dphi + w/dphi**2`` regression.

    ``fit(X, y)`` takes a stack of phase differences (one per plane) and the
    plane heights; ``predict(X)`` maps one phase-difference raster (or a
    stack) to heights.

    Attributes
    ----------
    model_ : CalibModel
    """

    def __init__(self, eps=calibration.EPS):
        self.eps = eps

    def fit(self, X, y):
        X = _check_stack(X)
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.size != X.shape[0]:
            raise ValueError(f"got {X.shape[0]} phase maps but {y.size} heights")
        planes = [calibration.PlaneMeasurement(h=float(h), delta_phi=d) for h, d in zip(y, X)]
        self.model_ = calibration.fit_phase_height(planes, eps=self.eps)
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            return calibration.apply_phase_height(self.model_, X, eps=self.eps)
        X = _check_stack(X)
        return np.stack([calibration.apply_phase_height(self.model_, d, eps=self.eps) for d in X])

    @property
    def coef_(self):
        """``(u, v, w)`` stacked along axis 0."""
        check_is_fitted(self, "model_")
        return np.stack([self.model_.u, self.model_.v, self.model_.w])

