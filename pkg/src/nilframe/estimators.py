"""Estimator-style wrappers around the compatibility check and the reconstruction."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_index, check_orthogonal, check_points, check_tolerance
from .forms import grid_interpolator
from .immersion import GATE_FACTOR, TOL_ANALYTIC, TOL_SAMPLED, ImmersionData, check_compatibility, load_data
from .reconstruction import align, integrate_immersion, solve_gauge

__all__ = ["CompatibilityChecker", "ImmersionReconstructor"]


def _as_data(X) -> ImmersionData:
    if isinstance(X, ImmersionData):
        return X
    if isinstance(X, str) and X.startswith("builtin:"):
        return load_data({"surface": X})
    return load_data(X)


class CompatibilityChecker(BaseEstimator):
    """Gauss-Codazzi-Ricci, Killing and flatness residuals of immersion data.

    ``fit`` takes an ImmersionData, a ``builtin:<surface>`` name or a
    data.json path and stores the report in ``report_``.
    """

    def __init__(self, tol_analytic=TOL_ANALYTIC, tol_sampled=TOL_SAMPLED, gate_factor=GATE_FACTOR):
        self.tol_analytic = tol_analytic
        self.tol_sampled = tol_sampled
        self.gate_factor = gate_factor

    def fit(self, X, y=None):
        check_tolerance(self.tol_analytic, "tol_analytic")
        check_tolerance(self.tol_sampled, "tol_sampled")
        check_tolerance(self.gate_factor, "gate_factor")
        data = _as_data(X)
        self.report_ = check_compatibility(data, self.tol_analytic, self.tol_sampled, self.gate_factor)
        self.residuals_ = {
            "gauss_codazzi_ricci": self.report_.gauss_codazzi_ricci_residual,
            "killing": self.report_.killing_residual,
            "flatness": self.report_.flatness_residual,
        }
        self.passed_ = self.report_.passed
        return self

    def score(self, X=None, y=None) -> float:
        """1.0 when the data pass every check, else 0.0."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "report_")
        return float(self.passed_)


class ImmersionReconstructor(BaseEstimator):
    """Admissible frame and immersion from compatible data.

    After ``fit``: ``solution_`` (frame samples), ``immersion_`` (grid
    samples in exponential coordinates) and ``report_``.  ``predict`` /
    ``transform`` map chart points to group points by cubic interpolation
    of the grid samples (exact on grid nodes).
    """

    def __init__(self, x0=None, A0=None, f0=None, path_order="spine-first", tol_analytic=TOL_ANALYTIC,
                 tol_sampled=TOL_SAMPLED, gate_factor=GATE_FACTOR):
        self.x0 = x0
        self.A0 = A0
        self.f0 = f0
        self.path_order = path_order
        self.tol_analytic = tol_analytic
        self.tol_sampled = tol_sampled
        self.gate_factor = gate_factor

    def fit(self, X, y=None):
        data = _as_data(X)
        x0 = None if self.x0 is None else check_index(self.x0, data.chart)
        A0 = None if self.A0 is None else check_orthogonal(self.A0, name="A0")
        f0 = np.zeros(data.dim) if self.f0 is None else np.asarray(self.f0, dtype=float)
        if f0.shape != (data.dim,):
            raise ValueError(f"f0 must have length {data.dim}")
        sol = solve_gauge(data, A0=A0, x0=x0, tol_analytic=self.tol_analytic, tol_sampled=self.tol_sampled,
                          gate_factor=self.gate_factor, path_order=self.path_order)
        self.data_ = data
        self.solution_ = sol
        self.report_ = sol.report
        self.immersion_ = integrate_immersion(sol, data, f0)
        self.chart_ = data.chart
        self.n_features_in_ = data.m
        method = "cubic" if min(data.chart.shape) >= 4 else "linear"
        flat = self.immersion_.reshape(data.chart.shape + (-1,))
        self._interp = grid_interpolator(data.chart.axes(), flat, method)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "immersion_")
        pts = check_points(X, self.chart_)
        return self._interp(pts)

    def transform(self, X) -> np.ndarray:
        return self.predict(X)

    def fit_transform(self, X, y=None, points=None):
        self.fit(X)
        if points is None:
            return self.immersion_
        return self.predict(points)

    def align_to(self, other: "ImmersionReconstructor") -> dict:
        """Rigid alignment of ``other``'s immersion onto this one's at x0."""
        check_is_fitted(self, "immersion_")
        check_is_fitted(other, "immersion_")
        return align(self.data_.alg, self.immersion_, other.immersion_, self.solution_.x0,
                     self.solution_.A, other.solution_.A)
