"""Input validation helpers shared by the estimators and the command line."""
from __future__ import annotations

import numbers
import re

import numpy as np

from .algebra import Algebra, resolve_algebra
from .forms import Chart

__all__ = [
    "check_algebra",
    "check_tolerance",
    "check_grid",
    "check_points",
    "check_orthogonal",
    "check_index",
]

_GRID = re.compile(r"^\s*(\d+)\s*(?:[xX]\s*(\d+))?\s*$")


def check_algebra(alg, params=None) -> Algebra:
    """Algebra instance from an instance, ``builtin:<name>`` or a JSON path."""
    if isinstance(alg, Algebra):
        return alg
    if isinstance(alg, str):
        return resolve_algebra(alg, params)
    raise TypeError(f"expected an Algebra or a string reference, got {type(alg).__name__}")


def check_tolerance(tol, name: str = "tol") -> float:
    if not isinstance(tol, numbers.Real) or isinstance(tol, bool):
        raise TypeError(f"{name} must be a real number, got {tol!r}")
    tol = float(tol)
    if not np.isfinite(tol) or tol <= 0:
        raise ValueError(f"{name} must be positive and finite, got {tol}")
    return tol


def check_grid(grid, m: int | None = None) -> tuple[int, ...]:
    """``"RxC"`` / ``"R"`` / sequence -> node counts (each at least 2)."""
    if isinstance(grid, str):
        match = _GRID.match(grid)
        if not match:
            raise ValueError(f"grid must look like 64x64, got {grid!r}")
        shape = tuple(int(g) for g in match.groups() if g is not None)
    else:
        shape = tuple(int(g) for g in grid)
    if m is not None:
        if len(shape) == 2 and m == 1:
            shape = shape[:1]
        elif len(shape) == 1 and m == 2:
            shape = shape * 2
        if len(shape) != m:
            raise ValueError(f"grid {grid!r} does not fit a chart of dimension {m}")
    if any(s < 2 for s in shape):
        raise ValueError(f"grid needs at least 2 nodes per axis, got {shape}")
    return shape


def check_points(points, chart: Chart, allow_outside: bool = False) -> np.ndarray:
    """(P, m) float array of chart points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, chart.m) if chart.m > 1 else pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != chart.m:
        raise ValueError(f"points must have shape (P, {chart.m}), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain NaN or inf")
    if not allow_outside and not np.all(chart.contains(pts)):
        raise ValueError("points outside the chart")
    return pts


def check_orthogonal(A, tol: float = 1e-9, name: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    dev = float(np.max(np.abs(A.T @ A - np.eye(A.shape[0]))))
    if dev > tol:
        raise ValueError(f"{name} not orthogonal (deviation {dev:.2e})")
    return A


def check_index(index, chart: Chart) -> tuple[int, ...]:
    idx = tuple(int(i) for i in np.atleast_1d(index))
    if len(idx) != chart.m or any(not 0 <= i < s for i, s in zip(idx, chart.shape)):
        raise ValueError(f"grid index {idx} outside chart of shape {chart.shape}")
    return idx
