"""Admissible frames from compatible data, the immersion they integrate to,
and rigid alignment of two reconstructions.

The gauge equation A^{-1} dA = omega_hat is integrated along a spine through
x0 (first chart axis) and then along ribs (second axis), with a classical
RK4 step per grid spacing followed by polar re-orthonormalization.  The
immersion is carried along the same paths: over one step

    f(x + s) = f(x) exp(eta(s)),   eta' = c + [eta, c] / 2,   c = A omega(dx/ds)

which is exact for two-step groups because [eta, [eta, c]] = 0.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import Algebra, bracket
from .forms import Chart
from .group import automorphism_residual, group_inv, group_mul
from .immersion import (GATE_FACTOR, TOL_ANALYTIC, TOL_SAMPLED, CompatibilityReport, ImmersionData,
                        check_compatibility, data_coframe, full_connection, hat_tensors)

__all__ = [
    "GroupPoint",
    "AdmissibleFrameSolution",
    "ReconstructionError",
    "GateRefused",
    "AdmissibilityError",
    "NotCongruentError",
    "solve_gauge",
    "integrate_immersion",
    "align",
    "gauge_residual",
    "write_json",
]


class ReconstructionError(RuntimeError):
    pass


class GateRefused(ReconstructionError):
    """Data failed the compatibility/flatness gate; ``report`` holds the residuals."""

    def __init__(self, report: CompatibilityReport):
        self.report = report
        r = report
        super().__init__(
            "refusing to integrate: "
            f"gauss_codazzi_ricci={r.gauss_codazzi_ricci_residual:.3e}, killing={r.killing_residual:.3e} "
            f"(tol {r.tolerance:.1e}), flatness={r.flatness_residual:.3e} (gate {r.flatness_gate:.3e})")


class AdmissibilityError(ValueError):
    pass


class NotCongruentError(ReconstructionError):
    pass


@dataclass(frozen=True)
class GroupPoint:
    """Exponential coordinates of the first kind, split into v and z parts."""

    xi: np.ndarray
    n: int

    @property
    def v(self) -> np.ndarray:
        return self.xi[: self.n]

    @property
    def z(self) -> np.ndarray:
        return self.xi[self.n :]

    def __mul__(self, other: "GroupPoint"):
        raise TypeError("use group_mul(alg, p, q); the product needs the algebra")


@dataclass
class AdmissibleFrameSolution:
    A: np.ndarray                 # chart.shape + (N, N)
    x0: tuple
    A0: np.ndarray
    chart: Chart
    alg: Algebra
    path_order: str
    report: CompatibilityReport | None = None
    diagnostics: dict = field(default_factory=dict)
    _samples: dict | None = field(default=None, repr=False)

    @property
    def x0_point(self) -> np.ndarray:
        return self.chart.node(self.x0)

    def as_dict(self) -> dict:
        return {
            "x0_index": list(self.x0),
            "x0": self.x0_point.tolist(),
            "A0": self.A0.tolist(),
            "path_order": self.path_order,
            "diagnostics": self.diagnostics,
        }


# --- sampling ---------------------------------------------------------------

def _sample(data: ImmersionData, what, cof) -> dict:
    """omega_hat and co-frame on nodes and on the edge midpoints of both axes."""
    chart = data.chart
    axes = chart.axes()
    out = {}
    sets = {"nodes": axes}
    for ax in range(chart.m):
        mids = list(axes)
        mids[ax] = 0.5 * (axes[ax][1:] + axes[ax][:-1])
        sets[f"mid{ax}"] = mids
    for key, ax_list in sets.items():
        grid = np.stack(np.meshgrid(*ax_list, indexing="ij"), -1)
        pts = grid.reshape(-1, chart.m)
        shp = grid.shape[:-1]
        out[key] = (what(pts).real.reshape(shp + (chart.m,) + what.shape),
                    cof(pts).real.reshape(shp + (chart.m,) + cof.shape))
    return out


def _polar(A: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(A)
    return U @ Vt


def _rk4_step(alg, A, eta, W0, Wh, W1, K0, Kh, K1, h, carry):
    """One step of (A' = A W, eta' = c + [eta, c]/2 with c = A K)."""
    def rhs(Ac, ec, W, K):
        dA = Ac @ W
        if not carry:
            return dA, None
        c = np.einsum("...ka,...a->...k", Ac, K)
        return dA, c + 0.5 * bracket(alg, ec, c)

    k1 = rhs(A, eta, W0, K0)
    A2 = A + 0.5 * h * k1[0]
    e2 = eta + 0.5 * h * k1[1] if carry else None
    k2 = rhs(A2, e2, Wh, Kh)
    A3 = A + 0.5 * h * k2[0]
    e3 = eta + 0.5 * h * k2[1] if carry else None
    k3 = rhs(A3, e3, Wh, Kh)
    A4 = A + h * k3[0]
    e4 = eta + h * k3[1] if carry else None
    k4 = rhs(A4, e4, W1, K1)
    An = A + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    en = eta + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) if carry else None
    return _polar(An), en


def _sweep(alg, A_start, f_start, nodes, mids, axis, start_index, h, carry):
    """Integrate along ``axis`` in both directions from ``start_index``.

    ``nodes`` / ``mids`` hold (W, K) sampled along the axis as the leading
    axis of the arrays (other axes broadcast, one line per rib).
    """
    Wn, Kn = nodes
    Wm, Km = mids
    count = Wn.shape[0]
    A_out = np.empty((count,) + A_start.shape, dtype=float)
    f_out = np.empty((count,) + f_start.shape, dtype=float) if carry else None
    A_out[start_index] = A_start
    if carry:
        f_out[start_index] = f_start
    zero = np.zeros_like(f_start) if carry else None
    for direction in (1, -1):
        A, f = A_start, f_start
        i = start_index
        while 0 <= i + direction < count:
            j = i + direction
            mid = min(i, j)
            hs = direction * h[mid]
            W0, K0 = Wn[i][..., axis, :, :], Kn[i][..., axis, :]
            W1, K1 = Wn[j][..., axis, :, :], Kn[j][..., axis, :]
            Wh, Kh = Wm[mid][..., axis, :, :], Km[mid][..., axis, :]
            A, eta = _rk4_step(alg, A, zero, W0, Wh, W1, K0, Kh, K1, hs, carry)
            if carry:
                f = group_mul(alg, f, eta)
                f_out[j] = f
            A_out[j] = A
            i = j
    return A_out, f_out


def _integrate(data: ImmersionData, samples: dict, A0, x0, f0, path_order: str, carry: bool):
    alg, chart = data.alg, data.chart
    m = chart.m
    steps = [np.diff(a) for a in chart.axes()]
    first = 0 if path_order == "spine-first" or m == 1 else 1
    nodes, mid = samples["nodes"], samples

    def spine_line(arr, ax):
        if m == 1:
            return arr
        idx = [slice(None)] * m
        idx[1 - ax] = x0[1 - ax]
        return arr[tuple(idx)]

    ax = first
    Wn, Kn = nodes
    Wm, Km = mid[f"mid{ax}"]
    spine_nodes = (spine_line(Wn, ax), spine_line(Kn, ax))
    spine_mids = (spine_line(Wm, ax), spine_line(Km, ax))
    f0 = np.asarray(f0, dtype=float) if carry else None
    A_sp, f_sp = _sweep(alg, A0, f0, spine_nodes, spine_mids, ax, x0[ax], steps[ax], carry)
    if m == 1:
        return A_sp, f_sp
    rib = 1 - ax
    # ribs: leading axis = rib axis, second = spine position
    Wn_r = np.moveaxis(Wn, rib, 0)
    Kn_r = np.moveaxis(Kn, rib, 0)
    Wm_r = np.moveaxis(mid[f"mid{rib}"][0], rib, 0)
    Km_r = np.moveaxis(mid[f"mid{rib}"][1], rib, 0)
    A_rib, f_rib = _sweep(alg, A_sp, f_sp, (Wn_r, Kn_r), (Wm_r, Km_r), rib, x0[rib], steps[rib], carry)
    A = np.moveaxis(A_rib, 0, rib)
    f = np.moveaxis(f_rib, 0, rib) if carry else None
    return A, f


def _gate(data, report, tol_analytic, tol_sampled, gate_factor):
    if report is None:
        report = check_compatibility(data, tol_analytic, tol_sampled, gate_factor)
    if not report.passed:
        raise GateRefused(report)
    return report


def _prepare(data: ImmersionData):
    conn = full_connection(data)
    hats = hat_tensors(data, conn)
    what = conn - hats["lambda"]
    return _sample(data, what, data_coframe(data)), hats


def _check_admissible(data: ImmersionData, A0, x0, hats, tol: float = 1e-7):
    alg = data.alg
    A0 = np.asarray(A0, dtype=float)
    N = alg.dim
    if A0.shape != (N, N):
        raise AdmissibilityError(f"A0 has shape {A0.shape}, expected {(N, N)}")
    orth = float(np.max(np.abs(A0.T @ A0 - np.eye(N))))
    if orth > 1e-9:
        raise AdmissibilityError(f"A0 not orthogonal (|A0^T A0 - I| = {orth:.2e})")
    U0 = hats["U"](data.chart.node(x0)[None])[0, 0].real
    dev = float(np.max(np.abs(A0[alg.n:] - U0), initial=0.0))
    if dev > tol:
        raise AdmissibilityError(f"A0 not admissible: last rows differ from U-hat by {dev:.2e}")
    # the horizontal rows must also reproduce u-hat, which fixes the orientation
    u0 = hats["u"](data.chart.node(x0)[None])[0, 0].real
    u_dev = float(np.max(np.abs(A0.T @ alg.center_forms @ A0 - u0), initial=0.0))
    if u_dev > tol:
        raise AdmissibilityError(f"A0 not admissible: A0^T S_k A0 differs from u-hat by {u_dev:.2e}")
    return A0


def solve_gauge(data: ImmersionData, A0=None, x0=None, tol_analytic: float = TOL_ANALYTIC,
                tol_sampled: float = TOL_SAMPLED, gate_factor: float = GATE_FACTOR,
                path_order: str = "spine-first", report: CompatibilityReport | None = None,
                compare_orders: bool = True) -> AdmissibleFrameSolution:
    """Admissible frame A with A^{-1} dA = omega - lambda_hat over the chart grid.

    ``x0`` is a grid index (defaults to the node nearest the chart centre);
    ``A0`` defaults to B(x0).  Raises :class:`GateRefused` when the data are
    incompatible or the plaquette holonomy exceeds ``gate_factor * h^3``.
    """
    if path_order not in ("spine-first", "transposed"):
        raise ValueError(f"unknown path order {path_order!r}")
    report = _gate(data, report, tol_analytic, tol_sampled, gate_factor)
    chart = data.chart
    x0 = chart.center_index() if x0 is None else tuple(int(i) for i in x0)
    samples, hats = _prepare(data)
    if A0 is None:
        A0 = data.B(chart.node(x0)[None])[0, 0].real
    A0 = _check_admissible(data, A0, x0, hats)
    A, _ = _integrate(data, samples, A0, x0, None, path_order, carry=False)
    sol = AdmissibleFrameSolution(A, x0, A0, chart, data.alg, path_order, report, _samples=samples)

    pts = chart.points()
    U = hats["U"](pts)[:, 0].real.reshape(chart.shape + (data.alg.n_prime, data.dim))
    N = data.dim
    diag = {
        "orthogonality": float(np.max(np.abs(np.einsum("...ka,...kb->...ab", A, A) - np.eye(N)))),
        "admissibility": float(np.max(np.abs(A[..., data.alg.n:, :] - U), initial=0.0)),
        "gauge_residual": gauge_residual(sol, samples),
    }
    if compare_orders and chart.m == 2:
        other = "transposed" if path_order == "spine-first" else "spine-first"
        A2, _ = _integrate(data, samples, A0, x0, None, other, carry=False)
        diag["path_swap_A"] = float(np.max(np.abs(A - A2)))
    sol.diagnostics = diag
    return sol


def gauge_residual(sol: AdmissibleFrameSolution, samples: dict | None = None) -> float:
    """sup |dA - A omega_hat| from a fourth-order difference stencil of the solution."""
    samples = sol._samples if samples is None else samples
    W = samples["nodes"][0]
    A = sol.A
    worst = 0.0
    for ax, step in enumerate(sol.chart.spacing):
        if A.shape[ax] < 5:
            continue
        dA = _fd4(A, ax, step)
        res = dA - A @ W[..., ax, :, :]
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def _fd4(A, ax, h):
    """Fourth-order first derivative along ``ax`` (one-sided five-point stencils at the ends)."""
    A = np.moveaxis(A, ax, 0)
    d = np.empty_like(A)
    d[2:-2] = (A[:-4] - 8 * A[1:-3] + 8 * A[3:-1] - A[4:]) / (12 * h)
    c0 = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    c1 = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    d[0] = np.tensordot(c0, A[:5], axes=1)
    d[1] = np.tensordot(c1, A[:5], axes=1)
    d[-1] = -np.tensordot(c0, A[::-1][:5], axes=1)
    d[-2] = -np.tensordot(c1, A[::-1][:5], axes=1)
    return np.moveaxis(d, 0, ax)


def integrate_immersion(sol: AdmissibleFrameSolution, data: ImmersionData, f0=None,
                        path_order: str | None = None) -> np.ndarray:
    """Immersion samples ``chart.shape + (N,)`` in exponential coordinates with f(x0) = f0."""
    order = sol.path_order if path_order is None else path_order
    f0 = np.zeros(data.dim) if f0 is None else np.asarray(f0, dtype=float)
    samples = sol._samples if sol._samples is not None else _prepare(data)[0]
    A, f = _integrate(data, samples, sol.A0, sol.x0, f0, order, carry=True)
    if path_order is None and np.max(np.abs(A - sol.A)) > 1e-12:
        raise ReconstructionError("joint integration drifted from the gauge solution")
    return f


def align(alg: Algebra, f, f_tilde, x0, A=None, A_tilde=None, tol: float = 1e-9) -> dict:
    """Isometry L = (left translation) o (rotation at x0) with f_tilde ~ L o f.

    L(q) = f_tilde(x0) phi_R(f(x0)^{-1} q) where phi_R is the linear map R on
    exponential coordinates and R = A_tilde(x0) A(x0)^T (identity without frames).
    """
    f = np.asarray(f, dtype=float)
    ft = np.asarray(f_tilde, dtype=float)
    if f.shape != ft.shape:
        raise ValueError(f"immersion samples differ in shape: {f.shape} vs {ft.shape}")
    x0 = tuple(x0)
    N, n = alg.dim, alg.n
    if A is None or A_tilde is None:
        R = np.eye(N)
    else:
        R = np.asarray(A_tilde)[x0] @ np.asarray(A)[x0].T
    mu_dev = float(np.max(np.abs(R[n:] - np.eye(N)[n:]), initial=0.0))
    orth = float(np.max(np.abs(R.T @ R - np.eye(N))))
    auto = automorphism_residual(alg, R)
    if mu_dev > tol or orth > tol:
        raise NotCongruentError(
            f"immersions not congruent under the uniqueness hypotheses (centre rows moved by {mu_dev:.2e})")
    p, pt = f[x0], ft[x0]
    moved = group_mul(alg, group_inv(p), f)
    image = group_mul(alg, pt, np.einsum("kl,...l->...k", R, moved))
    dev = np.linalg.norm(image - ft, axis=-1)
    idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
    translation = group_mul(alg, pt, -(R @ p))
    return {
        "isometry": {"translation": translation.tolist(), "rotation": R.tolist(),
                     "left_factor": pt.tolist(), "right_factor": (-p).tolist()},
        "deviation": float(dev[idx]),
        "argmax_index": [int(i) for i in idx],
        "mu_row_deviation": mu_dev,
        "automorphism_residual": auto,
    }


def write_json(payload: dict, path) -> None:
    """Atomic JSON write (temporary file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name, dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def immersion_payload(sol: AdmissibleFrameSolution, f: np.ndarray) -> dict:
    """``immersion.json`` content: grid header, per-point coordinates and frames."""
    return {
        "format": "nilframe.immersion/1",
        "grid": sol.chart.as_dict(),
        "algebra": sol.alg.to_dict(),
        "solution": sol.as_dict(),
        "points": np.asarray(f).tolist(),
        "A": sol.A.tolist(),
    }
