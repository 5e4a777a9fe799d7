"""Hypothesis data of the reconstruction problem and its compatibility checks.

An ``ImmersionData`` bundles, over a chart of dimension m, a metric g, a
second fundamental form II valued in a rank-m' bundle, the connection of
that bundle and the matrix field B of components of the global frame
(E_1..E_N transported into the bundle) in the working orthonormal frame.

Working frame: e_1..e_m is the Gram-Schmidt orthonormalization of the
coordinate vectors in g, e_{m+1}..e_N an orthonormal frame of the bundle.
Array conventions:

* ``g[p, 0, i, j]``, ``II[p, 0, i, j, alpha] = <II(d_i, d_j), e_{m+alpha}>``
* ``normal_conn[p, i, alpha, beta] = omega^{m+alpha}_{m+beta}(d_i)``
* ``B[p, 0, k, a] = <E_k, e_a>``
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import Algebra, resolve_algebra
from .forms import DEFAULT_H_FD, Chart, FormError, FormField, exterior_derivative, holonomy_field, wedge
from .frames import (FrameField, _q_form, _u_from_A, christoffel_lambda, covariant_u,
                     residual_report)

__all__ = [
    "ImmersionData",
    "ImmersionDataError",
    "CompatibilityReport",
    "cholesky",
    "tangent_frame",
    "full_connection",
    "hat_tensors",
    "curvature_R_hat",
    "reduced_connection",
    "check_compatibility",
    "load_data",
    "dump_data",
    "TOL_ANALYTIC",
    "TOL_SAMPLED",
    "GATE_FACTOR",
]

TOL_ANALYTIC = 1e-8
TOL_SAMPLED = 1e-4
GATE_FACTOR = 10.0


class ImmersionDataError(ValueError):
    pass


@dataclass
class ImmersionData:
    alg: Algebra
    chart: Chart
    m_prime: int
    g: FormField
    II: FormField
    normal_conn: FormField
    B: FormField
    derivative: str = "auto"
    h_fd: float = DEFAULT_H_FD
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m, mp, N = self.chart.m, self.m_prime, self.alg.dim
        if m + mp != N:
            raise ImmersionDataError(f"m + m' = {m + mp} but the algebra has dimension {N}")
        expect = {"g": (0, (m, m)), "II": (0, (m, m, mp)), "normal_conn": (1, (mp, mp)), "B": (0, (N, N))}
        for key, (deg, shape) in expect.items():
            f = getattr(self, key)
            if f.degree != deg or f.shape != shape or f.m != m:
                raise ImmersionDataError(
                    f"{key}: expected degree {deg} shape {shape}, got degree {f.degree} shape {f.shape}")
            if f.chart is None:
                f.chart = self.chart

    @property
    def m(self) -> int:
        return self.chart.m

    @property
    def dim(self) -> int:
        return self.alg.dim

    @property
    def analytic(self) -> bool:
        """True when every derivative taken is exact or complex-step."""
        if self.derivative == "central":
            return False
        return all(f.derivative is not None or f.holomorphic for f in (self.g, self.II, self.normal_conn, self.B))

    def validate(self, points=None, tol: float = 1e-10) -> dict:
        """Pointwise invariants: g SPD, II symmetric, B orthogonal."""
        pts = self.chart.points() if points is None else points
        g = self.g(pts)[:, 0].real
        if np.max(np.abs(g - np.swapaxes(g, 1, 2)), initial=0.0) > tol:
            raise ImmersionDataError("metric not symmetric")
        if np.any(np.linalg.eigvalsh(g)[:, 0] <= 0):
            raise ImmersionDataError("metric not positive definite at some point")
        II = self.II(pts)[:, 0].real
        sym = float(np.max(np.abs(II - np.swapaxes(II, 1, 2)), initial=0.0))
        if sym > tol:
            raise ImmersionDataError(f"second fundamental form not symmetric ({sym:.2e})")
        B = self.B(pts)[:, 0].real
        orth = float(np.max(np.abs(np.einsum("pka,pkb->pab", B, B) - np.eye(self.dim))))
        if orth > tol:
            raise ImmersionDataError(f"B not orthogonal ({orth:.2e})")
        det = np.linalg.det(B)
        return {"metric_symmetry": 0.0, "II_symmetry": sym, "B_orthogonality": orth,
                "B_det_min": float(det.min()), "B_det_max": float(det.max())}

    def perturbed(self, eps: float, which: str = "diagonal", alpha: int = 0) -> "ImmersionData":
        """Copy with II + eps on the diagonal (or everywhere) of normal component ``alpha``."""
        m, mp = self.m, self.m_prime
        bump = np.zeros((m, m, mp))
        if which == "diagonal":
            bump[range(m), range(m), alpha] = eps
        else:
            bump[..., alpha] = eps
        base = self.II
        der = base.derivative
        II = FormField(0, m, lambda p: base(p) + bump, base.shape, derivative=der,
                       holomorphic=base.holomorphic, chart=base.chart, name="II+eps")
        return ImmersionData(self.alg, self.chart, mp, self.g, II, self.normal_conn, self.B,
                             self.derivative, self.h_fd, name=f"{self.name}+perturbed", meta=dict(self.meta))


# --- tangent frame -----------------------------------------------------------

def cholesky(g: np.ndarray) -> np.ndarray:
    """Lower-triangular L with g = L L^T (no conjugation, complex-step safe)."""
    g = np.asarray(g)
    m = g.shape[-1]
    L = np.zeros_like(g)
    for j in range(m):
        d = g[..., j, j] - np.sum(L[..., j, :j] ** 2, axis=-1)
        if np.any(d.real <= 0):
            raise ImmersionDataError("metric not positive definite at some point")
        L[..., j, j] = np.sqrt(d)
        for i in range(j + 1, m):
            L[..., i, j] = (g[..., i, j] - np.sum(L[..., i, :j] * L[..., j, :j], axis=-1)) / L[..., j, j]
    return L


def _tril_half(X):
    m = X.shape[-1]
    mask = np.tril(np.ones((m, m)), -1) + 0.5 * np.eye(m)
    return X * mask


def tangent_frame(data: ImmersionData, pts, method: str | None = None):
    """(L, P, dL, christoffel) at ``pts``.

    Coframe omega^a(d_i) = L[i, a], frame e_a = sum_k P[k, a] d_k with P = L^{-T}.
    ``christoffel[p, k, i, j] = Gamma^k_{ij}``.
    """
    method = data.derivative if method is None else method
    g = data.g(pts)[:, 0]
    dg = data.g.partials(pts, method, data.h_fd)[:, :, 0]  # (P, m, m, m), axis 1 = derivative
    L = cholesky(g)
    Linv = np.linalg.inv(L)
    P = np.swapaxes(Linv, -1, -2)
    inner = np.einsum("pab,pibc,pdc->piad", Linv, dg, Linv, optimize=True)
    dL = np.einsum("pab,pibc->piac", L, _tril_half(inner))
    ginv = np.linalg.inv(g)
    # Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{lj} + d_j g_{li} - d_l g_{ij})
    t = np.einsum("pilj->plij", dg) + np.einsum("pjli->plij", dg) - dg
    chris = 0.5 * np.einsum("pkl,plij->pkij", ginv, t)
    return L, P, dL, chris


def _full_connection_values(data: ImmersionData, pts, method=None) -> np.ndarray:
    m, N = data.m, data.dim
    L, P, dL, chris = tangent_frame(data, pts, method)
    # d_i P = -P (d_i L)^T P
    dP = -np.einsum("pka,pila,plb->pikb", P, dL, P, optimize=True)
    tan = np.einsum("pak,pikb->piab", np.swapaxes(L, -1, -2),
                    dP + np.einsum("pkij,pjb->pikb", chris, P))
    w = np.zeros((pts.shape[0], m, N, N), dtype=np.result_type(tan, pts))
    w[:, :, :m, :m] = tan
    if data.m_prime:
        II = data.II(pts)[:, 0]
        mixed = np.einsum("pilA,plj->piAj", II, P)  # omega^{m+A}_j(d_i)
        w[:, :, m:, :m] = mixed
        w[:, :, :m, m:] = -np.swapaxes(mixed, -1, -2)
        w[:, :, m:, m:] = data.normal_conn(pts)
    return w


def full_connection(data: ImmersionData, method: str | None = None) -> FormField:
    """Connection matrix 1-form of the working frame (tangent, mixed and normal blocks)."""
    method = data.derivative if method is None else method
    N = data.dim
    resolved = data.g._resolve(method)
    holo = (resolved != "complex" and data.g.holomorphic and data.II.holomorphic
            and data.normal_conn.holomorphic)
    return FormField(1, data.m, lambda p: _full_connection_values(data, p, resolved), (N, N),
                     holomorphic=holo, chart=data.chart, name="omega")


def data_coframe(data: ImmersionData) -> FormField:
    """Working co-frame as a length-N vector 1-form (zero in the bundle slots)."""
    m, N = data.m, data.dim

    def prov(p):
        L = cholesky(data.g(p)[:, 0])
        out = np.zeros((p.shape[0], m, N), dtype=L.dtype)
        out[:, :, :m] = L
        return out

    return FormField(1, m, prov, (N,), holomorphic=data.g.holomorphic, chart=data.chart, name="coframe")


def hat_tensors(data: ImmersionData, conn: FormField | None = None) -> dict:
    """u-hat, U-hat (0-forms), lambda-hat (1-form) and Q-hat (2-form)."""
    alg, B = data.alg, data.B
    N, n, nz = alg.dim, alg.n, alg.n_prime
    conn = full_connection(data) if conn is None else conn
    cof = data_coframe(data)
    frame = FrameField(alg, B, cof, data.chart, dA=FormField.zero(1, data.m, (N, N)))
    U = B.map(lambda b: b[..., n:, :], shape=(nz, N), name="U_hat")
    u = FormField(0, data.m, lambda p: _u_from_A(alg, B(p)), (nz, N, N), holomorphic=B.holomorphic,
                  chart=data.chart, name="u_hat")
    lam = christoffel_lambda(frame)
    nu = covariant_u(u, conn, data.derivative, data.h_fd)
    Q = _q_form(alg, B, cof, nu)
    return {"U": U, "u": u, "lambda": lam, "Q": Q, "nabla_u": nu}


def curvature_R_hat(data: ImmersionData, conn: FormField | None = None) -> FormField:
    conn = full_connection(data) if conn is None else conn
    return exterior_derivative(conn, data.derivative, data.h_fd) + wedge(conn, conn)


def reduced_connection(data: ImmersionData, conn: FormField | None = None, lam: FormField | None = None) -> FormField:
    """omega-hat = omega - lambda-hat, the connection of the gauge equation."""
    conn = full_connection(data) if conn is None else conn
    if lam is None:
        lam = hat_tensors(data, conn)["lambda"]
    return conn - lam


# --- compatibility -----------------------------------------------------------

@dataclass
class CompatibilityReport:
    gauss_codazzi_ricci_residual: float
    killing_residual: float
    flatness_residual: float
    zero_curvature_residual: float
    tolerance: float
    flatness_gate: float
    analytic: bool
    details: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict, repr=False)

    @property
    def compatible(self) -> bool:
        return (self.gauss_codazzi_ricci_residual <= self.tolerance
                and self.killing_residual <= self.tolerance)

    @property
    def flat(self) -> bool:
        return self.flatness_residual <= self.flatness_gate

    @property
    def passed(self) -> bool:
        return self.compatible and self.flat

    def as_dict(self) -> dict:
        return {
            "gauss_codazzi_ricci_residual": self.gauss_codazzi_ricci_residual,
            "killing_residual": self.killing_residual,
            "flatness_residual": self.flatness_residual,
            "zero_curvature_residual": self.zero_curvature_residual,
            "tolerance": self.tolerance,
            "flatness_gate": self.flatness_gate,
            "analytic": self.analytic,
            "pass": {
                "gauss_codazzi_ricci": self.gauss_codazzi_ricci_residual <= self.tolerance,
                "killing": self.killing_residual <= self.tolerance,
                "flatness": self.flat,
                "all": self.passed,
            },
            "legend": {
                "killing": "local unsplit form: dU^k_a - sum_b U^k_b w^b_a - 1/2 sum_b u^k_ab w^b, on e_1..e_m",
                "flatness": "max over cells of |H - I|_F for w_hat = w - lambda_hat",
                "zero_curvature": "sup |d w_hat + w_hat ^ w_hat| on (e_1, e_2)",
            },
            "details": self.details,
        }


def _on_frame_2form(vals: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Evaluate a 2-form (coefficient of dx ^ dy) on (e_1, e_2)."""
    det = P[:, 0, 0] * P[:, 1, 1] - P[:, 1, 0] * P[:, 0, 1]
    return vals[:, 0] * det.reshape((-1,) + (1,) * (vals.ndim - 2))


def check_compatibility(data: ImmersionData, tol_analytic: float = TOL_ANALYTIC,
                        tol_sampled: float = TOL_SAMPLED, gate_factor: float = GATE_FACTOR,
                        points=None) -> CompatibilityReport:
    """Gauss-Codazzi-Ricci, Killing and flatness residuals over the chart grid."""
    pts = data.chart.points() if points is None else np.atleast_2d(points)
    analytic = data.analytic
    tol = tol_analytic if analytic else tol_sampled
    conn = full_connection(data)
    hats = hat_tensors(data, conn)
    _, P, _, _ = tangent_frame(data, pts)
    m = data.m
    details = {}

    if m >= 2:
        R = curvature_R_hat(data, conn)(pts)
        Q = hats["Q"](pts)
        gcr = _on_frame_2form(R - Q, P).real
        rep = residual_report("gauss_codazzi_ricci", gcr, pts, tol)
        details["gauss_codazzi_ricci"] = rep
        details["R_hat_skew"] = float(np.max(np.abs(R + np.swapaxes(R, -1, -2))))
    else:
        rep = residual_report("gauss_codazzi_ricci", np.zeros((len(pts), 1)), pts, tol)
        details["gauss_codazzi_ricci"] = rep
    gcr_res = rep["sup_residual"]

    U = hats["U"]
    dU = exterior_derivative(U, data.derivative, data.h_fd)(pts)
    Uv = U(pts)[:, 0]
    uv = hats["u"](pts)[:, 0]
    w = conn(pts)
    cof = data_coframe(data)(pts)
    kil = (dU - np.einsum("pkb,piba->pika", Uv, w)
           - 0.5 * np.einsum("pkab,pib->pika", uv, cof))
    kil_e = np.einsum("pika,pij->pjka", kil, P).real
    krep = residual_report("killing", kil_e, pts, tol)
    fields = {"points": pts.real, "killing": np.abs(kil_e).reshape(len(pts), -1).max(axis=1, initial=0.0)}
    if m >= 2:
        fields["gauss_codazzi_ricci"] = np.abs(gcr).reshape(len(pts), -1).max(axis=1, initial=0.0)
    details["killing"] = krep

    what = conn - hats["lambda"]
    h = data.chart.h
    gate = gate_factor * h**3
    if m >= 2:
        H = holonomy_field(what, data.chart)
        dev = np.linalg.norm(H - np.eye(data.dim), axis=(-2, -1)).real
        idx = np.unravel_index(int(np.argmax(dev)), dev.shape)
        flat_res = float(dev[idx])
        details["flatness"] = {"check": "flatness", "sup_residual": flat_res,
                               "argmax_cell": [int(i) for i in idx], "tolerance": gate,
                               "pass": bool(flat_res <= gate)}
        zc = curvature_R_hat_like(what, data)(pts)
        zrep = residual_report("zero_curvature", _on_frame_2form(zc, P).real, pts, tol)
        details["zero_curvature"] = zrep
        zc_res = zrep["sup_residual"]
    else:
        flat_res = 0.0
        zc_res = 0.0
        details["flatness"] = {"check": "flatness", "sup_residual": 0.0, "tolerance": gate, "pass": True,
                               "note": "connections on one-dimensional charts are flat"}
    return CompatibilityReport(gcr_res, krep["sup_residual"], flat_res, zc_res, tol, gate, analytic, details, fields)


def curvature_R_hat_like(conn: FormField, data: ImmersionData) -> FormField:
    return exterior_derivative(conn, data.derivative, data.h_fd) + wedge(conn, conn)


# --- serialization -----------------------------------------------------------

def dump_data(data: ImmersionData, path=None, algebra_ref: str | None = None) -> dict:
    """``data.json``: chart header, algebra reference and grid samples of every provider."""
    payload = {
        "format": "nilframe.immersion_data/1",
        "name": data.name,
        "algebra": algebra_ref or data.alg.to_dict(),
        "chart": data.chart.as_dict(),
        "m_prime": data.m_prime,
        "g": data.g.sample(data.chart)[..., 0, :, :].real.tolist(),
        "II": data.II.sample(data.chart)[..., 0, :, :, :].real.tolist(),
        "normal_conn": data.normal_conn.sample(data.chart).real.tolist(),
        "B": data.B.sample(data.chart)[..., 0, :, :].real.tolist(),
    }
    if data.meta.get("surface"):
        payload["surface"] = data.meta["surface"]
    if path is not None:
        Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")
    return payload


def load_data(source, h_fd: float = DEFAULT_H_FD) -> ImmersionData:
    """Read ``data.json`` (path or dict).

    ``{"surface": "builtin:<name>"}`` selects a catalog immersion with
    analytic providers; otherwise the grid samples are interpolated.
    """
    if isinstance(source, (str, Path)):
        try:
            payload = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ImmersionDataError(f"{source}: not valid JSON ({exc})") from exc
    else:
        payload = dict(source)
    if "g" not in payload and isinstance(payload.get("surface"), str):
        from .forward import catalog_immersion, extract_data

        chart = Chart.from_dict(payload["chart"]) if "chart" in payload else None
        return extract_data(catalog_immersion(payload["surface"], chart=chart))
    try:
        alg = payload["algebra"]
        alg = resolve_algebra(alg) if isinstance(alg, str) else Algebra.from_entries(alg["n"], alg["n_prime"], alg.get("sigma", []))
        chart = Chart.from_dict(payload["chart"])
        mp = int(payload["m_prime"])
        m, N = chart.m, alg.dim
        g = np.asarray(payload["g"], dtype=float)
        II = np.asarray(payload["II"], dtype=float).reshape(chart.shape + (m, m, mp))
        nc = np.asarray(payload["normal_conn"], dtype=float).reshape(chart.shape + (m, mp, mp))
        B = np.asarray(payload["B"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ImmersionDataError(f"malformed data.json: {exc}") from exc
    try:
        fields = dict(
            g=FormField.from_samples(chart, 0, g[..., None, :, :]),
            II=FormField.from_samples(chart, 0, II[..., None, :, :, :]),
            normal_conn=FormField.from_samples(chart, 1, nc),
            B=FormField.from_samples(chart, 0, B[..., None, :, :]),
        )
    except FormError as exc:
        raise ImmersionDataError(str(exc)) from exc
    return ImmersionData(alg, chart, mp, derivative="central", h_fd=h_fd,
                         name=payload.get("name", "sampled"), **fields)
