"""Ground-truth data from explicitly parametrized immersions.

A ``ParametrizedImmersion`` supplies f, df and d^2 f in exponential
coordinates as complex-safe formulas.  Everything extracted from it
(metric, adapted frame, second fundamental form, normal connection) is an
analytic provider, so the compatibility checks run at full precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algebra import Algebra, builtin
from .forms import Chart, FormField, cached_provider
from .group import _ad, left_invariant_metric, left_invariant_vectors_inverse
from .immersion import ImmersionData
from .invariant import connection_table

__all__ = [
    "ParametrizedImmersion",
    "ForwardError",
    "CATALOG",
    "catalog_immersion",
    "frame_components",
    "extract_data",
    "pullback_metric",
    "local_geometry",
]


class ForwardError(ValueError):
    pass


@dataclass
class ParametrizedImmersion:
    """f: chart -> N with ``F(p) -> (P, N)``, ``dF -> (P, N, m)``, ``d2F -> (P, N, m, m)``."""

    alg: Algebra
    chart: Chart
    F: Callable
    dF: Callable
    d2F: Callable
    name: str = ""
    references: tuple | None = None

    @property
    def m(self) -> int:
        return self.chart.m

    def __call__(self, points) -> np.ndarray:
        return self.F(np.atleast_2d(points))

    def check_rank(self, points=None, tol: float = 1e-6) -> float:
        pts = self.chart.points() if points is None else points
        J = left_invariant_vectors_inverse(self.alg, self.F(pts)) @ self.dF(pts)
        smin = float(np.linalg.svd(J.real, compute_uv=False)[:, -1].min())
        if smin < tol:
            raise ForwardError(f"{self.name}: differential not of full rank (sigma_min = {smin:.2e})")
        return smin


def _gram_schmidt(V: np.ndarray):
    """Q R = V by modified Gram-Schmidt; transpose-only so complex steps pass through."""
    V = np.asarray(V)
    N = V.shape[-1]
    Q = np.zeros_like(V)
    R = np.zeros(V.shape[:-2] + (N, N), dtype=V.dtype)
    for j in range(N):
        v = V[..., :, j]
        for i in range(j):
            r = np.sum(Q[..., :, i] * v, axis=-1)
            R[..., i, j] = r
            v = v - r[..., None] * Q[..., :, i]
        nrm = np.sqrt(np.sum(v * v, axis=-1))
        R[..., j, j] = nrm
        Q[..., :, j] = v / nrm[..., None]
    return Q, R


def _choose_references(J: np.ndarray, count: int) -> tuple:
    """Greedy choice of basis vectors completing the columns of J (one point)."""
    N = J.shape[0]
    basis = [c / np.linalg.norm(c) for c in _gram_schmidt(J[None])[0][0].T]
    chosen = []
    for _ in range(count):
        best, best_norm, best_vec = None, -1.0, None
        for k in range(N):
            if k in chosen:
                continue
            v = np.eye(N)[k]
            for b in basis:
                v = v - (b @ v) * b
            nv = np.linalg.norm(v)
            if nv > best_norm + 1e-12:
                best, best_norm, best_vec = k, nv, v
        chosen.append(best)
        basis.append(best_vec / best_norm)
    return tuple(chosen)


def local_geometry(imm: ParametrizedImmersion, pts) -> dict:
    """Adapted frame, metric and their derivatives at ``pts`` (complex-safe)."""
    alg = imm.alg
    N, m = alg.dim, imm.m
    pts = np.atleast_2d(pts)
    F, dF, d2F = imm.F(pts), imm.dF(pts), imm.d2F(pts)
    Linv = left_invariant_vectors_inverse(alg, F)
    J = Linv @ dF  # J[p, k, i] = theta^k(f_* d_i)
    # d_j J[:, i] = -1/2 ad(d_j F) d_i F + Linv d_j d_i F
    adF = _ad(alg, np.moveaxis(dF, -1, 1))  # (P, j, N, N)
    dJ = -0.5 * np.einsum("pjkr,pri->pjki", adF, dF) + np.einsum("pkr,prij->pjki", Linv, d2F)
    g = np.einsum("pki,pkj->pij", J, J)
    dg = np.einsum("plki,pkj->plij", dJ, J) + np.einsum("pki,plkj->plij", J, dJ)

    refs = imm.references
    if refs is None:
        c = imm.chart.node(imm.chart.center_index())[None]
        Jc = (left_invariant_vectors_inverse(alg, imm.F(c)) @ imm.dF(c))[0].real
        refs = _choose_references(Jc, N - m)
        imm.references = refs
    V = np.concatenate([J, np.broadcast_to(np.eye(N)[:, list(refs)], (pts.shape[0], N, N - m)).astype(J.dtype)],
                       axis=-1)
    Q, R = _gram_schmidt(V)
    dV = np.zeros((pts.shape[0], m) + V.shape[1:], dtype=Q.dtype)
    dV[:, :, :, :m] = dJ
    Rinv = np.linalg.inv(R)
    Cm = np.einsum("pka,pjkb,pbc->pjac", Q, dV, Rinv, optimize=True)
    low = np.tril(Cm, -1)
    dQ = np.einsum("pka,pjab->pjkb", Q, low - np.swapaxes(low, -1, -2))

    C = connection_table(alg)
    # II^alpha_ij = nu_alpha . (d_i J_j + nabla_{J_i} J_j)
    nabla = dJ + np.einsum("kls,psi,plj->pikj", C, J, J, optimize=True)  # [p, i, k, j]
    nu = Q[:, :, m:]
    II = np.einsum("pkA,pikj->pijA", nu, nabla)
    dnu = dQ[:, :, :, m:]
    nabla_nu = dnu + np.einsum("kls,psi,plB->pikB", C, J, nu, optimize=True)
    nconn = np.einsum("pkA,pikB->piAB", nu, nabla_nu)
    return {"F": F, "J": J, "dJ": dJ, "g": g, "dg": dg, "B": Q, "dB": dQ, "II": II,
            "normal_conn": nconn, "refs": refs}


def pullback_metric(imm: ParametrizedImmersion, pts) -> np.ndarray:
    """g_ij = df_i^T G(f) df_j with the coordinate metric of N (independent path)."""
    pts = np.atleast_2d(pts)
    G = left_invariant_metric(imm.alg, imm.F(pts))
    dF = imm.dF(pts)
    return np.einsum("pri,prs,psj->pij", dF, G, dF, optimize=True)


def frame_components(imm: ParametrizedImmersion, jump_tol: float = 0.5) -> dict:
    """Adapted frame B and induced metric sampled over the chart, with sanity checks."""
    imm.check_rank()
    pts = imm.chart.points()
    loc = local_geometry(imm, pts)
    B = loc["B"].real.reshape(imm.chart.shape + loc["B"].shape[1:])
    for ax in range(imm.m):
        if B.shape[ax] > 1:
            jump = float(np.max(np.abs(np.diff(B, axis=ax))))
            if jump > jump_tol:
                raise ForwardError(f"{imm.name}: normal completion jumps by {jump:.2f} between neighbours")
    orth = float(np.max(np.abs(np.einsum("...ka,...kb->...ab", B, B) - np.eye(imm.alg.dim))))
    g = loc["g"].real.reshape(imm.chart.shape + loc["g"].shape[1:])
    return {"B": B, "g": g, "orthogonality": orth, "references": [int(r) + 1 for r in loc["refs"]]}


def extract_data(imm: ParametrizedImmersion) -> ImmersionData:
    """Analytic ImmersionData of the immersion (metric, II, normal connection, B)."""
    alg, chart = imm.alg, imm.chart
    m, N = imm.m, alg.dim
    mp = N - m
    imm.check_rank()
    local_geometry(imm, chart.node(chart.center_index())[None])  # fixes references

    geom = cached_provider(lambda p: local_geometry(imm, p))

    def pick(key, lead):
        def prov(p):
            v = geom(p)[key]
            return v[:, None] if lead else v
        return prov

    g = FormField(0, m, pick("g", True), (m, m), derivative=lambda p: geom(p)["dg"][:, :, None],
                  chart=chart, name="g")
    II = FormField(0, m, pick("II", True), (m, m, mp), chart=chart, name="II")
    nc = FormField(1, m, pick("normal_conn", False), (mp, mp), chart=chart, name="normal_conn")
    B = FormField(0, m, pick("B", True), (N, N), derivative=lambda p: geom(p)["dB"][:, :, None],
                  chart=chart, name="B")
    return ImmersionData(alg, chart, mp, g, II, nc, B, name=imm.name,
                         meta={"surface": f"builtin:{imm.name}", "references": [int(r) + 1 for r in imm.references]})


# --- catalog -----------------------------------------------------------------

def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _vertical_plane(chart):
    alg = builtin("heisenberg", [1])
    z = lambda p: 0 * p[:, 0]
    one = lambda p: 1 + 0 * p[:, 0]
    F = lambda p: _stack(p[:, 0], z(p), p[:, 1])
    dF = lambda p: np.stack([_stack(one(p), z(p), z(p)), _stack(z(p), z(p), one(p))], axis=-1)
    d2F = lambda p: np.zeros((p.shape[0], 3, 2, 2), dtype=p.dtype)
    return alg, Chart.square(2, -1, 1, 64) if chart is None else chart, F, dF, d2F


def _horizontal_geodesic(chart):
    alg = builtin("heisenberg", [1])
    z = lambda p: 0 * p[:, 0]
    F = lambda p: _stack(p[:, 0], z(p), z(p))
    dF = lambda p: _stack(1 + z(p), z(p), z(p))[:, :, None]
    d2F = lambda p: np.zeros((p.shape[0], 3, 1, 1), dtype=p.dtype)
    return alg, Chart.square(1, -1, 1, 64) if chart is None else chart, F, dF, d2F


def _abelian_sphere(chart):
    alg = builtin("abelian", [3])

    def F(p):
        u, v = p[:, 0], p[:, 1]
        return _stack(-np.cos(u) * np.cos(v), -np.cos(u) * np.sin(v), np.sin(u))

    def dF(p):
        u, v = p[:, 0], p[:, 1]
        du = _stack(np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u))
        dv = _stack(np.cos(u) * np.sin(v), -np.cos(u) * np.cos(v), 0 * u)
        return np.stack([du, dv], axis=-1)

    def d2F(p):
        u, v = p[:, 0], p[:, 1]
        uu = _stack(np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), -np.sin(u))
        uv = _stack(-np.sin(u) * np.sin(v), np.sin(u) * np.cos(v), 0 * u)
        vv = _stack(np.cos(u) * np.cos(v), np.cos(u) * np.sin(v), 0 * u)
        return np.stack([np.stack([uu, uv], -1), np.stack([uv, vv], -1)], -1)

    return alg, Chart.square(2, -1, 1, 64) if chart is None else chart, F, dF, d2F


def _abelian_cylinder(chart):
    alg = builtin("abelian", [3])
    F = lambda p: _stack(-np.cos(p[:, 0]), -np.sin(p[:, 0]), p[:, 1])

    def dF(p):
        u = p[:, 0]
        return np.stack([_stack(np.sin(u), -np.cos(u), 0 * u), _stack(0 * u, 0 * u, 1 + 0 * u)], axis=-1)

    def d2F(p):
        u = p[:, 0]
        out = np.zeros((p.shape[0], 3, 2, 2), dtype=np.result_type(p, float))
        out[:, 0, 0, 0] = np.cos(u)
        out[:, 1, 0, 0] = np.sin(u)
        return out

    return alg, Chart.square(2, -1, 1, 64) if chart is None else chart, F, dF, d2F


def _hyperbolic_paraboloid(chart):
    alg = builtin("heisenberg", [1])
    F = lambda p: _stack(p[:, 0], p[:, 1], 0.5 * p[:, 0] * p[:, 1])

    def dF(p):
        u, v = p[:, 0], p[:, 1]
        z, one = 0 * u, 1 + 0 * u
        return np.stack([_stack(one, z, 0.5 * v), _stack(z, one, 0.5 * u)], axis=-1)

    def d2F(p):
        out = np.zeros((p.shape[0], 3, 2, 2), dtype=np.result_type(p, float))
        out[:, 2, 0, 1] = out[:, 2, 1, 0] = 0.5
        return out

    return alg, Chart.square(2, -1, 1, 64) if chart is None else chart, F, dF, d2F


CATALOG = {
    "vertical-plane": _vertical_plane,
    "horizontal-geodesic": _horizontal_geodesic,
    "abelian-sphere": _abelian_sphere,
    "abelian-cylinder": _abelian_cylinder,
    "hyperbolic-paraboloid-orbit": _hyperbolic_paraboloid,
}


def catalog_immersion(name: str, chart: Chart | None = None) -> ParametrizedImmersion:
    """Catalog immersion by name (``builtin:`` prefix optional)."""
    key = name.split(":", 1)[1] if name.startswith("builtin:") else name
    if key not in CATALOG:
        raise ForwardError(f"unknown surface {name!r}; known: {', '.join(CATALOG)}")
    alg, chart, F, dF, d2F = CATALOG[key](chart)
    return ParametrizedImmersion(alg, chart, F, dF, d2F, name=key)
