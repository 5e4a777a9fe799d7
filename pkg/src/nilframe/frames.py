"""Frame-dependent tensors: projections U, components u, the Christoffel
tensor lambda and the curvature-type tensor Q.

A frame e_a = sum_b E_b A^b_a is described by an orthogonal matrix field
A over a chart together with its dual co-frame omega^a, given through its
coordinate components ``coframe[p, i, a] = omega^a(d_i)``.  Charts have
dimension 1 or 2, so the forms here are pullbacks along a map of the chart
into N (or the formal data of an abstract bundle); all identities are
pointwise-algebraic or commute with pullback, so they hold in that setting.

Array conventions for a point set of size P:

* ``U[p, k, a]   = U^k_a = A^{n+k}_a``
* ``u[p, k, a, b] = u^k_{ab} = sum_{l,r} A^l_a A^r_b sigma^{n+k}_{lr}``
* matrix 1-forms ``[p, i, a, b]`` = (.)^a_b(d_i)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import Algebra
from .forms import DEFAULT_H_FD, Chart, FormField, cached_provider, exterior_derivative, wedge
from .group import pullback_coframe
from .invariant import connection_table, curvature_table

__all__ = [
    "FrameField",
    "FrameError",
    "projections_U",
    "u_components",
    "christoffel_lambda",
    "theta_pullback",
    "connection_form",
    "covariant_u",
    "q_forms",
    "q_tensor_on",
    "curvature_pullback",
    "verify_lambda_identity",
    "verify_q_structure",
    "verify_q_curvature",
    "useful_identity_residual",
    "q_from_lambda",
    "residual_report",
    "givens_frame",
    "random_frame",
    "polynomial_map",
    "coframe_along",
    "identity_suite",
]


class FrameError(ValueError):
    pass


@dataclass
class FrameField:
    """Orthogonal frame field A with co-frame omega over a chart."""

    alg: Algebra
    A: FormField
    coframe: FormField
    chart: Chart | None = None
    dA: FormField | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        N = self.alg.dim
        if self.A.degree != 0 or self.A.shape != (N, N):
            raise FrameError(f"A must be an (N, N) 0-form with N = {N}")
        if self.coframe.degree != 1 or self.coframe.shape != (N,):
            raise FrameError("coframe must be a vector-valued 1-form of length N")
        if self.chart is None:
            self.chart = self.A.chart
        if self.dA is None:
            self.dA = exterior_derivative(self.A)

    @property
    def m(self) -> int:
        return self.A.m

    def check(self, points=None, tol: float = 1e-10) -> float:
        """Max of |A^T A - Id|; raises when above ``tol`` or det < 0."""
        pts = self.chart.points() if points is None else points
        A = self.A(pts)[:, 0].real
        dev = float(np.max(np.abs(np.einsum("pka,pkb->pab", A, A) - np.eye(self.alg.dim))))
        if dev > tol:
            raise FrameError(f"frame not orthogonal: |A^T A - I| = {dev:.3e}")
        if np.any(np.linalg.det(A) < 0):
            raise FrameError("frame has determinant -1 somewhere")
        return dev


def _frame_values(frame: FrameField, pts):
    return frame.A(pts)[:, 0]


def projections_U(frame: FrameField) -> FormField:
    n = frame.alg.n
    return frame.A.map(lambda a: a[..., n:, :], shape=(frame.alg.n_prime, frame.alg.dim), name="U")


def _u_from_A(alg: Algebra, A: np.ndarray) -> np.ndarray:
    A = A[..., None, :, :]
    return np.swapaxes(A, -1, -2) @ (alg.center_forms @ A)


def u_components(frame: FrameField) -> FormField:
    alg = frame.alg
    N, nz = alg.dim, alg.n_prime
    A = frame.A
    return FormField(0, A.m, lambda p: _u_from_A(alg, A(p)), (nz, N, N),
                     holomorphic=A.holomorphic, chart=A.chart, name="u")


def _lambda_tensor(U: np.ndarray, u: np.ndarray) -> np.ndarray:
    """L[..., a, b, c] with lambda^a_b = sum_c L[a, b, c] omega^c."""
    N = U.shape[-1]
    Ut = np.swapaxes(U, -1, -2)
    t1 = (Ut @ u.reshape(u.shape[:-2] + (N * N,))).reshape(U.shape[:-2] + (N, N, N))
    t2 = np.swapaxes(t1, -3, -2)
    t3 = np.moveaxis(-t1, -3, -1)  # U^k_c u^k_{ba} = -U^k_c u^k_{ab}
    return -0.5 * (t1 - t2 + t3)


def _lambda_values(alg: Algebra, A: np.ndarray, coframe: np.ndarray) -> np.ndarray:
    U = A[..., alg.n :, :]
    u = _u_from_A(alg, A)
    L = _lambda_tensor(U, u)
    return np.einsum("pabc,pic->piab", L, coframe)


def christoffel_lambda(frame: FrameField) -> FormField:
    alg, A, cof = frame.alg, frame.A, frame.coframe
    N = alg.dim
    return FormField(1, A.m, lambda p: _lambda_values(alg, A(p)[:, 0], cof(p)), (N, N),
                     holomorphic=A.holomorphic and cof.holomorphic, chart=A.chart, name="lambda")


def theta_pullback(frame: FrameField) -> FormField:
    """Ambient connection forms theta^k_l pulled back: C[k,l,r] (A omega)^r."""
    alg, A, cof = frame.alg, frame.A, frame.coframe
    C = connection_table(alg)
    N = alg.dim

    def prov(p):
        th = np.einsum("pra,pia->pir", A(p)[:, 0], cof(p))
        return np.einsum("klr,pir->pikl", C, th)

    return FormField(1, A.m, prov, (N, N), holomorphic=A.holomorphic and cof.holomorphic,
                     chart=A.chart, name="theta")


def connection_form(frame: FrameField) -> FormField:
    """omega = A^{-1} dA + A^{-1} theta A, the connection forms of the e-frame."""
    A, dA, th = frame.A, frame.dA, theta_pullback(frame)
    N = frame.alg.dim

    def prov(p):
        a = A(p)[:, 0]
        da = dA(p)
        return np.einsum("pka,pikb->piab", a, da) + np.einsum("pka,pikl,plb->piab", a, th(p), a, optimize=True)

    return FormField(1, A.m, prov, (N, N), holomorphic=A.holomorphic and dA.holomorphic and th.holomorphic,
                     chart=A.chart, name="omega")


def covariant_u(u: FormField, conn: FormField, method: str = "auto", h_fd: float = DEFAULT_H_FD) -> FormField:
    """nabla u^k_{ab} = du^k_{ab} - u^k_{db} omega^d_a - u^k_{ad} omega^d_b (1-form)."""
    du = exterior_derivative(u, method, h_fd)

    def prov(p):
        uu = u(p)[:, 0]
        w = conn(p)
        return (du(p)
                - np.einsum("pkdb,pida->pikab", uu, w)
                - np.einsum("pkad,pidb->pikab", uu, w))

    return FormField(1, u.m, prov, u.shape, holomorphic=du.holomorphic and conn.holomorphic,
                     chart=u.chart, name="nabla_u")


def q_tensor_on(U, u, x, y, NX, NY) -> np.ndarray:
    """Q(X, Y, e_d, e_a) as a matrix ``[..., a, d]``.

    ``x``, ``y`` are frame components of the tangent arguments, ``NX``/``NY``
    the covariant derivatives ``(nabla_X J_k)(e_a, e_b)`` as ``[..., k, a, b]``.
    The first three terms of Q_1 are summed over k.  In Q_2 the four terms
    whose last factor pairs one tangent argument with one of V, W enter with
    the sign opposite to the terms pairing X with Y or V with W; with that
    choice Q agrees with the pulled-back ambient curvature.
    """
    es = np.einsum
    xu = es("...c,...kca->...ka", x, u)     # <J_k X, e_a>
    yu = es("...c,...kca->...ka", y, u)
    ux = es("...kdc,...c->...kd", u, x)     # <J_k e_d, X>
    uy = es("...kdc,...c->...kd", u, y)
    yux = es("...c,...kcb,...b->...k", y, u, x, optimize=True)
    UX = es("...kc,...c->...k", U, x)
    UY = es("...kc,...c->...k", U, y)
    NXy = es("...kdc,...c->...kd", NX, y)   # (nabla_X J_k)(e_d, Y)
    NYx = es("...kdc,...c->...kd", NY, x)

    q = 0.25 * es("...ka,...kd->...da", xu, uy)
    q = q + 0.5 * es("...k,...kad->...da", yux, u)
    q = q - 0.25 * es("...ka,...kd->...da", yu, ux)
    q = q - 0.5 * es("...ka,...kd->...da", U, NXy)
    q = q + 0.5 * es("...kd,...ka->...da", U, NXy)
    q = q + 0.5 * es("...k,...kad->...da", UY, NX)
    q = q + 0.5 * es("...ka,...kd->...da", U, NYx)
    q = q - 0.5 * es("...kd,...ka->...da", U, NYx)
    q = q - 0.5 * es("...k,...kad->...da", UX, NY)

    YX = es("...kb,...lb->...kl", yu, xu)
    YV = es("...kb,...ldb->...kld", yu, u)
    WX = es("...kab,...lb->...kla", u, xu)
    WV = es("...kab,...ldb->...klad", u, u)
    XY = es("...kb,...lb->...kl", xu, yu)
    XV = es("...kb,...ldb->...kld", xu, u)
    WY = es("...kab,...lb->...kla", u, yu)
    q = q - 0.25 * es("...ka,...ld,...kl->...da", U, U, YX, optimize=True)
    q = q - 0.25 * es("...ka,...l,...kld->...da", U, UX, YV, optimize=True)
    q = q - 0.25 * es("...k,...ld,...kla->...da", UY, U, WX, optimize=True)
    q = q - 0.25 * es("...k,...l,...klad->...da", UY, UX, WV, optimize=True)
    q = q + 0.25 * es("...ka,...ld,...kl->...da", U, U, XY, optimize=True)
    q = q + 0.25 * es("...ka,...l,...kld->...da", U, UY, XV, optimize=True)
    q = q + 0.25 * es("...k,...ld,...kla->...da", UX, U, WY, optimize=True)
    q = q + 0.25 * es("...k,...l,...klad->...da", UX, UY, WV, optimize=True)
    return np.swapaxes(q, -1, -2)


def _q_form(alg: Algebra, A: FormField, coframe: FormField, nabla_u: FormField) -> FormField:
    N, n = alg.dim, alg.n
    m = A.m
    if m < 2:
        return FormField.zero(2, m, (N, N), chart=A.chart)

    def prov(p):
        a = A(p)[:, 0]
        U = a[:, n:, :]
        u = _u_from_A(alg, a)
        cof = coframe(p)
        nu = nabla_u(p)
        q = q_tensor_on(U, u, cof[:, 0], cof[:, 1], nu[:, 0], nu[:, 1])
        return q[:, None]

    return FormField(2, m, prov, (N, N), holomorphic=nabla_u.holomorphic and coframe.holomorphic,
                     chart=A.chart, name="Q")


def q_forms(frame: FrameField, conn: FormField | None = None, method: str = "auto",
            h_fd: float = DEFAULT_H_FD) -> FormField:
    """Matrix 2-form Q^a_b = Q(., ., e_b, e_a)."""
    conn = connection_form(frame) if conn is None else conn
    nu = covariant_u(u_components(frame), conn, method, h_fd)
    return _q_form(frame.alg, frame.A, frame.coframe, nu)


def q_from_lambda(lam: FormField, conn: FormField, method: str = "auto", h_fd: float = DEFAULT_H_FD) -> FormField:
    """d lambda + lambda ^ omega + omega ^ lambda - lambda ^ lambda."""
    return (exterior_derivative(lam, method, h_fd) + wedge(lam, conn) + wedge(conn, lam)
            - wedge(lam, lam))


def curvature_pullback(frame: FrameField) -> FormField:
    """A^{-1} Theta A as a matrix 2-form on the chart."""
    alg, A, cof = frame.alg, frame.A, frame.coframe
    big = curvature_table(alg)
    N = alg.dim
    if A.m < 2:
        return FormField.zero(2, A.m, (N, N), chart=A.chart)

    def prov(p):
        a = A(p)[:, 0]
        th = np.einsum("pra,pia->pir", a, cof(p))
        X, Y = th[:, 0], th[:, 1]
        Th = np.einsum("klst,ps,pt->pkl", big, X, Y, optimize=True) - np.einsum("klst,pt,ps->pkl", big, X, Y, optimize=True)
        return np.einsum("pka,pkl,plb->pab", a, Th, a, optimize=True)[:, None]

    return FormField(2, A.m, prov, (N, N), holomorphic=A.holomorphic and cof.holomorphic,
                     chart=A.chart, name="A^-1 Theta A")


# --- residual checks ---------------------------------------------------------

def residual_report(check: str, diff: np.ndarray, points: np.ndarray, tolerance: float) -> dict:
    """``{check, sup_residual, argmax_point, tolerance, pass}``."""
    diff = np.abs(np.asarray(diff))
    flat = diff.reshape(diff.shape[0], -1).max(axis=1) if diff.size else np.zeros(len(points))
    idx = int(np.argmax(flat)) if flat.size else 0
    sup = float(flat[idx]) if flat.size else 0.0
    return {
        "check": check,
        "sup_residual": sup,
        "argmax_point": np.asarray(points)[idx].real.tolist() if len(points) else [],
        "tolerance": float(tolerance),
        "pass": bool(sup <= tolerance),
    }


def _points(frame: FrameField, points):
    return frame.chart.points() if points is None else np.atleast_2d(points)


def verify_lambda_identity(frame: FrameField, points=None, tolerance: float = 1e-8) -> dict:
    """sup |lambda - A^{-1} theta A|."""
    pts = _points(frame, points)
    lam = christoffel_lambda(frame)(pts)
    a = frame.A(pts)[:, 0]
    rhs = np.einsum("pka,pikl,plb->piab", a, theta_pullback(frame)(pts), a, optimize=True)
    return residual_report("lambda_identity", (lam - rhs).real, pts, tolerance)


def verify_q_structure(frame: FrameField, conn: FormField | None = None, points=None,
                   tolerance: float = 1e-8, method: str = "auto", h_fd: float = DEFAULT_H_FD) -> dict:
    """sup |Q - (d lambda + lambda ^ omega + omega ^ lambda - lambda ^ lambda)|."""
    pts = _points(frame, points)
    conn = connection_form(frame) if conn is None else conn
    Q = q_forms(frame, conn, method, h_fd)(pts)
    rhs = q_from_lambda(christoffel_lambda(frame), conn, method, h_fd)(pts)
    return residual_report("q_structure", (Q - rhs).real, pts, tolerance)


def verify_q_curvature(frame: FrameField, conn: FormField | None = None, points=None,
                 tolerance: float = 1e-8, method: str = "auto", h_fd: float = DEFAULT_H_FD) -> dict:
    """sup |Q - A^{-1} Theta A|."""
    pts = _points(frame, points)
    conn = connection_form(frame) if conn is None else conn
    Q = q_forms(frame, conn, method, h_fd)(pts)
    rhs = curvature_pullback(frame)(pts)
    return residual_report("q_curvature", (Q - rhs).real, pts, tolerance)


def useful_identity_residual(frame: FrameField, conn: FormField | None = None, points=None,
                             tolerance: float = 1e-8, method: str = "auto",
                             h_fd: float = DEFAULT_H_FD) -> dict:
    """sup |dU^k_a - sum_c U^k_c omega^c_a + sum_c U^k_c lambda^c_a|."""
    pts = _points(frame, points)
    conn = connection_form(frame) if conn is None else conn
    U = projections_U(frame)
    dU = exterior_derivative(U, method, h_fd)(pts)
    Uv = U(pts)[:, 0]
    lam = christoffel_lambda(frame)(pts)
    res = dU - np.einsum("pkc,pica->pika", Uv, conn(pts)) + np.einsum("pkc,pica->pika", Uv, lam)
    return residual_report("useful_identity", res.real, pts, tolerance)


# --- analytic test fields ----------------------------------------------------

def _givens(N, p, q, phi):
    c, s = np.cos(phi), np.sin(phi)
    G = np.zeros(phi.shape + (N, N), dtype=np.result_type(phi, float))
    G[..., range(N), range(N)] = 1.0
    G[..., p, p] = c
    G[..., q, q] = c
    G[..., p, q] = -s
    G[..., q, p] = s
    return G


def _dgivens(N, p, q, phi):
    c, s = np.cos(phi), np.sin(phi)
    G = np.zeros(phi.shape + (N, N), dtype=np.result_type(phi, float))
    G[..., p, p] = -s
    G[..., q, q] = -s
    G[..., p, q] = -c
    G[..., q, p] = c
    return G


def givens_frame(N: int, m: int, planes, angles, dangles=None, chart=None, left=None) -> FormField:
    """A(x) = left @ prod_i G(p_i, q_i, angle_i(x)); exactly orthogonal with exact derivative.

    ``angles(points) -> (P, len(planes))``, ``dangles(points) -> (P, m, len(planes))``.
    """
    planes = list(planes)
    left = np.eye(N) if left is None else np.asarray(left, dtype=float)

    def prov(pts):
        phi = angles(pts)
        out = np.broadcast_to(left, (pts.shape[0], N, N)).astype(np.result_type(phi, float))
        for i, (p, q) in enumerate(planes):
            out = out @ _givens(N, p, q, phi[:, i])
        return out[:, None]

    def deriv(pts):
        phi = angles(pts)
        dphi = dangles(pts)
        Gs = [_givens(N, p, q, phi[:, i]) for i, (p, q) in enumerate(planes)]
        dGs = [_dgivens(N, p, q, phi[:, i]) for i, (p, q) in enumerate(planes)]
        res = np.zeros((pts.shape[0], m, N, N), dtype=np.result_type(phi, float))
        for i in range(len(planes)):
            pre = np.broadcast_to(left, (pts.shape[0], N, N))
            for G in Gs[:i]:
                pre = pre @ G
            post = np.broadcast_to(np.eye(N), (pts.shape[0], N, N))
            for G in Gs[i + 1:]:
                post = post @ G
            core = pre @ dGs[i] @ post
            res += core[:, None] * dphi[:, :, i, None, None]
        return res[:, :, None]

    return FormField(0, m, cached_provider(prov), (N, N),
                     derivative=cached_provider(deriv) if dangles is not None else None, chart=chart, name="A")


def _trig_poly(rng, m, count):
    """Random smooth scalar functions a0 + a.x + b sin(c.x + d) and their gradients."""
    a0 = rng.uniform(-1, 1, count)
    a = rng.uniform(-1, 1, (count, m))
    b = rng.uniform(-0.8, 0.8, count)
    c = rng.uniform(-1.5, 1.5, (count, m))
    d = rng.uniform(-np.pi, np.pi, count)
    q = rng.uniform(-0.5, 0.5, (count, m, m))
    q = 0.5 * (q + np.swapaxes(q, 1, 2))

    def val(p):
        arg = p @ c.T + d
        return a0 + p @ a.T + b * np.sin(arg) + np.einsum("pi,nij,pj->pn", p, q, p, optimize=True)

    def grad(p):
        arg = p @ c.T + d
        return (a[None] + (b * np.cos(arg))[:, :, None] * c[None]
                + 2 * np.einsum("nij,pj->pni", q, p)).transpose(0, 2, 1)

    return val, grad


def polynomial_map(alg: Algebra, m: int, seed=0, scale: float = 1.0):
    """Random smooth map chart -> N (exponential coordinates) with exact Jacobian.

    Returns ``(F, dF)`` where ``F(p) -> (P, N)``, ``dF(p) -> (P, N, m)``.
    """
    rng = np.random.default_rng(seed)
    N = alg.dim
    val, grad = _trig_poly(rng, m, N)

    def F(p):
        return scale * val(p)

    def dF(p):
        return scale * np.swapaxes(grad(p), 1, 2)

    return F, dF


def coframe_along(alg: Algebra, A: FormField, F, dF, chart=None) -> FormField:
    """omega^a(d_i) = sum_k A^k_a theta^k(f_* d_i) for a map with Jacobian dF."""
    m = A.m

    def prov(p):
        J = pullback_coframe(alg, F(p), dF(p))  # (P, N, m)
        return np.einsum("pka,pki->pia", A(p)[:, 0], J)

    return FormField(1, m, cached_provider(prov), (alg.dim,), holomorphic=A.holomorphic, chart=chart or A.chart,
                     name="coframe")


def random_frame(alg: Algebra, chart: Chart, seed=0, n_rot: int | None = None,
                 base_map=None) -> FrameField:
    """Random analytic frame (product of Givens rotations) along a random map."""
    rng = np.random.default_rng(seed)
    N, m = alg.dim, chart.m
    pairs = [(p, q) for p in range(N) for q in range(p + 1, N)]
    n_rot = n_rot or min(len(pairs), 2 * N)
    planes = [pairs[i] for i in rng.choice(len(pairs), size=n_rot, replace=True)]
    val, grad = _trig_poly(rng, m, n_rot)
    A = givens_frame(N, m, planes, val, grad, chart=chart)
    F, dF = base_map if base_map is not None else polynomial_map(alg, m, rng.integers(1 << 31))
    cof = coframe_along(alg, A, F, dF, chart)
    return FrameField(alg, A, cof, chart, meta={"seed": seed, "planes": planes})


def identity_suite(alg: Algebra, frames: int = 10, grid=(32, 32), seed: int = 0,
                   tol_analytic: float = 1e-8, tol_sampled: float = 1e-5, h_fd: float = DEFAULT_H_FD,
                   sampled: bool = True) -> dict:
    """Run the frame identities over ``frames`` random analytic frames.

    Returns the worst report per check; sampled-mode reruns use central
    differences with step ``h_fd``.
    """
    chart = Chart(((-1.0, 1.0),) * len(grid), tuple(grid))
    rng = np.random.default_rng(seed)
    worst: dict = {}

    def keep(rep, name):
        rep = dict(rep, check=name)
        if name not in worst or rep["sup_residual"] > worst[name]["sup_residual"]:
            worst[name] = rep

    for _ in range(frames):
        fr = random_frame(alg, chart, seed=int(rng.integers(1 << 31)))
        conn = connection_form(fr)
        keep(verify_lambda_identity(fr, tolerance=tol_analytic), "lambda_identity")
        keep(verify_q_structure(fr, conn, tolerance=tol_analytic), "q_structure")
        keep(verify_q_curvature(fr, conn, tolerance=tol_analytic), "q_curvature")
        keep(useful_identity_residual(fr, conn, tolerance=tol_analytic), "useful_identity")
        if sampled:
            keep(verify_q_structure(fr, conn, tolerance=tol_sampled, method="central", h_fd=h_fd), "q_structure_sampled")
            keep(verify_q_curvature(fr, conn, tolerance=tol_sampled, method="central", h_fd=h_fd), "q_curvature_sampled")
    return {"algebra": alg.to_dict(), "frames": frames, "grid": list(grid), "seed": seed,
            "checks": worst, "pass": all(r["pass"] for r in worst.values())}
