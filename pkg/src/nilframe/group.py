"""Group law of a simply connected two-step nilpotent group in exponential
coordinates of the first kind.

Baker-Campbell-Hausdorff truncates after the first bracket, so

    xi(p q) = xi(p) + xi(q) + [xi(p), xi(q)] / 2

exactly, exp and log are the identity map on coordinates, and the inverse
of p is -xi(p).  Every function broadcasts over leading axes and accepts
complex input.
"""
from __future__ import annotations

import numpy as np

from .algebra import Algebra, bracket

__all__ = [
    "group_mul",
    "group_inv",
    "group_exp",
    "group_log",
    "left_invariant_vectors",
    "left_invariant_vectors_inverse",
    "pullback_coframe",
    "automorphism_residual",
    "left_invariant_metric",
]


def group_mul(alg: Algebra, p, q) -> np.ndarray:
    p = np.asarray(p)
    q = np.asarray(q)
    return p + q + 0.5 * bracket(alg, p, q)


def group_inv(p) -> np.ndarray:
    return -np.asarray(p)


def group_exp(X) -> np.ndarray:
    return np.asarray(X)


def group_log(p) -> np.ndarray:
    return np.asarray(p)


def _ad(alg: Algebra, p) -> np.ndarray:
    # ad_p[r, l] = sum_k sigma^r_{kl} p^k
    return np.einsum("rkl,...k->...rl", alg.structure, np.asarray(p))


def left_invariant_vectors(alg: Algebra, p) -> np.ndarray:
    """Columns are the coordinate components of E_1..E_{n+n'} at p.

    d(L_p)_0 e_l = e_l + [xi(p), e_l] / 2.
    """
    p = np.asarray(p)
    eye = np.eye(alg.dim)
    return eye + 0.5 * _ad(alg, p)


def left_invariant_vectors_inverse(alg: Algebra, p) -> np.ndarray:
    """Inverse of :func:`left_invariant_vectors`; (ad_p)^2 = 0 in two-step groups."""
    return np.eye(alg.dim) - 0.5 * _ad(alg, np.asarray(p))


def pullback_coframe(alg: Algebra, p, dp) -> np.ndarray:
    """Left-invariant components of coordinate velocities.

    ``dp[..., :, i]`` is the coordinate derivative of the map along axis i;
    the result ``J[..., k, i] = theta^k(f_* d_i)``.
    """
    return np.einsum("...kr,...ri->...ki", left_invariant_vectors_inverse(alg, p), np.asarray(dp))


def left_invariant_metric(alg: Algebra, p) -> np.ndarray:
    """Coordinate metric tensor G(p) with <u, v> = u^T G v for coordinate vectors."""
    Linv = left_invariant_vectors_inverse(alg, p)
    return np.einsum("...kr,...ks->...rs", Linv, Linv)


def automorphism_residual(alg: Algebra, R) -> float:
    """max |R[X, Y] - [RX, RY]| over basis pairs."""
    R = np.asarray(R)
    s = alg.structure
    lhs = np.einsum("ar,rkl->akl", R, s)
    rhs = np.einsum("rbc,bk,cl->rkl", s, R, R, optimize=True)
    return float(np.max(np.abs(lhs - rhs))) if s.size else 0.0
