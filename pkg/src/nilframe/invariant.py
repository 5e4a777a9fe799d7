"""Left-invariant geometry of N: connection and curvature tables.

Conventions (0-based arrays, theta^k the co-frame dual to E_k):

* ``tau[k, l, r] = sigma^k_{rl} + sigma^l_{kr} + sigma^r_{kl}``
* connection forms theta^k_l = sum_r C[k, l, r] theta^r with C = tau / 2, so
  that nabla_{E_s} E_l = sum_k C[k, l, s] E_k
* curvature forms Theta^k_l = sum_{s,t} big_theta[k, l, s, t] theta^s ^ theta^t
  with big_theta = 1/4 sum_r (tau[k,l,r] tau[r,s,t] + tau[k,r,s] tau[r,l,t])

Component convention for the Riemann tensor:

    <R(E_s, E_t) E_l, E_k> = Theta^k_l(E_s, E_t)

so Theta^1_2(E_1, E_2) is the sectional curvature of the (E_1, E_2) plane.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .algebra import Algebra

__all__ = [
    "InvariantTables",
    "ConnectionCheckError",
    "tau_coefficients",
    "connection_table",
    "curvature_table",
    "curvature_on_pair",
    "invariant_tables",
    "covariant_derivative",
    "verify_structural",
    "mu_coefficients",
    "bianchi_residual",
    "export_curvature",
]


class ConnectionCheckError(RuntimeError):
    """The connection table disagrees with the split formulas for nabla."""


@dataclass(frozen=True)
class InvariantTables:
    tau: np.ndarray
    theta: np.ndarray
    big_theta: np.ndarray

    def as_dict(self) -> dict:
        return {
            "legend": {
                "tau": "tau[k][l][r] = tau^k_{lr} (0-based)",
                "theta": "theta[k][l][r]: theta^k_l = sum_r theta[k][l][r] theta^r",
                "big_theta": "big_theta[k][l][s][t]: Theta^k_l = sum_{s,t} big_theta[k][l][s][t] theta^s^theta^t",
                "convention": "<R(E_s,E_t)E_l,E_k> = Theta^k_l(E_s,E_t)",
            },
            "tau": self.tau.tolist(),
            "theta": self.theta.tolist(),
            "big_theta": self.big_theta.tolist(),
        }


def tau_coefficients(alg: Algebra) -> np.ndarray:
    s = alg.structure  # s[r, k, l] = sigma^r_{kl}
    # tau[k,l,r] = s[k,r,l] + s[l,k,r] + s[r,k,l]
    return s.transpose(0, 2, 1) + s.transpose(1, 0, 2) + s.transpose(1, 2, 0)


def covariant_derivative(alg: Algebra, X, Y) -> np.ndarray:
    """nabla_X Y for left-invariant X, Y given by coefficient vectors."""
    C = 0.5 * tau_coefficients(alg)
    return np.einsum("kls,...s,...l->...k", C, np.asarray(X), np.asarray(Y), optimize=True)


def _split_check(alg: Algebra, C: np.ndarray, atol: float = 1e-12) -> None:
    """Compare C against nabla_E F = [E,F]/2, nabla_E Z = nabla_Z E = -J_Z E / 2, nabla_Z Z' = 0."""
    n, dim = alg.n, alg.dim
    s = alg.structure
    eye = np.eye(dim)
    for a in range(dim):
        for b in range(dim):
            got = C[:, b, a]  # nabla_{E_a} E_b
            if a < n and b < n:
                want = 0.5 * s[:, a, b]
            elif a >= n and b >= n:
                want = np.zeros(dim)
            else:
                e, z = (a, b) if a < n else (b, a)
                # J_Z E = sum_r sigma^{z}_{e r} E_r
                want = -0.5 * s[z, e, :] @ eye
            if np.max(np.abs(got - want)) > atol:
                raise ConnectionCheckError(
                    f"nabla_E{a + 1} E{b + 1}: table {got} != split formula {want}"
                )


def connection_table(alg: Algebra, check: bool = True) -> np.ndarray:
    C = 0.5 * tau_coefficients(alg)
    if check:
        _split_check(alg, C)
    return C


def curvature_table(alg: Algebra) -> np.ndarray:
    t = tau_coefficients(alg)
    return 0.25 * (np.einsum("klr,rst->klst", t, t) + np.einsum("krs,rlt->klst", t, t))


def curvature_on_pair(big_theta: np.ndarray, a: int, b: int) -> np.ndarray:
    """Matrix Theta^k_l(E_a, E_b) (0-based a, b)."""
    return big_theta[:, :, a, b] - big_theta[:, :, b, a]


def invariant_tables(alg: Algebra) -> InvariantTables:
    tau = tau_coefficients(alg)
    theta = connection_table(alg)
    big = curvature_table(alg)
    for arr in (tau, theta, big):
        arr.setflags(write=False)
    return InvariantTables(tau, theta, big)


def mu_coefficients(alg: Algebra) -> np.ndarray:
    """mu[k, l, r] = sigma^l_{kr} + sigma^r_{kl}."""
    s = alg.structure
    return s.transpose(1, 0, 2) + s.transpose(1, 2, 0)


def verify_structural(alg: Algebra) -> dict:
    """Residuals of the structural equations on all basis pairs.

    For left-invariant 1-forms d alpha(E_a, E_b) = -alpha([E_a, E_b]).
    """
    s = alg.structure
    C = connection_table(alg)
    big = curvature_table(alg)
    dim = alg.dim
    eye = np.eye(dim)

    # 1-form coefficient arrays on basis vectors: theta^k(E_a) = delta,
    # theta^k_l(E_a) = C[k, l, a]
    def wedge_eval(alpha, beta):
        # alpha[..., a], beta[..., a] -> (alpha ^ beta)(E_a, E_b)
        return alpha[..., :, None] * beta[..., None, :] - alpha[..., None, :] * beta[..., :, None]

    # d theta^k (E_a, E_b) = -sigma^k_{ab}
    d_coframe = -s
    conn_wedge_coframe = np.einsum("klab->kab", wedge_eval(C, eye[None, :, :]))
    first = d_coframe + conn_wedge_coframe
    skew = C + C.transpose(1, 0, 2)

    d_conn = -np.einsum("klr,rab->klab", C, s)
    conn_conn = (
        np.einsum("kra,rlb->klab", C, C) - np.einsum("krb,rla->klab", C, C)
    )
    curv = big - big.transpose(0, 1, 3, 2)
    second = d_conn + conn_conn - curv

    mu = mu_coefficients(alg)
    return {
        "first_structural": float(np.max(np.abs(first))),
        "metric_skew": float(np.max(np.abs(skew))),
        "second_structural": float(np.max(np.abs(second))),
        "mu_symmetry": float(np.max(np.abs(mu - mu.transpose(0, 2, 1)))),
    }


def bianchi_residual(alg: Algebra) -> float:
    """First Bianchi identity: cyclic sum over (l, s, t) of the curvature."""
    big = curvature_table(alg)
    R = big - big.transpose(0, 1, 3, 2)  # R[k, l, s, t]
    cyc = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc)))


def export_curvature(alg: Algebra, path=None) -> dict:
    payload = {"algebra": alg.to_dict(), **invariant_tables(alg).as_dict()}
    if path is not None:
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return payload
