"""Two-step nilpotent metric Lie algebras n = v (+) z.

Basis vectors E_1..E_n span v and E_{n+1}..E_{n+n'} span the center z.
Structure constants sigma^r_{kl} are the coefficients of [E_k, E_l] along
E_r; they are nonzero only for k, l <= n and r > n.

Indices in the public sparse format (JSON files, ``Algebra.entries``) are
1-based.  Dense arrays are 0-based: ``alg.structure[r, k, l] = sigma^r_{kl}``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Algebra",
    "AlgebraError",
    "JOperator",
    "ValidationReport",
    "Violation",
    "validate",
    "bracket",
    "j_operator",
    "builtin",
    "h_type_residual",
    "random_algebra",
    "jacobi_residual",
    "load_algebra",
    "dump_algebra",
    "resolve_algebra",
    "CATALOG",
]


class AlgebraError(ValueError):
    """Raised for malformed algebras or out-of-range requests."""


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple[int, ...]
    message: str

    def as_dict(self) -> dict:
        return {"kind": self.kind, "indices": list(self.indices), "message": self.message}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    flat: bool = False

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid

    def as_dict(self) -> dict:
        return {
            "valid": self.valid,
            "flat": self.flat,
            "violations": [v.as_dict() for v in self.violations],
        }


def _entry_tuple(item) -> tuple[int, int, int, float]:
    if isinstance(item, Mapping):
        return int(item["k"]), int(item["l"]), int(item["r"]), float(item["value"])
    k, l, r, v = item
    return int(k), int(l), int(r), float(v)


def validate(candidate) -> ValidationReport:
    """Check a raw algebra description and list every violated invariant.

    ``candidate`` is a mapping with keys ``n``, ``n_prime`` and ``sigma``
    (a list of ``{"k", "l", "r", "value"}`` records or 4-tuples, 1-based),
    or an :class:`Algebra`.  Entries given in only one orientation are
    completed antisymmetrically; entries given in both orientations must
    be negatives of each other.  Never raises on bad data.
    """
    if isinstance(candidate, Algebra):
        candidate = candidate.to_dict(full=True)
    report = ValidationReport()
    bad = report.violations

    try:
        n = int(candidate["n"])
        n_prime = int(candidate["n_prime"])
        raw = [_entry_tuple(e) for e in candidate.get("sigma", [])]
    except (KeyError, TypeError, ValueError) as exc:
        bad.append(Violation("format", (), f"unreadable algebra description: {exc}"))
        return report

    if n < 1:
        bad.append(Violation("dimension", (n,), "n must be a positive integer"))
    if n_prime < 0:
        bad.append(Violation("dimension", (n_prime,), "n_prime must be non-negative"))
    dim = n + n_prime

    given: dict[tuple[int, int, int], float] = {}
    for k, l, r, v in raw:
        key = (k, l, r)
        if not all(1 <= i <= dim for i in key):
            bad.append(Violation("range", key, f"index out of range 1..{dim}"))
            continue
        if key in given and given[key] != v:
            bad.append(Violation("duplicate", key, "conflicting duplicate entry"))
            continue
        given[key] = v
        if v != 0.0 and not (k <= n and l <= n and r > n):
            bad.append(
                Violation(
                    "grading",
                    key,
                    "nonzero sigma^r_{kl} requires k,l <= n < r ([v,v] in z, z central)",
                )
            )
        if k == l and v != 0.0:
            bad.append(Violation("antisymmetry", key, "sigma^r_{kk} must vanish"))

    for (k, l, r), v in given.items():
        if k < l and (l, k, r) in given and given[(l, k, r)] != -v:
            bad.append(
                Violation(
                    "antisymmetry",
                    (k, l, r),
                    f"sigma^{r}_{{{k}{l}}} = {v} but sigma^{r}_{{{l}{k}}} = {given[(l, k, r)]}",
                )
            )

    if not bad:
        dense = np.zeros((dim, dim, dim))
        for (k, l, r), v in given.items():
            dense[r - 1, k - 1, l - 1] = v
            if (l, k, r) not in given:
                dense[r - 1, l - 1, k - 1] = -v
        jac = jacobi_residual(dense)
        if jac > 1e-12:
            bad.append(Violation("jacobi", (), f"Jacobi cyclic sum reaches {jac:.3e}"))
        report.flat = not np.any(dense)
    return report


def jacobi_residual(structure: np.ndarray) -> float:
    """Max over basis triples of |[[a,b],c] + [[b,c],a] + [[c,a],b]|."""
    s = np.asarray(structure, dtype=float)
    # [[E_a,E_b],E_c]^t = sum_r s[r,a,b] s[t,r,c]
    dd = np.einsum("rab,trc->tabc", s, s)
    cyc = dd + dd.transpose(0, 2, 3, 1) + dd.transpose(0, 3, 1, 2)
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0


@dataclass(frozen=True)
class Algebra:
    """A validated two-step nilpotent algebra with orthonormal adapted basis.

    ``entries`` holds both orientations (k, l) and (l, k) so that lookups
    never flip signs at read time.
    """

    n: int
    n_prime: int
    entries: tuple[tuple[int, int, int, float], ...] = ()
    name: str = ""

    @classmethod
    def from_entries(cls, n: int, n_prime: int, entries: Iterable, name: str = "") -> "Algebra":
        raw = [_entry_tuple(e) for e in entries]
        candidate = {"n": n, "n_prime": n_prime, "sigma": raw}
        report = validate(candidate)
        if not report.valid:
            msgs = "; ".join(f"{v.kind} at {v.indices}: {v.message}" for v in report.violations)
            raise AlgebraError(f"invalid algebra: {msgs}")
        full: dict[tuple[int, int, int], float] = {}
        for k, l, r, v in raw:
            if v == 0.0:
                continue
            full[(k, l, r)] = v
            full.setdefault((l, k, r), -v)
        return cls(int(n), int(n_prime), tuple((k, l, r, v) for (k, l, r), v in sorted(full.items())), name)

    @classmethod
    def from_dense(cls, n: int, n_prime: int, structure: np.ndarray, name: str = "") -> "Algebra":
        s = np.asarray(structure, dtype=float)
        entries = [
            (k + 1, l + 1, r + 1, float(s[r, k, l]))
            for r, k, l in zip(*np.nonzero(s))
            if k < l
        ]
        return cls.from_entries(n, n_prime, entries, name)

    @property
    def dim(self) -> int:
        return self.n + self.n_prime

    @property
    def is_abelian(self) -> bool:
        return not self.entries

    @cached_property
    def structure(self) -> np.ndarray:
        """Dense read-only array with ``structure[r, k, l] = sigma^r_{kl}``."""
        s = np.zeros((self.dim,) * 3)
        for k, l, r, v in self.entries:
            s[r - 1, k - 1, l - 1] = v
        s.setflags(write=False)
        return s

    @cached_property
    def center_forms(self) -> np.ndarray:
        """``center_forms[k, l, r] = sigma^{n+k}_{lr}`` for l, r over the full basis."""
        out = np.array(self.structure[self.n :])
        out.setflags(write=False)
        return out

    def to_dict(self, full: bool = False) -> dict:
        rows = [
            {"k": k, "l": l, "r": r, "value": v}
            for k, l, r, v in self.entries
            if full or k < l
        ]
        return {"n": self.n, "n_prime": self.n_prime, "sigma": rows}

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Algebra{label} n={self.n} n'={self.n_prime} nnz={len(self.entries) // 2}>"


@dataclass(frozen=True)
class JOperator:
    """J_k for the k-th central basis vector (k is 1-based).

    ``matrix[l, r] = <J_k E_l, E_r> = sigma^{n+k}_{lr}``; as a linear map
    J_k E_l = sum_r sigma^{n+k}_{lr} E_r, so the action on coefficient
    vectors is ``matrix.T @ x``.
    """

    k: int
    matrix: np.ndarray

    def apply(self, x) -> np.ndarray:
        return self.matrix.T @ np.asarray(x)

    @property
    def action(self) -> np.ndarray:
        return self.matrix.T


def _check_vec(alg: Algebra, x, name: str) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != alg.dim:
        raise AlgebraError(f"{name} has length {x.shape[-1]}, expected {alg.dim}")
    return x


def bracket(alg: Algebra, X, Y) -> np.ndarray:
    """Lie bracket of coefficient vectors; broadcasts over leading axes."""
    X = _check_vec(alg, X, "X")
    Y = _check_vec(alg, Y, "Y")
    return np.einsum("rkl,...k,...l->...r", alg.structure, X, Y, optimize=True)


def j_operator(alg: Algebra, k: int) -> JOperator:
    if not 1 <= k <= alg.n_prime:
        raise AlgebraError(f"center index k={k} out of range 1..{alg.n_prime}")
    mat = np.array(alg.structure[alg.n + k - 1])
    mat.setflags(write=False)
    return JOperator(k, mat)


def h_type_residual(alg: Algebra) -> float:
    """max_k || J_k^2 + Id ||_inf on v, over the central basis directions."""
    if alg.n_prime < 1:
        raise AlgebraError("h_type_residual needs a nontrivial center (n' >= 1)")
    n = alg.n
    worst = 0.0
    for k in range(1, alg.n_prime + 1):
        act = j_operator(alg, k).action[:n, :n]
        worst = max(worst, float(np.max(np.abs(act @ act + np.eye(n)))))
    return worst


# --- catalog ---------------------------------------------------------------

def _abelian(d: int) -> Algebra:
    if d < 1:
        raise AlgebraError("abelian(d) needs d >= 1")
    return Algebra.from_entries(d, 0, [], name=f"abelian({d})")


def _heisenberg(m: int) -> Algebra:
    if m < 1:
        raise AlgebraError("heisenberg(m) needs m >= 1")
    n = 2 * m
    entries = [(2 * i + 1, 2 * i + 2, n + 1, 1.0) for i in range(m)]
    return Algebra.from_entries(n, 1, entries, name=f"heisenberg({m})")


_QUATERNION_UNITS = (
    # left multiplication by i, j, k on H = R^4 with basis (1, i, j, k)
    ((0, 1, 1.0), (2, 3, 1.0)),
    ((0, 2, 1.0), (3, 1, 1.0)),
    ((0, 3, 1.0), (1, 2, 1.0)),
)


def _quaternionic_heisenberg() -> Algebra:
    mats = []
    for pairs in _QUATERNION_UNITS:
        J = np.zeros((4, 4))
        for l, r, v in pairs:
            J[l, r] = v
            J[r, l] = -v
        mats.append(J)
    alg = h_type_from_J(mats)
    return Algebra(alg.n, alg.n_prime, alg.entries, name="quaternionic_heisenberg")


def h_type_from_J(matrices: Sequence) -> Algebra:
    """Algebra with sigma^{n+k}_{lr} = (J_k)_{lr} for skew n x n matrices."""
    mats = [np.asarray(J, dtype=float) for J in matrices]
    if not mats:
        raise AlgebraError("h_type_from_J needs at least one matrix")
    n = mats[0].shape[0]
    entries = []
    for k, J in enumerate(mats, start=1):
        if J.shape != (n, n):
            raise AlgebraError(f"J_{k} has shape {J.shape}, expected {(n, n)}")
        if np.max(np.abs(J + J.T)) > 1e-12:
            raise AlgebraError(f"J_{k} is not skew-symmetric")
        for l in range(n):
            for r in range(l + 1, n):
                if J[l, r] != 0.0:
                    entries.append((l + 1, r + 1, n + k, float(J[l, r])))
    return Algebra.from_entries(n, len(mats), entries, name="h_type_from_J")


CATALOG = ("abelian", "heisenberg", "quaternionic_heisenberg", "h_type_from_J")


def builtin(name: str, params: Sequence | None = None) -> Algebra:
    """Catalog algebras.

    ``abelian(d)``, ``heisenberg(m)`` (n = 2m, n' = 1),
    ``quaternionic_heisenberg`` (n = 4, n' = 3) and ``h_type_from_J``
    (``params`` is the list of skew matrices).
    """
    params = list(params or [])
    key = name.replace("-", "_").lower()
    if key == "abelian":
        return _abelian(int(params[0]) if params else 3)
    if key == "heisenberg":
        return _heisenberg(int(params[0]) if params else 1)
    if key in ("quaternionic_heisenberg", "quaternionic"):
        return _quaternionic_heisenberg()
    if key == "h_type_from_j":
        return h_type_from_J(params)
    raise AlgebraError(f"unknown catalog algebra {name!r}; known: {', '.join(CATALOG)}")


def random_algebra(n: int, n_prime: int, seed: int | np.random.Generator | None = 0) -> Algebra:
    """sigma^{n+k}_{lr} uniform in [-1, 1] for l < r, antisymmetrized."""
    rng = np.random.default_rng(seed)
    entries = [
        (l + 1, r + 1, n + k + 1, float(rng.uniform(-1.0, 1.0)))
        for k in range(n_prime)
        for l in range(n)
        for r in range(l + 1, n)
    ]
    return Algebra.from_entries(n, n_prime, entries, name=f"random({n},{n_prime})")


# --- JSON -----------------------------------------------------------------

def load_algebra(path) -> Algebra:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return Algebra.from_entries(payload["n"], payload["n_prime"], payload.get("sigma", []),
                                name=Path(path).stem)


def dump_algebra(alg: Algebra, path=None) -> str:
    text = json.dumps(alg.to_dict(), indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def resolve_algebra(spec: str, params: Sequence | None = None) -> Algebra:
    """``builtin:<name>`` or a path to an algebra JSON file."""
    if spec.startswith("builtin:"):
        return builtin(spec.split(":", 1)[1], params)
    return load_algebra(spec)
