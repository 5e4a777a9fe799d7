"""Acceptance criteria 1-9, one test each, each printing a PASS/FAIL line."""
import time

import numpy as np
import pytest

from nilframe import builtin
from nilframe.forms import Chart
from nilframe.forward import catalog_immersion, extract_data
from nilframe.frames import connection_form, random_frame, verify_q_structure, verify_lambda_identity, verify_q_curvature
from nilframe.immersion import check_compatibility
from nilframe.invariant import curvature_table, verify_structural
from nilframe.reconstruction import GateRefused, align, integrate_immersion, solve_gauge
from nilframe import cli

ALGEBRAS = {
    "H3": ("heisenberg", [1]),
    "H5": ("heisenberg", [2]),
    "H7q": ("quaternionic", None),
}


def _koszul_curvature(structure):
    """<R(E_s,E_t)E_l,E_k> from the Koszul formula on an orthonormal basis.

    Independent of the package's tau/big_theta tables: the connection is
    nabla_X Y = 1/2([X,Y] - ad_X^* Y - ad_Y^* X) and R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y].
    """
    N = structure.shape[0]
    ad = np.transpose(structure, (1, 0, 2))  # ad[s][r, l] = sigma^r_{sl}
    eye = np.eye(N)
    nabla = np.empty((N, N, N))  # nabla[s][:, l] = nabla_{E_s} E_l
    for s in range(N):
        for l in range(N):
            nabla[s][:, l] = 0.5 * (ad[s] @ eye[l] - ad[s].T @ eye[l] - ad[l].T @ eye[s])
    R = np.empty((N, N, N, N))  # R[k, l, s, t]
    for s in range(N):
        for t in range(N):
            br = structure[:, s, t]
            nab_br = np.einsum("r,rkl->kl", br, nabla)
            Rst = nabla[s] @ nabla[t] - nabla[t] @ nabla[s] - nab_br
            R[:, :, s, t] = Rst
    return R


def test_criterion_1_structural_equations(record_criterion):
    start = time.perf_counter()
    worst = {}
    for label, (name, params) in ALGEBRAS.items():
        res = verify_structural(builtin(name, params))
        worst[label] = max(res["first_structural"], res["second_structural"])
    elapsed = time.perf_counter() - start
    sup = max(worst.values())
    ok = sup <= 1e-12 and elapsed < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record_criterion(1, "structural equations <= 1e-12, < 1 s", ok, f"{detail}; {elapsed:.3f} s")
    assert sup <= 1e-12
    assert elapsed < 1.0


def test_criterion_2_heisenberg_curvature(record_criterion):
    start = time.perf_counter()
    alg = builtin("heisenberg", [1])
    big = curvature_table(alg)
    theta = big - big.transpose(0, 1, 3, 2)
    oracle = _koszul_curvature(alg.structure)
    elapsed = time.perf_counter() - start
    t12 = theta[0, 1, 0, 1]
    t13 = theta[0, 2, 0, 2]
    err = max(abs(t12 + 0.75), abs(t13 - 0.25), abs(oracle[0, 1, 0, 1] + 0.75), abs(oracle[0, 2, 0, 2] - 0.25))
    oracle_gap = float(np.max(np.abs(theta - oracle)))
    ok = err <= 1e-12 and oracle_gap <= 1e-12 and elapsed < 1.0
    record_criterion(2, "Theta^1_2(E1,E2) = -3/4, Theta^1_3(E1,E3) = 1/4 within 1e-12, < 1 s", ok,
                     f"{t12:.15f}, {t13:.15f}; oracle gap {oracle_gap:.1e}; {elapsed:.3f} s")
    assert err <= 1e-12
    assert oracle_gap <= 1e-12
    assert elapsed < 1.0


def _frames(alg, count, seed=0):
    chart = Chart.square(2, -1.0, 1.0, 32)
    rng = np.random.default_rng(seed)
    return [random_frame(alg, chart, seed=int(rng.integers(1 << 31))) for _ in range(count)]


def test_criterion_3_lambda_identity(record_criterion):
    alg = builtin("heisenberg", [1])
    start = time.perf_counter()
    sup = max(verify_lambda_identity(fr)["sup_residual"] for fr in _frames(alg, 100, seed=3))
    elapsed = time.perf_counter() - start
    ok = sup <= 1e-8 and elapsed < 10.0
    record_criterion(3, "lambda identity on 100 frames, 32x32, <= 1e-8, < 10 s", ok,
                     f"sup {sup:.2e}; {elapsed:.2f} s")
    assert sup <= 1e-8
    assert elapsed < 10.0


def test_criterion_4_curvature_identities(record_criterion):
    alg = builtin("heisenberg", [1])
    start = time.perf_counter()
    worst = {"structure": 0.0, "curvature": 0.0, "structure_fd": 0.0, "curvature_fd": 0.0}
    for fr in _frames(alg, 100, seed=4):
        conn = connection_form(fr)
        worst["structure"] = max(worst["structure"], verify_q_structure(fr, conn)["sup_residual"])
        worst["curvature"] = max(worst["curvature"], verify_q_curvature(fr, conn)["sup_residual"])
        worst["structure_fd"] = max(worst["structure_fd"],
                                verify_q_structure(fr, conn, method="central", h_fd=1e-4)["sup_residual"])
        worst["curvature_fd"] = max(worst["curvature_fd"],
                                verify_q_curvature(fr, conn, method="central", h_fd=1e-4)["sup_residual"])
    elapsed = time.perf_counter() - start
    ok = (worst["structure"] <= 1e-8 and worst["curvature"] <= 1e-8 and worst["structure_fd"] <= 1e-5
          and worst["curvature_fd"] <= 1e-5 and elapsed < 30.0)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record_criterion(4, "Q identities on 100 frames <= 1e-8 analytic, <= 1e-5 sampled, < 30 s", ok,
                     f"{detail}; {elapsed:.2f} s")
    assert worst["structure"] <= 1e-8 and worst["curvature"] <= 1e-8
    assert worst["structure_fd"] <= 1e-5 and worst["curvature_fd"] <= 1e-5
    assert elapsed < 30.0


CATALOG_NAMES = ["vertical-plane", "horizontal-geodesic", "abelian-sphere", "abelian-cylinder",
                 "hyperbolic-paraboloid-orbit"]


def test_criterion_5_necessity(record_criterion):
    start = time.perf_counter()
    worst = {}
    for name in CATALOG_NAMES:
        rep = check_compatibility(extract_data(catalog_immersion(name)))
        worst[name] = (rep.gauss_codazzi_ricci_residual, rep.killing_residual, rep.flatness_residual)
    elapsed = time.perf_counter() - start
    sup = max(max(v) for v in worst.values())
    ok = sup <= 1e-8 and elapsed < 10.0
    detail = ", ".join(f"{k} {max(v):.1e}" for k, v in worst.items())
    record_criterion(5, "catalog data pass all three checks <= 1e-8, < 10 s", ok, f"{detail}; {elapsed:.2f} s")
    assert sup <= 1e-8
    assert elapsed < 10.0


def _roundtrip(name, nodes=64):
    imm = catalog_immersion(name, Chart.square(1 if name == "horizontal-geodesic" else 2, -1.0, 1.0, nodes))
    data = extract_data(imm)
    sol = solve_gauge(data, compare_orders=False)
    f = integrate_immersion(sol, data)
    pts = data.chart.points()
    truth = imm.F(pts).reshape(data.chart.shape + (data.dim,))
    B = data.B(pts)[:, 0].real.reshape(data.chart.shape + (data.dim, data.dim))
    return align(data.alg, truth, f, sol.x0, B, sol.A)


def test_criterion_6_existence_roundtrip(record_criterion):
    start = time.perf_counter()
    devs = {name: _roundtrip(name)["deviation"] for name in ["vertical-plane", "abelian-sphere", "horizontal-geodesic"]}
    elapsed = time.perf_counter() - start
    sup = max(devs.values())
    ok = sup <= 1e-6 and elapsed < 30.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in devs.items())
    record_criterion(6, "round trip on 64x64 aligns <= 1e-6, < 30 s", ok, f"{detail}; {elapsed:.2f} s")
    assert sup <= 1e-6
    assert elapsed < 30.0


def _admissible_rotation(alg, A0, seed):
    """Rotate the horizontal block of an admissible frame by a random proper rotation."""
    rng = np.random.default_rng(seed)
    n = alg.n
    Qh, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if np.linalg.det(Qh) < 0:
        Qh[:, 0] *= -1
    A1 = A0.copy()
    A1[:n] = Qh @ A0[:n]
    return A1


def test_criterion_7_uniqueness(record_criterion):
    start = time.perf_counter()
    devs = {}
    for name in ["abelian-sphere", "hyperbolic-paraboloid-orbit"]:
        data = extract_data(catalog_immersion(name))
        sol = solve_gauge(data, compare_orders=False)
        f = integrate_immersion(sol, data)
        x1 = (20, 41)
        A1 = _admissible_rotation(data.alg, sol.A[x1], seed=7)
        sol2 = solve_gauge(data, A0=A1, x0=x1, report=sol.report, compare_orders=False)
        f2 = integrate_immersion(sol2, data, f0=np.array([0.3, -1.2, 0.8]))
        res = align(data.alg, f, f2, sol.x0, sol.A, sol2.A)
        devs[name] = res["deviation"]
    elapsed = time.perf_counter() - start
    sup = max(devs.values())
    ok = sup <= 1e-8 and elapsed < 30.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in devs.items())
    record_criterion(7, "two admissible reconstructions align <= 1e-8, < 30 s", ok, f"{detail}; {elapsed:.2f} s")
    assert sup <= 1e-8
    assert elapsed < 30.0


def test_criterion_8_negative_control(record_criterion, tmp_path):
    start = time.perf_counter()
    data = extract_data(catalog_immersion("vertical-plane")).perturbed(1e-2)
    rep = check_compatibility(data)
    refused = False
    try:
        solve_gauge(data, report=rep)
    except GateRefused:
        refused = True
    from nilframe.immersion import dump_data
    path = tmp_path / "perturbed.json"
    dump_data(data, path, algebra_ref="builtin:heisenberg")
    code = cli.main(["immersion", "reconstruct", "--data", str(path), "--out", str(tmp_path / "out.json")])
    elapsed = time.perf_counter() - start
    gcr = rep.gauss_codazzi_ricci_residual
    ok = gcr > 1e-3 and refused and code == 2 and elapsed < 10.0
    record_criterion(8, "II + 1e-2 drives GCR > 1e-3 and the gate refuses (exit 2), < 10 s", ok,
                     f"GCR {gcr:.2e}, Killing {rep.killing_residual:.2e}, holonomy {rep.flatness_residual:.2e}, "
                     f"refused {refused}, exit {code}; {elapsed:.2f} s")
    assert refused and code == 2
    assert gcr > 1e-3, f"Gauss-Codazzi-Ricci residual {gcr:.3e} under a 1e-2 perturbation"
    assert elapsed < 10.0


def _swap_difference(name, nodes):
    data = extract_data(catalog_immersion(name, Chart.square(2, -1.0, 1.0, nodes)))
    rep = check_compatibility(data)
    sol = solve_gauge(data, report=rep, compare_orders=False)
    f1 = integrate_immersion(sol, data)
    f2 = integrate_immersion(sol, data, path_order="transposed")
    return float(np.max(np.abs(f1 - f2))), rep, data.chart.h


def test_criterion_9_discrete_frobenius(record_criterion):
    start = time.perf_counter()
    orders = {}
    holonomy_ok = True
    detail = []
    for name in ["abelian-sphere", "hyperbolic-paraboloid-orbit"]:
        runs = [_swap_difference(name, nodes) for nodes in (16, 32, 64)]
        for diff, rep, h in runs:
            holonomy_ok &= rep.flatness_residual <= 10 * h**3
        hs = [r[2] for r in runs]
        ds = [r[0] for r in runs]
        order = min(np.log(ds[i] / ds[i + 1]) / np.log(hs[i] / hs[i + 1]) for i in range(2))
        orders[name] = order
        detail.append(f"{name} swap {ds[0]:.1e}/{ds[1]:.1e}/{ds[2]:.1e} order {order:.2f} "
                      f"holonomy/gate {max(r[1].flatness_residual / r[1].flatness_gate for r in runs):.1e}")
    elapsed = time.perf_counter() - start
    ok = holonomy_ok and min(orders.values()) >= 3.5 and elapsed < 60.0
    record_criterion(9, "holonomy <= 10 h^3, path-swap order >= 3.5 over 16->32->64, < 60 s", ok,
                     "; ".join(detail) + f"; {elapsed:.2f} s")
    assert holonomy_ok
    assert min(orders.values()) >= 3.5
    assert elapsed < 60.0
