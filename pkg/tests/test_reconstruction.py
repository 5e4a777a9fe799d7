import numpy as np
import pytest

from nilframe.forms import Chart
from nilframe.forward import catalog_immersion, extract_data
from nilframe.group import group_mul
from nilframe.reconstruction import (AdmissibilityError, GateRefused, NotCongruentError, align,
                                     immersion_payload, integrate_immersion, solve_gauge, write_json)

CHART = Chart.square(2, -1, 1, 24)


@pytest.fixture(scope="module")
def paraboloid():
    imm = catalog_immersion("hyperbolic-paraboloid-orbit", CHART)
    data = extract_data(imm)
    sol = solve_gauge(data)
    return imm, data, sol


def test_solution_is_admissible_and_orthogonal(paraboloid):
    _, _, sol = paraboloid
    d = sol.diagnostics
    assert d["orthogonality"] < 1e-12
    assert d["admissibility"] < 1e-6
    assert d["gauge_residual"] < 1e-3
    assert d["path_swap_A"] < 1e-5


def test_roundtrip_matches_truth(paraboloid):
    imm, data, sol = paraboloid
    f = integrate_immersion(sol, data)
    pts = CHART.points()
    truth = imm.F(pts).reshape(CHART.shape + (3,))
    B = data.B(pts)[:, 0].real.reshape(CHART.shape + (3, 3))
    res = align(data.alg, truth, f, sol.x0, B, sol.A)
    assert res["deviation"] < 1e-6
    assert res["automorphism_residual"] < 1e-12


def test_left_translation_is_absorbed(paraboloid):
    _, data, sol = paraboloid
    f = integrate_immersion(sol, data)
    g0 = np.array([0.5, -0.25, 2.0])
    f2 = integrate_immersion(sol, data, f0=g0)
    np.testing.assert_allclose(f2, group_mul(data.alg, g0, f), atol=1e-12)


def test_gate_refuses_incompatible():
    data = extract_data(catalog_immersion("abelian-sphere", CHART)).perturbed(1e-2)
    with pytest.raises(GateRefused) as info:
        solve_gauge(data)
    assert not info.value.report.passed


def test_inadmissible_initial_frame(paraboloid):
    _, data, sol = paraboloid
    with pytest.raises(AdmissibilityError):
        solve_gauge(data, A0=np.eye(3), report=sol.report)
    # flipping a horizontal row keeps U but reverses u
    bad = sol.A0.copy()
    bad[0] *= -1
    with pytest.raises(AdmissibilityError):
        solve_gauge(data, A0=bad, report=sol.report)


def test_align_rejects_centre_rotation():
    f = np.zeros((3, 3, 3))
    A = np.broadcast_to(np.eye(3), (3, 3, 3, 3))
    flip = np.broadcast_to(np.diag([1.0, -1.0, -1.0]), (3, 3, 3, 3))
    with pytest.raises(NotCongruentError):
        align(extract_data(catalog_immersion("vertical-plane", Chart.square(2, -1, 1, 3))).alg, f, f, (1, 1), A, flip)


def test_payload_written_atomically(paraboloid, tmp_path):
    _, data, sol = paraboloid
    f = integrate_immersion(sol, data)
    path = tmp_path / "imm.json"
    write_json(immersion_payload(sol, f), path)
    assert path.read_text().startswith("{")
    assert not list(tmp_path.glob("*.tmp*"))


def test_unknown_path_order(paraboloid):
    _, data, sol = paraboloid
    with pytest.raises(ValueError):
        solve_gauge(data, path_order="diagonal", report=sol.report)
