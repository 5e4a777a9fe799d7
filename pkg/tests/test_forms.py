import numpy as np
import pytest
from scipy.linalg import expm

from nilframe.forms import Chart, FormError, FormField, cached_provider, exterior_derivative, holonomy_field, wedge

K1 = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.0]])
K2 = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0.0]])


def _scalar():
    return FormField(0, 2, lambda p: (p[:, 0] ** 2 * p[:, 1])[:, None], name="x2y")


def test_chart_basics():
    chart = Chart.square(2, -1, 1, 5)
    assert chart.h == pytest.approx(0.5)
    assert chart.points().shape == (25, 2)
    assert chart.center_index() == (2, 2)
    assert Chart.from_dict(chart.as_dict()) == chart
    with pytest.raises(FormError):
        Chart(((0, 1),), (1,))


@pytest.mark.parametrize("method", ["complex", "central"])
def test_exterior_derivative_of_function(method):
    pts = np.array([[0.3, -0.2], [0.7, 0.5]])
    d = exterior_derivative(_scalar(), method=method)(pts)
    expect = np.stack([2 * pts[:, 0] * pts[:, 1], pts[:, 0] ** 2], axis=1)
    np.testing.assert_allclose(d, expect, atol=1e-8)


def test_d_of_one_form_and_dd_zero():
    rot = FormField(1, 2, lambda p: np.stack([-p[:, 1], p[:, 0]], axis=1))
    pts = np.random.default_rng(0).uniform(-1, 1, (6, 2))
    np.testing.assert_allclose(exterior_derivative(rot)(pts), 2.0, atol=1e-12)
    dd = exterior_derivative(exterior_derivative(_scalar()))(pts)
    np.testing.assert_allclose(dd, 0.0, atol=1e-10)


def test_top_degree_overflow():
    two = FormField.constant(2, 2, [1.0])
    with pytest.raises(FormError):
        exterior_derivative(two)


def test_wedge_of_matrix_forms():
    a = FormField.constant(1, 2, np.stack([K1, np.zeros((3, 3))]))
    b = FormField.constant(1, 2, np.stack([np.zeros((3, 3)), K2]))
    np.testing.assert_allclose(wedge(a, b)(np.zeros((1, 2)))[0, 0], K1 @ K2)
    np.testing.assert_allclose(wedge(a, a)(np.zeros((1, 2))), 0.0)


def test_sampled_field_interpolates():
    chart = Chart.square(2, -1, 1, 17)
    pts = chart.points()
    vals = (np.sin(pts[:, 0]) * np.cos(pts[:, 1])).reshape(chart.shape + (1,))
    f = FormField.from_samples(chart, 0, vals)
    q = np.array([[0.13, -0.42]])
    assert f(q)[0, 0] == pytest.approx(np.sin(0.13) * np.cos(-0.42), abs=1e-4)
    with pytest.raises(FormError):
        f.partials(q, method="complex")


def test_cached_provider():
    calls = []

    def fn(p):
        calls.append(1)
        return p * 2

    c = cached_provider(fn)
    p = np.ones((3, 2))
    c(p)
    c(p.copy())
    assert len(calls) == 1


def _flat_connection():
    # A = exp(f K1) exp(g K2) with f = x + y^2, g = y + x^2:
    # A^{-1} dA = exp(-g K2) K1 exp(g K2) df + K2 dg
    def prov(p):
        out = np.empty((len(p), 2, 3, 3))
        for i, (x, y) in enumerate(p):
            E = expm((y + x * x) * K2)
            M = np.linalg.solve(E, K1 @ E)
            out[i, 0] = M + 2 * x * K2
            out[i, 1] = 2 * y * M + K2
        return out
    return FormField(1, 2, prov, (3, 3))


def test_holonomy_flat_is_fifth_order():
    conn = _flat_connection()
    devs = []
    for nodes in (5, 9):
        H = holonomy_field(conn, Chart.square(2, -1, 1, nodes))
        devs.append(np.max(np.linalg.norm(H - np.eye(3), axis=(-2, -1))))
    assert devs[1] < 1e-4
    assert np.log2(devs[0] / devs[1]) > 4.5


def test_holonomy_curved_is_second_order():
    conn = FormField.constant(1, 2, np.stack([K1, K2]))
    chart = Chart.square(2, 0, 0.01, 2)
    H = holonomy_field(conn, chart)[0, 0]
    F = K1 @ K2 - K2 @ K1
    np.testing.assert_allclose((H - np.eye(3)) / 0.01**2, F, atol=1e-1)
