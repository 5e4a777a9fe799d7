import numpy as np
import pytest

from nilframe.algebra import builtin, random_algebra
from nilframe.invariant import (bianchi_residual, connection_table, covariant_derivative, curvature_table,
                                export_curvature, mu_coefficients, verify_structural)


def test_horizontal_derivative_is_half_bracket():
    alg = builtin("heisenberg", [1])
    np.testing.assert_allclose(covariant_derivative(alg, [1, 0, 0], [0, 1, 0]), [0, 0, 0.5], atol=1e-15)
    # nabla_{E1} E3 = -1/2 J E1 = -1/2 E2
    np.testing.assert_allclose(covariant_derivative(alg, [1, 0, 0], [0, 0, 1]), [0, -0.5, 0], atol=1e-15)


def test_connection_is_metric():
    C = connection_table(random_algebra(5, 3, seed=2))
    np.testing.assert_allclose(C, -C.transpose(1, 0, 2), atol=1e-14)


def test_heisenberg_sectional_curvatures():
    big = curvature_table(builtin("heisenberg", [1]))
    theta = big - big.transpose(0, 1, 3, 2)
    assert theta[0, 1, 0, 1] == pytest.approx(-0.75, abs=1e-14)
    assert theta[0, 2, 0, 2] == pytest.approx(0.25, abs=1e-14)
    assert theta[1, 2, 1, 2] == pytest.approx(0.25, abs=1e-14)


@pytest.mark.parametrize("alg", [builtin("heisenberg", [2]), builtin("quaternionic"), random_algebra(6, 4, seed=5)],
                         ids=["H5", "H7q", "random64"])
def test_structural_and_bianchi(alg):
    res = verify_structural(alg)
    assert max(res.values()) < 1e-12
    assert bianchi_residual(alg) < 1e-12


def test_abelian_is_flat():
    assert np.max(np.abs(curvature_table(builtin("abelian", [3])))) == 0


def test_mu_coefficients_symmetric():
    mu = mu_coefficients(builtin("quaternionic"))
    np.testing.assert_allclose(mu, mu.transpose(0, 2, 1))


def test_export(tmp_path):
    out = export_curvature(builtin("heisenberg", [1]), tmp_path / "c.json")
    assert (tmp_path / "c.json").exists()
    assert "legend" in out
