import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nilframe.estimators import CompatibilityChecker, ImmersionReconstructor
from nilframe.forms import Chart
from nilframe.forward import catalog_immersion, extract_data

CHART = Chart.square(2, -1, 1, 20)


@pytest.fixture(scope="module")
def sphere():
    return extract_data(catalog_immersion("abelian-sphere", CHART))


def test_checker(sphere):
    chk = CompatibilityChecker().fit(sphere)
    assert chk.passed_ and chk.score() == 1.0
    assert set(chk.residuals_) == {"gauss_codazzi_ricci", "killing", "flatness"}
    assert CompatibilityChecker().score(sphere.perturbed(1e-2)) == 0.0


def test_checker_params():
    chk = CompatibilityChecker(tol_analytic=1e-6)
    assert clone(chk).get_params()["tol_analytic"] == 1e-6
    with pytest.raises(ValueError):
        CompatibilityChecker(tol_analytic=-1).fit("builtin:vertical-plane")


def test_reconstructor(sphere):
    rec = ImmersionReconstructor().fit(sphere)
    assert rec.immersion_.shape == CHART.shape + (3,)
    nodes = CHART.points()[:7]
    np.testing.assert_allclose(rec.predict(nodes), rec.immersion_.reshape(-1, 3)[:7], atol=1e-12)
    other = ImmersionReconstructor(x0=(3, 15), f0=[1.0, 2.0, 3.0]).fit(sphere)
    # different base points integrate along different paths: O(h^4) on this coarse grid
    assert rec.align_to(other)["deviation"] < 1e-5


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ImmersionReconstructor().predict([[0.0, 0.0]])


def test_bad_inputs(sphere):
    with pytest.raises(ValueError):
        ImmersionReconstructor(x0=(99, 0)).fit(sphere)
    with pytest.raises(ValueError):
        ImmersionReconstructor(f0=[0.0]).fit(sphere)
    rec = ImmersionReconstructor().fit(sphere)
    with pytest.raises(ValueError):
        rec.predict([[5.0, 0.0]])
