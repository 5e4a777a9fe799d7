import numpy as np
import pytest

from nilframe.forms import Chart
from nilframe.forward import CATALOG, catalog_immersion, extract_data, frame_components, local_geometry, pullback_metric
from nilframe.immersion import check_compatibility

SMALL = Chart.square(2, -1, 1, 12)


def test_vertical_plane_frame():
    imm = catalog_immersion("builtin:vertical-plane", SMALL)
    fc = frame_components(imm)
    perm = np.eye(3)[:, [0, 2, 1]]
    np.testing.assert_allclose(fc["B"], np.broadcast_to(perm, fc["B"].shape), atol=1e-14)
    np.testing.assert_allclose(fc["g"], np.broadcast_to(np.eye(2), fc["g"].shape), atol=1e-14)


def test_vertical_plane_second_fundamental_form():
    data = extract_data(catalog_immersion("vertical-plane", SMALL))
    II = data.II(np.array([[0.2, -0.4]]))[0, 0, :, :, 0]
    np.testing.assert_allclose(II, [[0, -0.5], [-0.5, 0]], atol=1e-14)


def test_abelian_sphere_shape_operator():
    data = extract_data(catalog_immersion("abelian-sphere", SMALL))
    p = np.array([[0.3, 0.1]])
    np.testing.assert_allclose(data.II(p)[0, 0, :, :, 0], data.g(p)[0, 0], atol=1e-12)


def test_geodesic_is_totally_geodesic():
    imm = catalog_immersion("horizontal-geodesic", Chart.square(1, -1, 1, 9))
    data = extract_data(imm)
    assert np.max(np.abs(data.II(imm.chart.points()))) < 1e-14


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_metric_two_paths_and_orthogonality(name):
    imm = catalog_immersion(name)
    chart = Chart.square(imm.m, -1, 1, 10)
    imm = catalog_immersion(name, chart)
    pts = chart.points()
    loc = local_geometry(imm, pts)
    np.testing.assert_allclose(loc["g"].real, pullback_metric(imm, pts), atol=1e-10)
    assert frame_components(imm)["orthogonality"] < 1e-10
    assert imm.check_rank() >= 1e-6


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_necessity_on_catalog(name):
    imm = catalog_immersion(name)
    imm = catalog_immersion(name, Chart.square(imm.m, -1, 1, 16))
    rep = check_compatibility(extract_data(imm))
    assert rep.passed, rep.as_dict()


def test_unknown_surface():
    with pytest.raises(ValueError):
        catalog_immersion("builtin:torus")
