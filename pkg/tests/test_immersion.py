import numpy as np
import pytest

from nilframe.forms import Chart
from nilframe.forward import catalog_immersion, extract_data
from nilframe.immersion import (ImmersionData, ImmersionDataError, check_compatibility, cholesky, dump_data,
                                hat_tensors, load_data, tangent_frame)

SMALL = Chart.square(2, -1, 1, 16)


def test_cholesky_matches_numpy():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(5, 2, 2))
    g = M @ np.swapaxes(M, 1, 2) + np.eye(2)
    np.testing.assert_allclose(cholesky(g), np.linalg.cholesky(g), atol=1e-14)


def test_tangent_frame_is_orthonormal():
    data = extract_data(catalog_immersion("abelian-sphere", SMALL))
    pts = SMALL.points()
    L, P, _, _ = tangent_frame(data, pts)
    g = data.g(pts)[:, 0]
    np.testing.assert_allclose(np.swapaxes(P, 1, 2) @ g @ P, np.broadcast_to(np.eye(2), g.shape), atol=1e-12)


def test_hat_tensors_vanish_for_abelian():
    data = extract_data(catalog_immersion("abelian-sphere", SMALL))
    hats = hat_tensors(data)
    pts = SMALL.points()[:5]
    assert np.max(np.abs(hats["lambda"](pts))) == 0
    assert np.max(np.abs(hats["Q"](pts))) == 0


def test_validate_reports_determinant():
    data = extract_data(catalog_immersion("vertical-plane", SMALL))
    info = data.validate()
    assert info["B_det_min"] == pytest.approx(-1.0)


def test_perturbation_is_detected():
    data = extract_data(catalog_immersion("vertical-plane", SMALL)).perturbed(1e-2)
    rep = check_compatibility(data)
    assert not rep.passed
    assert rep.killing_residual == pytest.approx(1e-2, rel=1e-6)
    # constant diagonal shift: the Gauss term is quadratic in the perturbation
    assert rep.gauss_codazzi_ricci_residual == pytest.approx(1e-4, rel=1e-6)


def test_off_diagonal_perturbation():
    data = extract_data(catalog_immersion("hyperbolic-paraboloid-orbit", SMALL)).perturbed(1e-2, which="all")
    assert not check_compatibility(data).passed


def test_dump_load_sampled(tmp_path):
    data = extract_data(catalog_immersion("vertical-plane", Chart.square(2, -1, 1, 20)))
    path = tmp_path / "data.json"
    dump_data(data, path, algebra_ref="builtin:heisenberg")
    back = load_data(path)
    assert not back.analytic
    rep = check_compatibility(back)
    assert rep.tolerance == 1e-4
    assert rep.passed


def test_load_catalog_reference():
    data = load_data({"surface": "builtin:abelian-cylinder", "chart": SMALL.as_dict()})
    assert data.analytic and data.chart == SMALL


def test_shape_mismatch_rejected():
    data = extract_data(catalog_immersion("vertical-plane", SMALL))
    with pytest.raises(ImmersionDataError):
        ImmersionData(data.alg, data.chart, 2, data.g, data.II, data.normal_conn, data.B)


def test_bad_json(tmp_path):
    path = tmp_path / "x.json"
    path.write_text("{not json")
    with pytest.raises(ImmersionDataError):
        load_data(path)


def test_report_dict_is_plain():
    import json
    rep = check_compatibility(extract_data(catalog_immersion("vertical-plane", SMALL)))
    json.dumps(rep.as_dict())
