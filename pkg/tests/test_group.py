import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nilframe.algebra import builtin, random_algebra
from nilframe.group import (automorphism_residual, group_exp, group_inv, group_log, group_mul,
                            left_invariant_metric, left_invariant_vectors, left_invariant_vectors_inverse,
                            pullback_coframe)

H3 = builtin("heisenberg", [1])
RND = random_algebra(5, 3, seed=11)
points = arrays(np.float64, 24, elements=st.floats(-3, 3))


def test_heisenberg_product():
    np.testing.assert_allclose(group_mul(H3, [1, 0, 0], [0, 1, 0]), [1, 1, 0.5])


def test_left_invariant_vectors_heisenberg():
    V = left_invariant_vectors(H3, [0.3, 0.7, 0.0])
    np.testing.assert_allclose(V[:, 0], [1, 0, -0.35])
    np.testing.assert_allclose(V @ left_invariant_vectors_inverse(H3, [0.3, 0.7, 0.0]), np.eye(3), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(points)
def test_associativity_and_inverse(x):
    p, q, r = x[:8], x[8:16], x[16:]
    lhs = group_mul(RND, group_mul(RND, p, q), r)
    rhs = group_mul(RND, p, group_mul(RND, q, r))
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
    np.testing.assert_allclose(group_mul(RND, p, group_inv(p)), np.zeros(8), atol=1e-12)
    np.testing.assert_allclose(group_log(group_exp(p)), p)


def test_left_invariant_vectors_match_flow():
    # E_k(p) is the velocity of t -> p exp(t E_k) at t = 0
    p = np.array([0.4, -1.1, 0.9, 0.2, -0.3, 0.6, 1.3, -0.8])
    V = left_invariant_vectors(RND, p)
    h = 1e-6
    for k in range(8):
        e = np.eye(8)[k]
        fd = (group_mul(RND, p, h * e) - group_mul(RND, p, -h * e)) / (2 * h)
        np.testing.assert_allclose(V[:, k], fd, atol=1e-8)


def test_metric_and_coframe():
    p = np.array([0.2, 0.5, -0.4])
    G = left_invariant_metric(H3, p)
    V = left_invariant_vectors(H3, p)
    np.testing.assert_allclose(V.T @ G @ V, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(pullback_coframe(H3, p, V), np.eye(3), atol=1e-14)


def test_automorphism_residual():
    c, s = np.cos(0.3), np.sin(0.3)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    assert automorphism_residual(H3, R) < 1e-14
    assert automorphism_residual(H3, np.diag([1.0, -1.0, 1.0])) > 0.5
