import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sobolev_rw.mathcore import ShapeError, cosine_similarity, erf, hadamard, l2_norm, matmul

finite = st.floats(-1e3, 1e3, allow_nan=False)


def naive_matmul(a, b):
    out = [[0.0] * len(b[0]) for _ in a]
    for i in range(len(a)):
        for j in range(len(b[0])):
            out[i][j] = sum(a[i][k] * b[k][j] for k in range(len(b)))
    return np.array(out)


def test_matmul_identity_and_hand_case():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(np.eye(2), a), a)
    assert np.array_equal(matmul(a, [[1.0], [1.0]]), [[3.0], [7.0]])


def test_matmul_matches_triple_loop(rng):
    a = rng.normal(size=(5, 3))
    b = rng.normal(size=(3, 2))
    np.testing.assert_allclose(matmul(a, b), naive_matmul(a.tolist(), b.tolist()), rtol=0, atol=1e-12)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_associative(rng):
    for _ in range(20):
        a, b, c = rng.normal(size=(4, 3)), rng.normal(size=(3, 5)), rng.normal(size=(5, 2))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        assert np.linalg.norm(left - right) <= 1e-9 * np.linalg.norm(left)


def test_hadamard():
    assert np.array_equal(hadamard([1, 2], [3, 4]), [3, 8])
    v = np.array([1.5, -2.0, 7.0])
    assert np.array_equal(hadamard(v, np.zeros(3)), np.zeros(3))
    assert np.array_equal(hadamard(v, np.ones(3)), v)
    with pytest.raises(ShapeError):
        hadamard([1, 2], [1, 2, 3])


def test_l2_norm(rng):
    assert l2_norm([3, 4]) == 5.0
    assert l2_norm(np.zeros(4)) == 0.0
    assert l2_norm([]) == 0.0
    v = rng.normal(size=17)
    assert abs(l2_norm(v) - math.sqrt(float(np.dot(v, v)))) <= 1e-14


@given(arrays(np.float64, 6, elements=finite), st.floats(-100, 100))
def test_norm_homogeneous(v, a):
    assert abs(l2_norm(a * v) - abs(a) * l2_norm(v)) <= 1e-12 * max(1.0, abs(a) * l2_norm(v))


def test_cosine_cases():
    assert cosine_similarity([2.0, 1.0], [2.0, 1.0]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert cosine_similarity([0, 0], [1, 1]) == 0.0
    with pytest.raises(ShapeError):
        cosine_similarity([1, 0], [1, 0, 0])


@settings(max_examples=200)
@given(arrays(np.float64, 5, elements=st.floats(-10, 10)), arrays(np.float64, 5, elements=st.floats(-10, 10)),
       st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_cosine_positive_scale_invariance(u, v, a, b):
    if l2_norm(u) < 1e-3 or l2_norm(v) < 1e-3:
        return
    assert abs(cosine_similarity(a * u, b * v) - cosine_similarity(u, v)) <= 1e-12


def test_erf_values():
    assert erf(0.0) == 0.0
    assert abs(erf(1.0) - 0.842700792949715) <= 1e-12
    mpmath.mp.dps = 40
    for x in np.linspace(-6, 6, 241):
        assert abs(erf(float(x)) - float(mpmath.erf(mpmath.mpf(float(x))))) <= 1e-12
    assert abs(erf(6.0) - 1.0) <= 1e-12 and abs(erf(-6.0) + 1.0) <= 1e-12


def test_erf_odd_and_monotone(rng):
    for x in rng.uniform(-6, 6, 100):
        assert erf(-x) == -erf(x)
    xs = np.linspace(-6, 6, 2001)
    vals = np.array([erf(x) for x in xs])
    assert np.all(np.diff(vals) >= 0)
