import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from filmreduce.tensor3 import (
    QuadraticForm3,
    as_tensor3,
    basis3,
    bform,
    contract,
    contract_left,
    qform,
    transpose23,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
t3 = arrays(np.float64, (3, 3, 3), elements=finite)
m3 = arrays(np.float64, (3, 3), elements=finite)


@given(t3, m3)
def test_contract_matches_loops(p, r):
    out = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for m in range(3):
                out[i, j, m] = sum(p[i, j, k] * r[k, m] for k in range(3))
    np.testing.assert_allclose(contract(p, r), out, atol=1e-9)


@given(m3, t3)
def test_contract_left_matches_loops(m, p):
    out = np.zeros((3, 3, 3))
    for l in range(3):
        for i in range(3):
            for j in range(3):
                out[l, i, j] = sum(m[l, k] * p[k, i, j] for k in range(3))
    np.testing.assert_allclose(contract_left(m, p), out, atol=1e-9)


@given(t3)
def test_transpose23_is_involution(p):
    np.testing.assert_array_equal(transpose23(transpose23(p)), p)
    assert transpose23(p)[0, 1, 2] == p[0, 2, 1]


@given(t3, t3)
@settings(max_examples=50)
def test_bform_polarization(a, b):
    q = QuadraticForm3(np.arange(27) % 4 + 0.5)
    lhs = qform(q, a + b) - qform(q, a - b)
    assert lhs == pytest.approx(4 * bform(q, a, b), rel=1e-9, abs=1e-8)


def test_frobenius_is_squared_norm(rng):
    a = rng.standard_normal((5, 3, 3, 3))
    q = QuadraticForm3.frobenius()
    np.testing.assert_allclose(q(a), np.sum(a**2, axis=(1, 2, 3)))
    assert q.is_frobenius and q.to_config() == "frobenius"


def test_basis3_unit_value():
    e = basis3(0, 1, 2)
    assert e[0, 1, 2] == 1 and e.sum() == 1


def test_parse_roundtrip():
    coeffs = list(np.linspace(0.1, 2.7, 27))
    q = QuadraticForm3.parse(coeffs)
    assert QuadraticForm3.parse(q.to_config()).coeffs.tolist() == q.coeffs.tolist()


@pytest.mark.parametrize("bad", [np.zeros(27), -np.ones(27), np.ones(26), "euclid"])
def test_invalid_forms_rejected(bad):
    with pytest.raises(ValueError):
        QuadraticForm3.parse(bad)


def test_as_tensor3_rejects_shape_and_nan():
    with pytest.raises(ValueError):
        as_tensor3(np.zeros((3, 3)))
    bad = np.zeros((3, 3, 3))
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        as_tensor3(bad)
