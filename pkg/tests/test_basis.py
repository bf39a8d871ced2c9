import math
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import legendre as npleg

from biotuq.basis import (ChaosExpansion, basis_matrix, eval_basis, expansion_covariance,
                          expansion_mean, expansion_variance, is_downward_closed, legendre_1d,
                          legendre_table, partial_degree_set, read_modes_csv,
                          sobol_partial_variance, total_degree_set, write_modes_csv)


@pytest.mark.parametrize("k,x,expected", [
    (0, 0.37, 1.0),
    (3, 1.0, math.sqrt(7)),
    (2, 0.5, math.sqrt(5) * (3 * 0.25 - 1) / 2),
])
def test_legendre_examples(k, x, expected):
    assert legendre_1d(k, x) == pytest.approx(expected, abs=1e-14)


def test_legendre_matches_closed_forms():
    x = np.linspace(-1, 1, 100)
    closed = [np.ones_like(x), x, (3 * x**2 - 1) / 2, (5 * x**3 - 3 * x) / 2,
              (35 * x**4 - 30 * x**2 + 3) / 8, (63 * x**5 - 70 * x**3 + 15 * x) / 8]
    for k, P in enumerate(closed):
        np.testing.assert_allclose(legendre_1d(k, x), math.sqrt(2 * k + 1) * P, atol=1e-13)


def test_orthonormal_under_half_density():
    x, w = npleg.leggauss(40)
    T = legendre_table(12, x)
    gram = (T * (w / 2)) @ T.T
    np.testing.assert_allclose(gram, np.eye(13), atol=1e-12)


def test_table_matches_scalar():
    x = np.linspace(-1, 1, 7)
    T = legendre_table(6, x)
    for k in range(7):
        np.testing.assert_allclose(T[k], legendre_1d(k, x), rtol=1e-14, atol=1e-14)


def test_negative_degree_rejected():
    with pytest.raises(ValueError):
        legendre_1d(-1, 0.0)


@pytest.mark.parametrize("k,xi,expected", [
    ((0, 0, 0, 0), (0.3, -0.2, 0.9, 0.1), 1.0),
    ((1, 1), (0.5, -0.5), -0.75),
    ((2, 0), (1.0, 0.9), math.sqrt(5)),
])
def test_eval_basis_examples(k, xi, expected):
    assert eval_basis(k, xi) == pytest.approx(expected, abs=1e-14)


def test_eval_basis_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_basis((1, 0), (0.1, 0.2, 0.3))
    with pytest.raises(ValueError):
        basis_matrix([(1, 0)], np.zeros((3, 3)))


def test_basis_matrix_agrees_with_eval_basis(rng):
    idx = list(total_degree_set(3, 3))
    pts = rng.uniform(-1, 1, (5, 3))
    Phi = basis_matrix(idx, pts)
    assert Phi.shape == (5, len(idx))
    for i, p in enumerate(pts):
        for j, k in enumerate(idx):
            assert Phi[i, j] == pytest.approx(eval_basis(k, p), rel=1e-13, abs=1e-14)


@pytest.mark.parametrize("N,p,size", [(4, 0, 1), (4, 2, 15), (2, 3, 10)])
def test_total_degree_sizes(N, p, size):
    s = total_degree_set(N, p)
    assert len(s) == size
    if p == 0:
        assert s.members == ((0, 0, 0, 0),)


@given(st.integers(1, 4), st.integers(0, 4))
@settings(max_examples=30, deadline=None)
def test_truncation_sets_downward_closed(N, p):
    s = total_degree_set(N, p)
    assert len(s) == comb(N + p, p)
    assert s.is_downward_closed()
    assert [sum(k) for k in s] == sorted(sum(k) for k in s)
    assert partial_degree_set(N, min(p, 2)).is_downward_closed()


def test_downward_closed_detects_gap():
    assert not is_downward_closed([(0, 0), (2, 0)])
    assert is_downward_closed([(0, 0), (1, 0), (0, 1), (1, 1)])


def test_zero_index_always_present():
    e = ChaosExpansion(((1, 0),), np.array([0.5]))
    assert e.indices[0] == (0, 0)
    assert expansion_mean(e) == 0.0


def test_coefficients_read_only():
    e = ChaosExpansion.from_dict({(0,): 1.0, (1,): 2.0})
    with pytest.raises(ValueError):
        e.coefficients[0] = 3.0


def test_mean_and_variance_examples():
    assert expansion_mean(ChaosExpansion.from_dict({(0, 0, 0, 0): 3.2})) == 3.2
    assert expansion_variance(ChaosExpansion.from_dict({(0, 0, 0, 0): 3.2})) == 0.0
    e = ChaosExpansion.from_dict({(0, 0, 0, 0): 2.0, (1, 0, 0, 0): 0.5})
    assert expansion_mean(e) == 2.0
    a, b = 0.3, -1.7
    e = ChaosExpansion.from_dict({(0, 0): 0.0, (1, 0): a, (0, 1): b})
    assert expansion_variance(e) == pytest.approx(a * a + b * b)


def test_covariance_examples():
    e1 = ChaosExpansion.from_dict({(0, 0): 1.0, (1, 0): 2.0})
    e2 = ChaosExpansion.from_dict({(0, 0): 5.0, (1, 0): -1.0})
    assert expansion_covariance(e1, e2) == -2.0
    assert expansion_covariance(e1, e1) == expansion_variance(e1)
    f1 = ChaosExpansion(((0, 0), (1, 0), (0, 1)), np.array([0.0, 0.7, 0.0]))
    f2 = ChaosExpansion(((0, 0), (1, 0), (0, 1)), np.array([0.0, 0.0, 1.3]))
    assert expansion_covariance(f1, f2) == 0.0


def test_covariance_rejects_mismatched_basis():
    e1 = ChaosExpansion.from_dict({(0, 0): 1.0, (1, 0): 2.0})
    e2 = ChaosExpansion.from_dict({(0, 0): 1.0, (0, 1): 2.0})
    with pytest.raises(ValueError):
        expansion_covariance(e1, e2)


def test_field_payload_moments(rng):
    idx = total_degree_set(2, 2).members
    C = rng.normal(size=(len(idx), 4))
    e = ChaosExpansion(idx, C)
    np.testing.assert_array_equal(expansion_mean(e), C[0])
    np.testing.assert_allclose(expansion_variance(e), (C[1:] ** 2).sum(axis=0))


def test_shift_scale(rng):
    idx = total_degree_set(3, 3).members
    c = rng.normal(size=len(idx))
    a, b = -2.5, 4.0
    e = ChaosExpansion(idx, c)
    shifted = c * a
    shifted[0] += b
    e2 = ChaosExpansion(idx, shifted)
    assert expansion_mean(e2) == pytest.approx(a * c[0] + b, rel=1e-12)
    assert expansion_variance(e2) == pytest.approx(a * a * expansion_variance(e), rel=1e-12)


def test_sobol_examples():
    e = ChaosExpansion.from_dict({(0, 0): 1.0, (1, 0): 0.5, (3, 0): 0.25})
    v = expansion_variance(e)
    assert sobol_partial_variance(e, 1, "first") == v == sobol_partial_variance(e, 1, "total")
    c = 0.8
    e = ChaosExpansion.from_dict({(0, 0): 0.0, (1, 1): c})
    assert sobol_partial_variance(e, 1, "first") == 0.0
    assert sobol_partial_variance(e, 1, "total") == pytest.approx(c * c)


def test_sobol_errors():
    e = ChaosExpansion.from_dict({(0, 0): 1.0})
    with pytest.raises(ValueError):
        sobol_partial_variance(e, 0)
    with pytest.raises(ValueError):
        sobol_partial_variance(e, 3)
    with pytest.raises(ValueError):
        sobol_partial_variance(e, 1, "second")


@given(st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=40, deadline=None)
def test_sobol_bracketing(N, seed):
    r = np.random.default_rng(seed)
    idx = total_degree_set(N, 3).members
    e = ChaosExpansion(idx, r.normal(size=len(idx)))
    var = expansion_variance(e)
    first = sum(sobol_partial_variance(e, i, "first") for i in range(1, N + 1))
    total = sum(sobol_partial_variance(e, i, "total") for i in range(1, N + 1))
    assert first <= var * (1 + 1e-12) and var <= total * (1 + 1e-12)
    for i in range(1, N + 1):
        assert sobol_partial_variance(e, i, "first") <= sobol_partial_variance(e, i, "total") <= var * (1 + 1e-12)


def test_modes_csv_round_trip(tmp_path, rng):
    idx = total_degree_set(3, 2).members
    for coefs in (rng.normal(size=len(idx)), rng.normal(size=(len(idx), 5)) * 1e-7):
        e = ChaosExpansion(idx, coefs)
        write_modes_csv(e, tmp_path / "m.csv")
        back = read_modes_csv(tmp_path / "m.csv", scalar=coefs.ndim == 1)
        assert back.indices == e.indices
        assert np.array_equal(back.coefficients, e.coefficients)
    header = (tmp_path / "m.csv").read_text().splitlines()[0]
    assert header.startswith("k1,k2,k3,c0")


def test_evaluation_reproduces_polynomial(rng):
    e = ChaosExpansion.from_dict({(0, 0): 2.0, (1, 0): 1 / math.sqrt(3), (1, 1): 3.0})
    pts = rng.uniform(-1, 1, (10, 2))
    expected = 2 + pts[:, 0] + 3 * 3 * pts[:, 0] * pts[:, 1]
    np.testing.assert_allclose(e(pts), expected, rtol=1e-13)
