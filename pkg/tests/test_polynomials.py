"""Sparse polynomial arithmetic and exact Dirichlet moments."""

import numpy as np
import pytest

from dirichlet_lab import AlphaParams, Polynomial, expectation, variance


def test_canonical_form_trims_and_drops_zeros():
    p = Polynomial({(1, 0, 0): 2.0, (0, 1): 0.0, (1,): -2.0})
    assert p.is_zero
    q = Polynomial({(2, 0): 1.0})
    assert (2,) in q.terms


def test_arithmetic():
    x1, x2 = Polynomial.variable(0), Polynomial.variable(1)
    p = (x1 + x2) * (x1 - x2)
    assert p == x1 * x1 - x2 * x2
    assert (p - p).is_zero
    assert (2.0 * x1).terms == {(1,): 2.0}
    assert (1.0 - x1).terms == {(): 1.0, (1,): -1.0}


def test_degree_and_nvars():
    p = Polynomial({(1, 2): 3.0, (0, 0, 1): 1.0})
    assert p.degree == 3
    assert p.nvars == 3
    assert Polynomial.constant(5.0).degree == 0


def test_partial_derivative():
    p = Polynomial({(2, 1): 3.0})  # 3 x1^2 x2
    assert p.partial(0) == Polynomial({(1, 1): 6.0})
    assert p.partial(1) == Polynomial({(2,): 3.0})
    assert p.partial(2).is_zero


def test_evaluate_batches():
    p = Polynomial.linear([2.0, -1.0], constant=0.5)
    pts = np.array([[0.1, 0.2], [0.3, 0.0]])
    np.testing.assert_allclose(p.evaluate(pts), [0.5 + 0.2 - 0.2, 0.5 + 0.6])


def test_evaluate_dimension_check():
    p = Polynomial({(0, 0, 1): 1.0})
    with pytest.raises(ValueError):
        p.evaluate(np.zeros((4, 2)))


def test_expectation_and_variance_against_hand_values():
    a = AlphaParams((1.0, 1.0), 1.0)
    x1 = Polynomial.variable(0)
    assert expectation(x1, a) == pytest.approx(1 / 3, rel=1e-14)
    # Var(x1) = E[x1^2] - E[x1]^2 = 1/6 - 1/9
    assert variance(x1, a) == pytest.approx(1 / 6 - 1 / 9, rel=1e-12)
    # linearity with a constant shift
    assert variance(x1 + 7.0, a) == pytest.approx(variance(x1, a), rel=1e-12)


def test_expectation_rejects_oversized_polynomial():
    a = AlphaParams((1.0,), 1.0)
    with pytest.raises(ValueError):
        expectation(Polynomial.variable(1), a)
