"""Core Dirichlet arithmetic: density, moments, samplers, aggregation."""

import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirichlet_lab import (
    AlphaParams,
    SimplexPoint,
    aggregate,
    aggregate_point,
    log_density,
    monomial_expectation,
    polya_urn,
    polya_urn_array,
    sample,
    sample_array,
    write_samples_csv,
)


def rising(a: float, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= a + i
    return out


class TestAlphaParams:
    def test_derived_sums(self):
        a = AlphaParams((0.7, 1.3), 2.1)
        assert a.n == 2
        assert a.head_sum == pytest.approx(2.0, abs=0)
        assert a.total == pytest.approx(4.1, abs=0)

    def test_parse_decimal_strings(self):
        a = AlphaParams.parse(["0.7", "1.3", "2.1"])
        assert a.alphas == (0.7, 1.3) and a.alpha_last == 2.1

    @pytest.mark.parametrize("bad", [(0.0, 1.0), (-1.0, 1.0), (float("nan"), 1.0)])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            AlphaParams((bad[0],), bad[1])

    def test_needs_regular_coordinate(self):
        with pytest.raises(ValueError):
            AlphaParams.parse(["1.0"])


class TestSimplexPoint:
    def test_clean_input_untouched(self):
        p = SimplexPoint([0.2, 0.3])
        assert p.coords == (0.2, 0.3)
        assert p.raw_violation == 0.0
        assert p.remainder == pytest.approx(0.5, abs=1e-15)

    def test_negative_clamped_and_recorded(self):
        p = SimplexPoint([-1e-9, 0.4])
        assert p.coords[0] == 0.0
        assert p.raw_violation == pytest.approx(1e-9)

    def test_overshoot_rescaled(self):
        p = SimplexPoint([0.8, 0.4])
        assert sum(p.coords) <= 1.0
        assert p.raw_violation == pytest.approx(0.2)
        # direction preserved
        assert p.coords[0] / p.coords[1] == pytest.approx(2.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            SimplexPoint([float("inf"), 0.0])


class TestLogDensity:
    def test_uniform_interval(self):
        # Beta(1,1) is uniform on [0,1]
        a = AlphaParams((1.0,), 1.0)
        assert log_density(a, SimplexPoint([0.3])) == pytest.approx(0.0, abs=1e-14)

    def test_flat_triangle(self):
        a = AlphaParams((1.0, 1.0), 1.0)
        assert log_density(a, SimplexPoint([0.22, 0.41])) == pytest.approx(
            math.log(2.0), abs=1e-14
        )

    def test_pointwise_value_against_direct_formula(self):
        # independent evaluation: Gamma(4)/(Gamma(2)Gamma(1)Gamma(1)) * x1 = 6 * 0.5
        a = AlphaParams((2.0, 1.0), 1.0)
        got = math.exp(log_density(a, SimplexPoint([0.5, 0.25])))
        assert got == pytest.approx(3.0, rel=1e-12)

    def test_boundary_negative_exponent_raises(self):
        a = AlphaParams((0.5, 1.0), 1.0)
        with pytest.raises(ValueError):
            log_density(a, SimplexPoint([0.0, 0.5]))

    def test_boundary_positive_exponent_is_zero_density(self):
        a = AlphaParams((2.0, 1.0), 1.0)
        assert log_density(a, SimplexPoint([0.0, 0.5])) == float("-inf")

    @pytest.mark.parametrize(
        "alpha", [(1.0, 1.0, 1.0), (2.0, 1.0, 1.0), (1.5, 2.0, 2.5)]
    )
    def test_grid_quadrature_normalizes(self, alpha):
        # midpoint rule at step 1/400; anti-diagonal cells are exactly half
        # inside the triangle, so they carry weight one half
        a = AlphaParams(alpha[:-1], alpha[-1])
        steps = 400
        h = 1.0 / steps
        total = 0.0
        for i in range(steps):
            x1 = (i + 0.5) * h
            for j in range(steps - i):
                weight = 0.5 if i + j == steps - 1 else 1.0
                x2 = (j + 0.5) * h
                total += weight * math.exp(log_density(a, SimplexPoint([x1, x2])))
        assert total * h * h == pytest.approx(1.0, abs=1e-3)


class TestMonomialExpectation:
    def test_constant(self):
        a = AlphaParams((0.7, 1.3), 2.1)
        assert monomial_expectation(a, [0, 0]) == 1.0

    def test_first_moments(self):
        a = AlphaParams((0.7, 1.3), 2.1)
        assert monomial_expectation(a, [1, 0]) == pytest.approx(0.7 / 4.1, rel=1e-14)
        assert monomial_expectation(a, [0, 1]) == pytest.approx(1.3 / 4.1, rel=1e-14)

    def test_second_moments(self):
        a = AlphaParams((0.7, 1.3), 2.1)
        t = a.total
        assert monomial_expectation(a, [2, 0]) == pytest.approx(
            0.7 * 1.7 / (t * (t + 1)), rel=1e-13
        )
        assert monomial_expectation(a, [1, 1]) == pytest.approx(
            0.7 * 1.3 / (t * (t + 1)), rel=1e-13
        )

    def test_short_exponent_vector_padded(self):
        a = AlphaParams((0.7, 1.3), 2.1)
        assert monomial_expectation(a, [2]) == monomial_expectation(a, [2, 0])

    def test_rejects_negative_and_oversized(self):
        a = AlphaParams((0.7, 1.3), 2.1)
        with pytest.raises(ValueError):
            monomial_expectation(a, [-1, 0])
        with pytest.raises(ValueError):
            monomial_expectation(a, [1, 0, 0])

    @settings(max_examples=80, deadline=None)
    @given(
        alphas=st.lists(st.floats(0.1, 10.0), min_size=1, max_size=4),
        alpha_last=st.floats(0.1, 10.0),
        data=st.data(),
    )
    def test_matches_rising_factorial_product(self, alphas, alpha_last, data):
        a = AlphaParams(tuple(alphas), alpha_last)
        p = data.draw(
            st.lists(st.integers(0, 6), min_size=a.n, max_size=a.n).filter(
                lambda q: sum(q) <= 6
            )
        )
        oracle = math.prod(rising(ai, pi) for ai, pi in zip(a.alphas, p))
        oracle /= rising(a.total, sum(p))
        assert monomial_expectation(a, p) == pytest.approx(oracle, rel=1e-12)


class TestSampler:
    def test_uniform_mean(self):
        a = AlphaParams((1.0,), 1.0)
        draws = sample_array(a, np.random.default_rng(1), 100_000)[:, 0]
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws.mean() - 0.5) < 3 * se

    def test_moments_to_degree_two(self):
        a = AlphaParams((0.8, 1.7, 0.5), 2.0)
        draws = sample_array(a, np.random.default_rng(2), 1_000_000)
        n = draws.shape[0]
        for i in range(3):
            for j in range(i, 3):
                prod = draws[:, i] * draws[:, j]
                p = [0, 0, 0]
                p[i] += 1
                p[j] += 1
                exact = monomial_expectation(a, p)
                se = prod.std(ddof=1) / math.sqrt(n)
                assert abs(prod.mean() - exact) < 4 * se, (i, j)
        for i in range(3):
            se = draws[:, i].std(ddof=1) / math.sqrt(n)
            exact = monomial_expectation(a, [1 if k == i else 0 for k in range(3)])
            assert abs(draws[:, i].mean() - exact) < 4 * se

    def test_single_draw_is_valid_point(self):
        a = AlphaParams((0.8, 1.7, 0.5), 2.0)
        p = sample(a, np.random.default_rng(3))
        assert p.raw_violation == 0.0
        assert p.remainder >= 0.0

    def test_seed_determinism(self):
        a = AlphaParams((0.8, 1.7), 2.0)
        x = sample_array(a, np.random.default_rng(11), 100)
        y = sample_array(a, np.random.default_rng(11), 100)
        np.testing.assert_array_equal(x, y)


class TestAggregation:
    def test_singleton_partition_is_identity(self):
        a = AlphaParams((1.0, 2.0), 3.0)
        b = aggregate(a, [[0], [1], [2]])
        assert b == a

    def test_block_sums(self):
        a = AlphaParams((1.0, 2.0), 3.0)
        b = aggregate(a, [[0, 1], [2]])
        assert b.alphas == (3.0,) and b.alpha_last == 3.0

    def test_slack_block_may_absorb_regulars(self):
        a = AlphaParams((1.0, 2.0, 4.0), 3.0)
        b = aggregate(a, [[0], [1, 3], [2]])
        assert b.alphas == (1.0, 4.0) and b.alpha_last == 5.0

    @pytest.mark.parametrize(
        "blocks", [[[0], [1]], [[0, 1], [1, 2]], [[0], [1], [2], []], [[0, 1, 2]]]
    )
    def test_invalid_partitions_rejected(self, blocks):
        a = AlphaParams((1.0, 2.0), 3.0)
        with pytest.raises(ValueError):
            aggregate(a, blocks)

    def test_aggregated_sampling_matches_direct(self):
        # sample, block-sum -> same law as sampling the block-summed parameters
        a = AlphaParams((0.5, 1.2, 0.8), 1.5)
        blocks = [[0, 2], [1], [3]]
        b = aggregate(a, blocks)
        rng = np.random.default_rng(4)
        n = 100_000
        fine = sample_array(a, rng, n)
        lumped = np.stack([fine[:, 0] + fine[:, 2], fine[:, 1]], axis=1)
        direct = sample_array(b, rng, n)
        for col in range(2):
            for moment in (1, 2):
                u, v = lumped[:, col] ** moment, direct[:, col] ** moment
                se = math.sqrt(u.var(ddof=1) / n + v.var(ddof=1) / n)
                assert abs(u.mean() - v.mean()) < 3 * se, (col, moment)

    def test_aggregate_point_matches_blocks(self):
        p = SimplexPoint([0.1, 0.2, 0.3])
        q = aggregate_point(p, [[0, 2], [1], [3]])
        assert q.coords == pytest.approx((0.4, 0.2))


class TestPolyaUrn:
    def test_zero_steps_gives_initial_masses(self):
        a = AlphaParams((1.0, 2.0), 3.0)
        p = polya_urn(a, 0, np.random.default_rng(0))
        assert p.coords == pytest.approx((1 / 6, 2 / 6), rel=1e-15)

    def test_limit_variance_beta_uniform(self):
        # Beta(1,1) has variance 1/12
        a = AlphaParams((1.0,), 1.0)
        rel = polya_urn_array(a, 10_000, 1000, np.random.default_rng(5))[:, 0]
        assert rel.var(ddof=1) == pytest.approx(1 / 12, rel=0.10)

    def test_mean_matches_first_moment(self):
        a = AlphaParams((0.6, 1.9), 1.1)
        rel = polya_urn_array(a, 4000, 1500, np.random.default_rng(6))
        for i in range(2):
            exact = a.alphas[i] / a.total
            se = rel[:, i].std(ddof=1) / math.sqrt(rel.shape[0])
            assert abs(rel[:, i].mean() - exact) < 3 * se

    def test_seed_determinism(self):
        a = AlphaParams((1.0, 1.0), 1.0)
        x = polya_urn(a, 50, np.random.default_rng(7))
        y = polya_urn(a, 50, np.random.default_rng(7))
        assert x == y


def test_samples_csv_round_trip(tmp_path):
    a = AlphaParams((0.8, 1.7), 2.0)
    draws = sample_array(a, np.random.default_rng(8), 5)
    path = tmp_path / "samples.csv"
    write_samples_csv(path, draws)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["replica", "x1", "x2", "remainder"]
    assert len(rows) == 6
    back = np.array([[float(v) for v in row[1:3]] for row in rows[1:]])
    np.testing.assert_allclose(back, draws, rtol=0, atol=0)
    for row in rows[1:]:
        assert float(row[3]) == pytest.approx(1.0 - float(row[1]) - float(row[2]), abs=1e-15)
