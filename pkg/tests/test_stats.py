import itertools as itr

import numpy as np
import pytest
from scipy import stats as sps

from utigsp.graphs import Dag, IDag, d_separated
from utigsp.sem import SemModel, population_cov, sample, sample_weights
from utigsp.stats import (
    DataError,
    GaussCITester,
    SuffStat,
    TestConfig,
    TestError,
    chow_test,
    ci_test,
    fisher_z,
    invariance_test,
    population_ci_oracle,
    population_invariance_oracle,
    population_suff_stat,
    regression_stats,
    suff_stat,
    variance_test,
)

CHAIN = Dag(3, [(0, 1), (1, 2)])
COLLIDER = Dag(3, [(0, 2), (1, 2)])


def chain_pop(n=10**6):
    # unit weights and unit noise: x0 ~ N(0,1), x1 = x0 + e, x2 = x1 + e
    cov = np.array([[1.0, 1, 1], [1, 2, 2], [1, 2, 3]])
    return population_suff_stat(np.zeros(3), cov, n)


class TestSuffStat:
    def test_two_samples(self):
        s = suff_stat([[0, 0], [2, 2]])
        np.testing.assert_allclose(s.mean, [1, 1])
        np.testing.assert_allclose(s.cov, [[2, 2], [2, 2]])

    def test_constant_column(self):
        s = suff_stat(np.column_stack([np.arange(5.0), np.full(5, 3.0)]))
        assert s.cov[1, 1] == 0

    def test_monte_carlo_identity(self):
        rng = np.random.default_rng(0)
        s = suff_stat(rng.standard_normal((100_000, 2)))
        assert np.max(np.abs(s.cov - np.eye(2))) < 0.05

    @pytest.mark.parametrize("bad", [[[1.0, 2.0]], [[1.0, np.nan], [0.0, 1.0]], [[1.0, np.inf], [0.0, 1.0]]])
    def test_errors(self, bad):
        with pytest.raises(DataError):
            suff_stat(bad)

    def test_dict_roundtrip(self):
        s = suff_stat([[0, 1], [2, 2], [3, 5]])
        t = SuffStat.from_dict(s.to_dict())
        assert t.n == s.n and np.allclose(t.cov, s.cov)


class TestDistributionAccuracy:
    """Quantiles checked against tabulated values and independent identities."""

    def test_normal_quantiles(self):
        assert abs(sps.norm.isf(0.025) - 1.959963984540054) < 1e-10
        assert abs(sps.norm.isf(0.005) - 2.5758293035489004) < 1e-10
        assert abs(sps.norm.cdf(1.0) - 0.8413447460685429) < 1e-10

    def test_f_matches_t_squared(self):
        for nu in (5, 10, 47):
            q = sps.t.isf(0.025, nu) ** 2
            assert abs(sps.f.sf(q, 1, nu) - 0.05) < 1e-10

    def test_f_tabulated(self):
        assert abs(sps.f.isf(0.05, 1, 10) - 4.964602743730711) < 1e-9

    @pytest.mark.parametrize("d1,d2,x", [(1, 10, 4.2), (3, 994, 2.1), (2, 9996, 0.3), (5, 1_000_000, 1.7)])
    def test_f_against_incomplete_beta(self, d1, d2, x):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 40
        exact = mpmath.betainc(d2 / 2, d1 / 2, 0, d2 / (d2 + d1 * x), regularized=True)
        assert abs(sps.f.sf(x, d1, d2) - float(exact)) < 1e-10
        assert abs(sps.f.cdf(x, d1, d2) - float(1 - exact)) < 1e-10


class TestCITest:
    def test_chain_population_independent(self):
        assert ci_test(chain_pop(), 0, 2, {1}, TestConfig()) == "independent"

    def test_chain_marginal_dependent(self):
        g = Dag(3, [(0, 1), (1, 2)])
        model = SemModel(g, np.array([[0, 1.0, 0], [0, 0, 1.0], [0, 0, 0]]))
        hits = 0
        for seed in range(10):
            s = suff_stat(sample(model, 5000, np.random.default_rng(seed)))
            hits += ci_test(s, 0, 2, set(), TestConfig()) == "dependent"
        assert hits == 10

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        s = suff_stat(rng.standard_normal((200, 4)) @ rng.standard_normal((4, 4)))
        cfg = TestConfig(alpha=0.05)
        for i, j in itr.permutations(range(4), 2):
            rest = [v for v in range(4) if v not in (i, j)]
            for r in range(3):
                for C in itr.combinations(rest, r):
                    a = fisher_z(s, i, j, C, cfg)
                    b = fisher_z(s, j, i, C, cfg)
                    assert a.reject == b.reject and abs(a.statistic - b.statistic) < 1e-9

    def test_insufficient_samples(self):
        s = suff_stat(np.random.default_rng(0).standard_normal((5, 4)))
        with pytest.raises(TestError):
            fisher_z(s, 0, 1, {2, 3}, TestConfig())

    def test_singular_conditioning_ridged(self):
        x = np.random.default_rng(0).standard_normal((100, 3))
        x = np.column_stack([x, x[:, 2]])  # duplicate column
        res = fisher_z(suff_stat(x), 0, 1, {2, 3}, TestConfig())
        assert res.ridged

    def test_tester_caches(self):
        t = GaussCITester(chain_pop())
        assert t(2, 0, {1}) and t(0, 2, [1])
        assert t.calls == 1


class TestRegression:
    def test_chain_coefficients(self):
        r = regression_stats(chain_pop(), 1, {0})
        np.testing.assert_allclose(r.coeffs, [1.0], atol=1e-12)
        assert abs(r.resid_var - 1.0) < 1e-5

    def test_empty_conditioning(self):
        s = suff_stat([[1.0, 2.0], [3.0, 1.0], [2.0, 0.0]])
        r = regression_stats(s, 0, set())
        assert r.intercept == pytest.approx(2.0) and r.resid_var == pytest.approx(s.cov[0, 0])

    def test_response_in_conditioning(self):
        with pytest.raises(ValueError):
            regression_stats(chain_pop(), 1, {1})


def example1_stats(n=10**4):
    obs = population_suff_stat(np.zeros(2), [[1.0, 1.0], [1.0, 2.0]], n)
    # f1(x2 | x1) = N(0.5 x1, 1.75): cov [[1, .5], [.5, 2]]
    interv = population_suff_stat(np.zeros(2), [[1.0, 0.5], [0.5, 2.0]], n)
    return obs, interv


class TestInvariance:
    def test_same_data_invariant(self):
        rng = np.random.default_rng(1)
        s = suff_stat(rng.standard_normal((300, 3)))
        assert chow_test(s, s, 0, {1, 2}, 0.05).statistic == pytest.approx(0, abs=1e-10)
        assert variance_test(s, s, 0, {1, 2}, 0.05).statistic == pytest.approx(1.0)
        for i in range(3):
            assert invariance_test(s, s, i, [v for v in range(3) if v != i], TestConfig(alpha=0.5)) == "invariant"

    def test_example_one(self):
        obs, interv = example1_stats()
        cfg = TestConfig()
        assert invariance_test(obs, interv, 1, {0}, cfg) == "varying"
        assert chow_test(obs, interv, 1, [0], cfg.alpha / 2).reject
        assert variance_test(obs, interv, 1, [0], cfg.alpha / 2).reject
        assert invariance_test(obs, interv, 1, set(), cfg) == "invariant"

    def test_shift_detected(self):
        rng = np.random.default_rng(2)
        a = suff_stat(rng.standard_normal((1000, 2)))
        b = suff_stat(rng.standard_normal((1000, 2)) + [1.0, 0.0])
        assert invariance_test(a, b, 0, set(), TestConfig()) == "varying"
        assert invariance_test(a, b, 1, {0}, TestConfig()) == "invariant"

    def test_consistency_monotone(self):
        # alternative: coefficient 1.0 vs 1.15
        def reject_rate(n):
            hits = 0
            for seed in range(60):
                rng = np.random.default_rng(seed)
                x1 = rng.standard_normal(n)
                a = np.column_stack([x1, x1 + rng.standard_normal(n)])
                x1 = rng.standard_normal(n)
                b = np.column_stack([x1, 1.15 * x1 + rng.standard_normal(n)])
                hits += invariance_test(suff_stat(a), suff_stat(b), 1, {0}, TestConfig(alpha=0.01)) == "varying"
            return hits / 60

        rates = [reject_rate(n) for n in (500, 2000, 8000)]
        assert rates[0] <= rates[1] <= rates[2] and rates[2] > 0.9


class TestOracles:
    def test_ci_oracle(self):
        assert population_ci_oracle(CHAIN)(0, 2, {1})
        assert not population_ci_oracle(COLLIDER)(0, 1, {2})

    def test_invariance_oracle(self):
        g = IDag(Dag(2, [(0, 1)]), [{0}])
        inv = population_invariance_oracle(g)
        assert inv(0, 1, {0})
        assert not inv(0, 1, set())
        fig1 = IDag(Dag(3, [(0, 1), (0, 2), (1, 2)]), [{0, 1}, {2}])
        assert not population_invariance_oracle(fig1)(1, 0, {2})

    def test_ci_oracle_matches_large_sample(self):
        errors = total = 0
        for seed in range(4):
            rng = np.random.default_rng(seed)
            order = rng.permutation(5)
            edges = [(order[a], order[b]) for a, b in itr.combinations(range(5), 2) if rng.random() < 0.5]
            g = Dag(5, edges)
            model = sample_weights(g, rng=rng)
            s = suff_stat(sample(model, 100_000, rng))
            oracle = population_ci_oracle(g)
            cfg = TestConfig(alpha=1e-3)
            for i, j in itr.combinations(range(5), 2):
                rest = [v for v in range(5) if v not in (i, j)]
                for r in range(4):
                    for C in itr.combinations(rest, r):
                        total += 1
                        errors += oracle(i, j, C) != (ci_test(s, i, j, C, cfg) == "independent")
        assert errors / total < 0.02

    def test_invariance_oracle_without_settings(self):
        g = IDag(CHAIN)
        assert g.num_settings == 0
        assert d_separated(g.augmented(), {0}, {2}, {1})
