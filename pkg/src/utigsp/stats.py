"""Gaussian conditional independence and conditional invariance tests.

Everything works from sufficient statistics (sample size, mean, covariance),
so the same code serves finite-sample data and exact population moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import stats as sps

from utigsp.graphs import Dag, IDag, d_separated


class DataError(ValueError):
    """Raised for malformed or insufficient data."""


class TestError(ValueError):
    """Raised when a test cannot be run on the supplied statistics."""

    __test__ = False  # keep pytest from collecting this as a test class


@dataclass(frozen=True)
class SuffStat:
    n: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if self.n < 2:
            raise DataError(f"need at least 2 samples, got {self.n}")
        if cov.shape != (mean.size, mean.size):
            raise DataError("mean and covariance shapes disagree")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0):
            raise DataError("covariance is not symmetric")
        if np.any(np.diag(cov) < 0):
            raise DataError("covariance has a negative diagonal entry")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def p(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {"n": int(self.n), "mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SuffStat":
        return cls(int(d["n"]), np.array(d["mean"]), np.array(d["cov"]))


@dataclass(frozen=True)
class TestConfig:
    alpha: float = 1e-5
    regularization: float = 1e-8

    __test__ = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.regularization < 0:
            raise ValueError("regularization must be nonnegative")


@dataclass(frozen=True)
class RegressionStats:
    coeffs: np.ndarray
    intercept: float
    resid_var: float
    dof: int
    rss: float
    ridged: bool = False


@dataclass(frozen=True)
class TestResult:
    statistic: float
    pvalue: float
    reject: bool
    ridged: bool = False

    __test__ = False


def suff_stat(data) -> SuffStat:
    """Sample mean and unbiased covariance of an ``n x p`` matrix."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DataError("data must be a 2-d array")
    n = data.shape[0]
    if n < 2:
        raise DataError(f"need at least 2 samples, got {n}")
    if not np.all(np.isfinite(data)):
        raise DataError("data contains non-finite entries")
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (n - 1)
    return SuffStat(n, mean, (cov + cov.T) / 2)


def _solve_block(cov: np.ndarray, C: list, rhs: np.ndarray, eps: float):
    """Solve ``cov[C, C] x = rhs``, adding a small ridge if the block is near-singular."""
    block = cov[np.ix_(C, C)]
    ridged = False
    if np.linalg.cond(block) > 1e12:
        scale = eps * np.trace(block) / len(C)
        block = block + max(scale, eps) * np.eye(len(C))
        ridged = True
    try:
        return np.linalg.solve(block, rhs), ridged
    except np.linalg.LinAlgError as exc:
        raise TestError("conditioning block is singular even after ridge") from exc


def regression_stats(s: SuffStat, i: int, C: Iterable[int], regularization: float = 1e-8) -> RegressionStats:
    """OLS regression of ``x_i`` on ``x_C`` (with intercept) from sufficient statistics."""
    C = sorted(C)
    if i in C:
        raise ValueError(f"response {i} is in the conditioning set")
    dof = s.n - len(C) - 1
    if dof < 1:
        raise TestError(f"not enough samples ({s.n}) for {len(C)} regressors")
    var_i = s.cov[i, i]
    if not C:
        rss = (s.n - 1) * var_i
        return RegressionStats(np.zeros(0), float(s.mean[i]), rss / dof, dof, rss)
    beta, ridged = _solve_block(s.cov, C, s.cov[C, i], regularization)
    explained = float(s.cov[i, C] @ beta)
    rss = max((s.n - 1) * (var_i - explained), 0.0)
    intercept = float(s.mean[i] - beta @ s.mean[C])
    return RegressionStats(beta, intercept, rss / dof, dof, rss, ridged)


def partial_correlation(s: SuffStat, i: int, j: int, C: Iterable[int], regularization: float = 1e-8):
    idx = [i, j] + sorted(C)
    block = s.cov[np.ix_(idx, idx)]
    ridged = False
    if len(idx) > 2 and np.linalg.cond(block) > 1e12:
        scale = regularization * np.trace(block) / len(idx)
        block = block + max(scale, regularization) * np.eye(len(idx))
        ridged = True
    try:
        prec = np.linalg.inv(block)
    except np.linalg.LinAlgError as exc:
        raise TestError("covariance block is singular") from exc
    denom = math.sqrt(prec[0, 0] * prec[1, 1])
    if denom == 0:
        return 0.0, ridged
    return float(np.clip(-prec[0, 1] / denom, -1.0, 1.0)), ridged


def fisher_z(s: SuffStat, i: int, j: int, C: Iterable[int], cfg: TestConfig) -> TestResult:
    """Partial-correlation test of ``x_i _||_ x_j | x_C`` with Fisher's z-transform."""
    C = set(C)
    if i == j or i in C or j in C:
        raise ValueError("i, j must be distinct and outside C")
    dof = s.n - len(C) - 3
    if dof < 1:
        raise TestError(f"not enough samples ({s.n}) for conditioning set of size {len(C)}")
    rho, ridged = partial_correlation(s, i, j, C, cfg.regularization)
    rho = min(max(rho, -1 + 1e-15), 1 - 1e-15)
    z = math.sqrt(dof) * math.atanh(rho)
    pval = 2 * sps.norm.sf(abs(z))
    return TestResult(z, pval, abs(z) > sps.norm.isf(cfg.alpha / 2), ridged)


def ci_test(s: SuffStat, i: int, j: int, C: Iterable[int], cfg: TestConfig) -> str:
    """``'independent'`` or ``'dependent'``."""
    return "dependent" if fisher_z(s, i, j, C, cfg).reject else "independent"


def _pooled(s1: SuffStat, s2: SuffStat) -> SuffStat:
    n = s1.n + s2.n
    mean = (s1.n * s1.mean + s2.n * s2.mean) / n
    diff = s1.mean - s2.mean
    scatter = (s1.n - 1) * s1.cov + (s2.n - 1) * s2.cov + (s1.n * s2.n / n) * np.outer(diff, diff)
    return SuffStat(n, mean, scatter / (n - 1))


def chow_test(s1: SuffStat, s2: SuffStat, i: int, C: Iterable[int], alpha: float, regularization: float = 1e-8) -> TestResult:
    """Chow F test for equal regression coefficients and intercepts of ``x_i`` on ``x_C``."""
    C = sorted(C)
    k = len(C) + 1
    r1 = regression_stats(s1, i, C, regularization)
    r2 = regression_stats(s2, i, C, regularization)
    rp = regression_stats(_pooled(s1, s2), i, C, regularization)
    dof2 = s1.n + s2.n - 2 * k
    if dof2 < 1:
        raise TestError("not enough samples for the Chow test")
    rss_sep = r1.rss + r2.rss
    if rss_sep <= 0:
        stat = 0.0 if rp.rss - rss_sep <= 1e-12 * max(rp.rss, 1.0) else math.inf
    else:
        stat = max(rp.rss - rss_sep, 0.0) / k / (rss_sep / dof2)
    pval = float(sps.f.sf(stat, k, dof2)) if math.isfinite(stat) else 0.0
    return TestResult(stat, pval, pval < alpha, r1.ridged or r2.ridged or rp.ridged)


def variance_test(s1: SuffStat, s2: SuffStat, i: int, C: Iterable[int], alpha: float, regularization: float = 1e-8) -> TestResult:
    """Two-sided F test for equal residual variances of ``x_i`` given ``x_C``."""
    r1 = regression_stats(s1, i, C, regularization)
    r2 = regression_stats(s2, i, C, regularization)
    if r2.resid_var == 0:
        stat = 1.0 if r1.resid_var == 0 else math.inf
    else:
        stat = r1.resid_var / r2.resid_var
    if math.isinf(stat) or stat == 0:
        pval = 0.0
    else:
        tail = min(sps.f.cdf(stat, r1.dof, r2.dof), sps.f.sf(stat, r1.dof, r2.dof))
        pval = min(1.0, 2 * float(tail))
    return TestResult(stat, pval, pval < alpha, r1.ridged or r2.ridged)


def invariance_test(s_obs: SuffStat, s_k: SuffStat, i: int, C: Iterable[int], cfg: TestConfig) -> str:
    """``'invariant'`` or ``'varying'`` for the conditional law of ``x_i`` given ``x_C``.

    Coefficient equality (Chow) and variance equality (F) are each run at
    ``alpha / 2``; either rejection means the conditional differs.
    """
    if s_obs.p != s_k.p:
        raise ValueError("sufficient statistics cover different variable counts")
    C = sorted(set(C))
    if i in C:
        raise ValueError(f"node {i} is in the conditioning set")
    for s in (s_obs, s_k):
        if s.n <= len(C) + 3:
            raise TestError(f"not enough samples ({s.n}) for conditioning set of size {len(C)}")
    half = cfg.alpha / 2
    if chow_test(s_obs, s_k, i, C, half, cfg.regularization).reject:
        return "varying"
    if variance_test(s_obs, s_k, i, C, half, cfg.regularization).reject:
        return "varying"
    return "invariant"


# ---------------------------------------------------------------------------
# Test callables consumed by the learners
# ---------------------------------------------------------------------------

class GaussCITester:
    """Memoised Fisher-z tester: ``tester(i, j, C)`` is True when independent."""

    def __init__(self, s: SuffStat, cfg: TestConfig = TestConfig()):
        self.s = s
        self.cfg = cfg
        self.cache: dict = {}
        self.calls = 0

    def __call__(self, i: int, j: int, C) -> bool:
        key = (min(i, j), max(i, j), frozenset(C))
        hit = self.cache.get(key)
        if hit is None:
            self.calls += 1
            hit = not fisher_z(self.s, key[0], key[1], key[2], self.cfg).reject
            self.cache[key] = hit
        return hit


class GaussInvarianceTester:
    """Memoised invariance tester: ``tester(k, i, C)`` is True when invariant in setting k."""

    def __init__(self, s_obs: SuffStat, s_int: list, cfg: TestConfig = TestConfig()):
        self.s_obs = s_obs
        self.s_int = list(s_int)
        self.cfg = cfg
        self.cache: dict = {}
        self.calls = 0

    def __call__(self, k: int, i: int, C) -> bool:
        key = (k, i, frozenset(C))
        hit = self.cache.get(key)
        if hit is None:
            self.calls += 1
            hit = invariance_test(self.s_obs, self.s_int[k], i, key[2], self.cfg) == "invariant"
            self.cache[key] = hit
        return hit


def population_ci_oracle(g: Dag) -> Callable[[int, int, Iterable[int]], bool]:
    """CI oracle answering independent exactly when d-separated in ``g``."""
    cache: dict = {}

    def oracle(i, j, C):
        key = (min(i, j), max(i, j), frozenset(C))
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = d_separated(g, {i}, {j}, key[2])
        return hit

    return oracle


def population_invariance_oracle(g: IDag) -> Callable[[int, int, Iterable[int]], bool]:
    """Invariance oracle: setting ``k`` leaves ``x_i | x_C`` unchanged iff the
    intervention vertex of ``k`` is d-separated from ``i`` given ``C`` and the
    other intervention vertices in the augmented graph."""
    aug = g.augmented()
    p, K = g.p, g.num_settings
    cache: dict = {}

    def oracle(k, i, C):
        key = (k, i, frozenset(C))
        hit = cache.get(key)
        if hit is None:
            others = {p + kk for kk in range(K) if kk != k}
            hit = cache[key] = d_separated(aug, {p + k}, {i}, set(C) | others)
        return hit

    return oracle


def population_suff_stat(mean, cov, n: int = 10**9) -> SuffStat:
    """Wrap exact moments as sufficient statistics with a nominal sample size."""
    cov = np.asarray(cov, dtype=float)
    return SuffStat(n, np.asarray(mean, dtype=float), (cov + cov.T) / 2)


def make_testers(s_obs: SuffStat, s_int: Optional[list] = None, cfg: TestConfig = TestConfig()):
    return GaussCITester(s_obs, cfg), GaussInvarianceTester(s_obs, s_int or [], cfg)
