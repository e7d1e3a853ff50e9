"""Random linear-Gaussian structural equation models and interventions on them.

The model is ``X = W^T X + eps`` with ``eps ~ N(noise_means, diag(noise_vars))``,
so ``W[i, j]`` is the weight of edge ``i -> j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from utigsp.graphs import Dag


@dataclass(frozen=True)
class SemModel:
    g: Dag
    weights: np.ndarray
    noise_means: Optional[np.ndarray] = None
    noise_vars: Optional[np.ndarray] = None

    def __post_init__(self):
        p = self.g.p
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (p, p):
            raise ValueError(f"weights must be {p}x{p}")
        support = {(int(i), int(j)) for i, j in zip(*np.nonzero(w))}
        if support != set(self.g.edges):
            raise ValueError("weight support does not match the graph's edges")
        means = np.zeros(p) if self.noise_means is None else np.asarray(self.noise_means, dtype=float)
        var = np.ones(p) if self.noise_vars is None else np.asarray(self.noise_vars, dtype=float)
        if means.shape != (p,) or var.shape != (p,):
            raise ValueError("noise parameters must be length-p vectors")
        if np.any(var <= 0):
            raise ValueError("noise variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "noise_means", means)
        object.__setattr__(self, "noise_vars", var)

    @property
    def p(self) -> int:
        return self.g.p

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "weights": self.weights.tolist(),
            "noise_means": self.noise_means.tolist(),
            "noise_vars": self.noise_vars.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SemModel":
        w = np.array(d["weights"], dtype=float)
        return cls(Dag.from_amat(w != 0), w, np.array(d["noise_means"]), np.array(d["noise_vars"]))


@dataclass(frozen=True)
class InterventionSpec:
    """A shift or perfect intervention on ``targets``.

    Shift adds ``shift`` to the targets' noise means. Perfect cuts every
    incoming edge of the targets and resets their noise to
    ``N(perfect_mean, perfect_var)``.
    """

    kind: str
    targets: frozenset
    shift: float = 1.0
    perfect_mean: float = 1.0
    perfect_var: float = 0.1

    def __post_init__(self):
        if self.kind not in ("shift", "perfect"):
            raise ValueError(f"unknown intervention kind {self.kind!r}")
        targets = frozenset(int(i) for i in self.targets)
        if not targets:
            raise ValueError("intervention targets must be nonempty")
        object.__setattr__(self, "targets", targets)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "targets": sorted(self.targets),
            "shift": self.shift,
            "perfect_mean": self.perfect_mean,
            "perfect_var": self.perfect_var,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InterventionSpec":
        return cls(d["kind"], frozenset(d["targets"]), d.get("shift", 1.0), d.get("perfect_mean", 1.0), d.get("perfect_var", 0.1))


@dataclass(frozen=True)
class SimConfig:
    p: int = 20
    s: float = 1.5
    K: int = 5
    known_per_setting: int = 1
    num_offtarget: int = 0
    n: int = 1000
    weight_range: tuple = (0.25, 1.0)
    intervention: str = "shift"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.s < self.p:
            raise ValueError(f"expected neighbourhood size must lie in (0, p), got {self.s}")
        if self.known_per_setting != 1:
            raise ValueError("only single-node known targets are supported")
        if self.K < 0 or self.num_offtarget < 0 or self.K + self.num_offtarget > self.p:
            raise ValueError(f"need K + num_offtarget <= p, got K={self.K}, l={self.num_offtarget}, p={self.p}")
        if self.n < 1:
            raise ValueError("n must be positive")


def sample_er_dag(p: int, s: float, rng: np.random.Generator) -> Dag:
    """Erdos-Renyi DAG with expected neighbourhood size ``s``.

    A uniformly random topological order is drawn and each forward pair gets
    an edge with probability ``s / (p - 1)``.
    """
    if p == 1:
        return Dag(1)
    if not 0 <= s < p:
        raise ValueError(f"s must lie in [0, p), got {s}")
    prob = s / (p - 1)
    order = rng.permutation(p)
    mask = np.triu(rng.random((p, p)) < prob, k=1)
    rows, cols = np.nonzero(mask)
    return Dag(p, ((int(order[a]), int(order[b])) for a, b in zip(rows, cols)))


def sample_weights(g: Dag, weight_range=(0.25, 1.0), rng: Optional[np.random.Generator] = None) -> SemModel:
    """Edge weights uniform on ``[-hi, -lo] U [lo, hi]``; standard normal noise."""
    rng = np.random.default_rng() if rng is None else rng
    lo, hi = weight_range
    w = np.zeros((g.p, g.p))
    for i, j in sorted(g.edges):
        w[i, j] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
    return SemModel(g, w)


def sample_targets(p: int, K: int, num_offtarget: int, rng: np.random.Generator) -> list:
    """``K`` disjoint singleton known targets plus ``num_offtarget`` unknown ones per setting.

    Returns a list of ``(known, unknown)`` frozenset pairs.
    """
    if K < 0 or num_offtarget < 0 or K > p or K + num_offtarget > p:
        raise ValueError(f"cannot draw K={K} settings with {num_offtarget} off-target nodes from p={p}")
    known = rng.choice(p, size=K, replace=False)
    out = []
    for k in range(K):
        pool = np.array([v for v in range(p) if v != known[k]])
        unknown = rng.choice(pool, size=num_offtarget, replace=False) if num_offtarget else []
        out.append((frozenset({int(known[k])}), frozenset(int(u) for u in unknown)))
    return out


def apply_intervention(m: SemModel, spec: InterventionSpec) -> SemModel:
    if any(not 0 <= i < m.p for i in spec.targets):
        raise ValueError("intervention target out of range")
    targets = sorted(spec.targets)
    means = m.noise_means.copy()
    var = m.noise_vars.copy()
    if spec.kind == "shift":
        means[targets] += spec.shift
        return SemModel(m.g, m.weights, means, var)
    w = m.weights.copy()
    w[:, targets] = 0.0
    means[targets] = spec.perfect_mean
    var[targets] = spec.perfect_var
    g = Dag(m.p, (e for e in m.g.edges if e[1] not in spec.targets))
    return SemModel(g, w, means, var)


def sample(m: SemModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` samples; rows solve ``x = x W + eps``."""
    if n < 1:
        raise ValueError("n must be positive")
    eps = rng.standard_normal((n, m.p)) * np.sqrt(m.noise_vars) + m.noise_means
    x = np.zeros_like(eps)
    for j in m.g.topological_order():
        x[:, j] = eps[:, j] + x @ m.weights[:, j]
    return x


def population_cov(m: SemModel) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and covariance of the model."""
    inv = np.linalg.inv(np.eye(m.p) - m.weights)
    mean = inv.T @ m.noise_means
    cov = inv.T @ np.diag(m.noise_vars) @ inv
    return mean, (cov + cov.T) / 2
