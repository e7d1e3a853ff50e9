"""Evaluation metrics: SHD, I-MEC recovery, target recovery and ROC points."""

from __future__ import annotations

import itertools as itr
from dataclasses import asdict, dataclass
from typing import Callable, Sequence, Union

from utigsp.graphs import Dag, IDag, Pdag, i_essential_graph, i_markov_equivalent


@dataclass(frozen=True)
class MetricReport:
    """Per-run evaluation summary.

    ``shd`` compares I-essential graphs (estimated targets on the estimated
    side, true targets on the true side). Edge counts compare the estimated
    DAG with the true DAG, both as directed edges and as adjacencies.
    """

    shd: int
    correct_imec: bool
    target_fp: int
    target_fn: int
    edge_tp: int
    edge_fp: int
    edge_fn: int
    skeleton_tp: int
    skeleton_fp: int
    skeleton_fn: int

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name != "correct_imec" and value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


def _as_pdag(g: Union[Dag, Pdag]) -> Pdag:
    return Pdag.from_dag(g) if isinstance(g, Dag) else g


def shd(a: Union[Dag, Pdag], b: Union[Dag, Pdag]) -> int:
    """Structural Hamming distance between two partially directed graphs.

    Every node pair whose status differs (absent, undirected, or one of the
    two directions) costs 1, so a reversed edge counts once.
    """
    a, b = _as_pdag(a), _as_pdag(b)
    if a.p != b.p:
        raise ValueError(f"graphs have different node counts ({a.p} vs {b.p})")
    pairs = {tuple(sorted(e)) for e in itr.chain(a.directed, a.undirected, b.directed, b.undirected)}
    return sum(a.edge_status(i, j) != b.edge_status(i, j) for i, j in pairs)


def correct_imec(est_g: Dag, est_targets: Sequence, true_g: Dag, true_targets: Sequence) -> bool:
    """True iff the estimated and true I-DAGs share skeleton and v-structures."""
    if len(est_targets) != len(true_targets):
        raise ValueError("estimated and true target lists differ in length")
    return i_markov_equivalent(IDag(est_g, est_targets), IDag(true_g, true_targets))


def target_recovery(est_targets: Sequence, true_targets: Sequence) -> tuple[int, int]:
    """``(false positives, false negatives)`` summed over settings."""
    if len(est_targets) != len(true_targets):
        raise ValueError("estimated and true target lists differ in length")
    fp = sum(len(set(e) - set(t)) for e, t in zip(est_targets, true_targets))
    fn = sum(len(set(t) - set(e)) for e, t in zip(est_targets, true_targets))
    return fp, fn


def edge_counts(est: Dag, truth: Dag) -> dict:
    """Directed and skeleton true/false positive and false negative counts."""
    est_skel, true_skel = est.skeleton(), truth.skeleton()
    return {
        "edge_tp": len(est.edges & truth.edges),
        "edge_fp": len(est.edges - truth.edges),
        "edge_fn": len(truth.edges - est.edges),
        "skeleton_tp": len(est_skel & true_skel),
        "skeleton_fp": len(est_skel - true_skel),
        "skeleton_fn": len(true_skel - est_skel),
    }


def evaluate(est_g: Dag, est_targets: Sequence, true_g: Dag, true_targets: Sequence) -> MetricReport:
    """Compute every metric for one learner run."""
    est_ess = i_essential_graph(IDag(est_g, est_targets))
    true_ess = i_essential_graph(IDag(true_g, true_targets))
    fp, fn = target_recovery(est_targets, true_targets)
    return MetricReport(
        shd=shd(est_ess, true_ess),
        correct_imec=correct_imec(est_g, est_targets, true_g, true_targets),
        target_fp=fp,
        target_fn=fn,
        **edge_counts(est_g, true_g),
    )


@dataclass(frozen=True)
class RocPoint:
    """One ROC point.

    True positive rates divide by the true edge count. The skeleton false
    positive rate divides by the number of truly absent pairs; the directed
    one by all node pairs, since a reversed edge is also a false positive.
    Rates with a zero denominator are reported as 0.
    """

    alpha: float
    directed_tp: int
    directed_fp: int
    skeleton_tp: int
    skeleton_fp: int
    directed_tpr: float
    directed_fpr: float
    skeleton_tpr: float
    skeleton_fpr: float

    def to_dict(self) -> dict:
        return asdict(self)


def _rate(num: int, den: int) -> float:
    return num / den if den else 0.0


def roc_point(alpha: float, est: Union[Dag, Pdag], truth: Dag) -> RocPoint:
    est = _as_pdag(est)
    if est.p != truth.p:
        raise ValueError("graphs have different node counts")
    pairs = truth.p * (truth.p - 1) // 2
    directed_tp = len(est.directed & truth.edges)
    directed_fp = len(est.directed - truth.edges)
    skel, true_skel = est.skeleton(), truth.skeleton()
    skeleton_tp = len(skel & true_skel)
    skeleton_fp = len(skel - true_skel)
    n_true = len(true_skel)
    return RocPoint(
        alpha,
        directed_tp,
        directed_fp,
        skeleton_tp,
        skeleton_fp,
        _rate(directed_tp, n_true),
        _rate(directed_fp, pairs),
        _rate(skeleton_tp, n_true),
        _rate(skeleton_fp, pairs - n_true),
    )


def roc_sweep(learn_fn: Callable[[float], Union[Dag, Pdag]], alphas: Sequence[float], truth: Dag) -> list[RocPoint]:
    """Run ``learn_fn(alpha)`` for each significance level and score it against ``truth``.

    ``learn_fn`` may return a DAG or a partially directed graph; only its
    directed edges count towards the directed curve.
    """
    alphas = list(alphas)
    if any(b < a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be sorted in increasing order")
    return [roc_point(a, learn_fn(a), truth) for a in alphas]


def pooled_roc(curves: Sequence[Sequence[RocPoint]], truths: Sequence[Dag]) -> list[RocPoint]:
    """Pool several ROC curves over the same alphas by summing counts before taking rates."""
    if not curves:
        return []
    out = []
    n_true = sum(t.num_edges for t in truths)
    pairs = sum(t.p * (t.p - 1) // 2 for t in truths)
    for points in zip(*curves):
        alpha = points[0].alpha
        if any(pt.alpha != alpha for pt in points):
            raise ValueError("curves were computed on different alphas")
        dtp = sum(pt.directed_tp for pt in points)
        dfp = sum(pt.directed_fp for pt in points)
        stp = sum(pt.skeleton_tp for pt in points)
        sfp = sum(pt.skeleton_fp for pt in points)
        out.append(
            RocPoint(alpha, dtp, dfp, stp, sfp, _rate(dtp, n_true), _rate(dfp, pairs), _rate(stp, n_true), _rate(sfp, pairs - n_true))
        )
    return out
