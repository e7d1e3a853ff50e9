"""Greedy permutation search: UT-IGSP, GSP, GSP with background knowledge, JCI-GSP.

Tests are plain callables:

* ``independent(i, j, C) -> bool``: True when ``x_i`` and ``x_j`` are judged
  conditionally independent given ``x_C`` in the observational setting.
* ``invariant(k, i, C) -> bool``: True when the conditional law of ``x_i`` given
  ``x_C`` is judged equal in setting ``k`` and the observational setting.

``utigsp.stats`` provides both finite-sample (Gaussian) and oracle versions.
"""

from __future__ import annotations

import itertools as itr
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from utigsp.graphs import BackgroundKnowledge, Dag, GraphError, check_permutation, covered_edges

logger = logging.getLogger(__name__)

CITest = Callable[[int, int, Iterable[int]], bool]
InvarianceTest = Callable[[int, int, Iterable[int]], bool]


def _no_settings(k, i, C):
    raise GraphError("invariance queried for a problem without interventional settings")


@dataclass
class ProblemInput:
    """Everything a learner needs besides the starting permutation."""

    p: int
    independent: CITest
    invariant: InvarianceTest = _no_settings
    known_targets: Sequence = ()
    background: Optional[BackgroundKnowledge] = None

    def __post_init__(self):
        self.known_targets = [frozenset(int(i) for i in t) for t in self.known_targets]
        for t in self.known_targets:
            if any(not 0 <= i < self.p for i in t):
                raise GraphError("known target out of range")
        if self.background is not None:
            self.background.check_nodes(self.p)

    @property
    def num_settings(self) -> int:
        return len(self.known_targets)


@dataclass(frozen=True, order=False)
class ScoreValue:
    edges: int
    target_total: int = 0
    infinite: bool = False

    @property
    def total(self) -> float:
        return math.inf if self.infinite else self.edges + self.target_total

    def __lt__(self, other: "ScoreValue") -> bool:
        return self.total < other.total

    def __le__(self, other: "ScoreValue") -> bool:
        return self.total <= other.total

    def to_dict(self) -> dict:
        return {
            "edges": self.edges,
            "target_total": self.target_total,
            "total": None if self.infinite else self.total,
            "infinite": self.infinite,
        }


@dataclass
class LearnResult:
    pi: tuple
    g: Dag
    est_targets: list
    score: ScoreValue
    trace: Optional[list] = None

    def to_dict(self) -> dict:
        return {
            "pi": list(self.pi),
            "p": self.g.p,
            "edges": sorted([list(e) for e in self.g.edges]),
            "est_targets": [sorted(t) for t in self.est_targets],
            "score": self.score.to_dict(),
        }


@dataclass(frozen=True)
class SearchOptions:
    """Search controls.

    depth
        Maximum DFS depth below each root; ``None`` searches the whole
        reachable plateau (needed for the consistency guarantee).
    restarts
        Number of starting permutations tried when no start is given: the
        greedy default first, then uniformly random ones.
    allow_uphill
        Also walk through moves that raise the score (within ``depth``).
    """

    depth: Optional[int] = 4
    restarts: int = 10
    allow_uphill: bool = False
    seed: Optional[int] = 0
    trace: bool = False


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

def minimal_imap(pi: Sequence[int], independent: CITest, background: Optional[BackgroundKnowledge] = None) -> Dag:
    """Minimal I-MAP of ``pi``: ``i -> j`` iff ``i`` precedes ``j`` and they are dependent
    given everything before ``j`` (or the pair is a known adjacency)."""
    known = background.known_adjacent if background is not None else frozenset()
    edges = []
    for b, j in enumerate(pi):
        before = frozenset(pi[:b])
        for i in pi[:b]:
            if (known and frozenset((i, j)) in known) or not independent(i, j, before - {i}):
                edges.append((i, j))
    # edges only point forward in pi, so the graph is acyclic by construction
    return Dag._trusted(len(pi), frozenset(edges))


def estimated_targets(g: Dag, invariant: InvarianceTest, known_targets: Sequence) -> list:
    """Known targets plus every node whose conditional given its parents in ``g`` varies."""
    return [
        frozenset(known) | {i for i in range(g.p) if i not in known and not invariant(k, i, g.parents(i))}
        for k, known in enumerate(known_targets)
    ]


def score(
    pi: Sequence[int],
    independent: CITest,
    invariant: InvarianceTest = _no_settings,
    known_targets: Sequence = (),
    background: Optional[BackgroundKnowledge] = None,
) -> ScoreValue:
    if background is not None and not background.respects_order(pi):
        return ScoreValue(0, 0, infinite=True)
    g = minimal_imap(pi, independent, background)
    est = estimated_targets(g, invariant, known_targets)
    return ScoreValue(g.num_edges, sum(len(t) for t in est))


def i_covered_edges(g: Dag, invariant: InvarianceTest, known_targets: Sequence) -> set:
    """Covered edges ``i -> j`` such that ``x_j | pa(j)`` varies in every setting whose
    known targets contain ``i``."""
    out = set()
    for i, j in covered_edges(g):
        settings = [k for k, t in enumerate(known_targets) if i in t]
        if all(not invariant(k, j, g.parents(j)) for k in settings):
            out.add((i, j))
    return out


def reversal_permutation(pi: Sequence[int], i: int, j: int) -> tuple:
    """Permutation realising the reversal of covered edge ``i -> j`` of the minimal I-MAP.

    ``j`` is pulled back to sit right after ``i`` (legal since nothing between
    them is an ancestor of ``j`` when the edge is covered) and the two are swapped.
    """
    order = list(pi)
    order.remove(j)
    order.insert(order.index(i), j)
    return tuple(order)


def greedy_start(p: int, independent: CITest) -> tuple:
    """Repeatedly place the remaining node with the fewest marginal dependencies
    among the remaining nodes (ties to the smallest index)."""
    remaining = list(range(p))
    order = []
    empty = frozenset()
    while remaining:
        counts = [sum(not independent(v, u, empty) for u in remaining if u != v) for v in remaining]
        v = remaining[int(np.argmin(counts))]
        order.append(v)
        remaining.remove(v)
    return tuple(order)


# ---------------------------------------------------------------------------
# Search engine
# ---------------------------------------------------------------------------

@dataclass
class _State:
    pi: tuple
    g: Dag
    targets: list
    score: ScoreValue


class PermutationSearch:
    """Greedy DFS over permutations for one problem.

    The instance memoises every permutation it has scored, so running it
    from several starting permutations shares work. ``use_i_covered``
    selects I-covered edge moves (UT-IGSP) instead of plain covered edges.
    """

    def __init__(self, problem: ProblemInput, use_i_covered: bool, opts: SearchOptions):
        self.problem = problem
        self.use_i_covered = use_i_covered
        self.opts = opts
        self.memo: dict = {}
        self._moves: dict = {}
        self._improved: dict = {}

    def evaluate(self, pi: tuple) -> _State:
        state = self.memo.get(pi)
        if state is not None:
            return state
        pr = self.problem
        bg = pr.background
        if bg is not None and not bg.respects_order(pi):
            state = _State(pi, None, None, ScoreValue(0, 0, infinite=True))
        else:
            g = minimal_imap(pi, pr.independent, bg)
            targets = estimated_targets(g, pr.invariant, pr.known_targets)
            state = _State(pi, g, targets, ScoreValue(g.num_edges, sum(len(t) for t in targets)))
        self.memo[pi] = state
        return state

    def moves(self, state: _State) -> list:
        out = self._moves.get(state.pi)
        if out is None:
            pr = self.problem
            if self.use_i_covered:
                edges = i_covered_edges(state.g, pr.invariant, pr.known_targets)
            else:
                edges = covered_edges(state.g)
            out = self._moves[state.pi] = sorted(edges)
        return out

    def improve(self, root: _State) -> Optional[_State]:
        """DFS from ``root`` through reversible edges; first strictly better state or None."""
        if root.pi in self._improved:
            return self._improved[root.pi]
        found = self._dfs(root)
        self._improved[root.pi] = found
        return found

    def _dfs(self, root: _State) -> Optional[_State]:
        depth_limit = self.opts.depth
        visited = {root.g.edges}
        stack = [(root, 0)]
        while stack:
            node, depth = stack.pop()
            if depth_limit is not None and depth >= depth_limit:
                continue
            children = []
            for i, j in self.moves(node):
                child = self.evaluate(reversal_permutation(node.pi, i, j))
                if child.score.infinite or child.g.edges in visited:
                    continue
                visited.add(child.g.edges)
                if child.score < root.score:
                    return child
                if child.score.total == root.score.total or self.opts.allow_uphill:
                    children.append(child)
            # reversed so the lexicographically first move is explored first
            stack.extend((c, depth + 1) for c in reversed(children))
        return None

    def run(self, start: tuple) -> LearnResult:
        current = self.evaluate(start)
        if current.score.infinite:
            raise GraphError(f"starting permutation {start} violates the known order")
        trace = [current.pi]
        while True:
            better = self.improve(current)
            if better is None:
                break
            logger.debug("score %s -> %s", current.score.total, better.score.total)
            current = better
            trace.append(current.pi)
        return LearnResult(current.pi, current.g, current.targets, current.score, trace if self.opts.trace else None)


def _run(problem: ProblemInput, start, opts: SearchOptions, use_i_covered: bool) -> LearnResult:
    searcher = PermutationSearch(problem, use_i_covered, opts)
    if start is not None:
        return searcher.run(check_permutation(start, problem.p))
    rng = np.random.default_rng(opts.seed)
    starts = [greedy_start(problem.p, problem.independent)]
    bg = problem.background
    tries = 0
    while len(starts) < max(opts.restarts, 1) and tries < 100 * max(opts.restarts, 1):
        tries += 1
        cand = tuple(int(v) for v in rng.permutation(problem.p))
        if bg is not None and not bg.respects_order(cand):
            cand = _repair_order(cand, bg)
        starts.append(cand)
    if bg is not None and not bg.respects_order(starts[0]):
        starts[0] = _repair_order(starts[0], bg)
    best = None
    for s in starts:
        res = searcher.run(s)
        if best is None or res.score < best.score:
            best = res
    return best


def _repair_order(pi: tuple, bg: BackgroundKnowledge) -> tuple:
    u, v = bg.order_partition
    return tuple([x for x in pi if x in u] + [x for x in pi if x in v])


def ut_igsp(problem: ProblemInput, start: Optional[Sequence[int]] = None, opts: SearchOptions = SearchOptions()) -> LearnResult:
    """Unknown-target IGSP.

    Depth-first search over permutations connected by I-covered edge
    reversals, minimising edges of the minimal I-MAP plus the number of
    estimated intervention targets. Without ``start`` the search is repeated
    from ``opts.restarts`` starting permutations and the best result kept.
    """
    return _run(problem, start, opts, use_i_covered=True)


def gsp(independent: CITest, p: int, start: Optional[Sequence[int]] = None, opts: SearchOptions = SearchOptions()) -> LearnResult:
    """Greedy sparsest permutation search over covered edge reversals (observational)."""
    return _run(ProblemInput(p, independent), start, opts, use_i_covered=False)


def gsp_background(
    independent: CITest,
    p: int,
    bg: BackgroundKnowledge,
    start: Optional[Sequence[int]] = None,
    opts: SearchOptions = SearchOptions(),
) -> LearnResult:
    """GSP with known adjacencies kept in every minimal I-MAP and an order partition
    whose violations score infinity."""
    problem = ProblemInput(p, independent, background=bg)
    if start is not None and not bg.respects_order(start):
        raise GraphError(f"starting permutation {tuple(start)} violates the known order")
    return _run(problem, start, opts, use_i_covered=False)


def joint_problem(problem: ProblemInput) -> tuple:
    """Lift a problem to intervention indicators ``p..p+K-1`` plus system nodes.

    Returns ``(independent, background)`` for GSP with background knowledge.
    Indicator pairs are forced adjacent; indicator-vs-system queries are
    answered by the invariance test; system pairs by the observational test.
    """
    p, K = problem.p, problem.num_settings

    cache: dict = {}

    def independent(a, b, C):
        key = (a, b, C if isinstance(C, frozenset) else frozenset(C))
        out = cache.get(key)
        if out is None:
            if a >= p and b >= p:
                out = False
            else:
                system_c = frozenset(c for c in key[2] if c < p)
                if a >= p or b >= p:
                    k, i = (a - p, b) if a >= p else (b - p, a)
                    out = problem.invariant(k, i, system_c)
                else:
                    out = problem.independent(a, b, system_c)
            cache[key] = out
        return out

    adj = {frozenset((p + a, p + b)) for a, b in itr.combinations(range(K), 2)}
    adj |= {frozenset((p + k, i)) for k, t in enumerate(problem.known_targets) for i in t}
    if problem.background is not None:
        adj |= set(problem.background.known_adjacent)
    bg = BackgroundKnowledge(adj, (frozenset(range(p, p + K)), frozenset(range(p))))
    return independent, bg


def jci_gsp(problem: ProblemInput, start: Optional[Sequence[int]] = None, opts: SearchOptions = SearchOptions()) -> LearnResult:
    """JCI-GSP: GSP with background knowledge on the joint indicator/system problem.

    The system-node subgraph is returned; estimated targets of setting ``k``
    are the children of its indicator.
    """
    p, K = problem.p, problem.num_settings
    if K == 0:
        return _run(ProblemInput(p, problem.independent, background=problem.background), start, opts, use_i_covered=False)
    if start is not None:
        return start_runner(problem, "jci-gsp", opts)(start)
    independent, bg = joint_problem(problem)
    zetas = tuple(range(p, p + K))
    joint = ProblemInput(p + K, independent, background=bg)
    return _project_joint(_run_joint_default(problem, joint, zetas, opts), p, K)


def _project_joint(res: LearnResult, p: int, K: int) -> LearnResult:
    g = Dag._trusted(p, frozenset((i, j) for i, j in res.g.edges if i < p and j < p))
    targets = [frozenset(c for c in res.g.children(p + k) if c < p) for k in range(K)]
    score = ScoreValue(g.num_edges, sum(len(t) for t in targets))
    pi = tuple(v for v in res.pi if v < p)
    trace = [tuple(v for v in t if v < p) for t in res.trace] if res.trace else None
    return LearnResult(pi, g, targets, score, trace)


def start_runner(problem: ProblemInput, learner: str, opts: SearchOptions = SearchOptions()) -> Callable[[Sequence[int]], LearnResult]:
    """Return ``run(start)`` for one learner on one problem.

    All calls share a single :class:`PermutationSearch`, which makes
    sweeping over many starting permutations much cheaper than calling the
    learner repeatedly. ``learner`` is ``"ut-igsp"``, ``"gsp"`` or ``"jci-gsp"``;
    ``"gsp"`` ignores the interventional settings.
    """
    p, K = problem.p, problem.num_settings
    if learner == "ut-igsp":
        searcher = PermutationSearch(problem, True, opts)
        return lambda start: searcher.run(check_permutation(start, p))
    if learner == "gsp" or (learner == "jci-gsp" and K == 0):
        searcher = PermutationSearch(ProblemInput(p, problem.independent, background=problem.background), False, opts)
        bg = problem.background

        def run_gsp(start):
            start = check_permutation(start, p)
            if bg is not None and not bg.respects_order(start):
                raise GraphError(f"starting permutation {start} violates the known order")
            return searcher.run(start)

        return run_gsp
    if learner == "jci-gsp":
        independent, bg = joint_problem(problem)
        zetas = tuple(range(p, p + K))
        searcher = PermutationSearch(ProblemInput(p + K, independent, background=bg), False, opts)
        projected: dict = {}

        def run_jci(start):
            res = searcher.run(zetas + check_permutation(start, p))
            if opts.trace:
                return _project_joint(res, p, K)
            if res.pi not in projected:
                projected[res.pi] = _project_joint(res, p, K)
            return projected[res.pi]

        return run_jci
    raise ValueError(f"unknown learner {learner!r}")


def _run_joint_default(problem: ProblemInput, joint: ProblemInput, zetas: tuple, opts: SearchOptions) -> LearnResult:
    rng = np.random.default_rng(opts.seed)
    starts = [greedy_start(problem.p, problem.independent)]
    while len(starts) < max(opts.restarts, 1):
        starts.append(tuple(int(v) for v in rng.permutation(problem.p)))
    searcher = PermutationSearch(joint, False, opts)
    best = None
    for s in starts:
        res = searcher.run(zetas + s)
        if best is None or res.score < best.score:
            best = res
    return best
