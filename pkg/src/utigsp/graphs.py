"""DAGs, partially directed graphs and the equivalence machinery built on them.

Nodes are integers ``0..p-1``. Every graph object is immutable; operations
return new graphs.
"""

from __future__ import annotations

import itertools as itr
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

Edge = tuple[int, int]
Permutation = tuple[int, ...]


class GraphError(ValueError):
    """Raised for invalid graph arguments."""


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = cycle
        super().__init__("edges create the cycle " + "->".join(map(str, cycle)))


def _find_cycle(p, children):
    indeg = [0] * p
    for ch in children:
        for c in ch:
            indeg[c] += 1
    ready = [i for i in range(p) if indeg[i] == 0]
    seen = 0
    while ready:
        node = ready.pop()
        seen += 1
        for c in children[node]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if seen == p:
        return None
    color = [0] * p
    for root in range(p):
        if color[root]:
            continue
        stack = [(root, iter(sorted(children[root])))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                path.pop()
            elif color[nxt] == 1:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == 0:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(sorted(children[nxt]))))
    return None


class Dag:
    """Directed acyclic graph over nodes ``0..p-1``.

    Parameters
    ----------
    p : int
        Number of nodes.
    edges : iterable of (i, j)
        Directed edges ``i -> j``.
    check_acyclic : bool
        Skip the cycle check only when acyclicity is known by construction.
    """

    __slots__ = ("p", "edges", "_parents", "_children", "_hash")

    def __init__(self, p: int, edges: Iterable[Edge] = (), check_acyclic: bool = True):
        if p < 0:
            raise GraphError(f"node count must be nonnegative, got {p}")
        edge_list = [(int(i), int(j)) for i, j in edges]
        edge_set = frozenset(edge_list)
        if len(edge_set) != len(edge_list):
            raise GraphError("duplicate edges")
        parents = [set() for _ in range(p)]
        children = [set() for _ in range(p)]
        for i, j in edge_set:
            if not (0 <= i < p and 0 <= j < p):
                raise GraphError(f"edge {i}->{j} out of range for p={p}")
            if i == j:
                raise GraphError(f"self-loop at {i}")
            parents[j].add(i)
            children[i].add(j)
        if check_acyclic:
            cycle = _find_cycle(p, children)
            if cycle is not None:
                raise CycleError(cycle)
        self.p = p
        self.edges = edge_set
        self._parents = tuple(frozenset(s) for s in parents)
        self._children = tuple(frozenset(s) for s in children)
        self._hash = hash((p, edge_set))

    @classmethod
    def _trusted(cls, p: int, edges: frozenset) -> "Dag":
        """Skip all validation; ``edges`` must be a frozenset of in-range int pairs of an acyclic graph."""
        self = object.__new__(cls)
        parents = [[] for _ in range(p)]
        children = [[] for _ in range(p)]
        for i, j in edges:
            parents[j].append(i)
            children[i].append(j)
        self.p = p
        self.edges = edges
        self._parents = tuple(map(frozenset, parents))
        self._children = tuple(map(frozenset, children))
        self._hash = hash((p, edges))
        return self

    @classmethod
    def from_parents(cls, parents: Sequence[Iterable[int]]) -> "Dag":
        return cls(len(parents), ((i, j) for j, pa in enumerate(parents) for i in pa))

    @classmethod
    def from_amat(cls, amat) -> "Dag":
        """Build from an adjacency matrix with ``amat[i, j] != 0`` meaning ``i -> j``."""
        p = len(amat)
        return cls(p, ((i, j) for i in range(p) for j in range(p) if amat[i][j]))

    def __eq__(self, other):
        return isinstance(other, Dag) and self.p == other.p and self.edges == other.edges

    def __hash__(self):
        return self._hash

    def __len__(self):
        return len(self.edges)

    def __repr__(self):
        return f"Dag(p={self.p}, edges={sorted(self.edges)})"

    @property
    def nodes(self) -> range:
        return range(self.p)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def parents(self, i: int) -> frozenset:
        return self._parents[i]

    def children(self, i: int) -> frozenset:
        return self._children[i]

    def neighbors(self, i: int) -> frozenset:
        return self._parents[i] | self._children[i]

    def has_edge(self, i: int, j: int) -> bool:
        return (i, j) in self.edges

    def adjacent(self, i: int, j: int) -> bool:
        return (i, j) in self.edges or (j, i) in self.edges

    def is_sink(self, i: int) -> bool:
        return not self._children[i]

    def descendants(self, i: int) -> set:
        """Proper descendants of ``i``."""
        seen = set()
        queue = deque(self._children[i])
        while queue:
            node = queue.popleft()
            if node not in seen:
                seen.add(node)
                queue.extend(self._children[node])
        return seen

    def ancestors(self, i: int) -> set:
        """Proper ancestors of ``i``."""
        return ancestors_of(self, [i]) - {i}

    def topological_order(self) -> list[int]:
        """Kahn's algorithm, smallest ready node first (deterministic)."""
        import heapq

        indeg = [len(pa) for pa in self._parents]
        ready = [i for i in range(self.p) if indeg[i] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            node = heapq.heappop(ready)
            order.append(node)
            for ch in self._children[node]:
                indeg[ch] -= 1
                if indeg[ch] == 0:
                    heapq.heappush(ready, ch)
        return order

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in self.edges)

    def v_structures(self) -> frozenset:
        """Triples ``(i, k, j)`` with ``i -> k <- j``, ``i < j`` and ``i, j`` non-adjacent."""
        out = set()
        for k in range(self.p):
            for i, j in itr.combinations(sorted(self._parents[k]), 2):
                if not self.adjacent(i, j):
                    out.add((i, k, j))
        return frozenset(out)

    def add_edge(self, i: int, j: int) -> "Dag":
        if (i, j) in self.edges:
            raise GraphError(f"edge {i}->{j} already present")
        return Dag(self.p, self.edges | {(i, j)})

    def remove_edge(self, i: int, j: int) -> "Dag":
        if (i, j) not in self.edges:
            raise GraphError(f"edge {i}->{j} not present")
        return Dag(self.p, self.edges - {(i, j)})

    def induced_subgraph(self, nodes: Iterable[int]) -> "Dag":
        """Subgraph on ``nodes``, relabelled ``0..len(nodes)-1`` in sorted order."""
        keep = sorted(set(nodes))
        index = {v: k for k, v in enumerate(keep)}
        return Dag(len(keep), ((index[i], index[j]) for i, j in self.edges if i in index and j in index))

    def to_amat(self):
        import numpy as np

        amat = np.zeros((self.p, self.p), dtype=int)
        for i, j in self.edges:
            amat[i, j] = 1
        return amat


def ancestors_of(g: Dag, nodes: Iterable[int]) -> set:
    """Ancestors of ``nodes`` including the nodes themselves."""
    seen = set(nodes)
    queue = deque(seen)
    while queue:
        node = queue.popleft()
        for pa in g.parents(node):
            if pa not in seen:
                seen.add(pa)
                queue.append(pa)
    return seen


@dataclass(frozen=True)
class Pdag:
    """Partially directed graph; undirected edges are stored as ``(min, max)`` pairs."""

    p: int
    directed: frozenset = field(default_factory=frozenset)
    undirected: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        directed = frozenset((int(i), int(j)) for i, j in self.directed)
        undirected = frozenset(tuple(sorted((int(i), int(j)))) for i, j in self.undirected)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        seen = set()
        for i, j in itr.chain(directed, undirected):
            if i == j or not (0 <= i < self.p and 0 <= j < self.p):
                raise GraphError(f"invalid edge ({i}, {j}) for p={self.p}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"nodes {key} carry more than one edge")
            seen.add(key)

    @classmethod
    def from_dag(cls, g: Dag) -> "Pdag":
        return cls(g.p, g.edges, frozenset())

    def edge_status(self, i: int, j: int) -> Optional[str]:
        """``'->'``, ``'<-'``, ``'--'`` or ``None`` for the pair ``(i, j)``."""
        if (i, j) in self.directed:
            return "->"
        if (j, i) in self.directed:
            return "<-"
        if (min(i, j), max(i, j)) in self.undirected:
            return "--"
        return None

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(e) for e in itr.chain(self.directed, self.undirected))

    @property
    def num_edges(self) -> int:
        return len(self.directed) + len(self.undirected)


@dataclass(frozen=True)
class IDag:
    """A DAG together with one intervention target set per interventional setting.

    The augmented graph places the intervention vertex of setting ``k`` at index
    ``p + k`` with edges into every target of that setting.
    """

    base: Dag
    targets: tuple = ()

    def __post_init__(self):
        targets = tuple(frozenset(int(i) for i in t) for t in self.targets)
        for t in targets:
            for i in t:
                if not 0 <= i < self.base.p:
                    raise GraphError(f"target {i} out of range for p={self.base.p}")
        object.__setattr__(self, "targets", targets)

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def num_settings(self) -> int:
        return len(self.targets)

    def augmented(self) -> Dag:
        p = self.base.p
        extra = [(p + k, i) for k, t in enumerate(self.targets) for i in t]
        return Dag(p + len(self.targets), itr.chain(self.base.edges, extra))

    def joint(self) -> Dag:
        """The augmented graph plus a complete tournament ``p+k -> p+k'`` for ``k < k'``."""
        p, K = self.base.p, len(self.targets)
        tour = [(p + a, p + b) for a, b in itr.combinations(range(K), 2)]
        return Dag(p + K, itr.chain(self.augmented().edges, tour))


@dataclass(frozen=True)
class BackgroundKnowledge:
    """Known adjacencies plus an optional ordering partition ``(U, V)``: nothing in V precedes U."""

    known_adjacent: frozenset = field(default_factory=frozenset)
    order_partition: Optional[tuple] = None

    def __post_init__(self):
        adj = frozenset(frozenset(pair) for pair in self.known_adjacent)
        for pair in adj:
            if len(pair) != 2:
                raise GraphError(f"known adjacency {set(pair)} is not a pair of distinct nodes")
        object.__setattr__(self, "known_adjacent", adj)
        if self.order_partition is not None:
            u, v = (frozenset(s) for s in self.order_partition)
            if u & v:
                raise GraphError("order partition blocks overlap")
            object.__setattr__(self, "order_partition", (u, v))

    def check_nodes(self, p: int) -> None:
        for pair in self.known_adjacent:
            if any(not 0 <= i < p for i in pair):
                raise GraphError(f"known adjacency {set(pair)} out of range")
        if self.order_partition is not None:
            u, v = self.order_partition
            if u | v != frozenset(range(p)):
                raise GraphError("order partition must cover every node")

    def respects_order(self, pi: Sequence[int]) -> bool:
        """False iff some node of V comes before some node of U in ``pi``."""
        if self.order_partition is None:
            return True
        u, v = self.order_partition
        seen_v = False
        for node in pi:
            if node in v:
                seen_v = True
            elif node in u and seen_v:
                return False
        return True


def check_permutation(pi: Sequence[int], p: int) -> Permutation:
    pi = tuple(int(x) for x in pi)
    if sorted(pi) != list(range(p)):
        raise GraphError(f"{pi} is not a permutation of 0..{p - 1}")
    return pi


# ---------------------------------------------------------------------------
# d-separation
# ---------------------------------------------------------------------------

def d_separated(g: Dag, A: Iterable[int], B: Iterable[int], C: Iterable[int] = ()) -> bool:
    """Return True iff ``A`` and ``B`` are d-separated given ``C`` in ``g``.

    Uses the reachability ("Bayes ball") formulation: a trail may pass a
    non-collider only outside ``C`` and a collider only when it has a
    descendant in ``C``.
    """
    A, B, C = set(A), set(B), set(C)
    if A & B or A & C or B & C:
        raise GraphError("A, B and C must be pairwise disjoint")
    if not A or not B:
        return True
    an_c = ancestors_of(g, C)
    # state: (node, came_from_child) ; came_from_child=True means we arrived moving "up"
    visited = set()
    queue = deque((a, True) for a in A)
    while queue:
        node, up = queue.popleft()
        if (node, up) in visited:
            continue
        visited.add((node, up))
        if node not in C and node in B:
            return False
        if up:
            if node not in C:
                for pa in g.parents(node):
                    queue.append((pa, True))
                for ch in g.children(node):
                    queue.append((ch, False))
        else:
            if node not in C:
                for ch in g.children(node):
                    queue.append((ch, False))
            if node in an_c:
                for pa in g.parents(node):
                    queue.append((pa, True))
    return True


def is_imap(g: Dag, h: Dag) -> bool:
    """Return True iff ``h`` is an independence map of ``g`` (written g <= h).

    Checks the local Markov property of ``h`` against d-separation in ``g``;
    the d-separation model of a DAG is a compositional graphoid, so the local
    statements imply every global one.
    """
    if g.p != h.p:
        raise GraphError("graphs have different node counts")
    for v in range(h.p):
        pa = h.parents(v)
        rest = set(range(h.p)) - h.descendants(v) - pa - {v}
        if rest and not d_separated(g, {v}, rest, pa):
            return False
    return True


# ---------------------------------------------------------------------------
# Covered edges and equivalence
# ---------------------------------------------------------------------------

def covered_edges(g: Dag) -> set:
    """Edges ``i -> j`` with ``pa(j) == pa(i) | {i}``."""
    return {(i, j) for i, j in g.edges if g.parents(j) == g.parents(i) | {i}}


def reverse_edge(g: Dag, i: int, j: int) -> Dag:
    if (i, j) not in g.edges:
        raise GraphError(f"edge {i}->{j} not present")
    return Dag(g.p, (g.edges - {(i, j)}) | {(j, i)})


def markov_equivalent(g1: Dag, g2: Dag) -> bool:
    if g1.p != g2.p:
        raise GraphError("graphs have different node counts")
    return g1.skeleton() == g2.skeleton() and g1.v_structures() == g2.v_structures()


def i_markov_equivalent(g1: IDag, g2: IDag) -> bool:
    if g1.p != g2.p:
        raise GraphError("graphs have different node counts")
    if g1.num_settings != g2.num_settings:
        raise GraphError("graphs have different numbers of settings")
    return markov_equivalent(g1.augmented(), g2.augmented())


def _meek_closure(p: int, directed: set, undirected: set) -> None:
    """Apply Meek's rules R1-R4 in place until nothing changes."""

    def adj(a, b):
        return (a, b) in directed or (b, a) in directed or frozenset((a, b)) in undirected

    def orient(a, b):
        undirected.discard(frozenset((a, b)))
        directed.add((a, b))

    changed = True
    while changed:
        changed = False
        for edge in sorted(undirected, key=sorted):
            if edge not in undirected:
                continue
            x, y = sorted(edge)
            for a, b in ((x, y), (y, x)):
                pa_a = {u for u, w in directed if w == a}
                pa_b = {u for u, w in directed if w == b}
                # R1: c -> a -- b, c not adjacent to b
                r1 = any(not adj(c, b) for c in pa_a if c != b)
                # R2: a -> c -> b
                r2 = any((a, c) in directed for c in pa_b)
                # R3: a -- c -> b, a -- d -> b, c and d non-adjacent
                cands = [c for c in pa_b if frozenset((a, c)) in undirected]
                r3 = any(not adj(c, d) for c, d in itr.combinations(cands, 2))
                # R4: d -> c -> b, a adjacent to c and d, d not adjacent to b
                r4 = False
                if not (r1 or r2 or r3):
                    for c in pa_b:
                        if c == a or not adj(a, c):
                            continue
                        for d in range(p):
                            if (d, c) in directed and d != a and adj(a, d) and not adj(d, b):
                                r4 = True
                                break
                        if r4:
                            break
                if r1 or r2 or r3 or r4:
                    orient(a, b)
                    changed = True
                    break


def _essential_of(g: Dag, fixed: Iterable[Edge] = ()) -> tuple[set, set]:
    fixed = set(fixed)
    vstruct_edges = set()
    for i, k, j in g.v_structures():
        vstruct_edges.add((i, k))
        vstruct_edges.add((j, k))
    directed = {e for e in g.edges if e in vstruct_edges or e in fixed}
    undirected = {frozenset(e) for e in g.edges if e not in directed}
    _meek_closure(g.p, directed, undirected)
    return directed, undirected


def essential_graph(g: Dag) -> Pdag:
    """Observational essential graph (CPDAG) of ``g``."""
    directed, undirected = _essential_of(g)
    return Pdag(g.p, directed, {tuple(sorted(e)) for e in undirected})


def i_essential_graph(g: IDag) -> Pdag:
    """I-essential graph of ``g`` restricted to the system nodes.

    Edges out of intervention vertices are fixed, v-structures of the
    augmented graph are oriented, and Meek's rules are applied to a fixpoint.
    """
    aug = g.augmented()
    p = g.p
    fixed = {(a, b) for a, b in aug.edges if a >= p}
    directed, undirected = _essential_of(aug, fixed)
    return Pdag(
        p,
        {(a, b) for a, b in directed if a < p and b < p},
        {tuple(sorted(e)) for e in undirected if max(e) < p},
    )


# ---------------------------------------------------------------------------
# Chickering sequences
# ---------------------------------------------------------------------------

def apply_edge_operation(g: Dag, h: Dag) -> Dag:
    """One step of Chickering's edge-operation procedure from ``g`` towards its IMAP ``h``.

    Returns a DAG obtained from ``g`` by a single edge addition or a single
    covered edge reversal that is still an independence map of ``g``'s
    successor chain towards ``h``. Ties are broken by smallest node index.
    """
    if g.p != h.p:
        raise GraphError("graphs have different node counts")
    if g == h:
        raise GraphError("g and h are equal; no operation to apply")

    alive = set(range(g.p))
    g_par = {v: set(g.parents(v)) for v in alive}
    h_par = {v: set(h.parents(v)) for v in alive}

    def children(par, v):
        return {c for c in alive if v in par[c]}

    def desc(par, v):
        out, stack = set(), [v]
        while stack:
            for c in children(par, stack.pop()):
                if c not in out:
                    out.add(c)
                    stack.append(c)
        return out

    # step 2: strip common sinks with identical parents
    stripping = True
    while stripping:
        stripping = False
        for y in sorted(alive):
            if not children(g_par, y) and not children(h_par, y) and g_par[y] == h_par[y]:
                alive.discard(y)
                for v in alive:
                    g_par[v].discard(y)
                    h_par[v].discard(y)
                del g_par[y], h_par[y]
                stripping = True
                break
    if not alive:
        raise GraphError("h is not an independence map of g")

    # step 3
    y = min(v for v in alive if not children(h_par, v))
    g_children_y = children(g_par, y)
    # step 4
    if not g_children_y:
        extra = sorted(h_par[y] - g_par[y])
        if not extra:
            raise GraphError("h is not an independence map of g")
        return g.add_edge(extra[0], y)
    # step 5
    de_y = desc(g_par, y)
    h_anc = {v: _anc_within(h_par, v) for v in de_y}
    maximal = sorted(v for v in de_y if not (h_anc[v] & de_y))
    d = maximal[0]
    cands = [z for z in g_children_y if z == d or d in desc(g_par, z)]
    cand_set = set(cands)
    z = min(c for c in cands if not (_anc_within(g_par, c) - {c}) & (cand_set - {c}))
    # step 6
    if g_par[z] == g_par[y] | {y}:
        return reverse_edge(g, y, z)
    # step 7
    extra = sorted(g_par[y] - g_par[z])
    if extra:
        return g.add_edge(extra[0], z)
    # step 8
    extra = sorted(g_par[z] - g_par[y] - {y})
    if not extra:
        raise GraphError("h is not an independence map of g")
    return g.add_edge(extra[0], y)


def _anc_within(par: dict, v: int) -> set:
    out, stack = set(), [v]
    while stack:
        for u in par[stack.pop()]:
            if u not in out:
                out.add(u)
                stack.append(u)
    return out


def chickering_sequence(g: Dag, h: Dag, check: bool = True) -> list[Dag]:
    """Sequence ``g = g_0, ..., g_M = h`` of single additions / covered reversals."""
    if check and not is_imap(g, h):
        raise GraphError("h is not an independence map of g")
    seq = [g]
    current = g
    # each step adds an edge or removes an inversion relative to h, so this bounds the loop
    limit = h.p * h.p + 1
    while current != h:
        if len(seq) > limit:
            raise GraphError("Chickering sequence did not terminate; h is not an IMAP of g")
        current = apply_edge_operation(current, h)
        seq.append(current)
    return seq


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def format_graph(g) -> str:
    """Serialise a Dag or Pdag: header ``p=<n>`` then one ``i -> j`` / ``i -- j`` per line."""
    lines = [f"p={g.p}"]
    if isinstance(g, Dag):
        directed, undirected = g.edges, ()
    else:
        directed, undirected = g.directed, g.undirected
    lines += [f"{i} -> {j}" for i, j in sorted(directed)]
    lines += [f"{i} -- {j}" for i, j in sorted(undirected)]
    return "\n".join(lines) + "\n"


def parse_graph(text: str):
    """Parse the text format; returns a Dag if every edge is directed, else a Pdag."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].startswith("p="):
        raise GraphError("graph text must start with a 'p=<n>' header")
    p = int(lines[0][2:])
    directed, undirected = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if "->" in line:
            a, b = line.split("->")
            directed.append((int(a), int(b)))
        elif "--" in line:
            a, b = line.split("--")
            undirected.append((int(a), int(b)))
        else:
            raise GraphError(f"line {lineno}: cannot parse edge {line!r}")
    if undirected:
        return Pdag(p, directed, undirected)
    return Dag(p, directed)
