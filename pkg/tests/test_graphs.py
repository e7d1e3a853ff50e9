import itertools as itr
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import all_dags, brute_d_separated, brute_i_essential, brute_imap, dsep_statements, target_lists
from utigsp.graphs import (
    BackgroundKnowledge,
    CycleError,
    Dag,
    GraphError,
    IDag,
    Pdag,
    apply_edge_operation,
    chickering_sequence,
    covered_edges,
    d_separated,
    essential_graph,
    format_graph,
    i_essential_graph,
    i_markov_equivalent,
    is_imap,
    markov_equivalent,
    parse_graph,
    reverse_edge,
)

# 0-based relabelling of the 1-based examples: node k -> k-1
CHAIN = Dag(3, [(0, 1), (1, 2)])
COLLIDER = Dag(3, [(0, 2), (1, 2)])
COMPLETE3 = Dag(3, [(0, 1), (0, 2), (1, 2)])


@st.composite
def dags(draw, max_p=5):
    p = draw(st.integers(1, max_p))
    order = draw(st.permutations(range(p)))
    edges = []
    for a, b in itr.combinations(range(p), 2):
        if draw(st.booleans()):
            edges.append((order[a], order[b]))
    return Dag(p, edges)


class TestDag:
    def test_rejects_cycles_and_loops(self):
        with pytest.raises(CycleError):
            Dag(3, [(0, 1), (1, 2), (2, 0)])
        with pytest.raises(GraphError):
            Dag(2, [(0, 0)])
        with pytest.raises(GraphError):
            Dag(2, [(0, 1), (0, 1)])
        with pytest.raises(GraphError):
            Dag(2, [(0, 5)])

    def test_topological_order(self):
        g = Dag(4, [(3, 1), (1, 0), (2, 0)])
        order = g.topological_order()
        pos = {v: k for k, v in enumerate(order)}
        assert all(pos[i] < pos[j] for i, j in g.edges)

    def test_v_structures(self):
        assert COLLIDER.v_structures() == {(0, 2, 1)}
        assert COMPLETE3.v_structures() == frozenset()


class TestDSeparation:
    def test_chain(self):
        assert d_separated(CHAIN, {0}, {2}, {1})
        assert not d_separated(CHAIN, {0}, {2}, set())

    def test_collider(self):
        assert d_separated(COLLIDER, {0}, {1}, set())
        assert not d_separated(COLLIDER, {0}, {1}, {2})

    def test_collider_descendant_opens(self):
        g = Dag(4, [(0, 2), (1, 2), (2, 3)])
        assert not d_separated(g, {0}, {1}, {3})

    def test_figure_one_idag(self):
        # complete DAG on 3 nodes, targets {1,2} and {3}; zeta_1 = node 3, zeta_2 = node 4
        aug = IDag(COMPLETE3, [{0, 1}, {2}]).augmented()
        assert not d_separated(aug, {4}, {0}, {2, 3})
        assert not brute_d_separated(aug, {4}, {0}, {2, 3})

    def test_overlap_is_error(self):
        with pytest.raises(GraphError):
            d_separated(CHAIN, {0}, {0, 2}, set())

    @pytest.mark.parametrize("p", [3, 4])
    def test_matches_path_enumeration_exhaustive(self, p):
        rng = random.Random(p)
        dags_p = all_dags(p)
        for g in rng.sample(dags_p, min(len(dags_p), 120)):
            for a, b in itr.combinations(range(p), 2):
                rest = [v for v in range(p) if v not in (a, b)]
                for r in range(len(rest) + 1):
                    for C in itr.combinations(rest, r):
                        assert d_separated(g, {a}, {b}, C) == brute_d_separated(g, {a}, {b}, C)

    @settings(max_examples=150, deadline=None)
    @given(dags(max_p=5), st.data())
    def test_symmetric_and_matches_bruteforce(self, g, data):
        nodes = list(range(g.p))
        if g.p < 2:
            return
        labels = data.draw(st.lists(st.integers(0, 2), min_size=g.p, max_size=g.p))
        A = {v for v, lab in zip(nodes, labels) if lab == 0} or {0}
        rest = [v for v in nodes if v not in A]
        if not rest:
            return
        B = {v for v, lab in zip(nodes, labels) if lab == 1 and v not in A} or {rest[0]}
        C = {v for v in nodes if v not in A and v not in B and labels[v] == 2}
        assert d_separated(g, A, B, C) == d_separated(g, B, A, C)
        assert d_separated(g, A, B, C) == brute_d_separated(g, A, B, C)


class TestCoveredAndReverse:
    def test_covered_edges(self):
        assert covered_edges(Dag(2, [(0, 1)])) == {(0, 1)}
        assert covered_edges(COLLIDER) == set()
        assert covered_edges(COMPLETE3) == {(0, 1), (1, 2)}

    def test_reverse_edge(self):
        assert reverse_edge(Dag(2, [(0, 1)]), 0, 1) == Dag(2, [(1, 0)])
        assert reverse_edge(CHAIN, 0, 1) == Dag(3, [(1, 0), (1, 2)])
        with pytest.raises(GraphError):
            reverse_edge(CHAIN, 0, 2)

    def test_reverse_non_covered_can_cycle(self):
        with pytest.raises(CycleError):
            reverse_edge(COMPLETE3, 0, 2)

    @pytest.mark.parametrize("p", [3, 4])
    def test_covered_reversal_preserves_mec(self, p):
        for g in all_dags(p):
            for i, j in covered_edges(g):
                assert markov_equivalent(g, reverse_edge(g, i, j))


class TestEquivalence:
    def test_markov_equivalent_examples(self):
        assert markov_equivalent(CHAIN, Dag(3, [(2, 1), (1, 0)]))
        assert not markov_equivalent(CHAIN, COLLIDER)
        assert not markov_equivalent(Dag(3, [(0, 2), (1, 2)]), Dag(3, [(0, 2), (2, 1)]))

    @pytest.mark.parametrize("p", [2, 3])
    def test_markov_equivalence_matches_dsep_sets(self, p):
        stmts = {g: dsep_statements(g) for g in all_dags(p)}
        for g1, g2 in itr.combinations(all_dags(p), 2):
            assert markov_equivalent(g1, g2) == (stmts[g1] == stmts[g2])

    def test_markov_equivalence_matches_dsep_sets_p4_sample(self):
        rng = random.Random(4)
        dags4 = rng.sample(all_dags(4), 60)
        stmts = {g: dsep_statements(g) for g in dags4}
        for g1, g2 in itr.combinations(dags4, 2):
            assert markov_equivalent(g1, g2) == (stmts[g1] == stmts[g2])

    def test_i_markov_equivalent_examples(self):
        assert not i_markov_equivalent(IDag(Dag(2, [(0, 1)]), [{0}]), IDag(Dag(2, [(1, 0)]), [{0}]))
        assert i_markov_equivalent(IDag(CHAIN), IDag(Dag(3, [(2, 1), (1, 0)])))
        fig1 = IDag(COMPLETE3, [{0, 1}, {2}])
        assert i_markov_equivalent(fig1, fig1)

    def test_i_markov_mismatched_settings(self):
        with pytest.raises(GraphError):
            i_markov_equivalent(IDag(CHAIN, [{0}]), IDag(CHAIN))


class TestEssentialGraph:
    def test_chain_observational(self):
        assert i_essential_graph(IDag(CHAIN)) == Pdag(3, (), [(0, 1), (1, 2)])

    def test_single_intervention_orients(self):
        assert i_essential_graph(IDag(Dag(2, [(0, 1)]), [{0}])) == Pdag(2, [(0, 1)], ())

    def test_collider_cpdag(self):
        assert essential_graph(COLLIDER) == Pdag(3, [(0, 2), (1, 2)], ())

    @pytest.mark.parametrize("p", [2, 3])
    def test_matches_bruteforce_all(self, p):
        for g in all_dags(p):
            for targets in target_lists(p, max_k=2, max_size=2):
                assert i_essential_graph(IDag(g, targets)) == brute_i_essential(g, targets), (g, targets)

    def test_matches_bruteforce_p4(self):
        rng = random.Random(0)
        lists = list(target_lists(4, max_k=2, max_size=2))
        for g in all_dags(4):
            for targets in [()] + rng.sample(lists, 3):
                assert i_essential_graph(IDag(g, targets)) == brute_i_essential(g, targets), (g, targets)


class TestChickering:
    def test_apply_edge_operation_addition(self):
        assert apply_edge_operation(Dag(2), Dag(2, [(0, 1)])) == Dag(2, [(0, 1)])

    def test_apply_edge_operation_reversal(self):
        assert apply_edge_operation(Dag(2, [(0, 1)]), Dag(2, [(1, 0)])) == Dag(2, [(1, 0)])

    def test_apply_edge_operation_step7_or_8(self):
        h = Dag(3, [(2, 0), (2, 1), (0, 1)])
        out = apply_edge_operation(CHAIN, h)
        assert len(out.edges - CHAIN.edges) == 1 or covered_edges(CHAIN) & {
            (j, i) for i, j in out.edges - CHAIN.edges
        }
        assert is_imap(CHAIN, out) and is_imap(out, h)

    def test_equal_is_error(self):
        with pytest.raises(GraphError):
            apply_edge_operation(CHAIN, CHAIN)

    def test_sequences(self):
        assert chickering_sequence(CHAIN, CHAIN) == [CHAIN]
        seq = chickering_sequence(Dag(3), CHAIN)
        assert len(seq) == 3 and seq[-1] == CHAIN

    def test_non_imap_rejected(self):
        with pytest.raises(GraphError):
            chickering_sequence(CHAIN, COLLIDER)

    @pytest.mark.parametrize("p", [3, 4])
    def test_is_imap_matches_bruteforce(self, p):
        dags_p = all_dags(p) if p == 3 else random.Random(1).sample(all_dags(p), 50)
        for g, h in itr.product(dags_p, repeat=2):
            assert is_imap(g, h) == brute_imap(g, h)

    @pytest.mark.parametrize("p", [3, 4])
    def test_every_element_is_imap_of_origin(self, p):
        dags_p = all_dags(p)
        for g in dags_p:
            for h in dags_p:
                if not is_imap(g, h):
                    continue
                seq = chickering_sequence(g, h, check=False)
                assert seq[0] == g and seq[-1] == h
                for prev, nxt in zip(seq, seq[1:]):
                    added = nxt.edges - prev.edges
                    removed = prev.edges - nxt.edges
                    is_add = len(added) == 1 and not removed
                    is_rev = (
                        len(added) == 1
                        and len(removed) == 1
                        and next(iter(removed)) in covered_edges(prev)
                        and next(iter(added)) == next(iter(removed))[::-1]
                    )
                    assert is_add or is_rev
                    assert is_imap(g, nxt) and is_imap(nxt, h)


class TestBackgroundAndFormat:
    def test_background_order(self):
        bg = BackgroundKnowledge(order_partition=({0}, {1}))
        assert bg.respects_order((0, 1)) and not bg.respects_order((1, 0))
        with pytest.raises(GraphError):
            BackgroundKnowledge(order_partition=({0}, {0, 1}))

    def test_roundtrip(self):
        pd = Pdag(3, [(0, 1)], [(1, 2)])
        assert parse_graph(format_graph(pd)) == pd
        assert parse_graph(format_graph(CHAIN)) == CHAIN
        assert format_graph(CHAIN) == "p=3\n0 -> 1\n1 -> 2\n"

    def test_parse_error(self):
        with pytest.raises(GraphError):
            parse_graph("p=2\n0 => 1\n")
