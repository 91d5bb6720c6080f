"""Sequence analysis: operators, coherence, MID/NID, image, composition."""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from mgg import (
    BoolMatrix,
    NodeUniverse,
    NotCoherent,
    OverflowOutsideMinusOneZeroOne,
    RuleSequence,
    TypedGraph,
    check_coherence,
    check_sequence_compatibility,
    compose,
    composition_sums,
    delta,
    enumerate_initial_set,
    minimal_initial_digraph,
    nabla,
    negative_initial_digraph,
    sequence_image,
)
from mgg.match import decide_applicability, find_matches

from corpus import bits_of, book_order, graph, n, q1, q2, q3, random_rule, rule, w1, w2, w3


def seq(*rules):
    return RuleSequence.from_rules(list(rules))


@pytest.fixture(scope="module")
def s3():
    # q3;q2;q1 -- q1 applied first
    return seq(q1(), q2(), q3())


BOOK5 = "v:2 v:3 v:5 v:1 v:4"  # the order most worked matrices use


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def test_delta_simplifies_like_the_worked_expansion(s3):
    # delta_1^3 (NOT r_x AND e_y) == e3 OR NOT r3 e2 OR NOT r3 NOT r2 e1
    got = delta(lambda x, y: ~s3.rE(x) & s3.eE(y), 1, 3)
    expected = (
        s3.eE(3)
        | (~s3.rE(3) & s3.eE(2))
        | (~s3.rE(3) & ~s3.rE(2) & s3.eE(1))
    )
    assert np.array_equal(got, expected)


def test_nabla_over_single_index_is_f_itself(s3):
    got = nabla(lambda x, y: ~s3.rE(x) & s3.LE(y), 2, 2)
    assert np.array_equal(got, ~s3.rE(2) & s3.LE(2))


def test_operators_match_naive_double_loop_on_random_inputs():
    rng = random.Random(5)
    for _ in range(40):
        mats = [np.array([[rng.random() < 0.5 for _ in range(3)] for _ in range(3)]) for _ in range(4)]

        def f(x, y):
            return mats[x - 1] & ~mats[y - 1]

        got_n = nabla(f, 1, 4)
        expect = np.zeros((3, 3), dtype=bool)
        for y in range(1, 5):
            term = np.ones((3, 3), dtype=bool)
            for x in range(1, y + 1):
                term &= f(x, y)
            expect |= term
        assert np.array_equal(got_n, expect)

        got_d = delta(f, 1, 4)
        expect = np.zeros((3, 3), dtype=bool)
        for y in range(1, 5):
            term = np.ones((3, 3), dtype=bool)
            for x in range(y, 5):
                term &= f(x, y)
            expect |= term
        assert np.array_equal(got_d, expect)


def test_nabla_on_reversed_indices_equals_delta():
    rng = random.Random(6)
    mats = [np.array([[rng.random() < 0.5 for _ in range(2)] for _ in range(2)]) for _ in range(3)]

    def f(x, y):
        return mats[x - 1] | ~mats[y - 1]

    def f_rev(x, y):
        return f(4 - x, 4 - y)

    assert np.array_equal(delta(f, 1, 3), nabla(f_rev, 1, 3))


# ---------------------------------------------------------------------------
# coherence
# ---------------------------------------------------------------------------

def test_book_sequences_coherence_verdicts(s3):
    assert check_coherence(s3).dangling_free
    s_alt = seq(q2(), q3(), q1())  # q1;q3;q2 (q2 applied first)
    assert check_coherence(s_alt).dangling_free
    s_bad = seq(q1(), q3(), q2())  # q2;q3;q1 (q1 first, then q3, then q2)
    rep = check_coherence(s_bad)
    assert not rep.dangling_free
    witness = rep.edge_witness.edges()
    assert (n("v:5"), n("v:5")) in witness
    # the worked term R_q1 (r_q3 OR NOT e_q3 r_q2) is zero except at (5,5);
    # positions: q1 fires first (1), then q3 (2), then q2 (3)
    term = s_bad.RE(1) & (s_bad.rE(2) | (~s_bad.eE(2) & s_bad.rE(3)))
    cells = BoolMatrix(s_bad.universe, term).edges()
    assert cells == [(n("v:5"), n("v:5"))]


def test_single_production_always_coherent():
    rep = check_coherence(seq(q1()))
    assert rep.verdict


def test_nihil_part_flags_unerased_dangling_chain(s3):
    # the dangling edges (3,3),(5,3) left for q3 are caught by the K/Q part
    rep = check_coherence(s3)
    cells = set(rep.nihil_witness.edges())
    assert (n("v:3"), n("v:3")) in cells
    assert (n("v:5"), n("v:3")) in cells
    assert not rep.verdict  # full verdict includes the nihil part


# ---------------------------------------------------------------------------
# minimal initial digraph
# ---------------------------------------------------------------------------

def test_mid_of_s3_matches_book_matrix(s3):
    m = minimal_initial_digraph(s3)
    order = book_order(BOOK5)
    assert bits_of(m.edges, order).tolist() == [
        [0, 0, 1, 1, 1],
        [0, 0, 0, 0, 0],
        [1, 0, 1, 0, 0],
        [0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0],
    ]


def test_mid_of_single_rule_is_its_lhs():
    p = q1()
    m = minimal_initial_digraph(seq(p))
    assert m.edges == p.LE and m.nodes == p.LN


def test_mid_admits_sequence_and_is_ablation_minimal():
    rng = random.Random(9)
    tested = 0
    while tested < 40:
        p1 = random_rule(rng, 3)
        p2 = random_rule(rng, 3)
        try:
            s = seq(p1, p2)
        except Exception:
            continue
        rep = check_coherence(s)
        if not rep.dangling_free or not check_sequence_compatibility(s).verdict:
            continue
        m = minimal_initial_digraph(s)
        host = TypedGraph(m.edges, m.nodes)
        res = decide_applicability(s, host, mode="fixed", budget=200_000)
        if res.verdict is not True:
            continue
        tested += 1
        # removing any single present element breaks applicability at identity-ish matches
        for a, b in host.edge_pairs():
            smaller = TypedGraph(host.edges.with_edge(a, b, False), host.nodes)
            assert not _applies_with_identity(s, smaller)
        for x in host.present_nodes():
            bits = host.nodes.bits.copy()
            bits[host.universe.position(x)] = False
            from mgg import BoolVector

            edges = host.edges
            for a, b in host.edge_pairs():
                if a == x or b == x:
                    edges = edges.with_edge(a, b, False)
            smaller = TypedGraph(edges, BoolVector(host.universe, bits))
            assert not _applies_with_identity(s, smaller)
    assert tested == 40


def _applies_with_identity(s, host):
    g = host
    from mgg import apply_to_graph
    from mgg.match import dangling_edges_at
    from mgg.production import WouldDangle

    for p in s.rules:
        m = {x: x for x in p.LN.nodes()}
        try:
            from mgg.production import _validate_match

            _validate_match(p, g, m)
        except Exception:
            return False
        if dangling_edges_at(p, g, m):
            return False
        # forbidden edges must be absent
        for a, b in p.K.edges():
            if a in m and b in m and g.edges.get(m[a], m[b]):
                return False
        try:
            g = apply_to_graph(p, g, m, added_images={x: x for x in p.rN.nodes()})
        except Exception:
            return False
    return True


# ---------------------------------------------------------------------------
# negative initial digraph
# ---------------------------------------------------------------------------

def test_nid_of_s3_expands_like_the_book(s3):
    order = book_order("v:2 v:4 v:5 v:3 v:1")
    k1 = BoolMatrix(s3.universe, s3.K(1)).restricted(order).bits.astype(int)
    k2 = BoolMatrix(s3.universe, s3.K(2)).restricted(order).bits.astype(int)
    assert k1.tolist() == [
        [0, 0, 0, 1, 0],
        [1, 1, 1, 1, 1],
        [0, 1, 0, 1, 0],
        [0, 1, 0, 1, 0],
        [0, 1, 0, 0, 0],
    ]
    assert k2.tolist() == [
        [0, 1, 0, 0, 0],
        [0, 0, 0, 0, 0],
        [1, 0, 0, 0, 0],
        [1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0],
    ]
    # K(s3) = K1 OR NOT e1 K2 OR NOT e1 NOT e2 K3
    got = negative_initial_digraph(s3).bits
    expected = s3.K(1) | (~s3.eE(1) & s3.K(2)) | (~s3.eE(1) & ~s3.eE(2) & s3.K(3))
    assert np.array_equal(got, expected)


def test_nid_zero_for_rules_adding_nothing_deleting_no_nodes():
    p1 = rule("tidy1", "v:1 v:2", "v:1>v:2", "v:1 v:2", "")
    p2 = rule("tidy2", "v:3 v:4", "v:3>v:4", "v:3 v:4", "")
    s = seq(p1, p2)
    assert negative_initial_digraph(s).is_zero()


def test_mid_and_nid_disjoint_and_simulation_respects_nid():
    rng = random.Random(10)
    tested = 0
    while tested < 30:
        p1, p2 = random_rule(rng, 3), random_rule(rng, 3)
        try:
            s = seq(p1, p2)
        except Exception:
            continue
        if not check_coherence(s).dangling_free or not check_sequence_compatibility(s).verdict:
            continue
        m = minimal_initial_digraph(s)
        k = negative_initial_digraph(s)
        assert not (m.edges & k)
        host = TypedGraph(m.edges, m.nodes)
        assert _applies_with_identity(s, host)
        # adding any single forbidden edge between present nodes must block
        for a, b in k.edges():
            if host.nodes.get(a) and host.nodes.get(b):
                bigger = TypedGraph(host.edges.with_edge(a, b, True), host.nodes)
                assert not _applies_with_identity(s, bigger)
        tested += 1
    assert tested == 30


# ---------------------------------------------------------------------------
# image & compatibility
# ---------------------------------------------------------------------------

def test_image_of_empty_sequence_prefix_is_input():
    p = rule("id", "v:1", "", "v:1", "")
    s = seq(p)
    m = minimal_initial_digraph(s)
    assert sequence_image(s) == m


def test_image_matches_stepwise_application_oracle():
    rng = random.Random(12)
    tested = 0
    while tested < 50:
        rules = [random_rule(rng, 3) for _ in range(3)]
        try:
            s = seq(*rules)
        except Exception:
            continue
        if not check_coherence(s).dangling_free or not check_sequence_compatibility(s).verdict:
            continue
        m = minimal_initial_digraph(s)
        img = sequence_image(s)
        # oracle: fold the per-rule applications cell-wise
        e, v = m.edges.bits.copy(), m.nodes.bits.copy()
        for i in range(1, len(s) + 1):
            e = s.rE(i) | (~s.eE(i) & e)
            v = s.rN(i) | (~s.eN(i) & v)
        assert np.array_equal(img.edges.bits, e)
        assert np.array_equal(img.nodes.bits, v)
        tested += 1
    assert tested == 50


def test_s2_compatibility_verdict_and_zero_chain(s3):
    s2 = RuleSequence(s3.rules[:2])
    rep = check_sequence_compatibility(s2)
    assert rep.verdict
    assert rep.witness.is_zero()


def test_non_compatible_pair_detected_with_dangling_witness():
    # u uses edge (4,2); v deletes node 4 but not that edge
    u = rule("u", "v:2 v:4", "v:4>v:2", "v:2 v:4", "v:4>v:2")
    v = rule("v", "v:2 v:4", "", "v:2", "")
    s = seq(u, v)
    rep = check_sequence_compatibility(s)
    assert not rep.verdict
    assert (n("v:4"), n("v:2")) in rep.witness.edges()


def test_identity_sequence_compatible():
    p = rule("id", "v:1 v:2", "v:1>v:2", "v:1 v:2", "v:1>v:2")
    assert check_sequence_compatibility(seq(p, p)).verdict


def test_s3_itself_is_not_compatible(s3):
    assert not check_sequence_compatibility(s3).verdict


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def test_composition_sums_of_s3_match_book(s3):
    se, sn = composition_sums(s3)
    order = book_order(BOOK5)
    reorder = [s3.universe.position(x) for x in order]
    got = se[np.ix_(reorder, reorder)]
    assert got.tolist() == [
        [1, 0, 0, 0, 0],
        [0, 1, 0, 0, 0],
        [0, 1, 0, 0, 0],
        [0, 0, 0, -1, 0],
        [0, 0, 0, 0, 0],
    ]


def test_compose_single_rule_is_that_rule():
    p = q1()
    c = compose(seq(p))
    assert c.eE == p.eE and c.rE == p.rE and c.L == p.L and c.R == p.R


def test_compose_matches_stepwise_oracle_on_small_corpus():
    rng = random.Random(14)
    tested = 0
    while tested < 40:
        rules = [random_rule(rng, 3) for _ in range(rng.choice([2, 3]))]
        try:
            s = seq(*rules)
        except Exception:
            continue
        if not check_coherence(s).dangling_free or not check_sequence_compatibility(s).verdict:
            continue
        try:
            c = compose(s)
        except OverflowOutsideMinusOneZeroOne:
            continue
        m = minimal_initial_digraph(s)
        assert c.applied_edges(m.edges) == sequence_image(s).edges
        assert c.applied_nodes(m.nodes) == sequence_image(s).nodes
        tested += 1
    assert tested == 40


def test_compose_requires_compatibility(s3):
    from mgg import NotCompatible

    with pytest.raises(NotCompatible):
        compose(s3)


def test_composition_order_sensitivity_of_preserved_elements():
    # an element preserved-then-deleted-then-added vs added-then-preserved-then-deleted
    keep = rule("keep", "v:1 v:2", "v:1>v:2", "v:1 v:2", "v:1>v:2")
    kill = rule("kill", "v:1 v:2", "v:1>v:2", "v:1 v:2", "")
    mk = rule("mk", "v:1 v:2", "", "v:1 v:2", "v:1>v:2")
    s_a = seq(keep, kill, mk)  # mk;kill;keep applied keep first
    s_b = seq(mk, keep, kill)
    ca, cb = compose(s_a), compose(s_b)
    assert ca.eE == cb.eE and ca.rE == cb.rE  # same net actions
    assert ca.L != cb.L  # but different demands on the host


# ---------------------------------------------------------------------------
# initial digraph sets
# ---------------------------------------------------------------------------

def _remove_channel():
    # server linked to two clients that share a channel edge; the rule
    # deletes the channel
    return rule(
        "removeChannel",
        "s:1 c:1 c:2", "s:1>c:1 s:1>c:2 c:1>c:2",
        "s:1 c:1 c:2", "s:1>c:1 s:1>c:2",
    )


def test_remove_channel_twice_initial_set_structure():
    p = _remove_channel()
    ds = enumerate_initial_set([p, p], budget=500)
    assert not ds.truncated
    maximal = ds.maximal.graph
    assert len(maximal.present_nodes()) == 6  # disjoint union of both LHSs
    minimal = ds.minimal()
    # the engine's deterministic enumeration finds exactly three maximally
    # identified completions, and every one still provides two distinct
    # client-client links (the channel cannot be deleted twice)
    assert len(minimal) == 3
    for elem in minimal:
        assert len(elem.graph.present_nodes()) < 6
        chans = [
            (a, b)
            for a, b in elem.graph.edge_pairs()
            if a.type_name == "c" and b.type_name == "c"
        ]
        assert len(chans) == 2
    # fully identifying both client pairs onto one link is never offered
    for elem in ds.elements.values():
        groups = [g for g in elem.partition if len(g) > 1]
        client_merges = sum(1 for g in groups if g[0][1].type_name == "c")
        if client_merges == 2:
            chans = {
                (a, b)
                for a, b in elem.graph.edge_pairs()
                if a.type_name == "c" and b.type_name == "c"
            }
            assert len(chans) == 2


def test_single_rule_initial_set_is_its_lhs():
    p = q1()
    ds = enumerate_initial_set([p])
    assert len(ds.elements) == 1
    g = ds.maximal.graph
    assert set(g.edge_pairs()) == set(p.L.edge_pairs())


def test_every_initial_set_element_admits_sequence_and_children_only_lose_coherence():
    p = _remove_channel()
    ds = enumerate_initial_set([p, p], budget=500)
    for elem in ds.elements.values():
        host = elem.graph
        assert decide_applicability(elem.sequence, host, mode="fixed").verdict
    # structure is a DAG rooted at the maximal element
    seen = set()
    frontier = [ds.root]
    while frontier:
        k = frontier.pop()
        seen.add(k)
        frontier.extend(c for c in ds.children[k] if c not in seen)
    assert seen == set(ds.elements)


def test_budget_truncates_with_flag():
    p = _remove_channel()
    ds = enumerate_initial_set([p, p], budget=2)
    assert ds.truncated
