"""Rules: derived masks, nihilation, inversion, application, compatibility."""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from mgg import (
    BoolMatrix,
    IncompatibleRule,
    NodeId,
    NodeUniverse,
    TypedGraph,
    WouldDangle,
    apply_to_graph,
    availability_matrix,
    make_production,
    nihilation_matrix,
    split_add_erase,
)

from corpus import all_two_node_rules, bits_of, book_order, graph, n, q1, random_graph, random_rule, rule


# ---------------------------------------------------------------------------
# derived masks
# ---------------------------------------------------------------------------

def test_q1_masks_match_book_values():
    p = q1()
    lhs_order = book_order("v:2 v:4 v:5")
    rhs_order = book_order("v:2 v:3 v:5")
    assert bits_of(p.eE, lhs_order).tolist() == [
        [0, 1, 0],
        [0, 0, 0],
        [1, 0, 0],
    ]
    assert bits_of(p.rE, rhs_order).tolist() == [
        [0, 1, 0],
        [0, 1, 0],
        [0, 1, 0],
    ]
    assert bits_of(p.eN, lhs_order).tolist() == [0, 1, 0]
    assert bits_of(p.rN, rhs_order).tolist() == [0, 1, 0]


def test_identity_production_has_zero_masks():
    p = rule("id", "v:1 v:2", "v:1>v:2", "v:1 v:2", "v:1>v:2")
    assert p.is_identity()
    assert nihilation_matrix(p).is_zero()


def test_rhs_reconstruction_holds_for_all_two_node_rules():
    count = 0
    for p in all_two_node_rules():
        assert p.applied_edges(p.LE) == p.RE
        assert p.applied_nodes(p.LN) == p.RN
        count += 1
    assert count > 100


def test_rewriting_identities_hold_for_all_two_node_rules():
    for p in all_two_node_rules():
        for e, r, L, R in ((p.eE, p.rE, p.LE, p.RE), (p.eN, p.rN, p.LN, p.RN)):
            assert (r & ~e) == r
            assert (e & ~r) == e
            assert (R & ~e) == R
            assert (L & ~r) == L
            assert not (e & r)


# ---------------------------------------------------------------------------
# nihilation matrix
# ---------------------------------------------------------------------------

def test_nihilation_example_matrix():
    # rule deletes node 1, adds self-loop at 2 and edges (3,3),(3,2)
    p = rule(
        "nihil",
        "v:1 v:2 v:3", "v:1>v:2 v:1>v:3",
        "v:2 v:3", "v:2>v:2 v:3>v:3 v:3>v:2",
    )
    order = book_order("v:1 v:2 v:3")
    assert bits_of(p.K, order).tolist() == [
        [1, 0, 0],
        [1, 1, 0],
        [1, 1, 1],
    ]


def test_no_op_rule_has_zero_nihilation():
    p = rule("keep", "v:1 v:2", "v:1>v:2", "v:1 v:2", "v:1>v:2")
    assert p.K.is_zero()


def test_nihilation_disjoint_from_lhs_for_small_rules():
    rng = random.Random(23)
    for _ in range(400):
        p = random_rule(rng, 3)
        assert not (p.K & p.LE), p.name


def test_availability_and_nihil_rhs_example():
    # rule q deletes node 1 (with its edge to 2) and adds node 3 (with an
    # edge from 2) over universe [1,2,3]
    p = rule("q", "v:1 v:2", "v:1>v:2", "v:2 v:3", "v:2>v:3")
    order = book_order("v:1 v:2 v:3")
    assert bits_of(p.K, order).tolist() == [
        [1, 0, 1],
        [1, 0, 1],
        [1, 0, 0],
    ]
    assert bits_of(p.nihil_rhs(), order).tolist() == [
        [1, 1, 1],
        [1, 0, 0],
        [1, 0, 0],
    ]
    t = availability_matrix(p)
    # edges incident to added node 3 but not to deleted node 1
    assert set(t.edges()) == {
        (n("v:2"), n("v:3")),
        (n("v:3"), n("v:2")),
        (n("v:3"), n("v:3")),
    }


def test_nihil_rhs_equals_e_or_dangling_surroundings():
    # Q = e OR NOT(D) under compatibility, on random small rules
    rng = random.Random(29)
    from mgg.matrix import outer_product

    for _ in range(400):
        p = random_rule(rng, 3)
        not_d = ~outer_product(~p.eN, ~p.eN)
        assert p.nihil_rhs() == (p.eE | not_d)


def test_inverse_is_involution_and_swaps_masks():
    p = q1()
    inv = p.inverse()
    assert inv.eE == p.rE and inv.rE == p.eE
    assert inv.inverse().L == p.L and inv.inverse().R == p.R
    ident = rule("id", "v:1", "", "v:1", "")
    assert ident.inverse().is_identity()


# ---------------------------------------------------------------------------
# the eight compatibility conditions
# ---------------------------------------------------------------------------

def test_adding_edge_to_deleted_node_rejected():
    with pytest.raises(IncompatibleRule) as exc:
        make_production(
            "bad",
            graph("v:1 v:2", "v:1>v:2"),
            graph("v:2", "v:1>v:2", universe=[n("v:1"), n("v:2")]),
        )
    assert 1 <= exc.value.condition <= 8


def test_preserving_edge_on_deleted_node_rejected():
    # node 1 deleted but edge (2,1) kept
    L = graph("v:1 v:2", "v:2>v:1")
    R = graph("v:2", "v:2>v:1", universe=[n("v:1"), n("v:2")])
    with pytest.raises(IncompatibleRule):
        make_production("bad", L, R)


def test_accepted_rules_pass_all_eight_norm_conditions():
    # by construction make_production validates; verdict cross-check on corpus
    for p in itertools.islice(all_two_node_rules(), 300):
        assert p.R.is_compatible()


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def test_identity_application_returns_host_unchanged():
    ident = rule("id", "v:1", "", "v:1", "")
    g = graph("v:1 v:2", "v:1>v:2")
    out = apply_to_graph(ident, g, {n("v:1"): n("v:1")})
    assert out.edges.restricted(g.universe) == g.edges
    assert out.nodes.restricted(g.universe) == g.nodes


def test_apply_then_inverse_round_trips_small_cases():
    rng = random.Random(31)
    done = 0
    for _ in range(600):
        p = random_rule(rng, 3)
        g = random_graph(rng, 3)
        m = _first_match(p, g)
        if m is None:
            continue
        try:
            h = apply_to_graph(p, g, m)
        except WouldDangle:
            continue
        inv = p.inverse()
        # comatch: preserved nodes stay pinned, added nodes land on the fresh ones
        pinned = {x: m[x] for x in p.LN.nodes() if x in m and not p.eN.get(x)}
        from mgg.match import find_matches, isomorphic

        comatches = find_matches(inv, h, check_nihilation=False, require=pinned)
        restored = False
        for comatch in comatches:
            try:
                back = apply_to_graph(inv, h, comatch)
            except WouldDangle:
                continue
            if isomorphic(back, g):
                restored = True
                break
        if not comatches:
            continue
        assert restored
        done += 1
    assert done > 60


def test_would_dangle_lists_edges_on_fixed_application():
    p = rule("del", "v:1", "", "", "", )
    g = graph("v:1 v:2", "v:2>v:1")
    with pytest.raises(WouldDangle) as exc:
        apply_to_graph(p, g, {n("v:1"): n("v:1")})
    assert (n("v:2"), n("v:1")) in exc.value.edges


def _first_match(p, g):
    from mgg.match import find_matches

    ms = find_matches(p, g, limit=1)
    return ms[0] if ms else None


# ---------------------------------------------------------------------------
# splitter
# ---------------------------------------------------------------------------

def test_split_add_erase_composes_back():
    p = q1()
    p_r, p_e = split_add_erase(p)
    assert p_e.rE.is_zero() and p_e.rN.is_zero()
    assert p_r.eE.is_zero() and p_r.eN.is_zero()
    assert (p_e.eE | p_r.rE) == (p.eE | p.rE)
    # p = p_r ; p_e pointwise on the LHS
    mid_e = p_e.applied_edges(p.LE)
    assert p_r.applied_edges(mid_e) == p.RE
