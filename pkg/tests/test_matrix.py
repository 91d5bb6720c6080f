"""Matrix-core: completion, boolean product, norm, compatibility, tensor."""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from mgg import (
    BoolMatrix,
    BoolVector,
    CompletionPolicy,
    ConflictingIdentification,
    DimensionMismatch,
    NodeId,
    NodeUniverse,
    TypedGraph,
    boolean_product,
    complete_all,
    compatibility_witness,
    is_compatible,
    kronecker_product,
    norm1,
    outer_product,
)

from corpus import bits_of, book_order, graph, n, q1


# ---------------------------------------------------------------------------
# completion
# ---------------------------------------------------------------------------

def test_completion_of_deletion_and_addition_masks_merges_to_book_values():
    # e over order [2 4 5] and r over [2 3 5] merge to 4x4 over [2 4 5 3]
    p = q1()
    e_small = BoolMatrix.from_edges(
        book_order("v:2 v:4 v:5"),
        [(n("v:2"), n("v:4")), (n("v:5"), n("v:2"))],
    )
    r_small = BoolMatrix.from_edges(
        book_order("v:2 v:3 v:5"),
        [(n("v:2"), n("v:3")), (n("v:3"), n("v:3")), (n("v:5"), n("v:3"))],
    )
    shared = [((0, n("v:2")), (1, n("v:2"))), ((0, n("v:5")), (1, n("v:5")))]
    e_full, r_full = complete_all([e_small, r_small], CompletionPolicy.from_pairs(shared))

    assert list(e_full.universe) == [n("v:2"), n("v:4"), n("v:5"), n("v:3")]
    assert e_full.bits.astype(int).tolist() == [
        [0, 1, 0, 0],
        [0, 0, 0, 0],
        [1, 0, 0, 0],
        [0, 0, 0, 0],
    ]
    assert r_full.bits.astype(int).tolist() == [
        [0, 0, 0, 1],
        [0, 0, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 0, 1],
    ]
    # and they agree with the masks the production derives for itself
    order = book_order("v:2 v:4 v:5 v:3")
    assert np.array_equal(bits_of(p.eE, order), e_full.bits.astype(int))
    assert np.array_equal(bits_of(p.rE, order), r_full.bits.astype(int))


def test_completion_against_itself_is_identity():
    m = BoolMatrix.from_edges(book_order("v:1 v:2"), [(n("v:1"), n("v:2"))])
    (out,) = complete_all([m])
    assert out == m


def test_completion_round_trip_preserves_originals():
    rng = random.Random(7)
    for _ in range(50):
        uni = book_order("a:1 a:2 b:1")
        bits = np.array([[rng.random() < 0.5 for _ in range(3)] for _ in range(3)])
        m = BoolMatrix(uni, bits)
        other = BoolMatrix.from_edges(book_order("a:3 c:1"), [(n("a:3"), n("c:1"))])
        m2, _ = complete_all([m, other])
        assert len(m2.universe) == 5
        back = m2.restricted(uni)
        assert back == m


def test_completion_is_idempotent_and_deterministic():
    m1 = BoolMatrix.from_edges(book_order("v:1 v:2"), [(n("v:1"), n("v:2"))])
    m2 = BoolMatrix.from_edges(book_order("v:2 v:3"), [(n("v:2"), n("v:3"))])
    pol = CompletionPolicy.from_pairs([((0, n("v:2")), (1, n("v:2")))])
    a1, b1 = complete_all([m1, m2], pol)
    pol2 = CompletionPolicy.from_pairs([((0, x), (1, x)) for x in a1.universe if x in b1.universe])
    a2, b2 = complete_all([a1, b1], pol2)
    assert (a1, b1) == (a2, b2)


def test_conflicting_identification_rejected():
    m1 = BoolMatrix.zeros(book_order("v:1 v:2"))
    m2 = BoolMatrix.zeros(book_order("v:9"))
    pol = CompletionPolicy.from_pairs(
        [((0, n("v:1")), (1, n("v:9"))), ((0, n("v:2")), (1, n("v:9")))]
    )
    with pytest.raises(ConflictingIdentification):
        complete_all([m1, m2], pol)


def test_unidentified_same_named_nodes_stay_distinct():
    m1 = BoolMatrix.zeros(book_order("v:1"))
    m2 = BoolMatrix.zeros(book_order("v:1"))
    a, b = complete_all([m1, m2])
    assert len(a.universe) == 2


# ---------------------------------------------------------------------------
# boolean product / norm
# ---------------------------------------------------------------------------

def test_identity_is_neutral_for_boolean_product():
    uni = book_order("v:1 v:2 v:3")
    m = BoolMatrix.from_edges(uni, [(n("v:1"), n("v:2")), (n("v:3"), n("v:3"))])
    assert boolean_product(BoolMatrix.identity(uni), m) == m
    assert boolean_product(m, BoolMatrix.identity(uni)) == m


def test_two_cycle_squares_to_identity():
    uni = book_order("v:1 v:2")
    a = BoolMatrix(uni, np.array([[0, 1], [1, 0]], dtype=bool))
    assert boolean_product(a, a) == BoolMatrix.identity(uni)


def _floyd_warshall(bits: np.ndarray) -> np.ndarray:
    reach = bits.copy()
    k = bits.shape[0]
    for mid in range(k):
        reach |= np.outer(reach[:, mid], reach[mid, :])
    return reach


def test_reachability_via_powers_matches_floyd_warshall_on_all_4_node_digraphs():
    uni = book_order("v:1 v:2 v:3 v:4")
    rng = random.Random(3)
    # all digraphs is 2^16; sample a deterministic quarter plus structured ones
    seen = 0
    for code in range(0, 2 ** 16, 3):
        bits = np.array([(code >> k) & 1 for k in range(16)], dtype=bool).reshape(4, 4)
        m = BoolMatrix(uni, bits)
        acc = BoolMatrix.zeros(uni)
        power = BoolMatrix.identity(uni)
        for _ in range(4):
            power = boolean_product(power, m)
            acc = acc | power
        assert np.array_equal(acc.bits, _floyd_warshall(bits)), code
        seen += 1
    assert seen > 20000


def test_norm_is_fold_or():
    uni = book_order("v:1 v:2 v:3")
    assert norm1(BoolVector.zeros(uni)) == 0
    assert norm1(BoolVector.from_nodes(uni, [n("v:2")])) == 1
    rng = random.Random(11)
    for _ in range(200):
        bits = [rng.random() < 0.3 for _ in range(3)]
        v = BoolVector(uni, np.array(bits))
        expected = 0
        for b in bits:
            expected = expected or int(b)
        assert norm1(v) == expected


def test_norm_distributes_over_or():
    uni = book_order("v:1 v:2 v:3")
    rng = random.Random(13)
    for _ in range(100):
        v1 = BoolVector(uni, np.array([rng.random() < 0.4 for _ in range(3)]))
        v2 = BoolVector(uni, np.array([rng.random() < 0.4 for _ in range(3)]))
        assert norm1(v1 | v2) == (norm1(v1) | norm1(v2))


def test_product_distributes_over_or_both_sides():
    uni = book_order("v:1 v:2 v:3")
    rng = random.Random(17)
    for _ in range(60):
        ms = [
            BoolMatrix(uni, np.array([[rng.random() < 0.4 for _ in range(3)] for _ in range(3)]))
            for _ in range(3)
        ]
        m1, m2, m3 = ms
        assert boolean_product(m1 | m2, m3) == boolean_product(m1, m3) | boolean_product(m2, m3)
        assert boolean_product(m3, m1 | m2) == boolean_product(m3, m1) | boolean_product(m3, m2)


def test_double_negation_is_identity():
    uni = book_order("v:1 v:2")
    m = BoolMatrix.from_edges(uni, [(n("v:1"), n("v:2"))])
    assert ~(~m) == m


def test_dimension_mismatch_raises():
    a = BoolMatrix.zeros(book_order("v:1"))
    b = BoolMatrix.zeros(book_order("v:2"))
    with pytest.raises(DimensionMismatch):
        boolean_product(a, b)


# ---------------------------------------------------------------------------
# compatibility
# ---------------------------------------------------------------------------

def test_complete_three_node_graph_with_absent_fourth_node_is_compatible():
    # adjacency has zero row/column for the absent node 4
    uni = book_order("v:1 v:2 v:3 v:4")
    edges = [(a, b) for a in list(uni)[:3] for b in list(uni)[:3]]
    g = TypedGraph.build([n("v:1"), n("v:2"), n("v:3")], edges, uni)
    assert g.is_compatible()
    assert g.dangling_edges() == []


def test_empty_graph_is_compatible():
    assert TypedGraph.empty(book_order("v:1 v:2")).is_compatible()


def test_compatibility_matches_naive_endpoint_scan_exhaustively():
    uni = book_order("v:1 v:2 v:3 v:4")
    checked = 0
    for node_code in range(16):
        nodes = np.array([(node_code >> k) & 1 for k in range(4)], dtype=bool)
        for code in range(0, 2 ** 16, 7):
            bits = np.array([(code >> k) & 1 for k in range(16)], dtype=bool).reshape(4, 4)
            m = BoolMatrix(uni, bits)
            v = BoolVector(uni, nodes)
            naive_bad = [
                (uni[i], uni[j])
                for i in range(4)
                for j in range(4)
                if bits[i, j] and (not nodes[i] or not nodes[j])
            ]
            assert is_compatible(m, v) == (not naive_bad)
            assert set(compatibility_witness(m, v)) == set(naive_bad)
            checked += 1
    assert checked >= 16 * 9000


# ---------------------------------------------------------------------------
# outer / kronecker products
# ---------------------------------------------------------------------------

def test_nihilation_outer_product_example_value():
    # deleted-node complement [0,1,1] gives NOT(D) = [[1,1,1],[1,0,0],[1,0,0]]
    uni = book_order("v:1 v:2 v:3")
    e_nodes = BoolVector(uni, np.array([True, False, False]))
    not_d = ~outer_product(~e_nodes, ~e_nodes)
    assert not_d.bits.astype(int).tolist() == [[1, 1, 1], [1, 0, 0], [1, 0, 0]]


def test_anything_kron_zero_is_zero():
    uni = book_order("v:1 v:2")
    x = BoolMatrix.ones(uni)
    z = BoolMatrix.zeros(uni)
    assert not kronecker_product(x, z).any()


def test_kronecker_equals_tensor_product_graph_adjacency():
    # oracle: explicit product-graph construction on all pairs of <=3-node graphs
    uni3 = book_order("v:1 v:2 v:3")
    codes = range(0, 2 ** 9, 11)
    mats = [
        np.array([(c >> k) & 1 for k in range(9)], dtype=bool).reshape(3, 3) for c in codes
    ]
    for a_bits, b_bits in itertools.islice(itertools.product(mats, mats), 800):
        a = BoolMatrix(uni3, a_bits)
        b = BoolMatrix(uni3, b_bits)
        kron = kronecker_product(a, b)
        nsz = 3
        for i1 in range(nsz):
            for i2 in range(nsz):
                for j1 in range(nsz):
                    for j2 in range(nsz):
                        adjacent = a_bits[i1, j1] and b_bits[i2, j2]
                        assert kron[i1 * nsz + i2, j1 * nsz + j2] == adjacent
