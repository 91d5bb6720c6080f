"""Closed-form analysis of completed rule sequences.

A sequence ``s = p_n ; ... ; p_1`` is applied from right to left: p_1 fires
first.  Internally rules are stored in application order (index 0 fires
first), so "rule i" below is the (i+1)-th rule to fire.

The nabla/delta operators generalize the alternating delete/add structure of
a sequence; every analysis here (coherence, minimal/negative initial digraph,
image, congruence in :mod:`mgg.independence`) is an instance of them.  All
formulas are evaluated numerically cell-wise; no symbolic simplification.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .matrix import (
    BoolMatrix,
    BoolVector,
    CompletionPolicy,
    NodeId,
    NodeUniverse,
    TypedGraph,
    boolean_product,
    completion_plan,
)
from .production import Production, availability_matrix, make_production

__all__ = [
    "RuleSequence",
    "AnalysisReport",
    "CoherenceReport",
    "NotCoherent",
    "NotCompatible",
    "OverflowOutsideMinusOneZeroOne",
    "BudgetExceeded",
    "nabla",
    "delta",
    "check_coherence",
    "minimal_initial_digraph",
    "negative_initial_digraph",
    "sequence_image",
    "check_sequence_compatibility",
    "composition_sums",
    "compose",
    "InitialDigraphSet",
    "enumerate_initial_set",
]


class NotCoherent(ValueError):
    pass


class NotCompatible(ValueError):
    pass


class OverflowOutsideMinusOneZeroOne(ValueError):
    """A composition sum left {-1,0,1}: the sequence was not coherent."""


class BudgetExceeded(RuntimeError):
    pass


class IndexOutOfRange(IndexError):
    pass


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def nabla(f: Callable[[int, int], np.ndarray], t0: int, t1: int) -> np.ndarray:
    """OR_{y=t0..t1} AND_{x=t0..y} f(x,y); 1-based inclusive bounds.

    Returns None-shaped zero if the range is empty (t0 > t1); callers pass a
    sample call's shape via f when nonempty, so the empty case is handled by
    the wrappers below.
    """
    if t0 > t1:
        raise IndexOutOfRange("empty operator range")
    acc = None
    for y in range(t0, t1 + 1):
        term = None
        for x in range(t0, y + 1):
            v = f(x, y)
            term = v if term is None else (term & v)
        acc = term if acc is None else (acc | term)
    return acc


def delta(f: Callable[[int, int], np.ndarray], t0: int, t1: int) -> np.ndarray:
    """OR_{y=t0..t1} AND_{x=y..t1} f(x,y); 1-based inclusive bounds."""
    if t0 > t1:
        raise IndexOutOfRange("empty operator range")
    acc = None
    for y in range(t0, t1 + 1):
        term = None
        for x in range(y, t1 + 1):
            v = f(x, y)
            term = v if term is None else (term & v)
        acc = term if acc is None else (acc | term)
    return acc


def _nabla_or_zero(f, t0, t1, zero):
    return nabla(f, t0, t1) if t0 <= t1 else zero


def _delta_or_zero(f, t0, t1, zero):
    return delta(f, t0, t1) if t0 <= t1 else zero


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuleSequence:
    """Ordered, completed list of production instances over one universe.

    ``rules`` is in application order: rules[0] fires first.  Use
    :meth:`from_rules` to complete a list of independently-universed rules
    with an explicit identification policy.
    """

    rules: tuple[Production, ...]
    policy: CompletionPolicy = CompletionPolicy()

    def __post_init__(self) -> None:
        if not self.rules:
            raise ValueError("empty sequence")
        u = self.rules[0].universe
        for p in self.rules:
            if p.universe != u:
                raise ValueError("sequence rules must share one universe; use from_rules")

    @staticmethod
    def from_rules(
        rules: Sequence[Production],
        policy: CompletionPolicy = CompletionPolicy(),
    ) -> "RuleSequence":
        """Complete rules over a merged universe.

        The policy's item indices refer to positions in ``rules`` (application
        order).  Only identifications listed in the policy relate nodes across
        rules; same-named nodes of different rules are identified by default
        (they are "the same 2" in the drawings), which matches how the worked
        sequences are written.  Pass ``policy`` pairs to identify differently
        named nodes, or pre-rename nodes to keep them apart.
        """
        shared_pairs = []
        for i, j in itertools.combinations(range(len(rules)), 2):
            for n in rules[i].universe:
                if n in rules[j].universe:
                    shared_pairs.append(((i, n), (j, n)))
        full_policy = CompletionPolicy.from_pairs(tuple(shared_pairs) + policy.identify)
        universe, renames = completion_plan([list(p.universe) for p in rules], full_policy)
        new_rules = [p.with_universe(universe, rename) for p, rename in zip(rules, renames)]
        return RuleSequence(tuple(new_rules), policy)

    @property
    def universe(self) -> NodeUniverse:
        return self.rules[0].universe

    def __len__(self) -> int:
        return len(self.rules)

    def __getitem__(self, i: int) -> Production:
        return self.rules[i]

    # 1-based accessors used by the formulas (index = application position)
    def LE(self, i: int) -> np.ndarray:
        return self.rules[i - 1].LE.bits

    def RE(self, i: int) -> np.ndarray:
        return self.rules[i - 1].RE.bits

    def eE(self, i: int) -> np.ndarray:
        return self.rules[i - 1].eE.bits

    def rE(self, i: int) -> np.ndarray:
        return self.rules[i - 1].rE.bits

    def LN(self, i: int) -> np.ndarray:
        return self.rules[i - 1].LN.bits

    def RN(self, i: int) -> np.ndarray:
        return self.rules[i - 1].RN.bits

    def eN(self, i: int) -> np.ndarray:
        return self.rules[i - 1].eN.bits

    def rN(self, i: int) -> np.ndarray:
        return self.rules[i - 1].rN.bits

    def K(self, i: int) -> np.ndarray:
        return self.rules[i - 1].K.bits

    def Q(self, i: int) -> np.ndarray:
        return self.rules[i - 1].nihil_rhs().bits

    def T(self, i: int) -> np.ndarray:
        return availability_matrix(self.rules[i - 1]).bits

    def permuted(self, order: Sequence[int]) -> "RuleSequence":
        """New sequence applying rules in positions ``order`` (0-based,
        application order)."""
        return RuleSequence(tuple(self.rules[i] for i in order), self.policy)

    def prefix(self, m: int) -> "RuleSequence":
        return RuleSequence(self.rules[:m], self.policy)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisReport:
    verdict: bool
    witness: BoolMatrix

    def __bool__(self) -> bool:
        return self.verdict


@dataclass(frozen=True)
class CoherenceReport:
    """Coherence verdicts with separately tagged witnesses.

    ``edge_witness``/``node_witness`` come from the dangling-free formulas;
    ``nihil_witness`` from the forbidden-element (K/Q) formula.  The overall
    ``verdict`` requires all three to vanish; ``dangling_free`` ignores the
    nihil part (the classic reading used by the worked q-sequences).
    """

    edge_witness: BoolMatrix
    node_witness: BoolVector
    nihil_witness: BoolMatrix

    @property
    def dangling_free(self) -> bool:
        return self.edge_witness.is_zero() and self.node_witness.is_zero()

    @property
    def verdict(self) -> bool:
        return self.dangling_free and self.nihil_witness.is_zero()

    def __bool__(self) -> bool:
        return self.verdict


# ---------------------------------------------------------------------------
# coherence
# ---------------------------------------------------------------------------

def check_coherence(s: RuleSequence) -> CoherenceReport:
    """Both coherence criteria, cell-wise.

    Dangling-free part (edges, and the same shape for nodes):
      OR_i [ R_i AND nabla_{i+1}^n(NOT e_x AND r_y)
             OR L_i AND delta_1^{i-1}(e_y AND NOT r_x) ]
    Forbidden-element part:
      OR_i [ Q_i AND nabla_{i+1}^n(e_y AND NOT r_x)
             OR K_i AND delta_1^{i-1}(r_y AND NOT e_x) ]
    """
    n = len(s)
    zM = np.zeros_like(s.LE(1))
    zV = np.zeros_like(s.LN(1))

    edge = zM.copy()
    node = zV.copy()
    nihil = zM.copy()
    for i in range(1, n + 1):
        adds_after = _nabla_or_zero(lambda x, y: ~s.eE(x) & s.rE(y), i + 1, n, zM)
        dels_before = _delta_or_zero(lambda x, y: s.eE(y) & ~s.rE(x), 1, i - 1, zM)
        edge = edge | (s.RE(i) & adds_after) | (s.LE(i) & dels_before)

        n_adds_after = _nabla_or_zero(lambda x, y: ~s.eN(x) & s.rN(y), i + 1, n, zV)
        n_dels_before = _delta_or_zero(lambda x, y: s.eN(y) & ~s.rN(x), 1, i - 1, zV)
        node = node | (s.RN(i) & n_adds_after) | (s.LN(i) & n_dels_before)

        q_dels_after = _nabla_or_zero(lambda x, y: s.eE(y) & ~s.rE(x), i + 1, n, zM)
        k_adds_before = _delta_or_zero(lambda x, y: s.rE(y) & ~s.eE(x), 1, i - 1, zM)
        nihil = nihil | (s.Q(i) & q_dels_after) | (s.K(i) & k_adds_before)

    u = s.universe
    return CoherenceReport(BoolMatrix(u, edge), BoolVector(u, node), BoolMatrix(u, nihil))


# ---------------------------------------------------------------------------
# initial digraphs, image, compatibility, composition
# ---------------------------------------------------------------------------

def minimal_initial_digraph(s: RuleSequence, require_coherent: bool = True) -> TypedGraph:
    """M = nabla_1^n(NOT r_x AND L_y), edges and nodes."""
    if require_coherent and not check_coherence(s).dangling_free:
        raise NotCoherent("sequence is not coherent")
    n = len(s)
    m_e = nabla(lambda x, y: ~s.rE(x) & s.LE(y), 1, n)
    m_n = nabla(lambda x, y: ~s.rN(x) & s.LN(y), 1, n)
    u = s.universe
    return TypedGraph(BoolMatrix(u, m_e), BoolVector(u, m_n))


def negative_initial_digraph(
    s: RuleSequence,
    require_coherent: bool = True,
    assume_compatible: bool = True,
) -> BoolMatrix:
    """Forbidden-edge matrix of the sequence.

    Strict form nabla_1^n(NOT e_x AND NOT T_x AND K_y); with
    ``assume_compatible`` the availability mask T is dropped (edges incident
    to freshly added nodes cannot pre-exist in a compatible host), which is
    the form the worked examples expand: K_1 OR NOT e_1 K_2 OR ...
    """
    if require_coherent and not check_coherence(s).dangling_free:
        raise NotCoherent("sequence is not coherent")
    n = len(s)
    if assume_compatible:
        k = nabla(lambda x, y: ~s.eE(x) & s.K(y), 1, n)
    else:
        k = nabla(lambda x, y: ~s.eE(x) & ~s.T(x) & s.K(y), 1, n)
    return BoolMatrix(s.universe, k)


def sequence_image(s: RuleSequence, m: TypedGraph | None = None, require_checks: bool = True) -> TypedGraph:
    """Image of the minimal initial digraph (or of ``m``) under the sequence:
    AND_i(NOT e_i AND M) OR delta_1^n(NOT e_x AND r_y)."""
    if require_checks:
        rep = check_coherence(s)
        if not rep.dangling_free:
            raise NotCoherent("sequence is not coherent")
    if m is None:
        m = minimal_initial_digraph(s, require_coherent=False)
    if m.universe != s.universe:
        raise ValueError("image input must share the sequence universe")
    n = len(s)
    keep_e = m.edges.bits.copy()
    keep_n = m.nodes.bits.copy()
    for i in range(1, n + 1):
        keep_e &= ~s.eE(i)
        keep_n &= ~s.eN(i)
    add_e = delta(lambda x, y: ~s.eE(x) & s.rE(y), 1, n)
    add_n = delta(lambda x, y: ~s.eN(x) & s.rN(y), 1, n)
    u = s.universe
    return TypedGraph(BoolMatrix(u, keep_e | add_e), BoolVector(u, keep_n | add_n))


def sequence_image_negation(s: RuleSequence, m: TypedGraph | None = None) -> BoolMatrix:
    """NOT s(M) for edges: AND_i(NOT r_i AND NOT M) OR delta_1^n(NOT r_x AND e_y)."""
    if m is None:
        m = minimal_initial_digraph(s, require_coherent=False)
    n = len(s)
    keep = ~m.edges.bits
    for i in range(1, n + 1):
        keep &= ~s.rE(i)
    dels = delta(lambda x, y: ~s.rE(x) & s.eE(y), 1, n)
    return BoolMatrix(s.universe, keep | dels)


def check_sequence_compatibility(s: RuleSequence) -> AnalysisReport:
    """Every prefix image must be a simple digraph:
    OR_m || [s_m(M_m) OR s_m(M_m)^t] (.) NOT s_m(M_m^N) ||_1 = 0."""
    u = s.universe
    witness = np.zeros_like(s.LE(1))
    for m_len in range(1, len(s) + 1):
        pre = s.prefix(m_len)
        img = sequence_image(pre, require_checks=False)
        both = img.edges | img.edges.T
        bad = boolean_product(both, ~img.nodes)
        # expand the per-row verdict back to offending cells for the witness
        if bad.bits.any():
            absent = ~img.nodes.bits
            e = img.edges.bits
            cells = (e & (absent[None, :] | absent[:, None]))
            witness |= cells
    w = BoolMatrix(u, witness)
    return AnalysisReport(w.is_zero(), w)


def composition_sums(s: RuleSequence) -> tuple[np.ndarray, np.ndarray]:
    """S^E = sum_i (r_i - e_i) and S^N, as small integer arrays.

    Entries outside {-1, 0, 1} mean the sequence was not coherent.
    """
    se = np.zeros(s.LE(1).shape, dtype=np.int64)
    sn = np.zeros(s.LN(1).shape, dtype=np.int64)
    for i in range(1, len(s) + 1):
        se += s.rE(i).astype(np.int64) - s.eE(i).astype(np.int64)
        sn += s.rN(i).astype(np.int64) - s.eN(i).astype(np.int64)
    if np.abs(se).max(initial=0) > 1 or np.abs(sn).max(initial=0) > 1:
        raise OverflowOutsideMinusOneZeroOne("composition sums escaped {-1,0,1}")
    return se, sn


def compose(s: RuleSequence, name: str | None = None) -> Production:
    """Single production equivalent to a coherent, compatible sequence."""
    rep = check_coherence(s)
    if not rep.dangling_free:
        raise NotCoherent("cannot compose an incoherent sequence")
    if not check_sequence_compatibility(s).verdict:
        raise NotCompatible("cannot compose a non-compatible sequence")
    se, sn = composition_sums(s)
    mid = minimal_initial_digraph(s, require_coherent=False)
    img = sequence_image(s, require_checks=False)
    comp = make_production(name or ";".join(p.name for p in reversed(s.rules)), mid, img)
    assert np.array_equal(comp.rE.bits, se > 0) and np.array_equal(comp.eE.bits, se < 0)
    assert np.array_equal(comp.rN.bits, sn > 0) and np.array_equal(comp.eN.bits, sn < 0)
    return comp


# ---------------------------------------------------------------------------
# initial digraph sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitialSetElement:
    """One completion of the sequence: the partition of per-rule nodes into
    merged nodes, plus the digraphs it induces."""

    partition: tuple[tuple[tuple[int, NodeId], ...], ...]
    sequence: RuleSequence
    graph: TypedGraph
    negative: BoolMatrix


@dataclass
class InitialDigraphSet:
    """DAG of initial digraphs ordered by identification.

    ``elements`` maps a canonical partition key to its element; ``children``
    lists, per key, the keys reached by one extra same-type identification
    that keeps the sequence coherent.  The root is the maximal initial
    digraph (all rule nodes distinct).
    """

    root: object
    elements: dict
    children: dict
    truncated: bool = False

    @property
    def maximal(self) -> InitialSetElement:
        return self.elements[self.root]

    def minimal(self) -> list[InitialSetElement]:
        return [self.elements[k] for k, ch in self.children.items() if not ch]

    def graphs(self) -> list[TypedGraph]:
        return [e.graph for e in self.elements.values()]


def _partition_key(partition) -> tuple:
    return tuple(sorted(tuple(sorted(g)) for g in partition))


def enumerate_initial_set(
    rules: Sequence[Production],
    budget: int = 10_000,
    coherence: str = "dangling-free",
    negative: bool = True,
) -> InitialDigraphSet:
    """All coherent completions of the rule list, structured by identification.

    Children differ from their parent by identifying one more pair of
    same-typed nodes from different rules; identifications are explored in
    lexicographic ((type, rule-position, index) of both endpoints) order so
    the DAG is reproducible.  Exploration stops once ``budget`` distinct
    elements exist; the result is then flagged truncated.
    """

    rules = _decollide(rules)
    items = [[(i, n) for n in p.universe] for i, p in enumerate(rules)]
    all_nodes = [x for item in items for x in item]

    def build(partition) -> InitialSetElement | None:
        pairs = []
        for group in partition:
            first = group[0]
            for other in group[1:]:
                pairs.append((first, other))
        policy = CompletionPolicy.from_pairs(pairs)
        try:
            seq = RuleSequence.from_rules(rules, policy)
        except Exception:
            return None
        rep = check_coherence(seq)
        ok = rep.dangling_free if coherence == "dangling-free" else rep.verdict
        if not ok:
            return None
        graph = minimal_initial_digraph(seq, require_coherent=False)
        neg = negative_initial_digraph(seq, require_coherent=False) if negative else BoolMatrix.zeros(seq.universe)
        return InitialSetElement(partition, seq, graph, neg)

    root_partition = tuple((x,) for x in all_nodes)
    root = build(root_partition)
    if root is None:
        raise NotCoherent("maximal initial digraph is not coherent")
    root_key = _partition_key(root_partition)
    elements = {root_key: root}
    children: dict = {root_key: []}
    frontier = [root_partition]
    truncated = False

    while frontier:
        partition = frontier.pop(0)
        key = _partition_key(partition)
        groups = list(partition)
        merge_options = []
        for a, b in itertools.combinations(range(len(groups)), 2):
            na, nb = groups[a][0][1], groups[b][0][1]
            if na.type_name != nb.type_name:
                continue
            rules_a = {i for i, _ in groups[a]}
            rules_b = {i for i, _ in groups[b]}
            if rules_a & rules_b:
                continue  # would merge two nodes of one rule
            merge_options.append((a, b))
        merge_options.sort(key=lambda ab: (groups[ab[0]][0][1].type_name, groups[ab[0]], groups[ab[1]]))
        for a, b in merge_options:
            merged = tuple(sorted(groups[a] + groups[b]))
            new_groups = [g for k2, g in enumerate(groups) if k2 not in (a, b)] + [merged]
            new_partition = tuple(new_groups)
            new_key = _partition_key(new_partition)
            if new_key in elements:
                if new_key not in children[key]:
                    children[key].append(new_key)
                continue
            if len(elements) >= budget:
                truncated = True
                continue
            elem = build(new_partition)
            if elem is None:
                continue
            elements[new_key] = elem
            children[new_key] = []
            children[key].append(new_key)
            frontier.append(new_partition)

    return InitialDigraphSet(root_key, elements, children, truncated)


def _decollide(rules: Sequence[Production]) -> list[Production]:
    """Rename nodes so no two rules share a NodeId (all relations then come
    from the enumeration policy, not from name collisions)."""
    out = []
    used: dict[str, set[int]] = {}
    for p in rules:
        rename = {}
        for n in p.universe:
            taken = used.setdefault(n.type_name, set())
            idx = n.index
            while idx in taken:
                idx += 1
            taken.add(idx)
            rename[n] = NodeId(n.type_name, idx)
        target = NodeUniverse([rename[n] for n in p.universe])
        out.append(p.with_universe(target, rename))
    return out
