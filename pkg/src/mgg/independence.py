"""G-congruence, sequential independence, advance/delay coherence, concurrency.

Moving one rule of a sequence earlier ("advance") or later ("delay") is
analyzable in closed form: congruence conditions certify that the minimal and
negative initial digraphs survive the move, and a companion formula certifies
coherence of the permuted sequence without re-deriving it from scratch.
Arbitrary permutations fall back to brute-force re-analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .matrix import BoolMatrix, NodeId, TypedGraph
from .sequence import (
    BudgetExceeded,
    NotCoherent,
    RuleSequence,
    check_coherence,
    check_sequence_compatibility,
    compose,
    enumerate_initial_set,
    minimal_initial_digraph,
    nabla,
    delta,
    negative_initial_digraph,
)

__all__ = [
    "PermutationSpec",
    "CongruenceReport",
    "congruence_conditions",
    "check_advance_delay_coherence",
    "sequential_independent",
    "derivation_independent",
    "truly_concurrent",
    "HypothesisViolated",
]


class HypothesisViolated(ValueError):
    pass


@dataclass(frozen=True)
class PermutationSpec:
    """Move the rule applied at 1-based ``position`` by ``distance`` places:
    ``advance`` fires it earlier, ``delay`` later."""

    kind: str  # "advance" | "delay"
    position: int
    distance: int

    def __post_init__(self) -> None:
        if self.kind not in ("advance", "delay"):
            raise ValueError(f"kind must be advance or delay, got {self.kind!r}")
        if self.position < 1 or self.distance < 0:
            raise ValueError("position is 1-based and distance non-negative")

    def order(self, n: int) -> list[int]:
        """Resulting application order as 0-based indices into the original."""
        pos = self.position - 1
        if self.kind == "advance":
            new_pos = pos - self.distance
        else:
            new_pos = pos + self.distance
        if not (0 <= pos < n) or not (0 <= new_pos < n):
            raise IndexError("permutation leaves the sequence")
        order = list(range(n))
        order.pop(pos)
        order.insert(new_pos, pos)
        return order

    def window(self, n: int) -> tuple[int, int]:
        """0-based [lo, hi] window of positions the move jumps over,
        including the moved rule itself."""
        pos = self.position - 1
        if self.kind == "advance":
            return pos - self.distance, pos
        return pos, pos + self.distance


@dataclass(frozen=True)
class CongruenceReport:
    """Congruence-condition witnesses for one advance/delay move.

    ``cc_plus`` guards the minimal initial digraph's edges, ``cc_plus_nodes``
    its node vector, ``cc_minus`` (the fuller K-form) the negative initial
    digraph; ``merged`` is the single combined edge formula.  All zero
    certifies G-congruence: the permuted sequence keeps both initial digraphs.
    """

    cc_plus: BoolMatrix
    cc_minus: BoolMatrix
    merged: BoolMatrix
    cc_plus_nodes: "object" = None

    @property
    def congruent(self) -> bool:
        nodes_ok = self.cc_plus_nodes is None or self.cc_plus_nodes.is_zero()
        return self.cc_plus.is_zero() and self.cc_minus.is_zero() and nodes_ok

    def __bool__(self) -> bool:
        return self.congruent


def _window_views(s: RuleSequence, spec: PermutationSpec):
    """The moved rule's matrices plus a 1-based accessor for the rules it
    jumps over, in application order."""
    lo, hi = spec.window(len(s))
    if spec.kind == "advance":
        moved = spec.position  # 1-based index of alpha
        others = list(range(lo + 1, hi + 1))  # 0-based widths lo..hi-1
    else:
        moved = spec.position
        others = list(range(lo + 1, hi + 1))  # 0-based lo+1..hi
    return moved, others


def congruence_conditions(s: RuleSequence, spec: PermutationSpec) -> CongruenceReport:
    """Congruence conditions for advancing/delaying one rule.

    Advance of rule a over k predecessors:
      CC+ = L_a nabla(NOT e_x r_y) OR r_a nabla(NOT r_x L_y)
      CC- = K_a nabla(NOT r_x e_y) OR e_a nabla(NOT e_x K_y)
      merged = L_a nabla(NOT e_x K_y (r_y OR e_a)) OR
               K_a nabla(NOT r_x L_y (e_y OR r_a))
    Delay is the mirror case over the successors it jumps.
    """
    n = len(s)
    lo, hi = spec.window(n)
    if spec.kind == "advance":
        a = spec.position
        rng = [i + 1 for i in range(lo, hi)]  # 1-based jumped-over rules
    else:
        a = spec.position
        rng = [i + 1 for i in range(lo + 1, hi + 1)]

    u = s.universe
    if not rng:
        z = BoolMatrix.zeros(u)
        from .matrix import BoolVector

        return CongruenceReport(z, z, z, BoolVector.zeros(u))

    def idx(j: int) -> int:  # 1-based position within rng
        return rng[j - 1]

    k = len(rng)
    La, ra, ea, Ka = s.LE(a), s.rE(a), s.eE(a), s.K(a)
    cc_plus = (La & nabla(lambda x, y: ~s.eE(idx(x)) & s.rE(idx(y)), 1, k)) | (
        ra & nabla(lambda x, y: ~s.rE(idx(x)) & s.LE(idx(y)), 1, k)
    )
    cc_minus = (Ka & nabla(lambda x, y: ~s.rE(idx(x)) & s.eE(idx(y)), 1, k)) | (
        ea & nabla(lambda x, y: ~s.eE(idx(x)) & s.K(idx(y)), 1, k)
    )
    merged = (
        La & nabla(lambda x, y: ~s.eE(idx(x)) & s.K(idx(y)) & (s.rE(idx(y)) | ea), 1, k)
    ) | (
        Ka & nabla(lambda x, y: ~s.rE(idx(x)) & s.LE(idx(y)) & (s.eE(idx(y)) | ra), 1, k)
    )
    cc_plus_n = (s.LN(a) & nabla(lambda x, y: ~s.eN(idx(x)) & s.rN(idx(y)), 1, k)) | (
        s.rN(a) & nabla(lambda x, y: ~s.rN(idx(x)) & s.LN(idx(y)), 1, k)
    )
    from .matrix import BoolVector

    return CongruenceReport(
        BoolMatrix(u, cc_plus),
        BoolMatrix(u, cc_minus),
        BoolMatrix(u, merged),
        BoolVector(u, cc_plus_n),
    )


def check_advance_delay_coherence(s: RuleSequence, spec: PermutationSpec):
    """Closed-form coherence of the permuted sequence.

    Advance of rule a over rules 1..k (within its window):
      e_a nabla(NOT r_x L_y) OR R_a nabla(NOT e_x r_y) = 0
    Delay of rule b over the rules after it:
      L_b delta(NOT r_x e_y) OR r_b delta(NOT e_x R_y) = 0
    Evaluated for edges and nodes; the verdict matches re-deriving coherence
    of the permuted sequence when the original one is coherent.
    """
    from .sequence import AnalysisReport

    n = len(s)
    lo, hi = spec.window(n)
    u = s.universe
    if spec.kind == "advance":
        a = spec.position
        rng = [i + 1 for i in range(lo, hi)]
    else:
        a = spec.position
        rng = [i + 1 for i in range(lo + 1, hi + 1)]
    if not rng:
        return AnalysisReport(True, BoolMatrix.zeros(u))

    def idx(j: int) -> int:
        return rng[j - 1]

    k = len(rng)
    if spec.kind == "advance":
        edge = (s.eE(a) & nabla(lambda x, y: ~s.rE(idx(x)) & s.LE(idx(y)), 1, k)) | (
            s.RE(a) & nabla(lambda x, y: ~s.eE(idx(x)) & s.rE(idx(y)), 1, k)
        )
        node = (s.eN(a) & nabla(lambda x, y: ~s.rN(idx(x)) & s.LN(idx(y)), 1, k)) | (
            s.RN(a) & nabla(lambda x, y: ~s.eN(idx(x)) & s.rN(idx(y)), 1, k)
        )
    else:
        edge = (s.LE(a) & delta(lambda x, y: ~s.rE(idx(x)) & s.eE(idx(y)), 1, k)) | (
            s.rE(a) & delta(lambda x, y: ~s.eE(idx(x)) & s.RE(idx(y)), 1, k)
        )
        node = (s.LN(a) & delta(lambda x, y: ~s.rN(idx(x)) & s.eN(idx(y)), 1, k)) | (
            s.rN(a) & delta(lambda x, y: ~s.eN(idx(x)) & s.RN(idx(y)), 1, k)
        )
    witness = BoolMatrix(u, edge)
    verdict = not edge.any() and not node.any()
    return AnalysisReport(verdict, witness)


def sequential_independent(s: RuleSequence, spec: PermutationSpec) -> bool:
    """Both orders coherent and compatible plus G-congruent.

    Single-rule moves use the closed formulas; anything else falls back to
    brute-force re-analysis of the permuted sequence (tagged fallback in the
    docstring sense: same verdict, no closed form).
    """
    if spec.distance == 0:
        return True
    rep = check_coherence(s)
    if not rep.dangling_free or not check_sequence_compatibility(s).verdict:
        return False
    perm = s.permuted(spec.order(len(s)))
    rep_p = check_coherence(perm)
    if not rep_p.dangling_free or not check_sequence_compatibility(perm).verdict:
        return False
    cc = congruence_conditions(s, spec)
    if not cc.congruent:
        return False
    # belt and braces: the digraphs really are equal
    return (
        minimal_initial_digraph(s) == minimal_initial_digraph(perm)
        and negative_initial_digraph(s) == negative_initial_digraph(perm)
    )


def derivation_independent(
    d_rules: Sequence,
    d2_rules: Sequence,
    host: TypedGraph,
    budget: int = 2000,
) -> bool:
    """True when both rule lists admit one common initial digraph (with its
    negative counterpart) inside ``host``: their derivations then commute up
    to isomorphism.
    """
    from .match import find_matches

    set_a = enumerate_initial_set(list(d_rules), budget=budget)
    set_b = enumerate_initial_set(list(d2_rules), budget=budget)

    def embeddable(elem) -> bool:
        g = elem.graph
        from .production import make_production

        probe = make_production("probe", g, g, check=False)
        for m in find_matches(probe, host, check_nihilation=False):
            ok = True
            for a, b in elem.negative.edges():
                if a in m and b in m and host.edges.get(m[a], m[b]):
                    ok = False
                    break
            if ok:
                return True
        return False

    for ea in set_a.elements.values():
        for eb in set_b.elements.values():
            from .match import isomorphic

            if isomorphic(ea.graph, eb.graph) and embeddable(ea):
                return True
    return False


def truly_concurrent(a: RuleSequence, b: RuleSequence) -> bool:
    """The joint result is interleaving-independent.

    One side must be a single rule (the characterized case; raises
    :class:`HypothesisViolated` otherwise).  Every way of sliding that rule
    through the other sequence must stay coherent and compatible and compose
    to the same production, so no intermediate state can expose the order.
    """
    if len(a) != 1 and len(b) != 1:
        raise HypothesisViolated("one operand must be a single production")
    if len(b) == 1 and len(a) != 1:
        a, b = b, a
    single = a.rules[0]
    others = list(b.rules)

    composed = []
    for slot in range(len(others) + 1):
        rules = others[:slot] + [single] + others[slot:]
        try:
            s = RuleSequence.from_rules(rules)
        except Exception:
            return False
        if not check_coherence(s).dangling_free or not check_sequence_compatibility(s).verdict:
            return False
        composed.append(compose(s, name="c"))
    first = composed[0]
    for c in composed[1:]:
        c2 = _aligned(c, first)
        if c2 is None:
            return False
        if not (
            c2.eE == first.eE
            and c2.rE == first.rE
            and c2.eN == first.eN
            and c2.rN == first.rN
            and c2.L == first.L
            and c2.K == first.K
        ):
            return False
    return True


def _aligned(p, ref):
    """Re-express production p over ref's universe (same node set, possibly
    different order); None when the universes hold different nodes."""
    if set(p.universe) != set(ref.universe):
        return None
    if p.universe == ref.universe:
        return p
    return p.with_universe(ref.universe)
