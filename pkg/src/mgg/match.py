"""Matching, derivations, epsilon rules, marking and applicability.

A match sends a rule's present LHS nodes injectively into the host, preserving
types and edges, and additionally certifies that the rule's forbidden edges
(nihilation matrix) between matched nodes are absent.  Application in a
floating grammar synthesizes an epsilon rule deleting the would-be dangling
edges before the rule itself fires; fixed grammars refuse such matches.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .matrix import BoolMatrix, BoolVector, NodeId, NodeUniverse, TypedGraph
from .production import (
    MatchNotFound,
    Production,
    WouldDangle,
    apply_to_graph,
    make_production,
)
from .sequence import BudgetExceeded, RuleSequence

__all__ = [
    "Match",
    "find_matches",
    "synthesize_epsilon",
    "FixedModeViolation",
    "Derivation",
    "derive",
    "mark_pair",
    "MarkToken",
    "TypeCollision",
    "classify_epsilons",
    "is_exact",
    "decide_applicability",
    "Applicability",
    "isomorphic",
]


def isomorphic(g1: TypedGraph, g2: TypedGraph) -> bool:
    """Type-preserving digraph isomorphism by backtracking (desk scale)."""
    n1 = g1.present_nodes()
    n2 = g2.present_nodes()
    if len(n1) != len(n2):
        return False
    by_type1: dict[str, list[NodeId]] = {}
    by_type2: dict[str, list[NodeId]] = {}
    for x in n1:
        by_type1.setdefault(x.type_name, []).append(x)
    for x in n2:
        by_type2.setdefault(x.type_name, []).append(x)
    if {t: len(v) for t, v in by_type1.items()} != {t: len(v) for t, v in by_type2.items()}:
        return False
    e1 = {(a, b) for a, b in g1.edge_pairs()}
    e2 = {(a, b) for a, b in g2.edge_pairs()}
    if len(e1) != len(e2):
        return False

    order = sorted(n1)

    def backtrack(i: int, assign: dict[NodeId, NodeId], used: set[NodeId]) -> bool:
        if i == len(order):
            return True
        x = order[i]
        for y in by_type2[x.type_name]:
            if y in used:
                continue
            ok = True
            for z, w in assign.items():
                if ((x, z) in e1) != ((y, w) in e2) or ((z, x) in e1) != ((w, y) in e2):
                    ok = False
                    break
            if ok and (((x, x) in e1) == ((y, y) in e2)):
                assign[x] = y
                used.add(y)
                if backtrack(i + 1, assign, used):
                    return True
                del assign[x]
                used.remove(y)
        return False

    return backtrack(0, {}, set())


class FixedModeViolation(ValueError):
    def __init__(self, edges):
        self.edges = edges
        super().__init__(f"dangling edges in fixed mode: {edges}")


class TypeCollision(ValueError):
    pass


@dataclass(frozen=True)
class Match:
    """Injective node map from a rule's present LHS nodes into the host."""

    production: Production
    host: TypedGraph
    node_map: tuple[tuple[NodeId, NodeId], ...]

    @property
    def mapping(self) -> dict[NodeId, NodeId]:
        return dict(self.node_map)

    def __getitem__(self, n: NodeId) -> NodeId:
        return self.mapping[n]


def find_matches(
    p: Production,
    g: TypedGraph,
    limit: int | None = None,
    check_nihilation: bool = True,
    require: dict[NodeId, NodeId] | None = None,
) -> list[dict[NodeId, NodeId]]:
    """All injective, type- and edge-preserving node maps of p's LHS into g.

    Ordered lexicographically by assignment (LHS nodes in universe order,
    candidates in host order), so the result is deterministic.  With
    ``check_nihilation`` the rule's forbidden edges between matched nodes
    must be absent from the host.  ``require`` pins some assignments.
    """
    lhs_nodes = [n for n in p.universe if p.LN.get(n)]
    host_nodes = g.present_nodes()
    by_type: dict[str, list[NodeId]] = {}
    for h in host_nodes:
        by_type.setdefault(h.type_name, []).append(h)

    lhs_edges = p.L.edge_pairs()
    forbidden = p.K.edges() if check_nihilation else []

    out: list[dict[NodeId, NodeId]] = []

    def consistent(assign: dict[NodeId, NodeId], n: NodeId, h: NodeId) -> bool:
        for a, b in lhs_edges:
            if a == n and b in assign and not g.edges.get(h, assign[b]):
                return False
            if b == n and a in assign and not g.edges.get(assign[a], h):
                return False
            if a == n and b == n and not g.edges.get(h, h):
                return False
        return True

    def backtrack(i: int, assign: dict[NodeId, NodeId], used: set[NodeId]) -> bool:
        if limit is not None and len(out) >= limit:
            return True
        if i == len(lhs_nodes):
            if check_nihilation:
                for a, b in forbidden:
                    if a in assign and b in assign and g.edges.get(assign[a], assign[b]):
                        return False
            out.append(dict(assign))
            return limit is not None and len(out) >= limit
        n = lhs_nodes[i]
        pinned = (require or {}).get(n)
        candidates = [pinned] if pinned is not None else by_type.get(n.type_name, [])
        for h in candidates:
            if h is None or h in used or h.type_name != n.type_name:
                continue
            if not g.nodes.get(h):
                continue
            if not consistent(assign, n, h):
                continue
            assign[n] = h
            used.add(h)
            if backtrack(i + 1, assign, used):
                return True
            del assign[n]
            used.remove(h)
        return False

    backtrack(0, {}, set())
    return out


# ---------------------------------------------------------------------------
# epsilon rules
# ---------------------------------------------------------------------------

def dangling_edges_at(p: Production, g: TypedGraph, match: dict[NodeId, NodeId]) -> list[tuple[NodeId, NodeId]]:
    """Host edges that would dangle: incident to an image of a deleted node
    and not themselves deleted by the rule."""
    deleted = {match[n] for n in p.eN.nodes() if n in match}
    if not deleted:
        return []
    erased = set()
    for a, b in p.eE.edges():
        if a in match and b in match:
            erased.add((match[a], match[b]))
    out = []
    for a, b in g.edge_pairs():
        if (a in deleted or b in deleted) and (a, b) not in erased:
            out.append((a, b))
    return out


def synthesize_epsilon(
    p: Production,
    g: TypedGraph,
    match: dict[NodeId, NodeId],
    mode: str = "floating",
) -> tuple[Production | None, dict[NodeId, NodeId]]:
    """Edge-deleting rule clearing the dangling edges of ``match``.

    Returns (epsilon production, its match); the epsilon is None when nothing
    dangles.  Fixed mode raises instead of synthesizing.  The epsilon deletes
    edges only (its node masks are zero) and is matched at the dangling
    edges' endpoints (the extended match).
    """
    gamma = dangling_edges_at(p, g, match)
    if not gamma:
        return None, {}
    if mode == "fixed":
        raise FixedModeViolation(gamma)
    endpoints: list[NodeId] = []
    for a, b in gamma:
        for x in (a, b):
            if x not in endpoints:
                endpoints.append(x)
    uni = NodeUniverse(endpoints)
    lhs = TypedGraph.build(endpoints, gamma, uni)
    rhs = TypedGraph.build(endpoints, [], uni)
    eps = make_production(p.name + "_eps", lhs, rhs)
    eps_match = {x: x for x in endpoints}
    return eps, eps_match


# ---------------------------------------------------------------------------
# marking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkToken:
    type_name: str
    first: str
    second: str


def mark_pair(
    pa: Production,
    pb: Production,
    alpha: str,
    alphabet: Iterable[str] = (),
) -> tuple[Production, Production, MarkToken]:
    """Tie two rules to the same location with a fresh mark node.

    ``pb`` (applied first) gains a mark node of type ``alpha`` with edges to
    every node it uses; ``pa`` (applied later) deletes the mark node alone,
    not the edges hanging from it, so intermediate rules are not faked into
    dependencies.
    """
    types_in_use = set(alphabet)
    for p in (pa, pb):
        types_in_use.update(x.type_name for x in p.universe)
    if alpha in types_in_use:
        raise TypeCollision(f"mark type {alpha!r} already in alphabet")

    mark = NodeId(alpha, 1)

    # pb: add the mark node plus edges mark -> used nodes
    uni_b = pb.universe.extended([mark])
    used_b = [x for x in pb.universe if pb.LN.get(x) or pb.RN.get(x)]
    lhs_b = pb.L.reindexed(uni_b)
    rhs_edges = pb.R.edges.reindexed(uni_b)
    for x in used_b:
        if pb.RN.get(x):
            rhs_edges = rhs_edges.with_edge(mark, x, True)
    rhs_nodes = pb.R.nodes.reindexed(uni_b)
    bits = rhs_nodes.bits.copy()
    bits[uni_b.position(mark)] = True
    marked_b = make_production(pb.name, lhs_b, TypedGraph(rhs_edges, BoolVector(uni_b, bits)))

    # pa: require and delete the mark node (only the node; epsilon machinery
    # clears its edges at application time)
    uni_a = pa.universe.extended([mark])
    lhs_nodes = pa.L.nodes.reindexed(uni_a)
    bits = lhs_nodes.bits.copy()
    bits[uni_a.position(mark)] = True
    lhs_a = TypedGraph(pa.L.edges.reindexed(uni_a), BoolVector(uni_a, bits))
    rhs_a = pa.R.reindexed(uni_a)
    marked_a = make_production(pa.name, lhs_a, rhs_a)

    return marked_a, marked_b, MarkToken(alpha, pa.name, pb.name)


# ---------------------------------------------------------------------------
# derivations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonRecord:
    position: int  # index of the step whose rule needed it (0-based)
    production: Production
    match: dict[NodeId, NodeId]
    edges: tuple[tuple[NodeId, NodeId], ...]


@dataclass
class Derivation:
    """A replayed sequence: per-step rules, matches and intermediate states.

    ``trace[0]`` is the initial host; ``trace[-1]`` the final graph.  Every
    synthesized epsilon rule is recorded with the step it belongs to.
    """

    rules: list[Production]
    matches: list[dict[NodeId, NodeId]]
    trace: list[TypedGraph]
    epsilons: list[EpsilonRecord] = field(default_factory=list)

    @property
    def initial(self) -> TypedGraph:
        return self.trace[0]

    @property
    def final(self) -> TypedGraph:
        return self.trace[-1]


def derive(
    rules: Sequence[Production],
    host: TypedGraph,
    matches: Sequence[dict[NodeId, NodeId] | None] | None = None,
    mode: str = "floating",
) -> Derivation:
    """Apply rules in order (rules[0] first), synthesizing epsilon rules in
    floating mode; a None match picks the first one found."""
    g = host
    got_rules: list[Production] = []
    got_matches: list[dict[NodeId, NodeId]] = []
    trace = [g]
    epsilons: list[EpsilonRecord] = []
    for i, p in enumerate(rules):
        m = matches[i] if matches is not None else None
        if m is None:
            found = find_matches(p, g, limit=1)
            if not found:
                raise MatchNotFound(f"no match for {p.name} at step {i}")
            m = found[0]
        eps, eps_match = synthesize_epsilon(p, g, m, mode=mode)
        if eps is not None:
            edges = tuple(eps.eE.edges())
            g = apply_to_graph(eps, g, eps_match)
            epsilons.append(EpsilonRecord(i, eps, eps_match, edges))
            trace.append(g)
            got_rules.append(eps)
            got_matches.append(eps_match)
        g = apply_to_graph(p, g, m)
        if not g.is_compatible():
            raise WouldDangle(g.dangling_edges())
        trace.append(g)
        got_rules.append(p)
        got_matches.append(m)
    return Derivation(got_rules, got_matches, trace, epsilons)


def classify_epsilons(d: Derivation) -> dict[int, str]:
    """Tag each epsilon step 'internal' or 'external'.

    An epsilon edge is internal when some earlier step of the derivation used
    or appended it (it appears in an earlier rule's matched LHS or image);
    otherwise it came with the host and the epsilon is external.  An epsilon
    rule is internal as soon as one of its edges is.
    """
    touched: set[tuple[NodeId, NodeId]] = set()
    tags: dict[int, str] = {}
    eps_by_step_index: dict[int, EpsilonRecord] = {}
    for rec in d.epsilons:
        eps_by_step_index[id(rec.production)] = rec

    for idx, (p, m) in enumerate(zip(d.rules, d.matches)):
        rec = next((r for r in d.epsilons if r.production is p), None)
        if rec is not None:
            verdict = "internal" if any(e in touched for e in rec.edges) else "external"
            tags[idx] = verdict
        for a, b in p.L.edge_pairs():
            if a in m and b in m:
                touched.add((m[a], m[b]))
        for a, b in p.rE.edges():
            if a in m and b in m:
                touched.add((m[a], m[b]))
        # edges added between freshly created nodes are found by diffing
        before = d.trace[idx].edges if idx < len(d.trace) - 1 else None
        after = d.trace[idx + 1] if idx + 1 < len(d.trace) else None
        if after is not None:
            for e in after.edge_pairs():
                prev = d.trace[idx]
                if e[0] not in prev.universe or e[1] not in prev.universe or not prev.edges.get(*e):
                    touched.add(e)
    return tags


def is_exact(d: Derivation) -> bool:
    """True iff every epsilon step is sequentially independent of the steps
    before it, i.e. all dangling-edge cleanup could move to the front."""
    from .independence import PermutationSpec, sequential_independent

    if not d.epsilons:
        return True
    tags = classify_epsilons(d)
    for idx, tag in tags.items():
        if idx == 0:
            continue
        window = d.rules[: idx + 1]
        seq = _host_instantiated_sequence(d, idx)
        if seq is None:
            return False
        spec = PermutationSpec("advance", position=idx + 1, distance=idx)
        if not sequential_independent(seq, spec):
            return False
    return True


def _host_instantiated_sequence(d: Derivation, upto: int) -> RuleSequence | None:
    """Rules 0..upto rebased onto host node ids (so the completion is the one
    the matches actually chose)."""
    rebased = []
    for p, m in zip(d.rules[: upto + 1], d.matches[: upto + 1]):
        full = dict(m)
        # added nodes: find their images by diffing trace states
        idx = len(rebased)
        before = d.trace[idx]
        after = d.trace[idx + 1]
        new_nodes = [v for v in after.present_nodes() if v not in before.universe or not before.nodes.get(v)]
        for x in p.rN.nodes():
            img = next((v for v in new_nodes if v.type_name == x.type_name), None)
            if img is None:
                return None
            full[x] = img
            new_nodes.remove(img)
        # context nodes of the production universe outside L and R keep fresh ids
        target_nodes: list[NodeId] = []
        rename: dict[NodeId, NodeId] = {}
        for x in p.universe:
            y = full.get(x)
            if y is None:
                y = NodeId(x.type_name, 10_000 + len(rebased) * 100 + x.index)
            rename[x] = y
        target = NodeUniverse(list(dict.fromkeys(rename[x] for x in p.universe)))
        rebased.append(p.with_universe(target, rename))
    try:
        return RuleSequence.from_rules(rebased)
    except Exception:
        return None


# ---------------------------------------------------------------------------
# applicability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Applicability:
    verdict: bool | None  # None = unknown (budget exceeded)
    matches: tuple[dict[NodeId, NodeId], ...] | None
    blocked_at: int | None = None

    def __bool__(self) -> bool:
        return bool(self.verdict)


def decide_applicability(
    s: RuleSequence | Sequence[Production],
    g: TypedGraph,
    mode: str = "fixed",
    budget: int = 100_000,
) -> Applicability:
    """Search for per-rule matches making the whole sequence fire on ``g``.

    Fixed mode demands no dangling edges at any step (the coherent+compatible
    reading); floating mode allows epsilon cleanup.  Returns one witnessing
    match family or the position of the first rule that can never fire.
    """
    rules = list(s.rules) if isinstance(s, RuleSequence) else list(s)
    steps = 0
    deepest = -1

    def search(i: int, g_now: TypedGraph, acc: list[dict[NodeId, NodeId]]):
        nonlocal steps, deepest
        deepest = max(deepest, i - 1)
        if i == len(rules):
            return tuple(acc)
        p = rules[i]
        for m in find_matches(p, g_now):
            steps += 1
            if steps > budget:
                raise BudgetExceeded("match search budget exhausted")
            try:
                if mode == "floating":
                    eps, eps_match = synthesize_epsilon(p, g_now, m, mode="floating")
                    g_mid = apply_to_graph(eps, g_now, eps_match) if eps else g_now
                    g_next = apply_to_graph(p, g_mid, m)
                else:
                    if dangling_edges_at(p, g_now, m):
                        continue
                    g_next = apply_to_graph(p, g_now, m)
            except WouldDangle:
                continue
            res = search(i + 1, g_next, acc + [m])
            if res is not None:
                return res
        return None

    try:
        found = search(0, g, [])
    except BudgetExceeded:
        return Applicability(None, None)
    if found is not None:
        return Applicability(True, found)
    return Applicability(False, None, blocked_at=deepest + 1)
