"""Graph constraints and application conditions.

A constraint is a diagram (named graphs plus partial injective morphisms
relating them) and a quantified formula whose atoms test containment: P(X)
finds X totally in the host, P(X, notG) finds X's edges in the host's
complement, Q(X) finds at least one X-edge in the host, and PU(X, Y) forbids
identifying anything beyond what the diagram morphism between X and Y says.

Quantification ranges over candidate placements of a graph: injective
type-preserving node maps into the host (total on nodes), each inducing a
maximal partial morphism whose edge-domain is whatever lands on host edges.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .matrix import BoolMatrix, BoolVector, NodeId, NodeUniverse, TypedGraph
from .production import Production, make_production
from .sequence import (
    BudgetExceeded,
    RuleSequence,
    check_coherence,
    check_sequence_compatibility,
)

__all__ = [
    "Diagram",
    "Morphism",
    "Quantifier",
    "Atom",
    "Not",
    "And",
    "Or",
    "Implies",
    "Formula",
    "ConstraintSpec",
    "IllFormedDiagram",
    "InconsistentCondition",
    "EdgelessGraph",
    "evaluate",
    "closure",
    "decomposition",
    "CompiledCondition",
    "compile_to_sequences",
    "analyze_condition",
    "nihil_evolution",
    "pre_to_post",
    "post_to_pre",
    "MultinodeEncoding",
    "MCViolation",
    "encode_multidigraph",
    "decode_multidigraph",
    "multidigraph_constraints",
]


class IllFormedDiagram(ValueError):
    pass


class InconsistentCondition(ValueError):
    pass


class EdgelessGraph(ValueError):
    pass


class MCViolation(ValueError):
    def __init__(self, failures: list[str]):
        self.failures = failures
        super().__init__(f"multidigraph constraints violated: {failures}")


# ---------------------------------------------------------------------------
# diagrams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Morphism:
    """Partial injective node map between two named diagram graphs."""

    src: str
    dst: str
    mapping: tuple[tuple[NodeId, NodeId], ...]

    @property
    def as_dict(self) -> dict[NodeId, NodeId]:
        return dict(self.mapping)


@dataclass(frozen=True)
class Diagram:
    graphs: tuple[tuple[str, TypedGraph], ...]
    morphisms: tuple[Morphism, ...] = ()

    def graph(self, name: str) -> TypedGraph:
        for k, g in self.graphs:
            if k == name:
                return g
        raise KeyError(name)

    def names(self) -> list[str]:
        return [k for k, _ in self.graphs]

    def validate(self) -> None:
        """Injectivity plus commuting composites wherever two morphism paths
        join the same pair of graphs."""
        for m in self.morphisms:
            src = self.graph(m.src)
            dst = self.graph(m.dst)
            vals = [b for _, b in m.mapping]
            if len(set(vals)) != len(vals):
                raise IllFormedDiagram(f"morphism {m.src}->{m.dst} not injective")
            for a, b in m.mapping:
                if a not in src.universe or b not in dst.universe:
                    raise IllFormedDiagram(f"morphism {m.src}->{m.dst} names unknown node")
                if a.type_name != b.type_name:
                    raise IllFormedDiagram(f"morphism {m.src}->{m.dst} changes a node type")
        # saturate compositions; any disagreement on a composed image is a
        # non-commuting cycle
        known: dict[tuple[str, str], dict[NodeId, NodeId]] = {}
        for m in self.morphisms:
            cur = known.setdefault((m.src, m.dst), {})
            for a, b in m.mapping:
                if cur.get(a, b) != b:
                    raise IllFormedDiagram("two morphisms disagree")
                cur[a] = b
        changed = True
        while changed:
            changed = False
            for (s1, d1), f in list(known.items()):
                for (s2, d2), g in list(known.items()):
                    if d1 != s2:
                        continue
                    comp = {a: g[b] for a, b in f.items() if b in g}
                    if not comp:
                        continue
                    cur = known.setdefault((s1, d2), {})
                    for a, b in comp.items():
                        if a in cur:
                            if cur[a] != b:
                                raise IllFormedDiagram(
                                    f"cycle through {s1}->{d2} does not commute"
                                )
                        else:
                            cur[a] = b
                            changed = True

    def constraints_between(self, a: str, b: str) -> dict[NodeId, NodeId]:
        """Identifications the diagram forces between graphs a and b,
        following morphisms in either direction (they are injective)."""
        out: dict[NodeId, NodeId] = {}
        for m in self.morphisms:
            if m.src == a and m.dst == b:
                out.update(m.as_dict)
            elif m.src == b and m.dst == a:
                out.update({v: k for k, v in m.mapping})
        return out


# ---------------------------------------------------------------------------
# formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Quantifier:
    kind: str  # "E", "A", "NE", "NA"
    var: str

    def __post_init__(self) -> None:
        if self.kind not in ("E", "A", "NE", "NA"):
            raise ValueError(f"unknown quantifier {self.kind!r}")


@dataclass(frozen=True)
class Atom:
    pred: str  # "P", "Q", "PU"
    x: str
    y: str = "G"  # "G", "notG", or another variable (PU only)


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


def _conj(*args):
    return And(tuple(args))


@dataclass(frozen=True)
class Formula:
    prefix: tuple[Quantifier, ...]
    body: object

    def variables(self) -> list[str]:
        return [q.var for q in self.prefix]


@dataclass(frozen=True)
class ConstraintSpec:
    diagram: Diagram
    formula: Formula
    kind: str = "graph-constraint"

    def __post_init__(self) -> None:
        known = set(self.diagram.names()) | {"G", "notG"}
        for v in self.formula.variables():
            if v not in known:
                raise IllFormedDiagram(f"quantified variable {v} has no diagram graph")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _candidate_maps(
    a: TypedGraph,
    host: TypedGraph,
    forced: Mapping[NodeId, NodeId],
) -> list[dict[NodeId, NodeId]]:
    """All injective type-preserving node maps of a's present nodes into the
    host (total on nodes, no edge requirement), honouring forced pins."""
    nodes = a.present_nodes()
    host_nodes = host.present_nodes()
    by_type: dict[str, list[NodeId]] = {}
    for h in host_nodes:
        by_type.setdefault(h.type_name, []).append(h)
    out: list[dict[NodeId, NodeId]] = []

    def backtrack(i: int, assign: dict[NodeId, NodeId], used: set[NodeId]):
        if i == len(nodes):
            out.append(dict(assign))
            return
        x = nodes[i]
        pinned = forced.get(x)
        options = [pinned] if pinned is not None else by_type.get(x.type_name, [])
        for h in options:
            if h is None or h in used:
                continue
            assign[x] = h
            used.add(h)
            backtrack(i + 1, assign, used)
            del assign[x]
            used.remove(h)

    backtrack(0, {}, set())
    return out


def _edges_total(a: TypedGraph, host: TypedGraph, f: Mapping[NodeId, NodeId]) -> bool:
    return all(host.edges.get(f[x], f[y]) for x, y in a.edge_pairs())


def _edges_all_absent(a: TypedGraph, host: TypedGraph, f: Mapping[NodeId, NodeId]) -> bool:
    return all(not host.edges.get(f[x], f[y]) for x, y in a.edge_pairs())


def _some_edge_present(a: TypedGraph, host: TypedGraph, f: Mapping[NodeId, NodeId]) -> bool:
    return any(host.edges.get(f[x], f[y]) for x, y in a.edge_pairs())


@dataclass
class EvalResult:
    verdict: bool
    bindings: dict[str, dict[NodeId, NodeId]] | None


def evaluate(c: ConstraintSpec, g: TypedGraph, trace: bool = False) -> EvalResult:
    """Constraint satisfaction by explicit quantifier expansion.

    Returns the verdict plus, for a satisfied leading-existential formula,
    one witnessing binding per quantified variable.
    """
    c.diagram.validate()
    witness: dict[str, dict[NodeId, NodeId]] = {}

    def forced_for(var: str, bound: dict[str, dict[NodeId, NodeId]]):
        forced: dict[NodeId, NodeId] = {}
        for other, f_other in bound.items():
            rel = c.diagram.constraints_between(var, other)
            for mine, theirs in rel.items():
                if theirs in f_other:
                    img = f_other[theirs]
                    if forced.get(mine, img) != img:
                        return None
                    forced[mine] = img
        return forced

    def eval_body(node, bound) -> bool:
        if isinstance(node, Atom):
            return eval_atom(node, bound)
        if isinstance(node, Not):
            return not eval_body(node.arg, bound)
        if isinstance(node, And):
            return all(eval_body(a, bound) for a in node.args)
        if isinstance(node, Or):
            return any(eval_body(a, bound) for a in node.args)
        if isinstance(node, Implies):
            return (not eval_body(node.left, bound)) or eval_body(node.right, bound)
        raise TypeError(f"unknown formula node {node!r}")

    def eval_atom(atom: Atom, bound) -> bool:
        if atom.pred == "PU":
            f = bound.get(atom.x)
            h = bound.get(atom.y)
            if f is None or h is None:
                raise IllFormedDiagram("PU arguments must both be quantified")
            allowed = c.diagram.constraints_between(atom.x, atom.y)
            gx = c.diagram.graph(atom.x)
            gy = c.diagram.graph(atom.y)
            for x in gx.present_nodes():
                for y in gy.present_nodes():
                    if allowed.get(x) == y:
                        if f[x] != h[y]:
                            return False
                    elif f[x] == h[y]:
                        return False
            return True
        a = c.diagram.graph(atom.x)
        f = bound.get(atom.x)
        if f is None:
            raise IllFormedDiagram(f"atom uses unbound variable {atom.x}")
        if atom.pred == "P":
            if atom.y == "G":
                return _edges_total(a, g, f)
            if atom.y == "notG":
                return _edges_all_absent(a, g, f)
            raise IllFormedDiagram("P's second argument must be the host or its complement")
        if atom.pred == "Q":
            if not a.edge_pairs():
                return False
            if atom.y == "G":
                return _some_edge_present(a, g, f)
            if atom.y == "notG":
                return not _edges_total(a, g, f)
            raise IllFormedDiagram("Q's second argument must be the host or its complement")
        raise IllFormedDiagram(f"unknown predicate {atom.pred}")

    def eval_prefix(i: int, bound) -> bool:
        if i == len(c.formula.prefix):
            return eval_body(c.formula.body, bound)
        q = c.formula.prefix[i]
        a = c.diagram.graph(q.var)
        forced = forced_for(q.var, bound)
        if forced is None:
            candidates = []
        else:
            candidates = _candidate_maps(a, g, forced)
        if q.kind == "E":
            for f in candidates:
                bound[q.var] = f
                if eval_prefix(i + 1, bound):
                    witness.setdefault(q.var, f)
                    del bound[q.var]
                    return True
                del bound[q.var]
            return False
        if q.kind == "A":
            for f in candidates:
                bound[q.var] = f
                ok = eval_prefix(i + 1, bound)
                del bound[q.var]
                if not ok:
                    return False
            return True
        if q.kind == "NE":
            for f in candidates:
                bound[q.var] = f
                ok = eval_prefix(i + 1, bound)
                del bound[q.var]
                if ok:
                    return False
            return True
        # NA: not-for-all
        for f in candidates:
            bound[q.var] = f
            ok = eval_prefix(i + 1, bound)
            del bound[q.var]
            if not ok:
                return True
        return False

    verdict = eval_prefix(0, {})
    return EvalResult(verdict, witness if verdict else None)


# ---------------------------------------------------------------------------
# closure and decomposition
# ---------------------------------------------------------------------------

def _single_var_shape(c: ConstraintSpec) -> tuple[Quantifier, str]:
    if len(c.formula.prefix) != 1:
        raise ValueError("operator applies to a single-variable basic constraint")
    q = c.formula.prefix[0]
    return q, q.var


def closure(c: ConstraintSpec, g: TypedGraph) -> ConstraintSpec:
    """Turn a universal demand into replicas, one per potential occurrence.

    For A-quantified [A]: n = number of candidate placements of A in g;
    output is E A1 ... E An [ AND Ai AND pairwise PU ] where the replica
    morphisms record how two placements overlap in g, so PU pins each
    replica to a distinct occurrence.
    """
    q, var = _single_var_shape(c)
    if q.kind != "A":
        raise ValueError("closure expects a universally quantified constraint")
    a = c.diagram.graph(var)
    placements = _candidate_maps(a, g, {})
    if not placements:
        empty = Formula((), And(()))
        return ConstraintSpec(Diagram((), ()), empty, c.kind)
    names = [f"{var}__{i+1}" for i in range(len(placements))]
    graphs = tuple((nm, a) for nm in names)
    morphisms = []
    for i, j in itertools.combinations(range(len(placements)), 2):
        fi, fj = placements[i], placements[j]
        shared = tuple(
            (x, y)
            for x in a.present_nodes()
            for y in a.present_nodes()
            if fi[x] == fj[y]
        )
        morphisms.append(Morphism(names[i], names[j], shared))
    prefix = tuple(Quantifier("E", nm) for nm in names)
    body_terms = [Atom("P", nm) for nm in names]
    body_terms += [
        Atom("PU", names[i], names[j])
        for i, j in itertools.combinations(range(len(names)), 2)
    ]
    return ConstraintSpec(
        Diagram(graphs, tuple(morphisms)),
        Formula(prefix, And(tuple(body_terms))),
        c.kind,
    )


def decomposition(c: ConstraintSpec) -> ConstraintSpec:
    """Split a negated/partial demand into one single-edge graph per edge.

    For E A [NOT A] (equivalently Q(A, notG)): output is
    E A1 ... E An [ OR P(Ai, notG) ], n = number of edges of A.
    """
    q, var = _single_var_shape(c)
    a = c.diagram.graph(var)
    edges = a.edge_pairs()
    if not edges:
        raise EdgelessGraph(f"{var} has no edges to decompose")
    names = [f"{var}__e{i+1}" for i in range(len(edges))]
    graphs = []
    morphisms = []
    for nm, (x, y) in zip(names, edges):
        nodes = [x] if x == y else [x, y]
        piece = TypedGraph.build(nodes, [(x, y)], a.universe)
        graphs.append((nm, piece))
        morphisms.append(Morphism(var, nm, tuple((z, z) for z in nodes)))
    prefix = tuple(Quantifier("E", nm) for nm in names)
    body = Or(tuple(Atom("P", nm, "notG") for nm in names))
    # keep the original graph in the diagram so replica morphisms anchor it
    diagram = Diagram(tuple([(var, a)] + graphs), tuple(morphisms))
    return ConstraintSpec(diagram, Formula(prefix, body), c.kind)


# ---------------------------------------------------------------------------
# compilation to sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompiledStep:
    """One compiled check, anchored to the base rule.

    kind 'id': the binding of ``graph`` (extending anchors and shared-node
    pins) has all edges in the host -- realized by a rule preserving it.
    kind 'anti': the binding finds ``graph``'s edges absent -- realized by an
    add-then-delete pair on them.
    ``var`` names the condition graph the step came from, so steps of one
    graph and diagram-related graphs co-locate their bindings (the marking
    discipline); ``host_pins`` pin replica steps to concrete host nodes.
    """

    kind: str  # "id" | "anti"
    var: str
    graph: TypedGraph
    anchor: tuple[tuple[NodeId, NodeId], ...] = ()  # condition node -> L node
    host_pins: tuple[tuple[NodeId, NodeId], ...] = ()  # condition node -> host node


@dataclass(frozen=True)
class CompiledCondition:
    production: Production
    diagram: Diagram
    alternatives: tuple[tuple[CompiledStep, ...], ...]
    post: bool = False  # steps check after the rule fires

    def sequences(self) -> list[list[str]]:
        """Step names in application order: condition rules fire before the
        base rule for preconditions, after it for postconditions."""
        out = []
        for alt in self.alternatives:
            parts = []
            for s in alt:
                tag = {"id": "id", "anti": "anti_id", "nac": "nac"}[s.kind]
                parts.append(f"{tag}_{s.var}")
            out.append(parts + [self.production.name] if not self.post else [self.production.name] + parts)
        return out


def _dnf(body) -> list[list[tuple[bool, Atom]]]:
    """Disjunctive normal form as monomials of (positive?, Atom)."""
    if isinstance(body, Atom):
        return [[(True, body)]]
    if isinstance(body, Not):
        inner = body.arg
        if isinstance(inner, Atom):
            return [[(False, inner)]]
        if isinstance(inner, Not):
            return _dnf(inner.arg)
        if isinstance(inner, And):
            return _dnf(Or(tuple(Not(a) for a in inner.args)))
        if isinstance(inner, Or):
            return _dnf(And(tuple(Not(a) for a in inner.args)))
        if isinstance(inner, Implies):
            return _dnf(And((inner.left, Not(inner.right))))
        raise TypeError(f"unknown node {inner!r}")
    if isinstance(body, Or):
        out = []
        for a in body.args:
            out.extend(_dnf(a))
        return out
    if isinstance(body, And):
        if not body.args:
            return [[]]
        parts = [_dnf(a) for a in body.args]
        out = []
        for combo in itertools.product(*parts):
            out.append([lit for mono in combo for lit in mono])
        return out
    if isinstance(body, Implies):
        return _dnf(Or((Not(body.left), body.right)))
    raise TypeError(f"unknown node {body!r}")


def _mode_of(positive: bool, atom: Atom) -> str:
    """all_present / all_absent / some_present / some_absent of X's edges."""
    if atom.pred == "P":
        if atom.y == "G":
            return "all_present" if positive else "some_absent"
        return "all_absent" if positive else "some_present"
    if atom.pred == "Q":
        if atom.y == "G":
            return "some_present" if positive else "all_absent"
        return "some_absent" if positive else "all_present"
    raise IllFormedDiagram(f"cannot compile predicate {atom.pred}")


def compile_to_sequences(
    p: Production,
    c: ConstraintSpec,
    host: TypedGraph | None = None,
) -> CompiledCondition:
    """Reduce a ground condition on ``p`` to alternative check-sequences.

    Compilation uses the anchored reading: each condition graph binds once,
    co-located with the rule through marking, so non-existential quantifiers
    act by negating their variable's atoms.  Presence demands become id steps
    (a rule preserving the graph), full-absence demands become anti steps
    (add-then-delete pairs), and "some edge missing/present" demands fan out
    into one alternative per edge choice.  Positive universals additionally
    replicate per potential occurrence, which needs the host (closure).
    """
    c.diagram.validate()
    quant_of = {q.var: q.kind for q in c.formula.prefix}

    def anchor_of(var: str):
        return tuple((x, y) for x, y in c.diagram.constraints_between(var, "L").items())

    def edge_piece(var: str, a: TypedGraph, x: NodeId, y: NodeId, kind: str) -> CompiledStep:
        piece = TypedGraph.build(list(dict.fromkeys([x, y])), [(x, y)], a.universe)
        return CompiledStep(kind, var, piece, anchor_of(var))

    monomials = _dnf(c.formula.body)
    alternatives: list[tuple[CompiledStep, ...]] = []
    for mono in monomials:
        fixed: list[CompiledStep] = []
        choices: list[list[CompiledStep]] = []
        contradiction = False
        demanded: dict[tuple[str, NodeId, NodeId], str] = {}
        for positive, atom in mono:
            if atom.pred == "PU":
                continue  # realized by the shared-binding (marking) discipline
            var = atom.x
            a = c.diagram.graph(var)
            qk = quant_of.get(var, "E")
            eff_positive = positive if qk in ("E", "A") else not positive
            mode = _mode_of(eff_positive, atom)
            if mode == "all_present" and qk == "A":
                if host is None:
                    raise InconsistentCondition(
                        "universally quantified positive condition needs a host for closure"
                    )
                for f in _candidate_maps(a, host, {}):
                    pins = tuple((x, f[x]) for x in a.present_nodes())
                    fixed.append(CompiledStep("id", var, a, (), pins))
                continue
            if not a.edge_pairs():
                raise EdgelessGraph(f"{var} has no edges; only edge demands compile")
            if mode == "all_present":
                fixed.append(CompiledStep("id", var, a, anchor_of(var)))
                for e in a.edge_pairs():
                    old = demanded.setdefault((var, *e), "present")
                    contradiction |= old != "present"
            elif mode == "all_absent":
                fixed.append(CompiledStep("anti", var, a, anchor_of(var)))
                for e in a.edge_pairs():
                    old = demanded.setdefault((var, *e), "absent")
                    contradiction |= old != "absent"
            elif mode == "some_present":
                choices.append([edge_piece(var, a, x, y, "id") for x, y in a.edge_pairs()])
            elif mode == "some_absent":
                choices.append([edge_piece(var, a, x, y, "anti") for x, y in a.edge_pairs()])
        if contradiction:
            raise InconsistentCondition("an edge is demanded both present and absent")
        if not choices:
            alternatives.append(tuple(fixed))
        else:
            for combo in itertools.product(*choices):
                alternatives.append(tuple(fixed) + tuple(combo))
    return CompiledCondition(
        p,
        c.diagram,
        tuple(dict.fromkeys(alternatives)),
        post=c.kind.endswith("postcondition"),
    )


def compiled_applicable(
    cc: CompiledCondition,
    host: TypedGraph,
    match: Mapping[NodeId, NodeId] | None = None,
) -> bool:
    """Does some compiled alternative fire on the host?

    For every base-rule match (or the supplied one), the alternative's steps
    must hold with shared bindings: steps of the same condition graph bind
    together and diagram morphisms pin related nodes, mirroring the marking
    discipline of the realized sequences.
    """
    from .match import find_matches

    p = cc.production
    matches = [dict(match)] if match is not None else find_matches(p, host)
    for m in matches:
        for alt in cc.alternatives:
            if _alt_holds(cc, alt, host, m):
                return True
    return False


def _alt_holds(cc: CompiledCondition, alt, host: TypedGraph, m) -> bool:
    names = set(cc.diagram.names())
    bindings: dict[str, dict[NodeId, NodeId]] = {}

    def pins_for(step: CompiledStep) -> dict[NodeId, NodeId] | None:
        forced: dict[NodeId, NodeId] = dict(step.host_pins)
        for cond_node, l_node in step.anchor:
            if l_node in m:
                forced[cond_node] = m[l_node]
        prev = bindings.get(step.var)
        if prev is not None:
            for x in step.graph.present_nodes():
                if x in prev:
                    if forced.get(x, prev[x]) != prev[x]:
                        return None
                    forced[x] = prev[x]
        for other, f_other in bindings.items():
            if other == step.var or step.var not in names or other not in names:
                continue
            rel = cc.diagram.constraints_between(step.var, other)
            for mine, theirs in rel.items():
                if theirs in f_other:
                    img = f_other[theirs]
                    if forced.get(mine, img) != img:
                        return None
                    forced[mine] = img
        return forced

    def run(i: int) -> bool:
        if i == len(alt):
            return True
        step = alt[i]
        forced = pins_for(step)
        if forced is None:
            return False
        g = step.graph
        # the restriction device: node slots whose type is absent from the
        # host constrain nothing for absence checks
        host_types = {x.type_name for x in host.present_nodes()}
        if step.kind == "anti":
            missing = [
                x for x in g.present_nodes() if x.type_name not in host_types and x not in forced
            ]
            if missing:
                return run(i + 1)
        placements = _candidate_maps(g, host, forced)
        check = _edges_total if step.kind == "id" else _edges_all_absent
        for f in placements:
            if check(g, host, f):
                prev = bindings.get(step.var)
                merged = dict(prev or {})
                merged.update(f)
                bindings[step.var] = merged
                if run(i + 1):
                    return True
                if prev is None:
                    bindings.pop(step.var, None)
                else:
                    bindings[step.var] = prev
        return False

    return run(0)


# ---------------------------------------------------------------------------
# condition analysis via sequences
# ---------------------------------------------------------------------------

def _step_production(step: CompiledStep, idx: int) -> list[Production]:
    g = step.graph
    if step.kind == "id":
        return [make_production(f"id{idx}", g, g)]
    nodes = TypedGraph.build(g.present_nodes(), [], g.universe)
    adder = make_production(f"add{idx}", nodes, g)
    deleter = make_production(f"del{idx}", g, nodes)
    return [adder, deleter]


def condition_sequences(p: Production, c: ConstraintSpec) -> list[RuleSequence]:
    """The compiled alternatives as real completed rule sequences.

    id steps become preserving rules, anti steps add-then-delete pairs; all
    condition rules fire before the base rule (after it for postconditions)
    and share nodes with it per the diagram anchors.
    """
    from .matrix import CompletionPolicy

    cc = compile_to_sequences(p, c)
    out: list[RuleSequence] = []
    for alt in cc.alternatives:
        rules: list[Production] = []
        anchors: list[tuple[int, NodeId, NodeId]] = []  # (rule idx, cond node, L node)
        shared: dict[tuple[str, NodeId], list[tuple[int, NodeId]]] = {}
        for step in alt:
            prods = _step_production(step, len(rules))
            for k, prod in enumerate(prods):
                idx = len(rules) + k
                for cond_node, l_node in step.anchor:
                    if cond_node in prod.universe:
                        anchors.append((idx, cond_node, l_node))
                for x in prod.universe:
                    shared.setdefault((step.var, x), []).append((idx, x))
            rules.extend(prods)
        if cc.post:
            rules = [p] + rules
            base_at = 0
            offset = 1
        else:
            rules = rules + [p]
            base_at = len(rules) - 1
            offset = 0
        pairs = []
        for idx, cond_node, l_node in anchors:
            pairs.append(((idx + offset if cc.post else idx, cond_node), (base_at, l_node)))
        # co-locate the two halves of anti pairs and steps of one variable
        for (_, x), occurrences in shared.items():
            first = occurrences[0]
            for other in occurrences[1:]:
                a = (first[0] + offset if cc.post else first[0], first[1])
                b = (other[0] + offset if cc.post else other[0], other[1])
                pairs.append((a, b))
        try:
            out.append(RuleSequence.from_rules(rules, CompletionPolicy.from_pairs(pairs)))
        except Exception:
            continue
    return out


def analyze_condition(p: Production, c: ConstraintSpec, budget: int = 4000) -> dict:
    """Coherence / compatibility / consistency of a condition on a rule.

    The condition is consistent iff some compiled alternative's realized
    sequence is coherent and compatible (and then a host admitting it exists:
    its own minimal initial digraph).
    """
    verdicts = {"coherent": False, "compatible": False, "consistent": False}
    for seq in condition_sequences(p, c):
        rep = check_coherence(seq)
        coherent = rep.dangling_free
        compatible = coherent and check_sequence_compatibility(seq).verdict
        if coherent:
            verdicts["coherent"] = True
        if compatible:
            verdicts["compatible"] = True
        if coherent and compatible:
            verdicts["consistent"] = True
            break
    return verdicts


def nihil_evolution(p: Production) -> BoolMatrix:
    """Forbidden edges on the right-hand side: Q = e OR (NOT r AND K)."""
    return p.nihil_rhs()


# ---------------------------------------------------------------------------
# pre <-> post transformation
# ---------------------------------------------------------------------------

def _transform_graph(p: Production, a: TypedGraph, inverse: bool) -> TypedGraph:
    """Rule image of a condition graph restricted to the parts shared with
    the rule's universe; untouched elements pass through."""
    joint = a.universe
    rename: dict[NodeId, NodeId] = {}
    eE, rE = (p.rE, p.eE) if inverse else (p.eE, p.rE)
    eN, rN = (p.rN, p.eN) if inverse else (p.eN, p.rN)
    edges = a.edges
    nodes = a.nodes
    for x, y in eE.edges():
        if x in joint and y in joint:
            edges = edges.with_edge(x, y, False)
    for x, y in rE.edges():
        if x in joint and y in joint and nodes.get(x) and nodes.get(y):
            edges = edges.with_edge(x, y, True)
    bits = nodes.bits.copy()
    for x in eN.nodes():
        if x in joint:
            i = joint.position(x)
            if bits[i]:
                bits[i] = False
                for u, v in a.edge_pairs():
                    if u == x or v == x:
                        edges = edges.with_edge(u, v, False)
    for x in rN.nodes():
        if x in joint:
            bits[joint.position(x)] = True
    return TypedGraph(edges, BoolVector(joint, bits))


def pre_to_post(p: Production, c: ConstraintSpec) -> ConstraintSpec:
    """Transform a (weak) precondition into the equivalent postcondition.

    Positive graphs move through the rule; negative-side graphs (those the
    formula checks in the complement) move through its inverse.  The formula
    shape is preserved; graph names keep their identities.
    """
    if not c.kind.endswith("precondition") and c.kind != "graph-constraint":
        raise ValueError("pre_to_post expects a precondition")
    negated = _complement_checked_vars(c.formula.body)
    new_graphs = []
    for name, g in c.diagram.graphs:
        inv = name in negated
        new_graphs.append((name, _transform_graph(p, g, inverse=inv)))
    kind = "weak-postcondition" if c.kind.startswith("weak") or c.kind == "graph-constraint" else "postcondition"
    return ConstraintSpec(Diagram(tuple(new_graphs), c.diagram.morphisms), c.formula, kind)


def post_to_pre(p: Production, c: ConstraintSpec) -> ConstraintSpec:
    if not c.kind.endswith("postcondition"):
        raise ValueError("post_to_pre expects a postcondition")
    negated = _complement_checked_vars(c.formula.body)
    new_graphs = []
    for name, g in c.diagram.graphs:
        inv = name in negated
        new_graphs.append((name, _transform_graph(p, g, inverse=not inv)))
    kind = "weak-precondition" if c.kind.startswith("weak") else "precondition"
    return ConstraintSpec(Diagram(tuple(new_graphs), c.diagram.morphisms), c.formula, kind)


def _complement_checked_vars(body, under_not: bool = False) -> set[str]:
    """Variables whose atoms inspect the complement of the host."""
    out: set[str] = set()
    if isinstance(body, Atom):
        if body.y == "notG" or (under_not and body.pred == "P" and body.y == "G"):
            out.add(body.x)
        return out
    if isinstance(body, Not):
        return _complement_checked_vars(body.arg, not under_not)
    if isinstance(body, (And, Or)):
        for a in body.args:
            out |= _complement_checked_vars(a, under_not)
        return out
    if isinstance(body, Implies):
        return _complement_checked_vars(body.left, not under_not) | _complement_checked_vars(
            body.right, under_not
        )
    return out


# ---------------------------------------------------------------------------
# multidigraphs
# ---------------------------------------------------------------------------

MULTINODE_TYPE = "_m"


@dataclass(frozen=True)
class MultinodeEncoding:
    graph: TypedGraph
    edge_of_multinode: tuple[tuple[NodeId, tuple[NodeId, NodeId]], ...]

    def multinodes(self) -> list[NodeId]:
        return [m for m, _ in self.edge_of_multinode]


def encode_multidigraph(
    nodes: Sequence[NodeId],
    edges: Sequence[tuple[NodeId, NodeId]],
) -> MultinodeEncoding:
    """Simple-digraph encoding of a multidigraph: one multinode per edge,
    wired source -> multinode -> target."""
    for x in nodes:
        if x.type_name == MULTINODE_TYPE:
            raise MCViolation([f"node type {MULTINODE_TYPE} is reserved for multinodes"])
    multis = [NodeId(MULTINODE_TYPE, i + 1) for i in range(len(edges))]
    all_nodes = list(nodes) + multis
    enc_edges = []
    table = []
    for m, (a, b) in zip(multis, edges):
        enc_edges.append((a, m))
        enc_edges.append((m, b))
        table.append((m, (a, b)))
    g = TypedGraph.build(all_nodes, enc_edges)
    return MultinodeEncoding(g, tuple(table))


def check_mc(g: TypedGraph) -> list[str]:
    """Structural multidigraph-constraint check; empty list means conforming."""
    failures = []
    present = g.present_nodes()
    simple = [x for x in present if x.type_name != MULTINODE_TYPE]
    multis = [x for x in present if x.type_name == MULTINODE_TYPE]
    simple_set = set(simple)
    multi_set = set(multis)
    for a, b in g.edge_pairs():
        if a == b:
            failures.append(f"f2: self-edge at {a}")
        elif a in simple_set and b in simple_set:
            failures.append(f"f3: simple-simple edge ({a},{b})")
        elif a in multi_set and b in multi_set:
            failures.append(f"f3: multinode-multinode edge ({a},{b})")
    for m in multis:
        ins = [a for a, b in g.edge_pairs() if b == m]
        outs = [b for a, b in g.edge_pairs() if a == m]
        if len(ins) != 1 or len(outs) != 1:
            failures.append(f"f1/f3: multinode {m} has {len(ins)} sources, {len(outs)} targets")
    return failures


def decode_multidigraph(g: TypedGraph) -> tuple[list[NodeId], list[tuple[NodeId, NodeId]]]:
    """Invert the encoding; raises :class:`MCViolation` on non-conforming input."""
    failures = check_mc(g)
    if failures:
        raise MCViolation(failures)
    present = g.present_nodes()
    simple = [x for x in present if x.type_name != MULTINODE_TYPE]
    multis = [x for x in present if x.type_name == MULTINODE_TYPE]
    edges = []
    for m in multis:
        src = next(a for a, b in g.edge_pairs() if b == m)
        dst = next(b for a, b in g.edge_pairs() if a == m)
        edges.append((src, dst))
    return simple, edges


def multidigraph_constraints(simple_types: Sequence[str]) -> list[ConstraintSpec]:
    """The constraint pack a conforming encoded graph satisfies, instantiated
    for a concrete simple-type alphabet.

    f2 forbids self-edges (simple or multinode); f3 forbids simple-simple
    and multinode-multinode edges plus multinode fan-in/fan-out above one.
    The f1 totality demand (every multinode wired to one source and one
    target) is structural and checked by :func:`check_mc`.
    """
    out: list[ConstraintSpec] = []
    mu, mu2 = NodeId(MULTINODE_TYPE, 1), NodeId(MULTINODE_TYPE, 2)

    def forbid(name: str, graph: TypedGraph) -> ConstraintSpec:
        return ConstraintSpec(
            Diagram(((name, graph),)),
            Formula((Quantifier("NE", name),), Atom("P", name)),
        )

    for t in simple_types:
        a1, a2 = NodeId(t, 1), NodeId(t, 2)
        out.append(forbid(f"selfloop_{t}", TypedGraph.build([a1], [(a1, a1)])))
        out.append(forbid(f"simple_simple_{t}", TypedGraph.build([a1, a2], [(a1, a2)])))
        for t2 in simple_types:
            if t2 != t:
                b1 = NodeId(t2, 1)
                out.append(
                    forbid(f"simple_simple_{t}_{t2}", TypedGraph.build([a1, b1], [(a1, b1)]))
                )
        out.append(
            forbid(f"fan_in_{t}", TypedGraph.build([a1, a2, mu], [(a1, mu), (a2, mu)]))
        )
        out.append(
            forbid(f"fan_out_{t}", TypedGraph.build([a1, a2, mu], [(mu, a1), (mu, a2)]))
        )
    out.append(forbid("selfloop_mu", TypedGraph.build([mu], [(mu, mu)])))
    out.append(forbid("multi_multi", TypedGraph.build([mu, mu2], [(mu, mu2)])))
    return out
