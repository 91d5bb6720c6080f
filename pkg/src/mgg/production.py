"""Grammar rules as matrix tuples.

A production is stored fully expanded: left/right hand sides, the deletion
and addition masks derived from them (e = L AND NOT R, r = R AND NOT L,
componentwise for edges and nodes) and the nihilation matrix K listing edges
whose presence at a match site forbids application (edges the rule adds plus
potential dangling edges around deleted nodes).
"""

from __future__ import annotations

from dataclasses import dataclass

from .matrix import (
    BoolMatrix,
    BoolVector,
    NodeId,
    NodeUniverse,
    TypedGraph,
    boolean_product,
    norm1,
    outer_product,
)

__all__ = [
    "Production",
    "IncompatibleRule",
    "make_production",
    "nihilation_matrix",
    "availability_matrix",
    "apply_to_graph",
    "MatchNotFound",
    "WouldDangle",
    "split_add_erase",
]


class IncompatibleRule(ValueError):
    """One of the eight single-rule compatibility conditions failed."""

    def __init__(self, condition: int, cells: list):
        self.condition = condition
        self.cells = cells
        super().__init__(f"rule compatibility condition {condition} failed at {cells}")


class MatchNotFound(ValueError):
    """The supplied node map is not a valid match for the rule."""


class WouldDangle(ValueError):
    """Fixed-grammar application would leave dangling edges."""

    def __init__(self, edges: list):
        self.edges = edges
        super().__init__(f"application would dangle edges {edges}")


@dataclass(frozen=True)
class Production:
    name: str
    L: TypedGraph
    R: TypedGraph
    eE: BoolMatrix
    rE: BoolMatrix
    eN: BoolVector
    rN: BoolVector
    K: BoolMatrix

    @property
    def universe(self) -> NodeUniverse:
        return self.L.universe

    # convenient aliases for formula code
    @property
    def LE(self) -> BoolMatrix:
        return self.L.edges

    @property
    def LN(self) -> BoolVector:
        return self.L.nodes

    @property
    def RE(self) -> BoolMatrix:
        return self.R.edges

    @property
    def RN(self) -> BoolVector:
        return self.R.nodes

    def is_identity(self) -> bool:
        return self.eE.is_zero() and self.rE.is_zero() and self.eN.is_zero() and self.rN.is_zero()

    def inverse(self) -> "Production":
        """Swap deletion and addition (and L with R)."""
        name = self.name[:-1] if self.name.endswith("~") else self.name + "~"
        return make_production(name, self.R, self.L)

    def nihil_rhs(self) -> BoolMatrix:
        """Forbidden edges after application: Q = e OR (NOT r AND K)."""
        return self.eE | (~self.rE & self.K)

    def with_universe(self, target: NodeUniverse, rename=None) -> "Production":
        """Re-express over a larger universe; K is recomputed there because
        the dangling-edge surroundings grow with the universe."""
        L = self.L.reindexed(target, rename)
        R = self.R.reindexed(target, rename)
        return make_production(self.name, L, R)

    def applied_edges(self, m: BoolMatrix) -> BoolMatrix:
        """Edge part of p(X) = r OR (NOT e AND X)."""
        return self.rE | (~self.eE & m)

    def applied_nodes(self, v: BoolVector) -> BoolVector:
        return self.rN | (~self.eN & v)


def _derive(L: TypedGraph, R: TypedGraph):
    eE = L.edges & ~R.edges
    rE = R.edges & ~L.edges
    eN = L.nodes & ~R.nodes
    rN = R.nodes & ~L.nodes
    return eE, rE, eN, rN


def nihilation_matrix_parts(eE: BoolMatrix, rE: BoolMatrix, eN: BoolVector) -> BoolMatrix:
    """K = r OR (NOT e AND NOT D) with D = (NOT eN) (x) (NOT eN)^t.

    NOT D flags every edge incident to a node the rule deletes.
    """
    not_d = ~outer_product(~eN, ~eN)
    return rE | (~eE & not_d)


def nihilation_matrix(p: Production) -> BoolMatrix:
    return nihilation_matrix_parts(p.eE, p.rE, p.eN)


def availability_matrix(p: Production) -> BoolMatrix:
    """Edges newly available after application because their endpoints were
    just added: T = NOT(rbar (x) rbar^t) AND (ebar (x) ebar^t)."""
    return ~outer_product(~p.rN, ~p.rN) & outer_product(~p.eN, ~p.eN)


def _compat_conditions(eE, rE, eN, rN, LE, LN):
    """The eight norm conditions; returns list of (index, product) pairs."""
    pres = ~eE & LE  # preserved edges
    no_ln_rn = ~rN & ~LN
    return [
        (1, boolean_product(rE, eN)),
        (2, boolean_product(rE.T, eN)),
        (3, boolean_product(pres, eN)),
        (4, boolean_product(pres.T, eN)),
        (5, boolean_product(rE, no_ln_rn)),
        (6, boolean_product(rE.T, no_ln_rn)),
        (7, boolean_product(pres, no_ln_rn)),
        (8, boolean_product(pres.T, no_ln_rn)),
    ]


def make_production(name: str, L: TypedGraph, R: TypedGraph, check: bool = True) -> Production:
    """Build a rule from completed L and R over one universe.

    Verifies the eight compatibility conditions and rejects rules that would
    rewrite (delete and add) a same-typed node slot; split such rules first
    with :func:`split_add_erase`.
    """
    if L.universe != R.universe:
        L2, R2 = _complete_pair(L, R)
        L, R = L2, R2
    eE, rE, eN, rN = _derive(L, R)
    if check:
        for idx, prod in _compat_conditions(eE, rE, eN, rN, L.edges, L.nodes):
            if norm1(prod) != 0:
                cells = prod.nodes() if isinstance(prod, BoolVector) else prod.edges()
                raise IncompatibleRule(idx, cells)
    K = nihilation_matrix_parts(eE, rE, eN)
    return Production(name, L, R, eE, rE, eN, rN, K)


def _complete_pair(L: TypedGraph, R: TypedGraph) -> tuple[TypedGraph, TypedGraph]:
    """Merge L's and R's universes, identifying equal node ids."""
    from .matrix import CompletionPolicy, complete_all

    shared = [n for n in L.universe if n in R.universe]
    policy = CompletionPolicy.from_pairs((((0, n), (1, n)) for n in shared))
    L2, R2 = complete_all([L, R], policy)
    return L2, R2


def split_add_erase(p: Production) -> tuple[Production, Production]:
    """Split a rule into its addition part and its deletion part,
    p = p_add ; p_erase (deletion applied first)."""
    mid = TypedGraph(p.L.edges & ~p.eE, p.L.nodes & ~p.eN)
    p_e = make_production(p.name + "-", p.L, mid)
    p_r = make_production(p.name + "+", mid, p.R)
    return p_r, p_e


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def _validate_match(p: Production, g: TypedGraph, match: dict[NodeId, NodeId]) -> None:
    present = p.L.present_nodes()
    mapped = [match.get(n) for n in present]
    if any(m is None for m in mapped):
        raise MatchNotFound(f"match does not cover all LHS nodes of {p.name}")
    if len(set(mapped)) != len(mapped):
        raise MatchNotFound("match is not injective")
    for n, m in zip(present, mapped):
        if n.type_name != m.type_name:
            raise MatchNotFound(f"match changes type of {n} to {m}")
        if not g.nodes.get(m):
            raise MatchNotFound(f"match image node {m} absent from host")
    for a, b in p.L.edge_pairs():
        if not g.edges.get(match[a], match[b]):
            raise MatchNotFound(f"edge ({a},{b}) not preserved by match")


def apply_to_graph(
    p: Production,
    g: TypedGraph,
    match: dict[NodeId, NodeId],
    added_images: dict[NodeId, NodeId] | None = None,
) -> TypedGraph:
    """Apply the rule at an injective node match, first deleting then adding.

    Added nodes get fresh indices of their type in the host universe unless
    ``added_images`` pins them to chosen (absent) host slots.  Edges that
    would dangle raise :class:`WouldDangle`; floating-grammar callers route
    the match through the derivation machinery, which cleans them with an
    epsilon rule first.
    """
    _validate_match(p, g, match)

    universe = g.universe
    full = dict(match)
    added = p.rN.nodes()
    fresh: list[NodeId] = []
    for n in added:
        pinned = (added_images or {}).get(n)
        if pinned is not None:
            if pinned.type_name != n.type_name:
                raise MatchNotFound(f"added node {n} pinned to wrong type {pinned}")
            if pinned in universe and g.nodes.get(pinned):
                raise MatchNotFound(f"added node slot {pinned} already present in host")
            target = pinned
            if pinned not in universe:
                universe = universe.extended([pinned])
        else:
            universe = universe.extended([NodeId(n.type_name, universe.fresh_index(n.type_name))])
            target = universe[len(universe) - 1]
        full[n] = target
        fresh.append(target)

    edges = g.edges.reindexed(universe)
    nodes = g.nodes.reindexed(universe)

    # deletion
    for a, b in p.eE.edges():
        if a in full and b in full:
            edges = edges.with_edge(full[a], full[b], False)
    deleted = [full[n] for n in p.eN.nodes() if n in full]
    nbits = nodes.bits.copy()
    for n in deleted:
        nbits[universe.position(n)] = False
    nodes = BoolVector(universe, nbits)

    # addition
    nbits = nodes.bits.copy()
    for n in fresh:
        nbits[universe.position(n)] = True
    nodes = BoolVector(universe, nbits)
    for a, b in p.rE.edges():
        edges = edges.with_edge(full[a], full[b], True)

    out = TypedGraph(edges, nodes)
    dangling = out.dangling_edges()
    if dangling:
        # floating callers must pre-clean via epsilon rules before applying
        raise WouldDangle(dangling)
    return out
