"""Labeled Boolean matrices and vectors over a shared node universe.

Everything downstream (rules, sequences, constraints) is built from three
values: a node universe (an ordered list of typed node ids), square Boolean
adjacency matrices over that universe, and Boolean node vectors.  Matrices
and vectors are immutable; every operation returns a fresh value.

Completion -- re-expressing several matrices over one merged universe with an
explicit identification of same-typed nodes -- is the one non-obvious
operation here.  Identifications must be supplied by the caller: which nodes
of two rules are "the same" is a modelling choice, not something the algebra
can decide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

__all__ = [
    "NodeId",
    "NodeUniverse",
    "BoolMatrix",
    "BoolVector",
    "TypedGraph",
    "CompletionPolicy",
    "ConflictingIdentification",
    "DimensionMismatch",
    "boolean_product",
    "norm1",
    "is_compatible",
    "compatibility_witness",
    "kronecker_product",
    "outer_product",
    "completion_plan",
    "complete_all",
]


class DimensionMismatch(ValueError):
    """Operands live over different universes."""


class ConflictingIdentification(ValueError):
    """A completion policy maps two distinct nodes of one item together."""


@dataclass(frozen=True, order=True)
class NodeId:
    """A typed node: ``type_name`` plus a positive index distinguishing
    same-typed nodes (``conv:2`` is the second conveyor)."""

    type_name: str
    index: int

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"node index must be >= 1, got {self.index}")

    def __str__(self) -> str:
        return f"{self.type_name}:{self.index}"

    @staticmethod
    def parse(token: str) -> "NodeId":
        type_name, _, idx = token.rpartition(":")
        if not type_name:
            raise ValueError(f"malformed node id {token!r}, expected 'type:index'")
        return NodeId(type_name, int(idx))


class NodeUniverse:
    """Ordered, duplicate-free list of :class:`NodeId`.

    The order is the shared row/column order of every matrix built over the
    universe.
    """

    __slots__ = ("_nodes", "_pos")

    def __init__(self, nodes: Iterable[NodeId]):
        nodes = tuple(nodes)
        pos: dict[NodeId, int] = {}
        for i, n in enumerate(nodes):
            if n in pos:
                raise ValueError(f"duplicate node {n} in universe")
            pos[n] = i
        self._nodes = nodes
        self._pos = pos

    def __len__(self) -> int:
        return len(self._nodes)

    def __iter__(self) -> Iterator[NodeId]:
        return iter(self._nodes)

    def __getitem__(self, i: int) -> NodeId:
        return self._nodes[i]

    def __contains__(self, n: NodeId) -> bool:
        return n in self._pos

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NodeUniverse) and self._nodes == other._nodes

    def __hash__(self) -> int:
        return hash(self._nodes)

    def __repr__(self) -> str:
        return "NodeUniverse([" + ", ".join(map(str, self._nodes)) + "])"

    @property
    def nodes(self) -> tuple[NodeId, ...]:
        return self._nodes

    def position(self, n: NodeId) -> int:
        try:
            return self._pos[n]
        except KeyError:
            raise KeyError(f"{n} not in universe") from None

    def extended(self, extra: Iterable[NodeId]) -> "NodeUniverse":
        new = [n for n in extra if n not in self._pos]
        return NodeUniverse(self._nodes + tuple(new))

    def fresh_index(self, type_name: str) -> int:
        used = {n.index for n in self._nodes if n.type_name == type_name}
        i = 1
        while i in used:
            i += 1
        return i


def _as_bits(universe: NodeUniverse, bits, shape: tuple[int, ...]) -> np.ndarray:
    a = np.asarray(bits, dtype=bool)
    if a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    a = a.copy()
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BoolMatrix:
    """Square 0/1 matrix indexed by universe order."""

    universe: NodeUniverse
    bits: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        n = len(self.universe)
        object.__setattr__(self, "bits", _as_bits(self.universe, self.bits, (n, n)))

    # -- constructors -----------------------------------------------------
    @staticmethod
    def zeros(universe: NodeUniverse) -> "BoolMatrix":
        n = len(universe)
        return BoolMatrix(universe, np.zeros((n, n), dtype=bool))

    @staticmethod
    def ones(universe: NodeUniverse) -> "BoolMatrix":
        n = len(universe)
        return BoolMatrix(universe, np.ones((n, n), dtype=bool))

    @staticmethod
    def identity(universe: NodeUniverse) -> "BoolMatrix":
        return BoolMatrix(universe, np.eye(len(universe), dtype=bool))

    @staticmethod
    def from_edges(universe: NodeUniverse, edges: Iterable[tuple[NodeId, NodeId]]) -> "BoolMatrix":
        m = np.zeros((len(universe), len(universe)), dtype=bool)
        for a, b in edges:
            m[universe.position(a), universe.position(b)] = True
        return BoolMatrix(universe, m)

    # -- algebra -----------------------------------------------------------
    def _check(self, other: "BoolMatrix") -> None:
        if self.universe != other.universe:
            raise DimensionMismatch("matrices over different universes")

    def __or__(self, other: "BoolMatrix") -> "BoolMatrix":
        self._check(other)
        return BoolMatrix(self.universe, self.bits | other.bits)

    def __and__(self, other: "BoolMatrix") -> "BoolMatrix":
        self._check(other)
        return BoolMatrix(self.universe, self.bits & other.bits)

    def __invert__(self) -> "BoolMatrix":
        return BoolMatrix(self.universe, ~self.bits)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BoolMatrix)
            and self.universe == other.universe
            and bool(np.array_equal(self.bits, other.bits))
        )

    def __hash__(self) -> int:
        return hash((self.universe, self.bits.tobytes()))

    def __bool__(self) -> bool:
        return bool(self.bits.any())

    @property
    def T(self) -> "BoolMatrix":
        return BoolMatrix(self.universe, self.bits.T)

    def is_zero(self) -> bool:
        return not self.bits.any()

    def edges(self) -> list[tuple[NodeId, NodeId]]:
        u = self.universe
        return [(u[i], u[j]) for i, j in zip(*np.nonzero(self.bits))]

    def get(self, a: NodeId, b: NodeId) -> bool:
        return bool(self.bits[self.universe.position(a), self.universe.position(b)])

    def with_edge(self, a: NodeId, b: NodeId, value: bool = True) -> "BoolMatrix":
        m = self.bits.copy()
        m[self.universe.position(a), self.universe.position(b)] = value
        return BoolMatrix(self.universe, m)

    # -- universe changes ---------------------------------------------------
    def reindexed(self, target: NodeUniverse, rename: Mapping[NodeId, NodeId] | None = None) -> "BoolMatrix":
        """Re-express over ``target``; absent rows/columns are zero.

        ``rename`` maps this matrix's node ids to their ids in ``target``.
        """
        idx = _reindex(self.universe, target, rename)
        m = np.zeros((len(target), len(target)), dtype=bool)
        src = np.nonzero(self.bits)
        m[idx[src[0]], idx[src[1]]] = True
        return BoolMatrix(target, m)

    def restricted(self, target: NodeUniverse) -> "BoolMatrix":
        """Project onto a sub-universe, dropping rows/columns outside it."""
        idx = np.array([self.universe.position(n) for n in target], dtype=int)
        return BoolMatrix(target, self.bits[np.ix_(idx, idx)])

    def pretty(self) -> str:
        u = self.universe
        lines = []
        for i, n in enumerate(u):
            row = " ".join("1" if b else "0" for b in self.bits[i])
            lines.append(f"{row} | {n}")
        return "\n".join(lines)


@dataclass(frozen=True)
class BoolVector:
    """0/1 node vector indexed by universe order."""

    universe: NodeUniverse
    bits: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        n = len(self.universe)
        object.__setattr__(self, "bits", _as_bits(self.universe, self.bits, (n,)))

    @staticmethod
    def zeros(universe: NodeUniverse) -> "BoolVector":
        return BoolVector(universe, np.zeros(len(universe), dtype=bool))

    @staticmethod
    def ones(universe: NodeUniverse) -> "BoolVector":
        return BoolVector(universe, np.ones(len(universe), dtype=bool))

    @staticmethod
    def from_nodes(universe: NodeUniverse, nodes: Iterable[NodeId]) -> "BoolVector":
        v = np.zeros(len(universe), dtype=bool)
        for n in nodes:
            v[universe.position(n)] = True
        return BoolVector(universe, v)

    def _check(self, other: "BoolVector") -> None:
        if self.universe != other.universe:
            raise DimensionMismatch("vectors over different universes")

    def __or__(self, other: "BoolVector") -> "BoolVector":
        self._check(other)
        return BoolVector(self.universe, self.bits | other.bits)

    def __and__(self, other: "BoolVector") -> "BoolVector":
        self._check(other)
        return BoolVector(self.universe, self.bits & other.bits)

    def __invert__(self) -> "BoolVector":
        return BoolVector(self.universe, ~self.bits)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BoolVector)
            and self.universe == other.universe
            and bool(np.array_equal(self.bits, other.bits))
        )

    def __hash__(self) -> int:
        return hash((self.universe, self.bits.tobytes()))

    def __bool__(self) -> bool:
        return bool(self.bits.any())

    def is_zero(self) -> bool:
        return not self.bits.any()

    def nodes(self) -> list[NodeId]:
        return [self.universe[i] for i in np.nonzero(self.bits)[0]]

    def get(self, n: NodeId) -> bool:
        return bool(self.bits[self.universe.position(n)])

    def reindexed(self, target: NodeUniverse, rename: Mapping[NodeId, NodeId] | None = None) -> "BoolVector":
        idx = _reindex(self.universe, target, rename)
        v = np.zeros(len(target), dtype=bool)
        v[idx[np.nonzero(self.bits)[0]]] = True
        return BoolVector(target, v)

    def restricted(self, target: NodeUniverse) -> "BoolVector":
        idx = np.array([self.universe.position(n) for n in target], dtype=int)
        return BoolVector(target, self.bits[idx])


def _reindex(src: NodeUniverse, target: NodeUniverse, rename: Mapping[NodeId, NodeId] | None) -> np.ndarray:
    rename = rename or {}
    idx = np.empty(len(src), dtype=int)
    for i, n in enumerate(src):
        idx[i] = target.position(rename.get(n, n))
    if len(set(idx.tolist())) != len(src):
        raise ConflictingIdentification("two distinct nodes of one item map to the same merged node")
    return idx


@dataclass(frozen=True)
class TypedGraph:
    """A simple digraph: adjacency matrix plus node vector over one universe."""

    edges: BoolMatrix
    nodes: BoolVector

    def __post_init__(self) -> None:
        if self.edges.universe != self.nodes.universe:
            raise DimensionMismatch("edges and nodes over different universes")

    @property
    def universe(self) -> NodeUniverse:
        return self.edges.universe

    @staticmethod
    def empty(universe: NodeUniverse) -> "TypedGraph":
        return TypedGraph(BoolMatrix.zeros(universe), BoolVector.zeros(universe))

    @staticmethod
    def build(
        nodes: Iterable[NodeId],
        edge_pairs: Iterable[tuple[NodeId, NodeId]] = (),
        universe: NodeUniverse | None = None,
    ) -> "TypedGraph":
        nodes = list(nodes)
        edge_pairs = list(edge_pairs)
        if universe is None:
            seen = list(dict.fromkeys(nodes))
            for a, b in edge_pairs:
                for n in (a, b):
                    if n not in seen:
                        seen.append(n)
            universe = NodeUniverse(seen)
        return TypedGraph(
            BoolMatrix.from_edges(universe, edge_pairs),
            BoolVector.from_nodes(universe, nodes),
        )

    def is_compatible(self) -> bool:
        return is_compatible(self.edges, self.nodes)

    def dangling_edges(self) -> list[tuple[NodeId, NodeId]]:
        return compatibility_witness(self.edges, self.nodes)

    def present_nodes(self) -> list[NodeId]:
        return self.nodes.nodes()

    def edge_pairs(self) -> list[tuple[NodeId, NodeId]]:
        return self.edges.edges()

    def reindexed(self, target: NodeUniverse, rename: Mapping[NodeId, NodeId] | None = None) -> "TypedGraph":
        return TypedGraph(self.edges.reindexed(target, rename), self.nodes.reindexed(target, rename))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TypedGraph) and self.edges == other.edges and self.nodes == other.nodes

    def __hash__(self) -> int:
        return hash((self.edges, self.nodes))


# ---------------------------------------------------------------------------
# kernel operations
# ---------------------------------------------------------------------------

def boolean_product(a: BoolMatrix, b: BoolMatrix | BoolVector):
    """(a ⊙ b)ij = OR_k (a_ik AND b_kj); also accepts a vector right operand."""
    if a.universe != b.universe:
        raise DimensionMismatch("boolean product over different universes")
    prod = a.bits.astype(np.uint8) @ b.bits.astype(np.uint8)
    if isinstance(b, BoolVector):
        return BoolVector(a.universe, prod != 0)
    return BoolMatrix(a.universe, prod != 0)


def norm1(v: BoolVector | BoolMatrix) -> int:
    """OR of all entries (the Boolean 1-norm)."""
    return int(bool(v.bits.any()))


def is_compatible(edges: BoolMatrix, nodes: BoolVector) -> bool:
    """True iff no edge is incident to an absent node:
    ``|| (M OR M^t) (.) NOT N ||_1 == 0``."""
    return norm1(boolean_product(edges | edges.T, ~nodes)) == 0


def compatibility_witness(edges: BoolMatrix, nodes: BoolVector) -> list[tuple[NodeId, NodeId]]:
    """All edges incident to an absent node (empty iff compatible)."""
    u = edges.universe
    absent = ~nodes.bits
    rows, cols = np.nonzero(edges.bits)
    return [(u[i], u[j]) for i, j in zip(rows, cols) if absent[i] or absent[j]]


def outer_product(a: BoolVector, b: BoolVector) -> BoolMatrix:
    """c_ij = a_i AND b_j over the shared universe (the vector (x) vector^t case)."""
    if a.universe != b.universe:
        raise DimensionMismatch("outer product over different universes")
    return BoolMatrix(a.universe, np.outer(a.bits, b.bits))


def kronecker_product(a: BoolMatrix, b: BoolMatrix) -> np.ndarray:
    """Full Kronecker layout (i = (i1-1)n + i2) as a raw Boolean array.

    The pair universe has no canonical NodeId labels, so the result is a bare
    array; it equals the adjacency matrix of the tensor-product graph.
    """
    return np.kron(a.bits.astype(np.uint8), b.bits.astype(np.uint8)).astype(bool)


# ---------------------------------------------------------------------------
# completion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompletionPolicy:
    """Explicit cross-item node identifications for completion.

    ``identify`` lists pairs ((item_index, node), (item_index, node)) whose
    nodes become one merged node.  Within one item no two nodes may be
    identified.  The merged universe orders nodes shared by several items
    first (in first-seen order), then the remaining nodes of each item.
    """

    identify: tuple[tuple[tuple[int, NodeId], tuple[int, NodeId]], ...] = ()

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[tuple[int, NodeId], tuple[int, NodeId]]]) -> "CompletionPolicy":
        return CompletionPolicy(tuple(pairs))


def _union_find_groups(
    items_nodes: Sequence[Sequence[NodeId]],
    policy: CompletionPolicy,
) -> dict[tuple[int, NodeId], int]:
    parent: dict[tuple[int, NodeId], tuple[int, NodeId]] = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, nodes in enumerate(items_nodes):
        for n in nodes:
            parent[(i, n)] = (i, n)
    for (ia, na), (ib, nb) in policy.identify:
        ka, kb = (ia, na), (ib, nb)
        if ka not in parent or kb not in parent:
            missing = ka if ka not in parent else kb
            raise KeyError(f"identification names unknown node {missing}")
        if na.type_name != nb.type_name:
            raise ConflictingIdentification(f"cannot identify {na} with {nb}: different types")
        ra, rb = find(ka), find(kb)
        if ra != rb:
            parent[ra] = rb
    groups: dict[tuple[int, NodeId], int] = {}
    rep_order: dict[tuple[int, NodeId], int] = {}
    for i, nodes in enumerate(items_nodes):
        for n in nodes:
            r = find((i, n))
            if r not in rep_order:
                rep_order[r] = len(rep_order)
            groups[(i, n)] = rep_order[r]
    # reject merging two nodes of one item
    by_item_group: set[tuple[int, int]] = set()
    for (i, n), g in groups.items():
        key = (i, g)
        if key in by_item_group:
            raise ConflictingIdentification(
                f"policy maps two distinct nodes of item {i} to one merged node"
            )
        by_item_group.add(key)
    return groups


def completion_plan(
    items_nodes: Sequence[Sequence[NodeId]],
    policy: CompletionPolicy = CompletionPolicy(),
) -> tuple[NodeUniverse, list[dict[NodeId, NodeId]]]:
    """Merged universe plus the per-item rename maps realizing it.

    Node identity across items holds *only where the policy says so*;
    un-identified same-named nodes from different items are kept apart by
    renaming the later one to a fresh index of its type.
    """
    groups = _union_find_groups(items_nodes, policy)

    n_groups = 1 + max(groups.values()) if groups else 0
    members: list[list[tuple[int, NodeId]]] = [[] for _ in range(n_groups)]
    for key, g in groups.items():  # insertion order = first-seen order
        members[g].append(key)

    # choose a merged NodeId per group; keep the first member's name unless it
    # collides with an already-assigned merged node of the same type.  Merged
    # order is first-seen order (item by item), which reproduces the
    # completion example ([2 4 5] + [2 3 5] -> [2 4 5 3]).
    assigned: set[NodeId] = set()
    merged_name: list[NodeId] = []
    for mem in members:
        base = mem[0][1]
        name = base
        if name in assigned:
            used = {m.index for m in assigned if m.type_name == base.type_name}
            i = 1
            while i in used:
                i += 1
            name = NodeId(base.type_name, i)
        assigned.add(name)
        merged_name.append(name)

    universe = NodeUniverse(merged_name)
    renames = [
        {n: merged_name[groups[(i, n)]] for n in nodes}
        for i, nodes in enumerate(items_nodes)
    ]
    return universe, renames


def complete_all(
    items: Sequence[BoolMatrix | BoolVector | TypedGraph],
    policy: CompletionPolicy = CompletionPolicy(),
) -> list[BoolMatrix | BoolVector | TypedGraph]:
    """Re-express every item over one merged universe (see
    :func:`completion_plan` for the identification semantics).  Newly added
    rows/columns are zero; original 1-entries survive the renaming."""
    universe, renames = completion_plan([list(it.universe) for it in items], policy)
    return [item.reindexed(universe, rename) for item, rename in zip(items, renames)]
