"""Impact graphs: which innovation realizes each variable.

An impact graph is a forest of stars (a galaxy) on the node set, with an
edge root -> child meaning the child's value is the root's innovation
scaled by the closure weight.  This module realizes galaxies from
innovation vectors, checks the four validity conditions, enumerates all
valid galaxies, and builds impact exchange matrices and restricted stars.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .network import WeightedDag, evaluate
from .trop import Rat, RatLike, TropMatrix, as_rat_vector, cycle_compare_one

ENUMERATION_GUARD = 14


class TieDetected(ValueError):
    """Two terms attain the realizing maximum; a probability-zero configuration.

    Callers holding random innovations should resample rather than break
    the tie, since a silent tie-break would corrupt realization counts.
    """


class TooLarge(ValueError):
    """Node count exceeds the enumeration guard."""


@dataclass(frozen=True)
class Galaxy:
    """A forest of stars given by its partial parent map.

    nodes is the full (ordered) label set; parent maps child -> root for
    the non-root nodes only.  Roots are all remaining nodes, including
    isolated ones.  Stored canonically (sorted tuple of pairs) so sets of
    galaxies compare structurally.
    """

    nodes: tuple[str, ...]
    _pairs: tuple[tuple[str, str], ...]  # (child, parent), sorted by child

    @classmethod
    def from_parent_map(cls, nodes: Sequence[str], parent: dict[str, str]) -> "Galaxy":
        return cls(tuple(nodes), tuple(sorted(parent.items())))

    @classmethod
    def from_edges(cls, nodes: Sequence[str], edges: Iterable[tuple[str, str]]) -> "Galaxy":
        parent: dict[str, str] = {}
        for root, child in edges:
            if child in parent:
                raise ValueError(f"node {child!r} has two parents")
            parent[child] = root
        return cls.from_parent_map(nodes, parent)

    @property
    def parent(self) -> dict[str, str]:
        return dict(self._pairs)

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        """Edges as (root, child) pairs."""
        return frozenset((r, c) for c, r in self._pairs)

    @property
    def roots(self) -> frozenset[str]:
        assigned = {c for c, _ in self._pairs}
        return frozenset(n for n in self.nodes if n not in assigned)

    def children(self, root: str) -> frozenset[str]:
        return frozenset(c for c, r in self._pairs if r == root)

    def root_of(self, node: str) -> str:
        """The star root feeding a node (the node itself if it is a root)."""
        return dict(self._pairs).get(node, node)

    def star(self, root: str) -> frozenset[str]:
        return self.children(root) | {root}

    def __repr__(self) -> str:
        body = ", ".join(f"{r}->{c}" for r, c in sorted(self.edges))
        return f"Galaxy({{{body}}})" if body else "Galaxy({})"


@dataclass(frozen=True)
class ImpactExchange:
    """Impact exchange matrix over the ordered roots of a galaxy.

    Entry (r, r') is the worst relative cost of reassigning a child of r
    to r'; zero on the diagonal and for childless roots.
    """

    roots: tuple[str, ...]
    matrix: TropMatrix


@dataclass(frozen=True)
class ImpactVerdict:
    valid: bool
    condition: Optional[str] = None  # "a" | "b" | "c" | "d"
    witness: Optional[tuple] = None

    def __bool__(self) -> bool:
        return self.valid


def realized_impact_graph(model: WeightedDag, z: Sequence[RatLike]) -> Galaxy:
    """The galaxy realized by an innovation vector.

    parent(i) is the unique j != i whose term c*_ij z_j achieves
    x_i = max_j c*_ij z_j; absent when the node's own innovation wins.
    Raises TieDetected when any maximum is attained twice.
    """
    zs = as_rat_vector(z)
    if len(zs) != model.n:
        raise ValueError("dimension mismatch")
    if any(v <= 0 for v in zs):
        raise ValueError("innovations must be strictly positive")
    cs = model.closure
    parent: dict[str, str] = {}
    for i in range(model.n):
        best = zs[i]
        arg = i
        tie = False
        for j in model.ancestors(i):
            val = cs[i, j] * zs[j]
            if val > best:
                best, arg, tie = val, j, False
            elif val == best:
                tie = True
        if tie:
            raise TieDetected(f"two achievers for node {model.label(i)!r}")
        if arg != i:
            parent[model.label(i)] = model.label(arg)
    return Galaxy.from_parent_map(model.labels, parent)


def impact_exchange(model: WeightedDag, g: Galaxy) -> ImpactExchange:
    roots = tuple(l for l in model.labels if l in g.roots)
    cs = model.closure
    rows = []
    for r in roots:
        row = []
        ch = [model.index(c) for c in g.children(r)]
        ri = model.index(r)
        for rp in roots:
            if rp == r or not ch:
                row.append(Fraction(0))
                continue
            rpi = model.index(rp)
            row.append(max(cs[i, rpi] / cs[i, ri] for i in ch))
        rows.append(row)
    return ImpactExchange(roots, TropMatrix(rows))


def is_impact_graph(model: WeightedDag, g: Galaxy) -> ImpactVerdict:
    """Check the four validity conditions in order, with a witness on failure.

    (a) every edge lies in the reachability DAG; (b) the parent map is a
    galaxy; (c) the triangle condition: an edge j -> i whose closure
    weight factors exactly through k forces j -> k in g and forbids
    k -> i; (d) the impact exchange matrix has cycle mean below one.
    """
    if tuple(sorted(g.nodes)) != tuple(sorted(model.labels)):
        raise ValueError("galaxy nodes do not match the model")
    cs = model.closure
    parent = g.parent
    # (a) subgraph of the reachability DAG
    for child, root in sorted(parent.items()):
        if model.cstar(child, root) == 0:
            return ImpactVerdict(False, "a", (root, child))
    # (b) forest of stars: a parent may not itself have a parent
    for child, root in sorted(parent.items()):
        if root in parent:
            return ImpactVerdict(False, "b", (parent[root], root, child))
    # (c) triangle condition
    for child, root in sorted(parent.items()):
        i, j = model.index(child), model.index(root)
        for k in range(model.n):
            if k == i or k == j:
                continue
            if cs[i, k] > 0 and cs[k, j] > 0 and cs[i, k] * cs[k, j] == cs[i, j]:
                klabel = model.label(k)
                if parent.get(child) == klabel or parent.get(klabel) != root:
                    return ImpactVerdict(False, "c", (root, child, klabel))
    # (d) exchange cycles must stay below weight one
    ex = impact_exchange(model, g)
    cmp = cycle_compare_one(ex.matrix)
    if cmp.ordering != "LT":
        cyc = tuple(ex.roots[v] for v in cmp.witness)
        return ImpactVerdict(False, "d", cyc)
    return ImpactVerdict(True)


def enumerate_impact_graphs(model: WeightedDag, guard: Optional[int] = None) -> frozenset[Galaxy]:
    """All valid impact graphs, by guarded exhaustive enumeration.

    Nodes take a parent from {none} union strict ancestors; non-galaxies
    are pruned during generation (a node with a child takes no parent, a
    chosen parent must stay a root), then conditions (c) and (d) filter.
    The guard defaults to the module-level ENUMERATION_GUARD so callers
    can raise it process-wide.
    """
    if guard is None:
        guard = ENUMERATION_GUARD
    if model.n > guard:
        raise TooLarge(f"|V| = {model.n} exceeds the enumeration guard {guard}")
    labels = model.labels
    anc = {l: [model.label(j) for j in model.ancestors(model.index(l))] for l in labels}
    found: list[Galaxy] = []
    parent: dict[str, str] = {}
    has_child: set[str] = set()

    def assign(pos: int) -> None:
        if pos == len(labels):
            g = Galaxy.from_parent_map(labels, parent)
            if is_impact_graph(model, g):
                found.append(g)
            return
        node = labels[pos]
        assign(pos + 1)  # node stays a root
        if node in has_child:
            return
        for p in anc[node]:
            if p in parent:  # parent already a child elsewhere
                continue
            parent[node] = p
            new_parent = p not in has_child
            has_child.add(p)
            assign(pos + 1)
            del parent[node]
            if new_parent:
                has_child.discard(p)

    assign(0)
    return frozenset(found)


def restricted_kleene(model: WeightedDag, g: Galaxy) -> tuple[TropMatrix, int]:
    """The one-term-per-row star of a galaxy and the rank of its map.

    Row i is the unit row e_i for roots and c*_ir e_r for a child of r; on
    the galaxy's region the model evaluation is exactly this single-term
    product.  The rank equals the number of stars.
    """
    n = model.n
    cs = model.closure
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i, lab in enumerate(model.labels):
        r = g.root_of(lab)
        ri = model.index(r)
        rows[i][ri] = Fraction(1) if ri == i else cs[i, ri]
    return TropMatrix(rows), len(g.roots)
