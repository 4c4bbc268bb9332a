"""The weighted-DAG model and its derived DAGs.

A model is a DAG with strictly positive rational edge weights, read as a
recursive system: each variable is the maximum of its weighted parents and
its own innovation.  Everything downstream (impact graphs, contexts,
separation) queries the model through the exact closure matrix computed
here.

Node identity is by string label externally; matrices are indexed by the
position of a label in the model's label sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .trop import (
    Rat,
    RatLike,
    TropMatrix,
    as_rat,
    kleene_star,
    trop_mul_vec,
    weak_closure,
)


class WeightedDag:
    """Max-linear Bayesian network model.

    Parameters
    ----------
    labels : ordered node labels (unique strings).
    edges : iterable of (from, to, weight) with weight a positive rational
        (Fraction, int, or "p/q" / decimal string).

    Rejects self-loops, duplicate edges, unknown labels, nonpositive
    weights, and cyclic edge sets.  Immutable after construction; the
    coefficient matrix, its Kleene star and a topological order are cached.
    """

    def __init__(self, labels: Sequence[str], edges: Iterable[tuple[str, str, RatLike]]):
        self._labels = tuple(str(l) for l in labels)
        if len(set(self._labels)) != len(self._labels):
            raise ValueError("duplicate node labels")
        self._index = {l: i for i, l in enumerate(self._labels)}
        n = len(self._labels)
        weights: dict[tuple[int, int], Rat] = {}
        for frm, to, w in edges:
            if frm not in self._index or to not in self._index:
                raise ValueError(f"edge ({frm!r}, {to!r}) references an undeclared label")
            j, i = self._index[frm], self._index[to]
            if i == j:
                raise ValueError(f"self-loop at {frm!r}")
            if (i, j) in weights:
                raise ValueError(f"duplicate edge {frm!r} -> {to!r}")
            wr = as_rat(w)
            if wr <= 0:
                raise ValueError(f"edge {frm!r} -> {to!r} has nonpositive weight {wr}")
            weights[(i, j)] = wr
        self._c = TropMatrix(
            [[weights.get((i, j), Rat(0)) for j in range(n)] for i in range(n)]
        )
        self._topo = self._toposort(weights, n)
        # topo established acyclicity, so the star cannot raise
        self._gamma = weak_closure(self._c)
        self._cstar = kleene_star(self._c)
        self._parents = tuple(
            tuple(j for j in range(n) if self._c[i, j] > 0) for i in range(n)
        )
        self._children = tuple(
            tuple(i for i in range(n) if self._c[i, j] > 0) for j in range(n)
        )

    def _toposort(self, weights: Mapping[tuple[int, int], Rat], n: int) -> tuple[int, ...]:
        indeg = [0] * n
        succ: list[list[int]] = [[] for _ in range(n)]
        for (i, j) in weights:
            indeg[i] += 1
            succ[j].append(i)
        ready = sorted(v for v in range(n) if indeg[v] == 0)
        order: list[int] = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for w in sorted(succ[v]):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
            ready.sort()
        if len(order) != n:
            raise ValueError("edge set contains a directed cycle")
        return tuple(order)

    # -- basic queries ----------------------------------------------------

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    @property
    def n(self) -> int:
        return len(self._labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown node label {label!r}") from None

    def label(self, i: int) -> str:
        return self._labels[i]

    def indices(self, labels: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.index(l) for l in labels)

    @property
    def topo_order(self) -> tuple[int, ...]:
        return self._topo

    @property
    def coefficients(self) -> TropMatrix:
        """C: entry (i, j) is the weight of edge j -> i, zero if absent."""
        return self._c

    @property
    def closure(self) -> TropMatrix:
        """C*: entry (i, j) is the maximum path weight j -> i (1 on the diagonal)."""
        return self._cstar

    @property
    def gamma(self) -> TropMatrix:
        """Weak transitive closure (no diagonal ones)."""
        return self._gamma

    def weight(self, frm: str, to: str) -> Rat:
        return self._c[self.index(to), self.index(frm)]

    def cstar(self, to: str, frm: str) -> Rat:
        """c*_{to,frm} by label."""
        return self._cstar[self.index(to), self.index(frm)]

    def parents(self, i: int) -> tuple[int, ...]:
        return self._parents[i]

    def children(self, i: int) -> tuple[int, ...]:
        return self._children[i]

    def ancestors(self, i: int) -> tuple[int, ...]:
        """Strict ancestors of i (indices j != i with c*_ij > 0)."""
        return tuple(j for j in range(self.n) if j != i and self._cstar[i, j] > 0)

    def descendants(self, j: int) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if i != j and self._cstar[i, j] > 0)

    def edge_labels(self) -> list[tuple[str, str, Rat]]:
        return [
            (self._labels[j], self._labels[i], self._c[i, j])
            for i in range(self.n)
            for j in range(self.n)
            if self._c[i, j] > 0
        ]

    def reweighted(self, weights: Mapping[tuple[str, str], RatLike]) -> "WeightedDag":
        """Same node set and edge set, new weights (keyed by (from, to))."""
        edges = []
        for frm, to, old in self.edge_labels():
            edges.append((frm, to, weights.get((frm, to), old)))
        return WeightedDag(self._labels, edges)

    def __repr__(self) -> str:
        return f"WeightedDag(labels={self._labels!r}, edges={len(self.edge_labels())})"


@dataclass(frozen=True)
class DerivedDag:
    """An unweighted DAG derived from the model.

    kind is "reachability", "conditional_reachability" or "critical"; the
    latter two record the conditioning set.  Edges are (from, to) label
    pairs.
    """

    kind: str
    edges: frozenset[tuple[str, str]]
    conditioning: frozenset[str] = field(default_factory=frozenset)

    def has_edge(self, frm: str, to: str) -> bool:
        return (frm, to) in self.edges

    def dot(self, highlight: Iterable[str] = ()) -> str:
        return dot_digraph(sorted({v for e in self.edges for v in e}), sorted(self.edges),
                           red=set(highlight))


def evaluate(model: WeightedDag, z: Sequence[RatLike]) -> tuple[Rat, ...]:
    """x = C* (.) z for strictly positive z.

    The result also satisfies the structural recursion
    x_i = max(z_i, max_j c_ij x_j over parents j), which the tests check
    independently.
    """
    zs = tuple(as_rat(v) for v in z)
    if len(zs) != model.n:
        raise ValueError("dimension mismatch")
    if any(v <= 0 for v in zs):
        raise ValueError("innovations must be strictly positive")
    return trop_mul_vec(model.closure, zs)


def reachability_dag(model: WeightedDag) -> DerivedDag:
    """D*: edge j -> i iff a directed path j -> i exists in the model."""
    edges = {
        (model.label(j), model.label(i))
        for (i, j) in model.gamma.support()
        if i != j
    }
    return DerivedDag("reachability", frozenset(edges))


def conditional_reach_dag(model: WeightedDag, k_nodes: Iterable[str]) -> DerivedDag:
    """Edges j -> i such that some directed path j -> i has no interior node in K."""
    k_idx = set(model.indices(k_nodes))
    n = model.n
    edges = set()
    for j in range(n):
        # search from j; nodes in K may be reached but are never expanded,
        # so every recorded node is the head of a path with K-free interior
        reached: set[int] = set()
        frontier = [j]
        while frontier:
            u = frontier.pop()
            for i in model.children(u):
                if i in reached:
                    continue
                reached.add(i)
                if i not in k_idx:
                    frontier.append(i)
        for i in reached:
            edges.add((model.label(j), model.label(i)))
    return DerivedDag("conditional_reachability", frozenset(edges), frozenset(k_nodes))


def critical_dag(model: WeightedDag, k_nodes: Iterable[str]) -> DerivedDag:
    """Edges j -> i with c*_ij > 0 and no critical path through K \\ {i, j}.

    A critical path factors through k exactly when c*_ik c*_kj = c*_ij,
    which is decided on exact rationals.
    """
    k_idx = set(model.indices(k_nodes))
    cs = model.closure
    edges = set()
    for i in range(model.n):
        for j in range(model.n):
            if i == j or cs[i, j] == 0:
                continue
            ok = True
            for k in k_idx - {i, j}:
                if cs[i, k] > 0 and cs[k, j] > 0 and cs[i, k] * cs[k, j] == cs[i, j]:
                    ok = False
                    break
            if ok:
                edges.add((model.label(j), model.label(i)))
    return DerivedDag("critical", frozenset(edges), frozenset(k_nodes))


def dot_digraph(
    nodes: Sequence[str],
    edges: Sequence[tuple[str, str]],
    red: Optional[set[str]] = None,
    shaded: Optional[set[str]] = None,
    dashed: Optional[Sequence[tuple[str, str]]] = None,
    name: str = "G",
) -> str:
    """Render a digraph in DOT.  Red/shaded nodes and dashed edges mirror
    the context figures: conditioned nodes red, derived constants shaded,
    removed edges dashed."""
    red = red or set()
    shaded = shaded or set()
    dashed = list(dashed or [])
    out = [f"digraph {name} {{"]
    for v in nodes:
        attrs = []
        if v in red:
            attrs.append('style=filled fillcolor="red"')
        elif v in shaded:
            attrs.append('style=filled fillcolor="lightgray"')
        out.append(f'  "{v}"' + (f" [{' '.join(attrs)}]" if attrs else "") + ";")
    for frm, to in edges:
        out.append(f'  "{frm}" -> "{to}";')
    for frm, to in dashed:
        out.append(f'  "{frm}" -> "{to}" [style=dashed];')
    out.append("}")
    return "\n".join(out) + "\n"
