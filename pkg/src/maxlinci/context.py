"""Context analysis for observed subvectors.

Conditioning a max-linear network on an exact observation X_K = x_K
leaves only some impact graphs feasible.  This module finds them, derives
the nodes the observation freezes, partitions the node set by conditional
role, and builds the source DAG describing the dependence that remains.
All arithmetic is exact.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional

from .impact import Galaxy, enumerate_impact_graphs
from .network import WeightedDag, reachability_dag
from .trop import Rat, RatLike, TropMatrix, as_rat, bounded_star


class ImpossibleContext(ValueError):
    """The observed values cannot occur under the model."""


@dataclass(frozen=True)
class Context:
    """An exact observation of a subvector, stored as sorted (label, value) pins."""

    pins: tuple[tuple[str, Rat], ...]

    @classmethod
    def from_mapping(cls, observed: Mapping[str, RatLike]) -> "Context":
        pins = []
        for label, raw in observed.items():
            value = as_rat(raw)
            if value <= 0:
                raise ValueError(f"observed value for {label!r} must be positive")
            pins.append((label, value))
        return cls(tuple(sorted(pins)))

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.pins)

    def value(self, label: str) -> Rat:
        for lab, val in self.pins:
            if lab == label:
                return val
        raise KeyError(f"{label!r} is not observed in this context")

    def as_dict(self) -> dict[str, Rat]:
        return dict(self.pins)

    def __len__(self) -> int:
        return len(self.pins)

    def __repr__(self) -> str:
        body = ", ".join(f"{lab}={val}" for lab, val in self.pins)
        return f"Context({body})"


_GROUND = "\x00ground"  # reserved internal variable fixed to one


class FeasSystem:
    """Exact feasibility for strict or weak two-term multiplicative constraints.

    Constraints have the form  cu * z_u > cv * z_v  (or >=) over strictly
    positive unknowns, plus exact pins z_v = value.  Each constraint is a
    multiplicative difference bound, so the system is infeasible exactly
    when the constraint graph has a cycle of product below one, or of
    product one containing a strict edge.  Bellman-Ford over
    (product, strict-count) keys decides this without floats.
    """

    def __init__(self) -> None:
        # (u, v, m, strict) encodes z_u <= m * z_v, strict for <
        self._edges: list[tuple[object, object, Fraction, bool]] = []
        self._vars: set[object] = {_GROUND}

    def require(self, u: object, cu: RatLike, v: object, cv: RatLike, strict: bool = True) -> None:
        """Add  cu * z_u > cv * z_v  (>= when strict is False)."""
        cu, cv = as_rat(cu), as_rat(cv)
        if cu <= 0 or cv <= 0:
            raise ValueError("constraint coefficients must be positive")
        self._vars.update((u, v))
        self._edges.append((v, u, cu / cv, strict))

    def pin(self, v: object, value: RatLike) -> None:
        value = as_rat(value)
        if value <= 0:
            raise ValueError("pinned values must be positive")
        self._vars.add(v)
        self._edges.append((v, _GROUND, value, False))
        self._edges.append((_GROUND, v, 1 / value, False))

    def _relax(self) -> tuple[bool, dict[object, tuple[Fraction, int]]]:
        # virtual source: every variable starts at (1, 0)
        dist: dict[object, tuple[Fraction, int]] = {v: (Fraction(1), 0) for v in self._vars}
        changed = True
        for _ in range(len(self._vars)):
            if not changed:
                break
            changed = False
            for u, v, m, strict in self._edges:
                p, s = dist[v]
                cand = (p * m, s + strict)
                cur = dist[u]
                if cand[0] < cur[0] or (cand[0] == cur[0] and cand[1] > cur[1]):
                    dist[u] = cand
                    changed = True
        return changed, dist

    def feasible(self) -> bool:
        still_relaxing, _ = self._relax()
        return not still_relaxing

    def witness(self) -> Optional[dict[object, Fraction]]:
        """A strictly feasible point, or None.

        The relaxed keys (p, s) stand for p * (1 - eps)^s with eps
        infinitesimal; halving a concrete eps until every constraint
        checks exactly must terminate.
        """
        still_relaxing, dist = self._relax()
        if still_relaxing:
            return None
        gp, gs = dist[_GROUND]
        eps = Fraction(1, 2)
        for _ in range(80):
            base = 1 - eps
            point = {
                v: (p / gp) * base ** (s - gs)
                for v, (p, s) in dist.items()
            }
            ok = all(
                (point[u] < m * point[v]) if strict else (point[u] <= m * point[v])
                for u, v, m, strict in self._edges
            )
            if ok:
                point.pop(_GROUND)
                return point
            eps /= 2
        raise AssertionError("witness extraction did not converge")


def _region_system(model: WeightedDag, g: Galaxy, context: Context) -> Optional[FeasSystem]:
    """Constraints carving out the innovation region that realizes g and
    matches the observed values.  None when structurally ruled out."""
    cs = model.closure
    sys = FeasSystem()
    one = Fraction(1)
    for k in context.nodes:
        r = g.root_of(k)
        coef = one if r == k else cs[model.index(k), model.index(r)]
        if coef == 0:
            return None
        sys.pin(r, context.value(k) / coef)
    parent = g.parent
    for lab in model.labels:
        i = model.index(lab)
        r = parent.get(lab)
        if r is None:
            for j in model.ancestors(i):
                sys.require(lab, one, model.label(j), cs[i, j])
        else:
            ri = model.index(r)
            win = cs[i, ri]
            if win == 0:
                return None
            sys.require(r, win, lab, one)
            for j in model.ancestors(i):
                if j != ri:
                    sys.require(r, win, model.label(j), cs[i, j])
    return sys


def region_feasible(model: WeightedDag, g: Galaxy, context: Context) -> bool:
    """Whether some innovation vector realizes g while matching the context."""
    sys = _region_system(model, g, context)
    return sys is not None and sys.feasible()


@dataclass(frozen=True)
class ContextAnalysis:
    """Everything derived from one (model, context) pair, computed once."""

    context: Context
    compatible: frozenset[Galaxy]
    frozen_values: tuple[tuple[str, Rat], ...]  # constant nodes with their values
    per_graph_values: tuple[tuple[Galaxy, tuple[tuple[str, Rat], ...]], ...]
    active: tuple[str, ...]
    tied: tuple[str, ...]
    self_sourced: tuple[str, ...]
    linked: tuple[str, ...]
    blocks: tuple[tuple[str, ...], ...]
    total_impact: frozenset[tuple[str, str]]
    source_edges: frozenset[tuple[str, str]]

    @property
    def frozen(self) -> dict[str, Rat]:
        return dict(self.frozen_values)

    @property
    def star_values(self) -> dict[Galaxy, dict[str, Rat]]:
        """Per compatible graph: the nodes its observed stars hold constant."""
        return {g: dict(vals) for g, vals in self.per_graph_values}


def _check_attainable(model: WeightedDag, context: Context) -> None:
    cs = model.closure
    for k, h in itertools.permutations(context.nodes, 2):
        w = cs[model.index(k), model.index(h)]
        if w and context.value(k) < w * context.value(h):
            raise ImpossibleContext(
                f"X_{k} = {context.value(k)} is below the floor "
                f"{w} * X_{h} = {w * context.value(h)} forced by the network"
            )


def _star_values(model: WeightedDag, g: Galaxy, context: Context) -> Optional[dict[str, Rat]]:
    """Values of every node lying in a star of g that contains an observed
    node; such nodes are determined by the pins on that star's root."""
    cs = model.closure
    root_pin: dict[str, Rat] = {}
    for k in context.nodes:
        r = g.root_of(k)
        coef = Fraction(1) if r == k else cs[model.index(k), model.index(r)]
        if coef == 0:
            return None
        root_pin[r] = context.value(k) / coef
    values: dict[str, Rat] = {}
    for r, zr in root_pin.items():
        values[r] = zr
        ri = model.index(r)
        for c in g.children(r):
            values[c] = cs[model.index(c), ri] * zr
    return values


def _analyze_uncached(model: WeightedDag, context: Context) -> ContextAnalysis:
    if not context.pins:
        raise ValueError("empty context; the unconditioned model needs no analysis")
    for label in context.nodes:
        model.index(label)
    _check_attainable(model, context)
    feasible = [
        g
        for g in enumerate_impact_graphs(model)
        if region_feasible(model, g, context)
    ]
    if not feasible:
        raise ImpossibleContext("no impact graph can realize the observed values")
    ranks = {g: len({g.root_of(k) for k in context.nodes}) for g in feasible}
    low = min(ranks.values())
    compatible = [g for g in feasible if ranks[g] == low]

    per_graph = {g: _star_values(model, g, context) for g in compatible}
    frozen: dict[str, Rat] = {}
    for lab in model.labels:
        vals = [pv[lab] for pv in per_graph.values() if pv is not None and lab in pv]
        if len(vals) < len(compatible):
            continue
        if any(v != vals[0] for v in vals[1:]):
            warnings.warn(
                f"node {lab!r} is frozen by every compatible impact graph "
                f"but at unequal values; treating it as active",
                stacklevel=3,
            )
            continue
        frozen[lab] = vals[0]

    cs = model.closure
    active = tuple(l for l in model.labels if l not in frozen)
    tied = tuple(
        u
        for u in model.labels
        if u in frozen
        and any(
            k != u and cs[model.index(u), model.index(k)] * xk == frozen[u]
            for k, xk in frozen.items()
        )
    )
    rooted = {l for g in compatible for l in g.roots}
    self_sourced = tuple(
        h for h in model.labels if h in frozen and h not in tied and h in rooted
    )
    linked = tuple(
        l for l in model.labels if l in frozen and l not in tied and l not in self_sourced
    )

    total = frozenset(e for g in compatible for e in g.edges)
    removed = set()
    for j, i in total:
        if j in frozen:
            removed.add((j, i))
            continue
        if i in frozen:
            continue
        holders = [g for g in compatible if (j, i) in g.edges]
        if all(per_graph[g] is not None and j in per_graph[g] for g in holders):
            removed.add((j, i))
    source = frozenset(total - removed)

    src_parents = {
        l: frozenset(j for j, i in source if i == l) for l in model.labels
    }
    blocks = []
    seen: set[str] = set()
    for l in model.labels:
        if l not in linked or l in seen:
            continue
        block = tuple(m for m in model.labels if m in linked and src_parents[m] == src_parents[l])
        seen.update(block)
        blocks.append(block)

    return ContextAnalysis(
        context=context,
        compatible=frozenset(compatible),
        frozen_values=tuple((l, frozen[l]) for l in model.labels if l in frozen),
        per_graph_values=tuple(
            (g, tuple(sorted(per_graph[g].items())))
            for g in sorted(compatible, key=lambda g: sorted(g.edges))
            if per_graph[g] is not None
        ),
        active=active,
        tied=tied,
        self_sourced=self_sourced,
        linked=linked,
        blocks=tuple(blocks),
        total_impact=total,
        source_edges=source,
    )


@lru_cache(maxsize=128)
def analyze(model: WeightedDag, context: Context) -> ContextAnalysis:
    return _analyze_uncached(model, context)


def compatible_impact_graphs(model: WeightedDag, context: Context) -> frozenset[Galaxy]:
    """Feasible impact graphs of minimal observed-root count.

    Feasibility alone is not enough: among graphs whose region meets the
    observation surface, only those spreading the observed values from
    the fewest distinct roots carry conditional probability.
    """
    return analyze(model, context).compatible


def constant_nodes(model: WeightedDag, context: Context) -> dict[str, Rat]:
    """Nodes forced to a single value by the observation, with that value.

    Includes the observed nodes themselves; a node qualifies when every
    compatible impact graph places it in a star holding an observed node,
    always at the same value.
    """
    return analyze(model, context).frozen


def constant_stars(model: WeightedDag, context: Context) -> dict[Galaxy, dict[str, Rat]]:
    """Per compatible impact graph, the nodes its observed stars pin down.

    The intersection over all graphs, where values agree, is
    constant_nodes.
    """
    return analyze(model, context).star_values


@dataclass(frozen=True)
class Partition:
    """Conditional roles of the nodes under an observation.

    active nodes stay random; the rest are constant.  A constant node is
    tied when another constant already accounts for its value, self
    sourced when some compatible impact graph lets its own innovation
    carry it, and linked otherwise.  Linked nodes sharing the same source
    parents form blocks: one max-equation per block constrains the
    innovations of those shared parents.
    """

    active: tuple[str, ...]
    tied: tuple[str, ...]
    self_sourced: tuple[str, ...]
    linked: tuple[str, ...]
    blocks: tuple[tuple[str, ...], ...]
    values: tuple[tuple[str, Rat], ...]

    @property
    def constant(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.values)

    def value(self, label: str) -> Rat:
        for lab, val in self.values:
            if lab == label:
                return val
        raise KeyError(f"{label!r} is not constant in this context")


def partition(model: WeightedDag, context: Context) -> Partition:
    a = analyze(model, context)
    return Partition(
        active=a.active,
        tied=a.tied,
        self_sourced=a.self_sourced,
        linked=a.linked,
        blocks=a.blocks,
        values=a.frozen_values,
    )


@dataclass(frozen=True)
class SourceDag:
    """Where observed extremes can still have come from.

    total_impact is the union of the compatible impact graphs; removed
    are its edges that carry no randomness; edges is their difference,
    the substrate for context-specific separation.
    """

    edges: frozenset[tuple[str, str]]
    removed: frozenset[tuple[str, str]]
    total_impact: frozenset[tuple[str, str]]
    conditioning: frozenset[str]

    def has_edge(self, frm: str, to: str) -> bool:
        return (frm, to) in self.edges


def source_dag(model: WeightedDag, context: Optional[Context]) -> SourceDag:
    """Build the source DAG for an observation.

    Union of the compatible impact graphs, minus edges that carry no
    randomness: edges out of constant nodes, and edges into constant
    nodes whose tail is pinned by every compatible graph containing
    them.  An empty context yields the full reachability DAG by
    convention.
    """
    if context is None or not context.pins:
        base = reachability_dag(model)
        return SourceDag(base.edges, frozenset(), base.edges, frozenset())
    a = analyze(model, context)
    return SourceDag(
        a.source_edges,
        a.total_impact - a.source_edges,
        a.total_impact,
        frozenset(context.nodes),
    )


def completion_matrix(
    model: WeightedDag, context: Context
) -> tuple[TropMatrix, dict[tuple[str, str], Rat]]:
    """The coefficient matrix joined with the two-way couplings x_k / x_h
    between constant nodes, plus its star restricted to those nodes.

    The couplings put every constant pair on a weight-one cycle, so the
    maximal cycle weight is exactly one and the bounded star exists; its
    constant-pair entries come out as the plain ratios.
    """
    a = analyze(model, context)
    frozen = a.frozen
    rows = [list(r) for r in model.coefficients.rows]
    for k in frozen:
        for h in frozen:
            ki, hi = model.index(k), model.index(h)
            rows[ki][hi] = max(rows[ki][hi], frozen[k] / frozen[h])
    cbar = TropMatrix(rows)
    star = bounded_star(cbar)
    restricted = {
        (k, h): star[model.index(k), model.index(h)] for k in frozen for h in frozen
    }
    return cbar, restricted


def effective_edges_in_context(model: WeightedDag, context: Context) -> frozenset[tuple[str, str]]:
    """Edges of the critical DAG that still transmit dependence given the
    observation.

    An edge j -> i survives when j is not frozen, no exact factorization
    of c*_ij passes through a frozen node, and every frozen pair (k, l)
    with k downstream of j and l upstream of i satisfies the strict
    exchange inequality; otherwise the observed values absorb the edge.
    """
    from .network import critical_dag
    from .separation import substitution_entries

    a = analyze(model, context)
    frozen = a.frozen
    critical_k = critical_dag(model, context.nodes).edges
    critical_frozen = critical_dag(model, frozen).edges
    out = set()
    for j, i in critical_k:
        if j in frozen or (j, i) not in critical_frozen:
            continue
        entries = substitution_entries(model, frozenset(frozen), i, j)
        if all(xi * frozen[l] < frozen[k] for (k, l), xi in entries.items()):
            out.add((j, i))
    return frozenset(out)
