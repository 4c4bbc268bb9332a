"""Separation criteria for conditional independence queries.

Four criteria at different levels of knowledge: structure only, fixed
weights (sound), fixed weights (sound and complete via path
effectiveness), and a specific observation.  All reduce to finding short
connecting shapes in a derived DAG; a shape spans at most five nodes, so
the search is a bounded sweep over node tuples.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .context import Context, analyze
from .network import WeightedDag, conditional_reach_dag, critical_dag
from .trop import (
    CycleComparison,
    Rat,
    TropMatrix,
    bounded_star,
    cycle_compare_one,
    rational_mu_below_one,
    trop_mul_vec,
)


class SetsNotDisjoint(ValueError):
    """Query sets overlap; separation statements need disjoint sets."""


class EdgeNotCritical(ValueError):
    """The edge is absent from the critical DAG for this conditioning set."""


@dataclass(frozen=True, order=True)
class StarPath:
    """A connecting shape between two endpoints.

    nodes reads left to right; the shape fixes the arrows: "edge" is
    nodes[0] -> nodes[1]; "fork" has the middle node pointing at both
    ends; "collider" has both ends pointing at the middle; the longer
    shapes splice a fork onto a collider ("fork-collider" forks at
    nodes[1] and sends nodes[3] straight into the collider nodes[2]).
    Symmetric shapes are stored with the smaller endpoint first.
    """

    shape: str
    nodes: tuple[str, ...]

    _ARITY = {
        "edge": 2,
        "fork": 3,
        "collider": 3,
        "fork-collider": 4,
        "fork-collider-fork": 5,
    }

    def __post_init__(self) -> None:
        if self.shape not in self._ARITY:
            raise ValueError(f"unknown shape {self.shape!r}")
        if len(self.nodes) != self._ARITY[self.shape]:
            raise ValueError(f"{self.shape} takes {self._ARITY[self.shape]} nodes")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("shape nodes must be distinct")

    @property
    def endpoints(self) -> tuple[str, str]:
        return self.nodes[0], self.nodes[-1]

    @property
    def collider(self) -> Optional[str]:
        if self.shape == "collider":
            return self.nodes[1]
        if self.shape in ("fork-collider", "fork-collider-fork"):
            return self.nodes[2]
        return None

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        n = self.nodes
        if self.shape == "edge":
            return ((n[0], n[1]),)
        if self.shape == "fork":
            return ((n[1], n[0]), (n[1], n[2]))
        if self.shape == "collider":
            return ((n[0], n[1]), (n[2], n[1]))
        if self.shape == "fork-collider":
            return ((n[1], n[0]), (n[1], n[2]), (n[3], n[2]))
        return ((n[1], n[0]), (n[1], n[2]), (n[3], n[2]), (n[3], n[4]))


def _pair_paths(
    eset: frozenset[tuple[str, str]],
    parents: dict[str, set[str]],
    a: str,
    b: str,
    ks: frozenset[str],
) -> set[StarPath]:
    pa = lambda v: parents.get(v, set())
    found: set[StarPath] = set()
    if (a, b) in eset:
        found.add(StarPath("edge", (a, b)))
    if (b, a) in eset:
        found.add(StarPath("edge", (b, a)))
    u, v = min(a, b), max(a, b)
    for f in pa(u) & pa(v):
        if f not in ks and f not in (a, b):
            found.add(StarPath("fork", (u, f, v)))
    for k in ks - {a, b}:
        pk = pa(k)
        if a in pk and b in pk:
            found.add(StarPath("collider", (u, k, v)))
        for first, last in ((a, b), (b, a)):
            if last not in pk:
                continue
            for f in (pa(first) & pk) - ks - {a, b}:
                found.add(StarPath("fork-collider", (first, f, k, last)))
        for f in (pa(u) & pk) - ks - {a, b}:
            for g in (pa(v) & pk) - ks - {a, b}:
                if f != g:
                    found.add(StarPath("fork-collider-fork", (u, f, k, g, v)))
    return found


def star_connecting_paths(
    edges: Iterable[tuple[str, str]],
    k_nodes: Iterable[str],
    i_nodes: Iterable[str],
    j_nodes: Iterable[str],
) -> list[StarPath]:
    """All connecting shapes between the two node sets, sorted.

    Fork nodes may be anything outside the collider set and the chosen
    endpoints; the single collider of the longer shapes must come from
    k_nodes.  Shapes are deduplicated by (shape, nodes).
    """
    eset = frozenset(edges)
    ks = frozenset(k_nodes)
    parents: dict[str, set[str]] = {}
    for t, h in eset:
        parents.setdefault(h, set()).add(t)
    found: set[StarPath] = set()
    for a in sorted(frozenset(i_nodes)):
        for b in sorted(frozenset(j_nodes)):
            if a == b:
                raise ValueError("endpoint sets must not share nodes")
            found |= _pair_paths(eset, parents, a, b, ks)
    return sorted(found)


@dataclass(frozen=True)
class CIVerdict:
    """Outcome of a separation query.

    independent True means the criterion certifies conditional
    independence at its level of knowledge; witness_path, when set, is
    the connecting shape behind a failed separation, and
    witness_weights an edge-weight assignment realizing the dependence
    (structure-only mode).
    """

    mode: str
    independent: bool
    witness_path: Optional[StarPath] = None
    witness_weights: Optional[tuple[tuple[tuple[str, str], Rat], ...]] = None
    notes: tuple[str, ...] = ()

    @property
    def dependent(self) -> bool:
        return not self.independent

    @property
    def result(self) -> str:
        return "independent" if self.independent else "dependent"


def _check_disjoint(
    i_set: Iterable[str], j_set: Iterable[str], k_set: Iterable[str]
) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    i_s, j_s, k_s = frozenset(i_set), frozenset(j_set), frozenset(k_set)
    for x, y, names in ((i_s, j_s, "I and J"), (i_s, k_s, "I and K"), (j_s, k_s, "J and K")):
        if x & y:
            raise SetsNotDisjoint(f"{names} share {sorted(x & y)}")
    return i_s, j_s, k_s


def d_separated(
    model: WeightedDag,
    i_set: Iterable[str],
    j_set: Iterable[str],
    k_set: Iterable[str],
) -> bool:
    """Classical d-separation on the model structure.

    Ancestral restriction, moralization, removal of the conditioning
    nodes, then undirected reachability.
    """
    i_s, j_s, k_s = _check_disjoint(i_set, j_set, k_set)
    for lab in i_s | j_s | k_s:
        model.index(lab)
    relevant = set(i_s | j_s | k_s)
    frontier = list(relevant)
    while frontier:
        lab = frontier.pop()
        for p in model.parents(model.index(lab)):
            plab = model.label(p)
            if plab not in relevant:
                relevant.add(plab)
                frontier.append(plab)
    adj: dict[str, set[str]] = {lab: set() for lab in relevant}
    for frm, to, _ in model.edge_labels():
        if frm in relevant and to in relevant:
            adj[frm].add(to)
            adj[to].add(frm)
    for lab in relevant:
        ps = [model.label(p) for p in model.parents(model.index(lab))]
        for p, q in itertools.combinations(sorted(set(ps) & relevant), 2):
            adj[p].add(q)
            adj[q].add(p)
    seen = set(i_s)
    stack = list(i_s)
    while stack:
        lab = stack.pop()
        if lab in j_s:
            return False
        for nxt in adj[lab]:
            if nxt not in seen and nxt not in k_s:
                seen.add(nxt)
                stack.append(nxt)
    return not (seen & j_s)


def _carrier_path(
    model: WeightedDag, tail: str, head: str, k_set: frozenset[str]
) -> list[tuple[str, str]]:
    """A directed model path tail -> head whose interior avoids the
    conditioning set; exists whenever the conditional reachability DAG
    has the edge."""
    start, goal = model.index(tail), model.index(head)
    prev: dict[int, int] = {start: start}
    frontier = [start]
    while frontier:
        nxt: list[int] = []
        for v in frontier:
            for c in sorted(model.children(v)):
                if c in prev:
                    continue
                if c != goal and model.label(c) in k_set:
                    continue
                prev[c] = v
                if c == goal:
                    chain = [c]
                    while chain[-1] != start:
                        chain.append(prev[chain[-1]])
                    labs = [model.label(t) for t in reversed(chain)]
                    return list(zip(labs, labs[1:]))
                nxt.append(c)
        frontier = nxt
    raise ValueError(f"no conditioning-free path from {tail!r} to {head!r}")


def ci_generic(
    model: WeightedDag,
    i_set: Iterable[str],
    j_set: Iterable[str],
    k_set: Iterable[str],
) -> CIVerdict:
    """Structure-only criterion: separation in the conditional
    reachability DAG.  Weights of the model are ignored.

    Complete over weight choices: a dependence verdict carries
    witness_weights, a coefficient assignment (full weight on carrier
    paths of the witness shape, half weight elsewhere) under which the
    dependence is realized in some context.
    """
    i_s, j_s, k_s = _check_disjoint(i_set, j_set, k_set)
    reach = conditional_reach_dag(model, k_s)
    paths = star_connecting_paths(reach.edges, k_s, i_s, j_s)
    if not paths:
        return CIVerdict("generic", True)
    best = paths[0]
    carrier: set[tuple[str, str]] = set()
    for tail, head in best.edges:
        carrier.update(_carrier_path(model, tail, head, k_s))
    weights = tuple(
        ((frm, to), Fraction(1) if (frm, to) in carrier else Fraction(1, 2))
        for frm, to, _ in model.edge_labels()
    )
    return CIVerdict("generic", False, witness_path=best, witness_weights=weights)


def substitution_entries(
    model: WeightedDag,
    k_set: frozenset[str],
    head: str,
    tail: str,
) -> dict[tuple[str, str], Rat]:
    """Nonzero exchange ratios of one edge tail -> head against the
    conditioning set: how strongly tail's pull on a conditioned
    descendant trades off against a conditioned node's pull on head."""
    cs = model.closure
    hi, ti = model.index(head), model.index(tail)
    base = cs[hi, ti]
    if base == 0:
        raise EdgeNotCritical(f"{tail!r} does not reach {head!r}")
    out: dict[tuple[str, str], Rat] = {}
    for k in k_set:
        if k == tail or cs[model.index(k), ti] == 0:
            continue
        for l in k_set:
            if l == k:
                continue
            if l != head and cs[hi, model.index(l)] == 0:
                continue
            out[(k, l)] = cs[model.index(k), ti] * cs[hi, model.index(l)] / base
    return out


def substitution_matrix(
    model: WeightedDag,
    k_nodes: Iterable[str],
    p: Union["StarPath", tuple[str, str]],
) -> TropMatrix:
    """Exchange ratios of an edge, or the entrywise join over a shape's
    edges, as a matrix indexed by the sorted conditioning labels.

    Every edge involved must lie in the critical DAG for the
    conditioning set; a single edge is given as a (tail, head) pair.
    """
    k_s = frozenset(k_nodes)
    edges = p.edges if isinstance(p, StarPath) else (tuple(p),)
    crit = critical_dag(model, k_s).edges
    labels = tuple(sorted(k_s))
    pos = {lab: t for t, lab in enumerate(labels)}
    rows = [[Fraction(0)] * len(labels) for _ in labels]
    for tail, head in edges:
        if (tail, head) not in crit:
            raise EdgeNotCritical(
                f"{tail!r} -> {head!r} is not critical given {sorted(k_s)}"
            )
        for (k, l), val in substitution_entries(model, k_s, head, tail).items():
            rows[pos[k]][pos[l]] = max(rows[pos[k]][pos[l]], val)
    return TropMatrix(rows)


@dataclass(frozen=True)
class PathEffectiveness:
    """Effectiveness of a shape, with the cycle comparison as evidence."""

    effective: bool
    comparison: CycleComparison
    labels: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.effective


def _exchange_system(
    model: WeightedDag, k_s: frozenset[str], path: StarPath
) -> tuple[tuple[str, ...], TropMatrix]:
    """Closure over K joined with the shape's substitution matrix."""
    labels = tuple(sorted(k_s))
    gamma = model.gamma
    base = TropMatrix(
        [[gamma[model.index(r), model.index(c)] for c in labels] for r in labels]
    )
    return labels, base.vee(substitution_matrix(model, k_s, path))


def path_effective(
    model: WeightedDag, k_nodes: Iterable[str], path: StarPath
) -> PathEffectiveness:
    """Whether a connecting shape survives in some context.

    The closure restricted to the conditioning set, joined with the
    exchange ratios of every path edge, must keep all cycle weights
    strictly below one; a cycle at or above one means every candidate
    context collapses the shape.
    """
    labels, system = _exchange_system(model, frozenset(k_nodes), path)
    cmp = cycle_compare_one(system)
    return PathEffectiveness(cmp.ordering == "LT", cmp, labels)


def ci_fixed_c(
    model: WeightedDag,
    i_set: Iterable[str],
    j_set: Iterable[str],
    k_set: Iterable[str],
) -> CIVerdict:
    """Weight-aware sound criterion: separation in the critical DAG.

    An independence verdict is always correct for the given weights; a
    dependence verdict only reports the connecting shape found and may
    still be independent in every context.
    """
    i_s, j_s, k_s = _check_disjoint(i_set, j_set, k_set)
    crit = critical_dag(model, k_s)
    paths = star_connecting_paths(crit.edges, k_s, i_s, j_s)
    if not paths:
        return CIVerdict("critical", True)
    return CIVerdict(
        "critical",
        False,
        witness_path=paths[0],
        notes=("separation failed; dependence not certified at this level",),
    )


def ci_fixed_c_complete(
    model: WeightedDag,
    i_set: Iterable[str],
    j_set: Iterable[str],
    k_set: Iterable[str],
) -> CIVerdict:
    """Weight-aware exact criterion: dependent exactly when some
    connecting shape in the critical DAG is effective."""
    i_s, j_s, k_s = _check_disjoint(i_set, j_set, k_set)
    crit = critical_dag(model, k_s)
    paths = star_connecting_paths(crit.edges, k_s, i_s, j_s)
    ineffective = 0
    for path in paths:
        if path_effective(model, k_s, path).effective:
            return CIVerdict("critical-complete", False, witness_path=path)
        ineffective += 1
    notes: tuple[str, ...] = ()
    if ineffective:
        notes = (f"{ineffective} connecting shape(s) found, none effective",)
    return CIVerdict("critical-complete", True, notes=notes)


def ci_context(
    model: WeightedDag,
    context: Context,
    i_set: Iterable[str],
    j_set: Iterable[str],
) -> CIVerdict:
    """Context-specific exact criterion: separation in the source DAG.

    Nodes held constant by the observation drop out of the query; the
    collider role passes to the constants that still tie innovations
    together (the self-sourced and the linked ones).
    """
    i_s, j_s, _ = _check_disjoint(i_set, j_set, context.nodes)
    a = analyze(model, context)
    frozen = set(a.frozen)
    i_act = i_s - frozen
    j_act = j_s - frozen
    if not i_act or not j_act:
        return CIVerdict("context", True, notes=("one side held constant",))
    colliders = frozenset(a.self_sourced) | frozenset(a.linked)
    paths = star_connecting_paths(a.source_edges, colliders, i_act, j_act)
    if not paths:
        return CIVerdict("context", True)
    return CIVerdict("context", False, witness_path=paths[0])


def witness_context(
    model: WeightedDag,
    k_nodes: Iterable[str],
    path: StarPath,
    spread: Optional[Sequence[Rat]] = None,
) -> Context:
    """A context keeping an effective shape alive.

    Scales the exchange system just below one, then reads off an
    observation vector strictly dominating it; any positive spread
    vector works, staggered values by default to dodge ties.
    """
    labels, system = _exchange_system(model, frozenset(k_nodes), path)
    if cycle_compare_one(system).ordering != "LT":
        raise ValueError("shape is not effective; no context keeps it alive")
    mu = rational_mu_below_one(system)
    star = bounded_star(system.scale(Fraction(1) / mu))
    if spread is None:
        spread = [Fraction(97 + t, 97) for t in range(len(labels))]
    x = trop_mul_vec(star, list(spread))
    return Context.from_mapping(dict(zip(labels, x)))
