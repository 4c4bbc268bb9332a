"""Shared fixtures and oracles for the test suite.

The named networks are small hand-checkable models reused across many
tests; helpers at the bottom are brute-force counterparts of engine
operations, kept deliberately naive so they share no code with the
package.
"""

from fractions import Fraction
import math
import random

import networkx as nx
import numpy as np
import pytest

from maxlinci import (
    Context,
    TropMatrix,
    WeightedDag,
    atoms_of,
    build_representation,
    evaluate,
)

F = Fraction


def dag(labels, edges):
    return WeightedDag(
        [str(l) for l in labels], [(str(a), str(b), w) for a, b, w in edges]
    )


def ones(labels, pairs):
    return dag(labels, [(a, b, 1) for a, b in pairs])


def ctx(mapping):
    return Context.from_mapping({str(k): v for k, v in mapping.items()})


@pytest.fixture(scope="session")
def bipartite():
    """Two roots feeding two sinks with crossed weights."""
    return dag("1234", [(1, 3, F(1, 2)), (2, 3, 1), (1, 4, 1), (2, 4, F(1, 2))])


@pytest.fixture(scope="session")
def cassiopeia():
    """W shape: three roots, two colliders, unit weights."""
    return ones("12345", [(1, 4), (2, 4), (2, 5), (3, 5)])


@pytest.fixture(scope="session")
def tent():
    """Two roots covering three sinks, unit weights."""
    return ones("12345", [(1, 3), (2, 3), (1, 4), (2, 4), (1, 5), (2, 5)])


@pytest.fixture(scope="session")
def half_butterfly():
    return dag(
        "12345",
        [(1, 3, 1), (2, 3, F(1, 2)), (3, 4, 3), (3, 5, 3), (2, 5, 4)],
    )


@pytest.fixture(scope="session")
def umbrella():
    """Seven nodes; 4 and 5 jointly cover the handle nodes 6 and 7."""
    return dag(
        "1234567",
        [
            (1, 2, 2),
            (1, 3, 2),
            (1, 7, 1),
            (4, 2, 2),
            (4, 3, 1),
            (4, 6, 1),
            (4, 7, 1),
            (5, 2, 1),
            (5, 3, 2),
            (5, 6, 1),
            (5, 7, 1),
        ],
    )


@pytest.fixture(scope="session")
def diamond():
    """1 over 2 and 3 over 4; the heavy 1->2 arm dominates the closure."""
    return dag("1234", [(1, 2, 2), (1, 3, 1), (2, 4, 1), (3, 4, 1)])


@pytest.fixture(scope="session")
def pentagon():
    """Five unit-weight nodes where the bypass 1->5->2 absorbs the
    1-to-2 closure weight, so the two colliders cannot transmit."""
    return ones("12345", [(1, 4), (3, 4), (3, 2), (5, 2), (1, 5)])


@pytest.fixture(scope="session")
def absorbed_edge():
    """Direct 1->4 arm weaker than the detour through the observed pair."""
    return dag("1234", [(1, 2, 1), (1, 4, F(1, 2)), (3, 4, 1)])


@pytest.fixture(scope="session")
def twin_forks():
    """Two disjoint two-parent forks; conditioning on both sinks leaves
    two separate equality blocks."""
    return ones("123456", [(1, 5), (2, 5), (3, 6), (4, 6)])


# random instance generators


def random_dag(rng: random.Random, n: int, p: float = 0.45, span: int = 6) -> WeightedDag:
    labels = [str(t + 1) for t in range(n)]
    edges = []
    for j in range(n):
        for i in range(j + 1, n):
            if rng.random() < p:
                w = F(rng.randint(1, span), rng.randint(1, span))
                edges.append((labels[j], labels[i], w))
    return WeightedDag(labels, edges)


def random_innovations(rng: random.Random, n: int, span: int = 30):
    return [F(rng.randint(1, span), rng.randint(1, span)) for _ in range(n)]


def observed_context(model: WeightedDag, rng: random.Random, k_labels) -> Context:
    """A context guaranteed possible: observe coordinates of an actual
    realization of the network."""
    x = evaluate(model, random_innovations(rng, model.n))
    return Context.from_mapping(
        {lab: x[model.index(lab)] for lab in k_labels}
    )


def random_trop_matrix(
    rng: random.Random, n: int, density: float = 0.4, plant_unit_cycle: bool = False
) -> TropMatrix:
    rows = [[F(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if rng.random() < density:
                rows[i][j] = F(rng.randint(1, 6), rng.randint(1, 6))
    if plant_unit_cycle and n >= 2:
        cyc = rng.sample(range(n), rng.randint(2, n))
        acc = F(1)
        for t in range(len(cyc) - 1):
            w = F(rng.randint(1, 5), rng.randint(1, 5))
            rows[cyc[t + 1]][cyc[t]] = w
            acc *= w
        rows[cyc[0]][cyc[-1]] = 1 / acc
    return TropMatrix(rows)


# brute-force oracles


def brute_trop_mul(a: TropMatrix, b: TropMatrix) -> TropMatrix:
    return TropMatrix(
        [
            [max(a[i, l] * b[l, j] for l in range(a.n)) for j in range(b.n)]
            for i in range(a.n)
        ]
    )


def brute_cycle_compare(a: TropMatrix) -> str:
    """Exhaustive simple-cycle sweep; only viable for small n."""
    g = nx.DiGraph()
    g.add_nodes_from(range(a.n))
    for i in range(a.n):
        for j in range(a.n):
            if a[i, j] > 0:
                g.add_edge(j, i)
    best = None
    for cyc in nx.simple_cycles(g):
        w = F(1)
        for t, v in enumerate(cyc):
            w *= a[cyc[(t + 1) % len(cyc)], v]
        if best is None or w > best:
            best = w
    if best is None or best < 1:
        return "LT"
    return "EQ" if best == 1 else "GT"


def brute_max_path_weight(model: WeightedDag, frm: int, to: int):
    """Maximum weight over directed paths with at least one edge."""
    c = model.coefficients
    best = F(0)
    stack = [(frm, F(1), 0)]
    while stack:
        v, w, length = stack.pop()
        if v == to and length > 0:
            best = max(best, w)
            continue  # acyclic, so no path returns here
        for child in model.children(v):
            stack.append((child, w * c[child, v], length + 1))
    return best


def recursion_evaluate(model: WeightedDag, z):
    """Node values via the structural recursion, not the closure."""
    c = model.coefficients
    x = list(z)
    for v in model.topo_order:
        for p in model.parents(v):
            x[v] = max(x[v], c[v, p] * x[p])
    return tuple(x)


def reach_without_interior(model: WeightedDag, k_labels) -> set:
    """Pairs (j, i) joined by a path with no interior node among
    k_labels, by breadth-first search."""
    k = {model.index(lab) for lab in k_labels}
    out = set()
    for j in range(model.n):
        frontier = list(model.children(j))
        seen = set(frontier)
        while frontier:
            nxt = []
            for v in frontier:
                out.add((model.label(j), model.label(v)))
                if v in k:
                    continue  # may end here but not pass through
                for c in model.children(v):
                    if c not in seen:
                        seen.add(c)
                        nxt.append(c)
            frontier = nxt
    return out


# statistical helpers


def atom_points(model, context, label):
    """Candidate point masses of one active coordinate: the declared
    atoms plus every block achievement level visible from the node."""
    rep = build_representation(model, context)
    pts = set(atoms_of(model, context, label))
    ai = model.index(label)
    for blk in rep.blocks:
        for var, coeff in blk.terms:
            c = model.closure[ai, model.index(var)]
            if c > 0:
                pts.add(c * blk.value / coeff)
    alpha = rep.alpha_of(label)
    if alpha > 0:
        pts.add(alpha)
    return sorted(float(p) for p in pts)


def snap(values, atoms, eps):
    """Collapse everything within relative eps of a predicted atom onto
    the atom itself, so band smearing cancels out of a KS comparison."""
    out = np.asarray(values, dtype=float).copy()
    for a in atoms:
        out[np.abs(out - a) <= eps * a] = a
    return out


# conditioning oracles and invariant bundles


def lp_region_feasible(model, g, context):
    """Strict-region feasibility decided by a log-space LP.

    Maximizes the common margin of all strict inequalities subject to the
    observation pins; feasible means a positive optimum.  Returns None
    when the optimum is too close to zero to trust float arithmetic.
    """
    from scipy.optimize import linprog

    cs = model.closure
    n = model.n

    def lg(q):
        q = F(q)
        return math.log2(q.numerator) - math.log2(q.denominator)

    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for i in range(n):
        ri = model.index(g.root_of(model.label(i)))
        others = set(model.ancestors(i))
        if ri != i:
            others = (others | {i}) - {ri}
        for j in others:
            # log c*_{i,ri} + y_ri >= log c*_{i,j} + y_j + t
            row = [0.0] * (n + 1)
            row[j] += 1.0
            row[ri] -= 1.0
            row[n] = 1.0
            a_ub.append(row)
            b_ub.append(lg(cs[i, ri]) - lg(cs[i, j]))
    for k in context.nodes:
        ki = model.index(k)
        ri = model.index(g.root_of(k))
        row = [0.0] * (n + 1)
        row[ri] = 1.0
        a_eq.append(row)
        b_eq.append(lg(context.value(k)) - lg(cs[ki, ri]))
    res = linprog(
        c=[0.0] * n + [-1.0],
        A_ub=a_ub or None,
        b_ub=b_ub or None,
        A_eq=a_eq or None,
        b_eq=b_eq or None,
        bounds=[(-80.0, 80.0)] * n + [(-10.0, 10.0)],
        method="highs",
    )
    if not res.success:
        return False  # pins contradict even with the margin released
    margin = -res.fun
    if abs(margin) < 1e-7:
        return None
    return margin > 0


def lp_compatible(model, context):
    """Compatible galaxies via the LP oracle, or None on any ambiguity."""
    from maxlinci import enumerate_impact_graphs

    ranked = {}
    for g in enumerate_impact_graphs(model):
        verdict = lp_region_feasible(model, g, context)
        if verdict is None:
            return None
        if verdict:
            ranked[g] = len({g.root_of(k) for k in context.nodes})
    if not ranked:
        return frozenset()
    low = min(ranked.values())
    return frozenset(g for g, r in ranked.items() if r == low)


def assert_partition_invariants(model, context):
    """Structural facts every computed partition must satisfy."""
    import itertools

    from maxlinci import (
        analyze,
        conditional_reach_dag,
        critical_dag,
        partition,
        source_dag,
    )

    a = analyze(model, context)
    part = partition(model, context)
    sd = source_dag(model, context)
    cs = model.closure

    src_pa = {v: {j for j, i in sd.edges if i == v} for v in model.labels}
    tot_pa = {v: {j for j, i in sd.total_impact if i == v} for v in model.labels}

    hl = sorted(set(part.self_sourced) | set(part.linked))
    for k in hl:
        assert src_pa[k] == tot_pa[k], f"{k}: sources pruned for a non-tied node"
    for u, v in itertools.combinations(hl, 2):
        assert src_pa[u] == src_pa[v] or not (src_pa[u] & src_pa[v])
    for l in part.linked:
        assert len(src_pa[l]) >= 2
        for act in part.active:
            assert not (src_pa[l] <= src_pa[act])

    # the source DAG sits inside the critical DAG for the conditioning
    # set, except that an edge absorbed by an exact factorization through
    # an observed node survives when its head is tied to that node
    crit = critical_dag(model, context.nodes).edges
    reach = conditional_reach_dag(model, context.nodes).edges
    assert crit <= reach
    for j, i in sd.edges:
        assert (j, i) in crit or i in part.tied

    # ratios of pinned values identify star roots
    for g, vals in a.star_values.items():
        for h, i in itertools.permutations(vals, 2):
            hi, ii = model.index(h), model.index(i)
            for j in range(model.n):
                if cs[hi, j] == 0 or cs[ii, j] == 0:
                    continue
                jl = model.label(j)
                left, right = vals[h] / cs[hi, j], vals[i] / cs[ii, j]
                if left < right:
                    assert g.root_of(i) != jl
                elif left == right and g.root_of(i) == jl:
                    assert g.root_of(h) == jl

    # a pinned root feeding an unfrozen child must also feed a frozen one
    frozen = set(a.frozen)
    for g, vals in a.star_values.items():
        for j, i in g.edges:
            if i in frozen or j in frozen or j not in vals:
                continue
            assert any((j, h) in g.edges for h in hl)
