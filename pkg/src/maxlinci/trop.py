"""Exact max-times semiring linear algebra.

All arithmetic in this module is over nonnegative rationals with the
semiring operations (max, *).  Zero is reserved for "no edge / no path",
so criticality tests and tie detection are exact equalities on
`fractions.Fraction` values and never go through floating point.  The only
float in the module is the diagnostic cycle-mean estimate, which exists to
cross-check the exact comparison.

Matrix convention, fixed globally: entry (i, j) is the weight of the edge
j -> i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import networkx as nx

Rat = Fraction

RatLike = Union[Rat, int, str]


def as_rat(value: RatLike) -> Rat:
    """Coerce to an exact nonnegative rational.

    Accepts Fraction, int, or a string in "p/q" or finite decimal form
    (decimals are parsed exactly, so "0.5" and "1/2" are identical).
    """
    if isinstance(value, Fraction):
        r = value
    elif isinstance(value, int):
        r = Fraction(value)
    elif isinstance(value, str):
        r = Fraction(value.strip())
    elif isinstance(value, float):
        raise TypeError("refusing to coerce float to Rat; pass a string or Fraction")
    else:
        raise TypeError(f"cannot interpret {value!r} as a rational")
    if r < 0:
        raise ValueError(f"negative value {r} not allowed in the max-times semiring")
    return r


def as_rat_vector(values: Iterable[RatLike]) -> tuple[Rat, ...]:
    return tuple(as_rat(v) for v in values)


class CyclicSupport(ValueError):
    """Raised when a Kleene star is requested for a matrix whose support digraph has a directed cycle."""


class TropMatrix:
    """Square matrix of nonnegative rationals with max-times semantics.

    Immutable and hashable; equality is entrywise (fractions are always
    reduced, so equality is structural).
    """

    __slots__ = ("_rows",)

    def __init__(self, rows: Iterable[Iterable[RatLike]]):
        data = tuple(tuple(as_rat(v) for v in row) for row in rows)
        n = len(data)
        for row in data:
            if len(row) != n:
                raise ValueError("TropMatrix must be square")
        self._rows = data

    @classmethod
    def zero(cls, n: int) -> "TropMatrix":
        return cls([[0] * n for _ in range(n)])

    @classmethod
    def identity(cls, n: int) -> "TropMatrix":
        return cls([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @property
    def n(self) -> int:
        return len(self._rows)

    @property
    def rows(self) -> tuple[tuple[Rat, ...], ...]:
        return self._rows

    def __getitem__(self, key: tuple[int, int]) -> Rat:
        i, j = key
        return self._rows[i][j]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TropMatrix) and self._rows == other._rows

    def __hash__(self) -> int:
        return hash(self._rows)

    def __repr__(self) -> str:
        body = ", ".join("[" + ", ".join(str(v) for v in row) + "]" for row in self._rows)
        return f"TropMatrix([{body}])"

    def vee(self, other: "TropMatrix") -> "TropMatrix":
        """Entrywise maximum."""
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return TropMatrix(
            [
                [max(a, b) for a, b in zip(r1, r2)]
                for r1, r2 in zip(self._rows, other._rows)
            ]
        )

    def scale(self, factor: RatLike) -> "TropMatrix":
        """Multiply every entry by a positive rational factor."""
        f = as_rat(factor)
        if f <= 0:
            raise ValueError("scale factor must be positive")
        return TropMatrix([[v * f for v in row] for row in self._rows])

    def submatrix(self, index: Sequence[int]) -> "TropMatrix":
        return TropMatrix([[self._rows[i][j] for j in index] for i in index])

    def support(self) -> set[tuple[int, int]]:
        """Pairs (i, j) with a positive entry, i.e. edges j -> i (self-loops included)."""
        return {
            (i, j)
            for i, row in enumerate(self._rows)
            for j, v in enumerate(row)
            if v > 0
        }


def trop_mul(a: TropMatrix, b: Union[TropMatrix, Sequence[RatLike]]):
    """Max-times product A (.) B.

    B may be a TropMatrix of the same dimension or a vector (sequence),
    in which case a tuple is returned.
    """
    if isinstance(b, TropMatrix):
        if a.n != b.n:
            raise ValueError("dimension mismatch")
        n = a.n
        bt = tuple(zip(*b.rows))  # columns of b
        out = []
        for row in a.rows:
            out.append(
                [
                    max((x * y for x, y in zip(row, col) if x > 0 and y > 0), default=Fraction(0))
                    for col in bt
                ]
            )
        return TropMatrix(out)
    return trop_mul_vec(a, b)


def trop_mul_vec(a: TropMatrix, x: Sequence[RatLike]) -> tuple[Rat, ...]:
    xs = as_rat_vector(x)
    if a.n != len(xs):
        raise ValueError("dimension mismatch")
    return tuple(
        max((w * v for w, v in zip(row, xs) if w > 0 and v > 0), default=Fraction(0))
        for row in a.rows
    )


def weak_closure(c: TropMatrix) -> TropMatrix:
    """Weak transitive closure: the join of the first n-1 max-times powers.

    Entry (i, j) is positive iff a directed path j -> i exists, and then
    equals the maximum path weight.  (For cyclic support the entries are
    maxima over walks of at most n-1 edges, which is what the star
    constructions below rely on.)
    """
    n = c.n
    if n <= 1:
        return TropMatrix.zero(n)
    acc = c
    power = c
    for _ in range(n - 2):
        power = trop_mul(c, power)
        acc = acc.vee(power)
    return acc


def kleene_star(c: TropMatrix) -> TropMatrix:
    """Kleene star I v Gamma(C) of a matrix with acyclic support.

    Raises CyclicSupport when the support digraph has a directed cycle
    (self-loops count).  The result is idempotent under trop_mul.
    """
    cyc = _support_cycle(c)
    if cyc is not None:
        raise CyclicSupport(f"support digraph has a directed cycle through nodes {cyc}")
    return TropMatrix.identity(c.n).vee(weak_closure(c))


def bounded_star(a: TropMatrix) -> TropMatrix:
    """Star I v Gamma(A) for a matrix with maximum cycle mean at most one.

    Cycles of weight <= 1 cannot increase walk weight, so the weak closure
    over at most n-1 edges already equals the full closure.  Raises
    ValueError if some cycle has weight above one.
    """
    if cycle_compare_one(a).ordering == "GT":
        raise ValueError("star diverges: a cycle with weight above one exists")
    return TropMatrix.identity(a.n).vee(weak_closure(a))


def _support_cycle(c: TropMatrix) -> Optional[list[int]]:
    """A directed cycle of the support digraph as a node list, or None."""
    n = c.n
    succ = [[i for i in range(n) if c[i, j] > 0] for j in range(n)]
    color = [0] * n  # 0 unvisited, 1 on stack, 2 done
    stack_trace: list[int] = []

    def dfs(v: int) -> Optional[list[int]]:
        color[v] = 1
        stack_trace.append(v)
        for w in succ[v]:
            if color[w] == 1:
                return stack_trace[stack_trace.index(w):]
            if color[w] == 0:
                found = dfs(w)
                if found is not None:
                    return found
        color[v] = 2
        stack_trace.pop()
        return None

    for v in range(n):
        if color[v] == 0:
            found = dfs(v)
            if found is not None:
                return found
    return None


@dataclass(frozen=True)
class CycleComparison:
    """Exact comparison of the maximum cycle mean against one.

    ordering is "LT", "EQ" or "GT"; for EQ/GT, witness is a simple cycle
    (v0, ..., vm-1) with edges v0 -> v1 -> ... -> v0 whose weight product
    is exactly one (EQ) or above one (GT).
    """

    ordering: str
    witness: Optional[tuple[int, ...]] = None
    witness_weight: Optional[Rat] = None


def cycle_compare_one(a: TropMatrix) -> CycleComparison:
    """Compare the maximum cycle mean of A to 1, exactly.

    Avoids k-th roots by inspecting the diagonals of the max-times powers
    A, A^2, ..., A^n: some diagonal entry exceeds one iff some cycle has
    weight product above one, and similarly for equality.  Acyclic support
    yields LT (the mean is zero by convention).
    """
    n = a.n
    if n == 0:
        return CycleComparison("LT")
    one = Fraction(1)
    powers: list[TropMatrix] = [a]
    # parents[k][i][j]: intermediate m with powers[k][i,j] = a[i,m] * powers[k-1][m,j]
    parents: list[list[list[Optional[int]]]] = []
    eq_hit: Optional[tuple[int, int]] = None  # (power index, node)
    gt_hit: Optional[tuple[int, int]] = None
    for v in range(n):
        d = a[v, v]
        if d > one:
            gt_hit = (0, v)
            break
        if d == one and eq_hit is None:
            eq_hit = (0, v)
    while gt_hit is None and len(powers) < n:
        prev = powers[-1]
        rows = []
        par = []
        for i in range(n):
            row = []
            prow = []
            for j in range(n):
                best = Fraction(0)
                arg: Optional[int] = None
                for m in range(n):
                    aim = a[i, m]
                    if aim == 0:
                        continue
                    pmj = prev[m, j]
                    if pmj == 0:
                        continue
                    val = aim * pmj
                    if val > best:
                        best = val
                        arg = m
                row.append(best)
                prow.append(arg)
            rows.append(row)
            par.append(prow)
        powers.append(TropMatrix(rows))
        parents.append(par)
        k = len(powers) - 1
        for v in range(n):
            d = powers[k][v, v]
            if d > one:
                gt_hit = (k, v)
                break
            if d == one and eq_hit is None:
                eq_hit = (k, v)
        if gt_hit is not None:
            break
    if gt_hit is not None:
        walk = _closed_walk(a, powers, parents, *gt_hit)
        cyc = _extract_cycle(a, walk, strict=True)
        return CycleComparison("GT", cyc, _cycle_weight(a, cyc))
    if eq_hit is not None:
        walk = _closed_walk(a, powers, parents, *eq_hit)
        cyc = _extract_cycle(a, walk, strict=False)
        return CycleComparison("EQ", cyc, _cycle_weight(a, cyc))
    return CycleComparison("LT")


def _closed_walk(
    a: TropMatrix,
    powers: list[TropMatrix],
    parents: list[list[list[Optional[int]]]],
    k: int,
    v: int,
) -> list[int]:
    """Forward node sequence v, u1, ..., u_k = v of the walk behind powers[k][v, v]."""
    back = [v]
    i = v
    for kk in range(k, 0, -1):
        m = parents[kk - 1][i][v]
        assert m is not None
        back.append(m)
        i = m
    # back holds the walk's nodes read from the end; reverse into forward order
    return [v] + list(reversed(back[1:])) + [v]


def _extract_cycle(a: TropMatrix, walk: list[int], strict: bool) -> tuple[int, ...]:
    """Split a closed walk into simple cycles and return a witness.

    For strict=True the walk weight exceeds one and some split part must
    too.  For strict=False every fully verified power diagonal was <= 1,
    which forces the first split to have weight exactly one.
    """
    one = Fraction(1)
    ws = list(walk)
    while True:
        seen: dict[int, int] = {}
        sub: Optional[tuple[int, int]] = None
        for idx, node in enumerate(ws):
            if node in seen:
                sub = (seen[node], idx)
                break
            seen[node] = idx
        assert sub is not None  # closed walk always repeats its start
        s, r = sub
        cyc = tuple(ws[s:r])
        w = _cycle_weight(a, cyc)
        if not strict:
            assert w == one
            return cyc
        if w > one:
            return cyc
        ws = ws[:s] + ws[r:]  # drop a light sub-cycle, remainder stays above one


def _cycle_weight(a: TropMatrix, cyc: tuple[int, ...]) -> Rat:
    w = Fraction(1)
    for t, u in enumerate(cyc):
        v = cyc[(t + 1) % len(cyc)]
        w *= a[v, u]
    return w


def max_cycle_mean_float(a: TropMatrix) -> float:
    """Floating approximation of the maximum cycle mean (0.0 for acyclic support).

    Karp dynamic programming on log weights, per strongly connected
    component.  Diagnostic only: the exact comparison is cycle_compare_one.
    """
    n = a.n
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    for i in range(n):
        for j in range(n):
            w = a[i, j]
            if w > 0:
                g.add_edge(j, i, logw=_log_rat(w))
    best: Optional[float] = None
    for comp in nx.strongly_connected_components(g):
        comp = sorted(comp)
        if len(comp) == 1:
            u = comp[0]
            if g.has_edge(u, u):
                val = g[u][u]["logw"]
                best = val if best is None else max(best, val)
            continue
        val = _karp_max_mean(g, comp)
        best = val if best is None else max(best, val)
    return math.exp(best) if best is not None else 0.0


def _karp_max_mean(g: "nx.DiGraph", comp: list[int]) -> float:
    idx = {u: t for t, u in enumerate(comp)}
    m = len(comp)
    in_edges = [
        [(idx[u], d["logw"]) for u, _, d in g.in_edges(v, data=True) if u in idx]
        for v in comp
    ]
    neg = float("-inf")
    dp = [[neg] * m for _ in range(m + 1)]
    dp[0][0] = 0.0  # fixed source: comp[0]
    for k in range(1, m + 1):
        row = dp[k]
        prev = dp[k - 1]
        for v in range(m):
            cand = neg
            for u, w in in_edges[v]:
                if prev[u] > neg:
                    val = prev[u] + w
                    if val > cand:
                        cand = val
            row[v] = cand
    best = neg
    for v in range(m):
        if dp[m][v] == neg:
            continue
        inner = float("inf")
        for k in range(m):
            if dp[k][v] > neg:
                inner = min(inner, (dp[m][v] - dp[k][v]) / (m - k))
        best = max(best, inner)
    return best


def _log_rat(r: Rat) -> float:
    return math.log(r.numerator) - math.log(r.denominator)


def subeigen_check(a: TropMatrix, x: Sequence[RatLike], strict: bool = False) -> bool:
    """True iff A (.) x <= x entrywise (or < x when strict); x must be positive."""
    xs = as_rat_vector(x)
    if len(xs) != a.n:
        raise ValueError("dimension mismatch")
    if any(v <= 0 for v in xs):
        raise ValueError("x must be strictly positive")
    y = trop_mul_vec(a, xs)
    if strict:
        return all(yi < xi for yi, xi in zip(y, xs))
    return all(yi <= xi for yi, xi in zip(y, xs))


def subeigen_candidate(a: TropMatrix, strict: bool = False) -> Optional[tuple[Rat, ...]]:
    """A positive rational x with A (.) x <= x (< x when strict), when one exists.

    Weak case (cycle mean <= 1): x = A* (.) 1.  Strict case (mean < 1):
    scale A by 1/mu for a rational mu strictly between the mean and one,
    found by the doubling search mu = 1 - 2^-t, and take x = (A/mu)* (.) 1;
    then A (.) x = mu ((A/mu) (.) x) <= mu x < x.
    """
    cmp = cycle_compare_one(a)
    if cmp.ordering == "GT" or (strict and cmp.ordering != "LT"):
        return None
    ones = (Fraction(1),) * a.n
    if not strict:
        return trop_mul_vec(bounded_star(a), ones)
    mu = rational_mu_below_one(a)
    scaled = a.scale(Fraction(1) / mu)
    return trop_mul_vec(bounded_star(scaled), ones)


def rational_mu_below_one(a: TropMatrix) -> Rat:
    """A rational mu in (lambda(A), 1), for A with cycle mean strictly below one."""
    if cycle_compare_one(a).ordering != "LT":
        raise ValueError("requires cycle mean strictly below one")
    t = 1
    while True:
        mu = Fraction(2**t - 1, 2**t)
        if cycle_compare_one(a.scale(Fraction(1) / mu)).ordering == "LT":
            return mu
        t += 1
