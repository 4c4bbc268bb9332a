"""Monte Carlo oracles, independent of the exact engine.

Everything here works in floats from the raw edge list: node values come
from the structural recursion X_i = Z_i v max c_ij X_j in a locally
computed topological order, never from the exact closure, and realized
impact graphs use a separately computed float closure.  The exact engine
is validated against these routines, so they must not share its code
paths.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .context import Context
from .impact import Galaxy
from .network import WeightedDag
from .representation import InnovationDist

_TIE_RTOL = 1e-9


class Timeout(RuntimeError):
    """Band acceptance stayed below the rate floor for the whole budget."""


@dataclass(frozen=True)
class SampleBatch:
    """A reproducible batch of model draws.

    galaxies is filled by the unconditioned sampler (one realized impact
    graph per row) and left None by the band sampler; acceptance_rate is
    the reverse.
    """

    labels: tuple[str, ...]
    seed: Optional[int]
    n: int
    dist_id: str
    z: np.ndarray
    x: np.ndarray
    galaxies: Optional[tuple[Galaxy, ...]] = None
    acceptance_rate: Optional[float] = None

    def column(self, label: str) -> np.ndarray:
        return self.x[:, self.labels.index(label)]


def _local_topo(labels: Sequence[str], edges: list[tuple[str, str, float]]) -> list[int]:
    idx = {lab: t for t, lab in enumerate(labels)}
    indeg = [0] * len(labels)
    out: dict[int, list[int]] = {t: [] for t in range(len(labels))}
    for frm, to, _ in edges:
        indeg[idx[to]] += 1
        out[idx[frm]].append(idx[to])
    order = [t for t in range(len(labels)) if indeg[t] == 0]
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v in out[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                order.append(v)
    if len(order) != len(labels):
        raise ValueError("edge list is not acyclic")
    return order


def _float_edges(model: WeightedDag) -> list[tuple[str, str, float]]:
    return [(frm, to, float(w)) for frm, to, w in model.edge_labels()]


def _float_closure(labels: Sequence[str], edges: list[tuple[str, str, float]]) -> np.ndarray:
    """All-pairs best path weight as floats; entry (i, j) covers j -> i."""
    idx = {lab: t for t, lab in enumerate(labels)}
    d = len(labels)
    cs = np.zeros((d, d))
    np.fill_diagonal(cs, 1.0)
    for u in _local_topo(labels, edges):
        for frm, to, w in edges:
            if idx[frm] == u:
                c = idx[to]
                cs[c] = np.maximum(cs[c], w * cs[u])
    return cs


def _draw_innovations(
    rng: np.random.Generator, dist: InnovationDist, shape: tuple[int, int]
) -> np.ndarray:
    if dist.family == "frechet":
        u = rng.random(shape)
        u = np.clip(u, 1e-300, 1.0 - 1e-16)
        return -1.0 / np.log(u)
    if dist.family == "lognormal":
        mu, sigma = dist.params
        return np.exp(mu + sigma * rng.standard_normal(shape))
    alpha = dist.params[0]
    return rng.pareto(alpha, shape)


def _recursion_x(
    labels: Sequence[str],
    edges: list[tuple[str, str, float]],
    order: Sequence[int],
    z: np.ndarray,
) -> np.ndarray:
    idx = {lab: t for t, lab in enumerate(labels)}
    incoming: dict[int, list[tuple[int, float]]] = {t: [] for t in range(len(labels))}
    for frm, to, w in edges:
        incoming[idx[to]].append((idx[frm], w))
    x = z.copy()
    for i in order:
        for j, w in incoming[i]:
            np.maximum(x[:, i], w * x[:, j], out=x[:, i])
    return x


def _realized_rows(
    labels: Sequence[str], cs: np.ndarray, z: np.ndarray
) -> tuple[list[Optional[Galaxy]], np.ndarray]:
    """Float realized impact graph per row; None marks a tie to resample."""
    m, d = z.shape
    vals = z[:, None, :] * cs[None, :, :]
    best = np.argmax(vals, axis=2)
    top = np.take_along_axis(vals, best[:, :, None], axis=2)[:, :, 0]
    masked = vals.copy()
    np.put_along_axis(masked, best[:, :, None], -np.inf, axis=2)
    second = np.max(masked, axis=2)
    tie_rows = np.any(second >= top * (1.0 - _TIE_RTOL), axis=1)
    out: list[Optional[Galaxy]] = []
    for r in range(m):
        if tie_rows[r]:
            out.append(None)
            continue
        edges = [
            (labels[best[r, i]], labels[i]) for i in range(d) if best[r, i] != i
        ]
        out.append(Galaxy.from_edges(labels, edges))
    return out, tie_rows


def mc_sample_batch(
    model: WeightedDag,
    n: int,
    dist: InnovationDist = InnovationDist.frechet(),
    seed: Optional[int] = 0,
) -> SampleBatch:
    """n unconditioned draws with their realized impact graphs.

    Rows whose float argmax is ambiguous are redrawn; with atom-free
    innovations that is a rounding artifact, not a property of the law.
    """
    if n < 1:
        raise ValueError("need at least one draw")
    labels = model.labels
    edges = _float_edges(model)
    order = _local_topo(labels, edges)
    cs = _float_closure(labels, edges)
    rng = np.random.default_rng(seed)
    z = _draw_innovations(rng, dist, (n, len(labels)))
    galaxies, ties = _realized_rows(labels, cs, z)
    for _ in range(32):
        if not ties.any():
            break
        redo = np.flatnonzero(ties)
        z[redo] = _draw_innovations(rng, dist, (len(redo), len(labels)))
        fixed, still = _realized_rows(labels, cs, z[redo])
        for off, r in enumerate(redo):
            galaxies[r] = fixed[off]
        ties[redo] = still
    if any(g is None for g in galaxies):
        raise RuntimeError("persistent float ties in realized impact graphs")
    x = _recursion_x(labels, edges, order, z)
    return SampleBatch(labels, seed, n, dist.family, z, x, tuple(galaxies), None)


def mc_impact_graphs(
    model: WeightedDag,
    n: int,
    dist: InnovationDist = InnovationDist.frechet(),
    seed: Optional[int] = 0,
) -> Counter:
    """Multiset of realized impact graphs over n iid draws."""
    batch = mc_sample_batch(model, n, dist, seed)
    assert batch.galaxies is not None
    return Counter(batch.galaxies)


def rejection_band_sampler(
    model: WeightedDag,
    context: Context,
    eps: float = 0.01,
    n: int = 1000,
    dist: InnovationDist = InnovationDist.frechet(),
    seed: Optional[int] = 0,
    max_draws: int = 20_000_000,
    rate_floor: float = 1e-5,
    chunk: int = 200_000,
) -> SampleBatch:
    """Approximate conditional draws: keep rows with every observed
    coordinate within relative eps of its target.

    Draws in chunks until n rows are accepted; raises Timeout when the
    budget is exhausted or the acceptance rate sits below the floor
    after a probing phase.
    """
    if eps <= 0:
        raise ValueError("band width must be positive")
    labels = model.labels
    edges = _float_edges(model)
    order = _local_topo(labels, edges)
    k_idx = [labels.index(k) for k in context.nodes]
    targets = np.array([float(context.value(k)) for k in context.nodes])
    rng = np.random.default_rng(seed)
    kept_z: list[np.ndarray] = []
    kept_x: list[np.ndarray] = []
    accepted = 0
    drawn = 0
    while accepted < n:
        if drawn >= max_draws:
            raise Timeout(
                f"{accepted}/{n} accepted after {drawn} draws; band too narrow"
            )
        if drawn >= 2_000_000 and accepted < rate_floor * drawn:
            raise Timeout(
                f"acceptance rate {accepted / drawn:.2e} under floor {rate_floor:.0e}"
            )
        m = min(chunk, max_draws - drawn)
        z = _draw_innovations(rng, dist, (m, len(labels)))
        x = _recursion_x(labels, edges, order, z)
        rel = np.abs(x[:, k_idx] / targets - 1.0)
        mask = np.all(rel <= eps, axis=1)
        drawn += m
        if mask.any():
            kept_z.append(z[mask])
            kept_x.append(x[mask])
            accepted += int(mask.sum())
    z_all = np.concatenate(kept_z)[:n]
    x_all = np.concatenate(kept_x)[:n]
    return SampleBatch(labels, seed, n, dist.family, z_all, x_all, None, accepted / drawn)


@dataclass(frozen=True)
class IndependenceResult:
    statistic: float
    p_value: float
    permutations: int

    def __float__(self) -> float:
        return self.p_value


def _centered_dists(v: np.ndarray) -> np.ndarray:
    d = np.abs(v[:, None] - v[None, :])
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def independence_test(
    xs: Union[Sequence[float], np.ndarray],
    ys: Union[Sequence[float], np.ndarray],
    permutations: int = 200,
    seed: Optional[int] = 0,
    max_points: int = 2000,
) -> IndependenceResult:
    """Permutation test of independence on paired samples.

    Distance-covariance V-statistic, which picks up dependence between
    mixed atomic/continuous marginals; the permutation null makes it
    exact-level.  Long inputs are thinned to max_points before the
    quadratic statistic.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("need two equally long 1-d samples")
    if len(x) < 200:
        raise ValueError("need at least 200 paired observations")
    if permutations < 200:
        raise ValueError("need at least 200 permutations")
    rng = np.random.default_rng(seed)
    if len(x) > max_points:
        pick = rng.choice(len(x), size=max_points, replace=False)
        x, y = x[pick], y[pick]
    a = _centered_dists(x)
    b = _centered_dists(y)
    stat = float((a * b).mean())
    hits = 0
    for _ in range(permutations):
        perm = rng.permutation(len(x))
        if float((a * b[np.ix_(perm, perm)]).mean()) >= stat:
            hits += 1
    return IndependenceResult(stat, (1 + hits) / (1 + permutations), permutations)


def holm(p_values: Sequence[float], alpha: float = 0.01) -> list[bool]:
    """Holm step-down rejections at family-wise level alpha."""
    m = len(p_values)
    order = sorted(range(m), key=lambda t: p_values[t])
    out = [False] * m
    for rank, t in enumerate(order):
        if p_values[t] > alpha / (m - rank):
            break
        out[t] = True
    return out
