"""Conditional law of the active nodes given an exact observation.

The observation freezes part of the network and leaves a max-linear
system over the remaining innovations: per-node constants, truncation
caps on single innovations, and one max-equation per dependency block.
This module builds those pieces exactly and samples from the resulting
conditional distribution with the achieved terms pinned as rationals.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .context import Context, Partition, analyze, partition as node_partition
from .network import WeightedDag
from .trop import Rat


class DegenerateBlock(ValueError):
    """Every term of a block equation is capped below its target value."""


@dataclass(frozen=True)
class BasicRepresentation:
    """Uncompacted conditional system: every closure term, no pruning.

    rows maps each unobserved node to its observed floor and innovation
    terms; constraints holds one max-equation per observed node pinning
    it to its observed value.
    """

    observed: tuple[str, ...]
    rows: tuple[tuple[str, Rat, tuple[tuple[str, Rat], ...]], ...]
    constraints: tuple[tuple[str, Rat, tuple[tuple[str, Rat], ...]], ...]


def basic_representation(model: WeightedDag, context: Context) -> BasicRepresentation:
    cs = model.closure
    obs = context.nodes
    rows = []
    for a in model.labels:
        if a in obs:
            continue
        ai = model.index(a)
        floor = max(
            (cs[ai, model.index(k)] * context.value(k) for k in obs),
            default=Fraction(0),
        )
        terms = tuple(
            (b, cs[ai, model.index(b)])
            for b in model.labels
            if b not in obs and cs[ai, model.index(b)] > 0
        )
        rows.append((a, floor, terms))
    constraints = []
    for k in obs:
        ki = model.index(k)
        terms = tuple(
            (b, cs[ki, model.index(b)])
            for b in model.labels
            if cs[ki, model.index(b)] > 0
        )
        constraints.append((k, context.value(k), terms))
    return BasicRepresentation(obs, tuple(rows), tuple(constraints))


@dataclass(frozen=True)
class Bound:
    """Cap on one innovation: Z of label never exceeds cap in the context.

    needed_for_active is False for caps on linked or tied nodes; those
    further describe Z but leave the law of the active nodes alone.
    """

    label: str
    cap: Rat
    needed_for_active: bool


@dataclass(frozen=True)
class ZBlock:
    """One max-equation: value = max over terms coeff * Z_label.

    constants lists the frozen nodes the equation accounts for; has_self
    marks equations carrying the (label, 1) term of the node itself.
    """

    constants: tuple[str, ...]
    value: Rat
    terms: tuple[tuple[str, Rat], ...]
    has_self: bool

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.terms)


@dataclass(frozen=True)
class CondRepresentation:
    """Exact description of X_active given the observation."""

    labels: tuple[str, ...]
    context: Context
    partition: Partition
    alpha: tuple[tuple[str, Rat], ...]
    parents: tuple[tuple[str, tuple[tuple[str, Rat], ...]], ...]
    bounds: tuple[Bound, ...]
    blocks: tuple[ZBlock, ...]

    def alpha_of(self, label: str) -> Rat:
        for lab, val in self.alpha:
            if lab == label:
                return val
        raise KeyError(f"{label!r} is not active in this context")

    def parents_of(self, label: str) -> tuple[tuple[str, Rat], ...]:
        for lab, terms in self.parents:
            if lab == label:
                return terms
        raise KeyError(f"{label!r} is not active in this context")

    def bound_of(self, label: str) -> Optional[Rat]:
        for b in self.bounds:
            if b.label == label:
                return b.cap
        return None


def _caps(model: WeightedDag, frozen: Mapping[str, Rat]) -> dict[str, Rat]:
    cs = model.closure
    caps: dict[str, Rat] = {}
    for i, lab in enumerate(model.labels):
        vals = [
            xk / cs[model.index(k), i]
            for k, xk in frozen.items()
            if cs[model.index(k), i] > 0
        ]
        if vals:
            caps[lab] = min(vals)
    return caps


def build_representation(model: WeightedDag, context: Context) -> CondRepresentation:
    a = analyze(model, context)
    part = node_partition(model, context)
    cs = model.closure
    frozen = a.frozen
    src_parents = {
        lab: tuple(j for j in model.labels if (j, lab) in a.source_edges)
        for lab in model.labels
    }
    hl = set(part.self_sourced) | set(part.linked)

    alpha = []
    for x in part.active:
        xi = model.index(x)
        best = Fraction(0)
        for k, xk in frozen.items():
            best = max(best, cs[xi, model.index(k)] * xk)
        for j, i in a.total_impact - a.source_edges:
            if i != x or j in frozen:
                continue
            ji = model.index(j)
            for k in model.children(ji):
                klab = model.label(k)
                if klab in hl:
                    best = max(best, cs[xi, ji] * frozen[klab] / cs[k, ji])
        alpha.append((x, best))

    parents = tuple(
        (x, tuple((j, cs[model.index(x), model.index(j)]) for j in src_parents[x]))
        for x in part.active
    )

    caps = _caps(model, frozen)
    block_specs = [((h,), True) for h in part.self_sourced]
    block_specs += [(blk, False) for blk in part.blocks]
    blocks = []
    for constants, has_self in block_specs:
        rep = constants[0]
        value = frozen[rep]
        raw = [(rep, Fraction(1))] if has_self else []
        raw += [(j, cs[model.index(rep), model.index(j)]) for j in src_parents[rep]]
        kept = []
        for lab, coeff in raw:
            target = value / coeff
            cap = caps.get(lab)
            if cap is not None and cap < target:
                continue  # capped out; cannot achieve the block value
            kept.append((lab, coeff))
        if not kept:
            raise DegenerateBlock(
                f"no term can reach {value} in the block of {rep!r}"
            )
        blocks.append(ZBlock(tuple(constants), value, tuple(kept), has_self))

    relevant = set(part.active) | set(part.self_sourced)
    bounds = tuple(
        Bound(lab, caps[lab], lab in relevant)
        for lab in model.labels
        if lab in caps
    )
    return CondRepresentation(
        labels=model.labels,
        context=context,
        partition=part,
        alpha=tuple(alpha),
        parents=parents,
        bounds=bounds,
        blocks=tuple(blocks),
    )


def z_dependency_blocks(model: WeightedDag, context: Context) -> tuple[ZBlock, ...]:
    """The max-equations tying innovations together, one per block.

    Blocks never share a variable, so the conditional law factorizes
    across them; everything outside is at most truncated, never tied.
    """
    return build_representation(model, context).blocks


def atoms_of(model: WeightedDag, context: Context, label: str) -> frozenset[Rat]:
    """Support of the atomic part of one active node's conditional law."""
    rep = build_representation(model, context)
    if label not in rep.partition.active:
        raise ValueError(f"{label!r} is not active in this context")
    a = analyze(model, context)
    cs = model.closure
    src_parents = {
        lab: {j for j, i in a.source_edges if i == lab} for lab in model.labels
    }
    pts = set()
    av = rep.alpha_of(label)
    if av > 0:
        pts.add(av)
    hl = set(rep.partition.self_sourced) | set(rep.partition.linked)
    for k in hl:
        for j in src_parents[label] & src_parents[k]:
            pts.add(
                cs[model.index(label), model.index(j)]
                * a.frozen[k]
                / cs[model.index(k), model.index(j)]
            )
    return frozenset(pts)


@dataclass(frozen=True)
class InnovationDist:
    """Innovation family on (0, oo) with exact-enough cdf, pdf, quantile.

    The Pareto family is the shifted (Lomax) form so its support starts
    at zero like the others.
    """

    family: str
    params: tuple[float, ...] = ()

    @classmethod
    def frechet(cls) -> "InnovationDist":
        return cls("frechet")

    @classmethod
    def lognormal(cls, mu: float = 0.0, sigma: float = 1.0) -> "InnovationDist":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls("lognormal", (mu, sigma))

    @classmethod
    def pareto(cls, alpha: float = 2.0) -> "InnovationDist":
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        return cls("pareto", (alpha,))

    @classmethod
    def named(cls, name: str) -> "InnovationDist":
        table = {
            "frechet": cls.frechet,
            "lognormal": cls.lognormal,
            "pareto": cls.pareto,
        }
        if name not in table:
            raise ValueError(f"unknown innovation family {name!r}")
        return table[name]()

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        if self.family == "frechet":
            return math.exp(-1.0 / x)
        if self.family == "lognormal":
            mu, sigma = self.params
            return statistics.NormalDist(mu, sigma).cdf(math.log(x))
        alpha = self.params[0]
        return 1.0 - (1.0 + x) ** (-alpha)

    def pdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        if self.family == "frechet":
            return math.exp(-1.0 / x) / (x * x)
        if self.family == "lognormal":
            mu, sigma = self.params
            return statistics.NormalDist(mu, sigma).pdf(math.log(x)) / x
        alpha = self.params[0]
        return alpha * (1.0 + x) ** (-alpha - 1.0)

    def quantile(self, u: float) -> float:
        if not 0.0 < u < 1.0:
            raise ValueError("quantile argument must lie strictly in (0, 1)")
        if self.family == "frechet":
            return -1.0 / math.log(u)
        if self.family == "lognormal":
            mu, sigma = self.params
            return math.exp(statistics.NormalDist(mu, sigma).inv_cdf(u))
        alpha = self.params[0]
        return (1.0 - u) ** (-1.0 / alpha) - 1.0


DistSpec = Union[InnovationDist, Mapping[str, InnovationDist]]


def _dist_for(dist: DistSpec, label: str) -> InnovationDist:
    if isinstance(dist, InnovationDist):
        return dist
    return dist[label]


@dataclass
class ConditionalSample:
    """Joint draws of innovations and node values given the observation.

    z and x are float matrices in label order.  Achieved block terms are
    float-rounded in z but recorded exactly; exact_row returns the pinned
    rationals for one draw.
    """

    labels: tuple[str, ...]
    z: np.ndarray
    x: np.ndarray
    _pins: list[dict[str, Fraction]]

    @property
    def n(self) -> int:
        return self.z.shape[0]

    def exact_row(self, row: int) -> dict[str, Fraction]:
        return dict(self._pins[row])

    def column(self, label: str) -> np.ndarray:
        return self.x[:, self.labels.index(label)]


def _float_below(value: Rat) -> float:
    """Largest convenient float strictly below an exact rational."""
    f = float(value)
    while Fraction(f) >= value:
        f = math.nextafter(f, 0.0)
    return f


def _float_at_most(value: Rat) -> float:
    f = float(value)
    while Fraction(f) > value:
        f = math.nextafter(f, 0.0)
    return f


def _draw_truncated(
    rng: np.random.Generator, dist: InnovationDist, cap: float
) -> float:
    """Sample strictly inside (0, cap); redraw on float collisions."""
    mass = dist.cdf(cap)
    for _ in range(64):
        v = dist.quantile(rng.random() * mass) if mass > 0 else cap * rng.random()
        if 0.0 < v < cap:
            return v
    return cap * 0.5


def _draw_plain(rng: np.random.Generator, dist: InnovationDist) -> float:
    for _ in range(64):
        u = rng.random()
        if 0.0 < u < 1.0:
            v = dist.quantile(u)
            if v > 0.0 and math.isfinite(v):
                return v
    raise AssertionError("innovation draw kept degenerating")


def conditional_sampler(
    rep: CondRepresentation,
    dist: DistSpec = InnovationDist.frechet(),
    n: int = 1,
    seed: Optional[int] = 0,
) -> ConditionalSample:
    """Exact-conditional joint sampler for (Z, X) given the observation.

    Each block equation is disintegrated over which term achieves it:
    the achiever is pinned at its exact target, the remaining block
    variables are truncated strictly below theirs, and everything else
    is truncated at its cap or drawn freely.  Float truncation points
    are nudged below their rationals, so rationalized draws satisfy the
    strict inequalities exactly, not just up to rounding.
    """
    if n <= 0:
        raise ValueError("sample count must be positive")
    part = rep.partition
    frozen = dict(part.values)
    rng = np.random.default_rng(seed)
    labels = rep.labels
    d = len(labels)
    col = {lab: t for t, lab in enumerate(labels)}

    block_meta = []
    for blk in rep.blocks:
        terms = []
        for lab, coeff in blk.terms:
            target = blk.value / coeff
            terms.append((lab, coeff, target, float(target), _float_below(target)))
        block_meta.append(terms)
    block_vars = {lab for terms in block_meta for lab, *_ in terms}
    capped = {
        b.label: _float_at_most(b.cap)
        for b in rep.bounds
        if b.label not in block_vars
    }
    free = [lab for lab in labels if lab not in capped and lab not in block_vars]

    z = np.empty((n, d))
    pins: list[dict[str, Fraction]] = []
    for row in range(n):
        row_pins: dict[str, Fraction] = {}
        for terms in block_meta:
            weights = []
            for t, (lab, coeff, target, ftarget, _) in enumerate(terms):
                w = _dist_for(dist, lab).pdf(ftarget) / float(coeff)
                for s, (slab, _, _, sftarget, _) in enumerate(terms):
                    if s != t:
                        w *= _dist_for(dist, slab).cdf(sftarget)
                weights.append(w)
            total = sum(weights)
            if total <= 0.0 or not math.isfinite(total):
                probs = [1.0 / len(terms)] * len(terms)
            else:
                probs = [w / total for w in weights]
            pick = rng.choice(len(terms), p=probs)
            for t, (lab, coeff, target, ftarget, fbelow) in enumerate(terms):
                if t == pick:
                    z[row, col[lab]] = ftarget
                    row_pins[lab] = target
                else:
                    z[row, col[lab]] = _draw_truncated(rng, _dist_for(dist, lab), fbelow)
        for lab, fcap in capped.items():
            z[row, col[lab]] = _draw_truncated(rng, _dist_for(dist, lab), fcap)
        for lab in free:
            z[row, col[lab]] = _draw_plain(rng, _dist_for(dist, lab))
        pins.append(row_pins)

    x = np.empty((n, d))
    for lab in labels:
        t = col[lab]
        if lab in frozen:
            x[:, t] = float(frozen[lab])
            continue
        vals = np.maximum(float(rep.alpha_of(lab)), z[:, t])
        for j, coeff in rep.parents_of(lab):
            vals = np.maximum(vals, float(coeff) * z[:, col[j]])
        x[:, t] = vals
    return ConditionalSample(labels, z, x, pins)
