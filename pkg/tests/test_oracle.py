from fractions import Fraction
import random

import numpy as np
import pytest

from maxlinci import (
    InnovationDist,
    Timeout,
    build_representation,
    conditional_sampler,
    enumerate_impact_graphs,
    evaluate,
    holm,
    independence_test,
    is_impact_graph,
    mc_impact_graphs,
    mc_sample_batch,
    realized_impact_graph,
    rejection_band_sampler,
)
from conftest import ctx, random_dag

F = Fraction


class TestSampleBatch:
    def test_rejects_empty(self, tent):
        with pytest.raises(ValueError):
            mc_sample_batch(tent, 0)

    def test_matches_exact_recursion(self, bipartite, umbrella):
        for model in (bipartite, umbrella):
            batch = mc_sample_batch(model, 20, seed=3)
            for row in range(batch.n):
                zf = [F(v) for v in batch.z[row]]
                exact = evaluate(model, zf)
                np.testing.assert_allclose(
                    batch.x[row], [float(v) for v in exact], rtol=1e-12
                )

    def test_realized_graphs_match_engine(self, cassiopeia):
        batch = mc_sample_batch(cassiopeia, 50, seed=9)
        for row in range(batch.n):
            zf = [F(v) for v in batch.z[row]]
            assert batch.galaxies[row] == realized_impact_graph(cassiopeia, zf)

    def test_seed_reproducible(self, bipartite):
        a = mc_sample_batch(bipartite, 40, seed=21)
        b = mc_sample_batch(bipartite, 40, seed=21)
        assert np.array_equal(a.z, b.z)
        assert a.galaxies == b.galaxies
        assert a.column("3").shape == (40,)


class TestMcImpactGraphs:
    def test_support_equals_enumeration(self, bipartite):
        counts = mc_impact_graphs(bipartite, 4000, seed=1)
        assert sum(counts.values()) == 4000
        assert set(counts) == set(enumerate_impact_graphs(bipartite))

    def test_realized_graphs_are_valid(self):
        rng = random.Random(41)
        for _ in range(5):
            m = random_dag(rng, rng.randint(2, 5))
            counts = mc_impact_graphs(m, 400, seed=rng.randint(0, 10**6))
            for g in counts:
                assert is_impact_graph(m, g).valid


class TestRejectionBand:
    def test_band_hits_targets(self, tent):
        c = ctx({4: 2, 5: 2})
        batch = rejection_band_sampler(tent, c, eps=0.02, n=300, seed=7)
        assert batch.n == 300 and batch.galaxies is None
        assert batch.acceptance_rate > 0
        for lab, target in (("4", 2.0), ("5", 2.0)):
            assert np.all(np.abs(batch.column(lab) / target - 1.0) <= 0.02)

    def test_unreachable_band_times_out(self, tent):
        # X_4 >= Z_1 = X_1 makes these two targets jointly unreachable
        c = ctx({1: 3, 4: 2})
        with pytest.raises(Timeout, match="band too narrow"):
            rejection_band_sampler(
                tent, c, eps=0.01, n=50, seed=1, max_draws=400_000, chunk=100_000
            )

    def test_rate_floor_times_out(self, tent):
        c = ctx({1: 3, 4: 2})
        with pytest.raises(Timeout, match="under floor"):
            rejection_band_sampler(
                tent, c, eps=0.01, n=50, seed=1, max_draws=4_000_000, chunk=500_000
            )

    def test_bad_eps(self, tent):
        with pytest.raises(ValueError):
            rejection_band_sampler(tent, ctx({4: 2, 5: 2}), eps=0.0)


class TestIndependenceTest:
    def test_null_calibration(self):
        rng = np.random.default_rng(101)
        rejections = 0
        for t in range(20):
            x = rng.standard_normal(500)
            y = rng.standard_normal(500)
            res = independence_test(x, y, permutations=200, seed=t)
            assert 0.0 < res.p_value <= 1.0
            if res.p_value <= 0.01:
                rejections += 1
        assert rejections <= 1

    def test_detects_identical_samples(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(400)
        res = independence_test(x, x, permutations=200, seed=0)
        assert res.p_value <= 0.005
        assert float(res) == res.p_value

    def test_detects_conditional_dependence(self, umbrella):
        # log first: distances between raw heavy-tailed draws are
        # dominated by the extremes and the statistic loses its power
        rep = build_representation(umbrella, ctx({6: 3, 7: 3}))
        s = conditional_sampler(rep, n=1000, seed=13)
        res = independence_test(
            np.log(s.column("2")), np.log(s.column("3")), seed=2, max_points=700
        )
        assert res.p_value <= 0.01

    def test_accepts_conditional_independence(self, tent):
        rep = build_representation(tent, ctx({4: 2, 5: 2}))
        rejections = 0
        for sd in range(8):
            s = conditional_sampler(rep, n=800, seed=300 + sd)
            res = independence_test(
                np.log(s.column("1")), np.log(s.column("3")), seed=sd, max_points=600
            )
            if res.p_value <= 0.01:
                rejections += 1
        assert rejections <= 1

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 200 paired"):
            independence_test([1.0] * 100, [1.0] * 100)
        with pytest.raises(ValueError, match="equally long"):
            independence_test([1.0] * 300, [1.0] * 301)
        with pytest.raises(ValueError, match="at least 200 permutations"):
            independence_test([1.0] * 300, [2.0] * 300, permutations=10)

    def test_thinning_and_determinism(self):
        rng = np.random.default_rng(23)
        x = rng.standard_normal(5000)
        y = rng.standard_normal(5000)
        a = independence_test(x, y, seed=6, max_points=400)
        b = independence_test(x, y, seed=6, max_points=400)
        assert a == b and a.permutations == 200


class TestHolm:
    def test_rejects_all_when_small(self):
        assert holm([0.001, 0.02, 0.03], alpha=0.05) == [True, True, True]

    def test_stops_at_first_surviving(self):
        assert holm([0.3, 0.001], alpha=0.05) == [False, True]
        assert holm([0.04, 0.03, 0.5], alpha=0.05) == [False, False, False]

    def test_empty(self):
        assert holm([]) == []
