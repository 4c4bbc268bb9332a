from fractions import Fraction
import random

import pytest

from maxlinci import (
    Galaxy,
    TieDetected,
    TooLarge,
    TropMatrix,
    WeightedDag,
    cycle_compare_one,
    enumerate_impact_graphs,
    evaluate,
    impact_exchange,
    is_impact_graph,
    realized_impact_graph,
    restricted_kleene,
    trop_mul_vec,
)
from conftest import ones, random_dag, random_innovations

F = Fraction


def galaxy(model, *edges):
    return Galaxy.from_edges(model.labels, edges)


class TestGalaxy:
    def test_edges_roundtrip(self, tent):
        g = galaxy(tent, ("1", "3"), ("1", "4"))
        assert g.edges == {("1", "3"), ("1", "4")}
        assert g.roots == {"1", "2", "5"}
        assert g.star("1") == {"1", "3", "4"}
        assert g.root_of("3") == "1"
        assert g.root_of("2") == "2"

    def test_rejects_two_parents(self, tent):
        with pytest.raises(ValueError):
            galaxy(tent, ("1", "3"), ("2", "3"))

    def test_chained_parents_fail_forest_condition(self, half_butterfly):
        v = is_impact_graph(half_butterfly, galaxy(half_butterfly, ("1", "3"), ("3", "4")))
        assert not v.valid
        assert v.condition == "b"


class TestRealized:
    def test_half_butterfly_realization(self, half_butterfly):
        g = realized_impact_graph(half_butterfly, [2, 3, F(1, 10), F(2, 5), F(1, 5)])
        assert g.edges == {("1", "3"), ("1", "4"), ("2", "5")}

    def test_dominant_innovations_make_empty_galaxy(self, half_butterfly):
        g = realized_impact_graph(half_butterfly, [1, 1, 100, 10_000, 10_000])
        assert g.edges == frozenset()

    def test_bipartite_realization(self, bipartite):
        g = realized_impact_graph(bipartite, [1, F(1, 3), F(1, 4), F(1, 5)])
        assert g.edges == {("1", "3"), ("1", "4")}

    def test_exact_tie_raises(self, tent):
        with pytest.raises(TieDetected):
            realized_impact_graph(tent, [1, 1, F(1, 2), F(1, 2), F(1, 2)])

    def test_realizations_are_valid(self):
        rng = random.Random(47)
        for _ in range(40):
            m = random_dag(rng, rng.randint(1, 6))
            try:
                g = realized_impact_graph(m, random_innovations(rng, m.n))
            except TieDetected:
                continue
            assert is_impact_graph(m, g).valid


class TestExchange:
    def test_bipartite_crossing(self, bipartite):
        ex = impact_exchange(bipartite, galaxy(bipartite, ("1", "3"), ("2", "4")))
        assert ex.roots == ("1", "2")
        assert ex.matrix == TropMatrix([[0, 2], [2, 0]])

    def test_half_butterfly_realized(self, half_butterfly):
        g = galaxy(half_butterfly, ("1", "3"), ("1", "4"), ("2", "5"))
        ex = impact_exchange(half_butterfly, g)
        assert ex.matrix == TropMatrix([[0, F(1, 2)], [F(3, 4), 0]])

    def test_isolated_roots_give_zero(self, tent):
        ex = impact_exchange(tent, galaxy(tent))
        assert ex.matrix == TropMatrix.zero(5)


class TestValidity:
    def test_bipartite_crossing_fails_cycle_condition(self, bipartite):
        v = is_impact_graph(bipartite, galaxy(bipartite, ("1", "3"), ("2", "4")))
        assert not v.valid
        assert v.condition == "d"

    def test_half_butterfly_triangle_violation(self, half_butterfly):
        g = galaxy(half_butterfly, ("1", "4"), ("2", "5"), ("2", "3"))
        v = is_impact_graph(half_butterfly, g)
        assert not v.valid
        assert v.condition == "c"
        assert v.witness == ("1", "4", "3")

    def test_half_butterfly_valid_galaxy(self, half_butterfly):
        g = galaxy(half_butterfly, ("1", "3"), ("1", "4"), ("2", "5"))
        assert is_impact_graph(half_butterfly, g).valid

    def test_non_ancestor_parent_fails(self, tent):
        v = is_impact_graph(tent, galaxy(tent, ("3", "5")))
        assert not v.valid
        assert v.condition == "a"


class TestEnumeration:
    def test_bipartite_count(self, bipartite):
        assert len(enumerate_impact_graphs(bipartite)) == 8

    def test_single_node(self):
        m = WeightedDag(["v"], [])
        out = enumerate_impact_graphs(m)
        assert out == {Galaxy.from_edges(["v"], [])}

    def test_cassiopeia_shapes(self, cassiopeia):
        out = enumerate_impact_graphs(cassiopeia)
        assert len(out) == 9
        sizes = sorted(len(g.edges) for g in out)
        assert sizes == [0, 1, 1, 1, 1, 2, 2, 2, 2]

    def test_guard(self, tent):
        with pytest.raises(TooLarge):
            enumerate_impact_graphs(tent, guard=3)

    def test_enumerated_pass_validity(self, half_butterfly):
        for g in enumerate_impact_graphs(half_butterfly):
            assert is_impact_graph(half_butterfly, g).valid

    def test_every_valid_parent_map_is_enumerated(self):
        # exhaustive cross-check against unfiltered parent maps
        from itertools import product

        rng = random.Random(53)
        for _ in range(10):
            m = random_dag(rng, 4, p=0.6)
            choices = []
            for i in range(m.n):
                choices.append([None] + [m.label(j) for j in m.ancestors(i)])
            brute = set()
            for pick in product(*choices):
                parent = {
                    m.label(i): p for i, p in enumerate(pick) if p is not None
                }
                try:
                    g = Galaxy.from_parent_map(m.labels, parent)
                except ValueError:
                    continue
                if is_impact_graph(m, g).valid:
                    brute.add(g)
            assert brute == enumerate_impact_graphs(m)


class TestRestrictedKleene:
    def test_empty_galaxy_is_identity(self, bipartite):
        mat, rank = restricted_kleene(bipartite, galaxy(bipartite))
        assert mat == TropMatrix.identity(4)
        assert rank == 4

    def test_single_star(self, bipartite):
        g = galaxy(bipartite, ("1", "3"), ("1", "4"))
        mat, rank = restricted_kleene(bipartite, g)
        assert rank == 2
        assert mat == TropMatrix(
            [[1, 0, 0, 0], [0, 1, 0, 0], [F(1, 2), 0, 0, 0], [1, 0, 0, 0]]
        )

    def test_rank_counts_stars(self, half_butterfly):
        for g in enumerate_impact_graphs(half_butterfly):
            _, rank = restricted_kleene(half_butterfly, g)
            assert rank == len(g.roots)


class TestRealizationGeometry:
    def test_piecewise_linear_evaluation(self):
        # inside a realization region the full recursion collapses to
        # the one-term-per-row restricted star
        rng = random.Random(59)
        for _ in range(40):
            m = random_dag(rng, rng.randint(2, 6))
            z = random_innovations(rng, m.n)
            try:
                g = realized_impact_graph(m, z)
            except TieDetected:
                continue
            mat, _ = restricted_kleene(m, g)
            assert trop_mul_vec(mat, z) == evaluate(m, z)

    def test_exchange_subeigenvector_inequality(self):
        rng = random.Random(61)
        for _ in range(40):
            m = random_dag(rng, rng.randint(2, 6))
            z = random_innovations(rng, m.n)
            try:
                g = realized_impact_graph(m, z)
            except TieDetected:
                continue
            ex = impact_exchange(m, g)
            z_roots = [z[m.index(r)] for r in ex.roots]
            if not z_roots:
                continue
            out = trop_mul_vec(ex.matrix, z_roots)
            assert all(o <= v for o, v in zip(out, z_roots))
            assert cycle_compare_one(ex.matrix).ordering == "LT"
