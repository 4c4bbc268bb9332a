from fractions import Fraction
import random

import pytest

from maxlinci import (
    WeightedDag,
    conditional_reach_dag,
    critical_dag,
    dot_digraph,
    evaluate,
    reachability_dag,
)
from conftest import (
    brute_max_path_weight,
    dag,
    ones,
    random_dag,
    random_innovations,
    reach_without_interior,
    recursion_evaluate,
)

F = Fraction


class TestConstruction:
    def test_rejects_cycle(self):
        with pytest.raises(ValueError):
            ones("123", [(1, 2), (2, 3), (3, 1)])

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            ones("12", [(1, 1)])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ValueError):
            dag("12", [(1, 2, 1), (1, 2, 2)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError):
            dag("12", [(1, 2, 0)])

    def test_rejects_unknown_label(self):
        with pytest.raises(ValueError, match="undeclared"):
            dag("12", [(1, 3, 1)])

    def test_rejects_duplicate_labels(self):
        with pytest.raises(ValueError):
            WeightedDag(["1", "1"], [])

    def test_closure_support_is_ancestry(self):
        rng = random.Random(3)
        for _ in range(20):
            m = random_dag(rng, rng.randint(1, 6))
            cs = m.closure
            for i in range(m.n):
                assert cs[i, i] == 1
                for j in range(m.n):
                    if i == j:
                        continue
                    assert (cs[i, j] > 0) == (j in m.ancestors(i))

    def test_gamma_is_best_path_weight(self):
        rng = random.Random(7)
        for _ in range(15):
            m = random_dag(rng, rng.randint(2, 6), p=0.5)
            g = m.gamma
            for i in range(m.n):
                for j in range(m.n):
                    assert g[i, j] == brute_max_path_weight(m, j, i)


class TestEvaluate:
    def test_half_butterfly(self, half_butterfly):
        x = evaluate(half_butterfly, [2, 3, F(1, 10), F(2, 5), F(1, 5)])
        assert x == (2, 3, 2, 6, 12)

    def test_tent(self, tent):
        x = evaluate(tent, [2, 1, F(1, 2), F(1, 4), F(1, 4)])
        assert x == (2, 1, 2, 2, 2)

    def test_no_edges_is_identity(self):
        m = WeightedDag(["a", "b"], [])
        assert evaluate(m, [F(1, 3), 7]) == (F(1, 3), 7)

    def test_matches_recursion(self):
        rng = random.Random(13)
        for _ in range(30):
            m = random_dag(rng, rng.randint(1, 7))
            z = random_innovations(rng, m.n)
            assert evaluate(m, z) == recursion_evaluate(m, z)

    def test_idempotent_on_image(self):
        rng = random.Random(19)
        for _ in range(10):
            m = random_dag(rng, 5)
            x = evaluate(m, random_innovations(rng, 5))
            assert evaluate(m, x) == x

    def test_rejects_nonpositive(self, tent):
        with pytest.raises(ValueError):
            evaluate(tent, [1, 1, 1, 1, 0])

    def test_rejects_wrong_length(self, tent):
        with pytest.raises(ValueError):
            evaluate(tent, [1, 1])


class TestDerivedDags:
    def test_reachability_of_diamond(self, diamond):
        r = reachability_dag(diamond)
        assert r.has_edge("1", "4")
        assert not r.has_edge("4", "1")
        assert r.edges == {("1", "2"), ("1", "3"), ("1", "4"), ("2", "4"), ("3", "4")}

    def test_conditional_reach_keeps_detour(self, diamond):
        d = conditional_reach_dag(diamond, {"2"})
        assert d.has_edge("1", "4")  # via 3, which is unobserved
        assert d.has_edge("2", "4")

    def test_conditional_reach_empty_k(self, diamond):
        assert conditional_reach_dag(diamond, set()).edges == reachability_dag(diamond).edges

    def test_conditional_reach_direct_edges_survive(self, cassiopeia):
        d = conditional_reach_dag(cassiopeia, {"4", "5"})
        assert d.edges == {("1", "4"), ("2", "4"), ("2", "5"), ("3", "5")}

    def test_conditional_reach_matches_path_search(self):
        rng = random.Random(23)
        for _ in range(25):
            m = random_dag(rng, rng.randint(2, 7))
            k = {m.label(v) for v in range(m.n) if rng.random() < 0.3}
            assert conditional_reach_dag(m, k).edges == reach_without_interior(m, k)

    def test_critical_drops_dominated_edge(self, diamond):
        # closure weight 1 to 4 factors through 2 exactly, so the pair
        # is critical only via the conditioned node
        d = critical_dag(diamond, {"2"})
        assert not d.has_edge("1", "4")
        assert d.has_edge("3", "4")

    def test_critical_drops_bypassed_pair(self, pentagon):
        d = critical_dag(pentagon, {"4", "5"})
        assert not d.has_edge("1", "2")
        assert d.has_edge("1", "4")
        assert d.has_edge("3", "2")

    def test_critical_empty_k_is_reachability(self, pentagon):
        assert critical_dag(pentagon, set()).edges == reachability_dag(pentagon).edges

    def test_chain_of_inclusions(self):
        rng = random.Random(29)
        for _ in range(30):
            m = random_dag(rng, rng.randint(2, 7))
            k = {m.label(v) for v in range(m.n) if rng.random() < 0.35}
            crit = critical_dag(m, k).edges
            cond = conditional_reach_dag(m, k).edges
            reach = reachability_dag(m).edges
            assert crit <= cond <= reach


class TestDot:
    def test_digraph_text(self):
        text = dot_digraph(
            ["a", "b"],
            [("a", "b")],
            name="g",
            red={"a"},
            dashed=[("a", "b")],
        )
        assert text.startswith("digraph g {")
        assert '"a" [style=filled fillcolor="red"];' in text
        assert '"a" -> "b" [style=dashed];' in text
        assert text.endswith("}\n")

    def test_derived_dag_dot(self, diamond):
        text = critical_dag(diamond, {"2"}).dot(highlight={"2"})
        assert "digraph" in text and '"3" -> "4"' in text
