import json
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from admgident import (
    MixedGraph,
    build_flow_network,
    cycle_decomposition_identifiable,
    cyclic_necessary_condition,
    genericity_sufficient,
    is_identifiable,
    is_identifiable_with_knowledge,
    is_matrix_identifiable,
    matrix_generically_identifiable,
    max_flow,
    random_admg,
    removable_ancestors,
    v_rank,
    witness_paths,
)
from admgident.errors import CyclicGraph, NotAParentSubset, NotCycleDecomposable
from admgident.ident import FlowNetwork
from figures import (
    confounded_diamond,
    confounded_feedback,
    double_confounder,
    factor_one_big_latent,
    factor_three_big_latents,
    half_identifiable_collider,
    iv_graph,
    k_cycle,
    two_cycle,
)


class TestRemovableAncestors:
    def test_diamond(self):
        g = confounded_diamond()
        assert removable_ancestors(g, "v2") == frozenset()
        assert removable_ancestors(g, "v4") == {"v1", "v2"}

    def test_collider(self):
        assert removable_ancestors(half_identifiable_collider(), "v4") == {"v2"}

    def test_never_contains_the_vertex(self):
        for g in (confounded_diamond(), double_confounder(), two_cycle()):
            for v in g.vertices:
                assert v not in removable_ancestors(g, v)


class TestFlowNetwork:
    def test_diamond_v2_structure(self):
        net = build_flow_network(confounded_diamond(), "v2", ["v1"])
        arcs = {(u, w) for u, w, _ in net.arcs}
        # no source arcs: the removable set is empty
        assert not any(u == net.source for u, w in arcs)
        assert ("v1.out", net.sink) in arcs
        assert max_flow(net) == 0

    def test_diamond_v4_structure(self):
        net = build_flow_network(confounded_diamond(), "v4", ["v2", "v3"])
        arcs = {(u, w) for u, w, _ in net.arcs}
        expected = {
            ("s", "v1.in"), ("s", "v2.in"),
            ("v1.out", "v2.in"), ("v1.out", "v3.in"),
            ("v2.out", "t"), ("v3.out", "t"),
            ("v1.in", "v1.out"), ("v2.in", "v2.out"), ("v3.in", "v3.out"),
        }
        assert arcs == expected
        assert max_flow(net) == 2

    def test_empty_target_set(self):
        net = build_flow_network(confounded_diamond(), "v4", [])
        assert max_flow(net) == 0

    def test_split_capacities_are_one(self):
        net = build_flow_network(confounded_diamond(), "v4", ["v2"])
        split_arcs = {(u, w): c for u, w, c in net.arcs}
        for _, nin, nout in net.splits:
            assert split_arcs[(nin, nout)] == 1

    def test_big_m_is_finite(self):
        net = build_flow_network(confounded_diamond(), "v4", ["v2", "v3"])
        assert all(c <= 5 for _, _, c in net.arcs)

    def test_not_a_parent_subset(self):
        with pytest.raises(NotAParentSubset):
            build_flow_network(confounded_diamond(), "v4", ["v1"])

    def test_hand_built_unit_network(self):
        net = FlowNetwork(
            nodes=("s", "t", "a.in", "a.out"),
            arcs=(("a.in", "a.out", 1), ("s", "a.in", 9), ("a.out", "t", 9)),
            source="s",
            sink="t",
            splits=(("a", "a.in", "a.out"),),
        )
        assert max_flow(net) == 1


class TestVRank:
    def test_diamond_full_rank(self):
        assert v_rank(confounded_diamond(), "v4", ["v2", "v3"]) == 2

    def test_collider_deficient(self):
        assert v_rank(half_identifiable_collider(), "v4", ["v2", "v3"]) == 1

    def test_no_removable_ancestors(self):
        assert v_rank(confounded_diamond(), "v2", ["v1"]) == 0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_monotone_in_targets(self, seed):
        g = random_admg(4, 0.6, seed)
        for v in g.vertices:
            pa = g.parents(v)
            removable = removable_ancestors(g, v)
            full = v_rank(g, v, pa)
            for size in range(len(pa) + 1):
                for q in combinations(pa, size):
                    r = v_rank(g, v, q)
                    assert r <= min(len(removable), len(q))
                    assert r <= full <= r + len(pa) - len(q)


class TestLocalCriterion:
    def test_diamond_first_column_not_identifiable(self):
        assert not is_identifiable(confounded_diamond(), "v2", ["v1"])

    def test_collider_split_verdicts(self):
        g = half_identifiable_collider()
        assert is_identifiable(g, "v4", ["v2"])
        assert not is_identifiable(g, "v4", ["v3"])

    def test_iv_graph(self):
        g = iv_graph()
        assert is_identifiable(g, "v2", ["v1"])
        assert is_identifiable(g, "v3", ["v2"])

    def test_cyclic_input_rejected(self):
        with pytest.raises(CyclicGraph):
            is_identifiable(two_cycle(), "v1", ["v2"])


class TestKnowledgeCriterion:
    def test_empty_knowledge_reduces_to_plain(self):
        for seed in range(30):
            g = random_admg(4, 0.7, seed)
            for v in g.vertices:
                pa = g.parents(v)
                for size in range(len(pa) + 1):
                    for q in combinations(pa, size):
                        assert is_identifiable_with_knowledge(g, v, q, []) == is_identifiable(g, v, q)

    def test_known_parameters_are_identifiable(self):
        g = half_identifiable_collider()
        assert is_identifiable_with_knowledge(g, "v4", ["v2"], ["v2", "v3"])
        assert is_identifiable_with_knowledge(g, "v4", ["v3"], ["v3"])

    def test_collider_knowledge_does_not_rescue(self):
        # knowing the v2 coefficient adds no directed path into v3
        assert not is_identifiable_with_knowledge(
            half_identifiable_collider(), "v4", ["v3"], ["v2"]
        )


class TestMatrixReport:
    def test_diamond_report(self):
        report = is_matrix_identifiable(confounded_diamond())
        assert not report.all_identifiable
        assert report.edges == {
            ("v1", "v2"): False,
            ("v1", "v3"): True,
            ("v2", "v4"): True,
            ("v3", "v4"): True,
        }
        assert report.columns["v4"].identifiable
        assert report.columns["v4"].rank == 2
        assert not report.columns["v2"].identifiable

    def test_double_confounder_all_identifiable(self):
        report = is_matrix_identifiable(double_confounder())
        assert report.all_identifiable
        assert all(report.edges.values())

    def test_dag_without_confounding_identifiable(self):
        g = MixedGraph(["a", "b", "c"], [("a", "b"), ("a", "c"), ("b", "c")])
        assert matrix_generically_identifiable(g)

    def test_witnesses_are_disjoint_paths(self):
        g = confounded_diamond()
        report = is_matrix_identifiable(g)
        col = report.columns["v4"]
        used = set()
        targets = []
        for path in col.witness:
            assert removable_ancestors(g, "v4") >= {path[0]}
            for a, b in zip(path, path[1:]):
                assert (a, b) in set(g.directed)
            assert not used & set(path)
            used |= set(path)
            targets.append(path[-1])
        assert sorted(targets) == ["v2", "v3"]

    def test_deterministic_reports(self):
        a = is_matrix_identifiable(confounded_diamond())
        b = is_matrix_identifiable(confounded_diamond())
        assert a == b

    def test_report_json_shape(self):
        doc = json.loads(is_matrix_identifiable(confounded_diamond()).to_json())
        assert set(doc) == {"columns", "edges"}
        assert doc["edges"]["v2->v4"] is True
        assert doc["columns"]["v4"]["removable"] == ["v1", "v2"]
        assert doc["columns"]["v4"]["witness"] == [["v1", "v3"], ["v2"]]

    def test_fast_path_agrees_with_report(self):
        for seed in range(40):
            g = random_admg(5, 0.5, seed)
            assert matrix_generically_identifiable(g) == is_matrix_identifiable(g).all_identifiable


class TestCyclicChecks:
    def test_feedback_graph_fails_at_v2(self):
        verdicts = cyclic_necessary_condition(confounded_feedback())
        assert verdicts == {"v1": True, "v2": False, "v3": True}

    def test_two_cycle_passes_necessary_condition(self):
        assert all(cyclic_necessary_condition(two_cycle()).values())

    def test_dag_matches_column_verdicts(self):
        for seed in range(20):
            g = random_admg(4, 0.6, seed)
            report = is_matrix_identifiable(g)
            necessary = cyclic_necessary_condition(g)
            for v in g.vertices:
                assert necessary[v] == report.columns[v].identifiable


class TestCycleDecomposition:
    def test_two_cycle_not_identifiable(self):
        assert not cycle_decomposition_identifiable(two_cycle())

    @pytest.mark.parametrize("k", [3, 4, 5])
    def test_longer_cycles_identifiable(self, k):
        assert cycle_decomposition_identifiable(k_cycle(k))

    def test_fed_two_cycle_with_shared_parents_flips(self):
        # both members read the same outside parent, so the cycle reversal
        # extends to a second valid parameterization
        g = MixedGraph(
            ["a", "b", "c", "x", "y"],
            [("a", "b"), ("b", "c"), ("c", "a"), ("x", "y"), ("y", "x"), ("a", "x"), ("a", "y")],
        )
        assert not cycle_decomposition_identifiable(g)

    def test_fed_two_cycle_with_distinct_parents_identifiable(self):
        g = MixedGraph(
            ["a", "b", "c", "x", "y"],
            [("a", "b"), ("b", "c"), ("c", "a"), ("x", "y"), ("y", "x"), ("a", "x")],
        )
        assert cycle_decomposition_identifiable(g)

    def test_bidirected_edges_not_decomposable(self):
        with pytest.raises(NotCycleDecomposable):
            cycle_decomposition_identifiable(confounded_feedback())

    def test_singleton_component_not_decomposable(self):
        g = MixedGraph(["a", "x", "y"], [("a", "x"), ("x", "y"), ("y", "x")])
        with pytest.raises(NotCycleDecomposable):
            cycle_decomposition_identifiable(g)

    def test_chorded_component_not_a_simple_cycle(self):
        vs = ["a", "b", "c", "d"]
        g = MixedGraph(vs, [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a"), ("a", "c"), ("c", "a")])
        with pytest.raises(NotCycleDecomposable):
            cycle_decomposition_identifiable(g)


class TestGenericitySufficient:
    def test_big_latent_fails_at_inner_edge(self):
        verdicts = genericity_sufficient(factor_one_big_latent())
        assert verdicts[("v2", "v3")] is False
        assert verdicts[("v4", "v5")] is True

    def test_three_big_latents_pass_everywhere(self):
        verdicts = genericity_sufficient(factor_three_big_latents())
        assert verdicts and all(verdicts.values())

    def test_one_latent_two_children(self):
        from admgident import LatentFactorGraph

        l = LatentFactorGraph(["a", "b"], ["l"], [("l", "a"), ("l", "b")])
        assert genericity_sufficient(l) == {("a", "b"): True}
