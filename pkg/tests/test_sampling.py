import logging

import numpy as np
import pytest
from scipy import stats

from grnformer.encoder import n_replaced, perturb_grn, random_grn, random_perturb_grn, sample_neighbors
from grnformer.grn.network import build_co_expression_graph
from grnformer.models import CoExpressionGraph, Edge, EdgeProvenance, Grn, GrnScale


def star(n_targets):
    edges = tuple(Edge(0, t) for t in range(1, n_targets + 1))
    return Grn(GrnScale.CELL, edges, "star", n_targets + 1, frozenset({0}))


class TestSampleNeighbors:
    def test_isolated_node(self, make_grn):
        grn = make_grn([(0, 2)], "x")
        assert sample_neighbors(grn, 5, 10, np.random.default_rng(0)).size == 0
        assert sample_neighbors(grn, 5, 10, np.random.default_rng(0), with_replacement=True).size == 0

    def test_small_neighborhood_returned_whole(self):
        grn = star(3)
        assert sorted(sample_neighbors(grn, 0, 10, np.random.default_rng(0))) == [1, 2, 3]

    def test_neighborhood_is_undirected(self):
        assert list(sample_neighbors(star(3), 2, 10, np.random.default_rng(0))) == [0]

    def test_distinct_fixed_size_sample(self):
        sample = sample_neighbors(star(100), 0, 10, np.random.default_rng(1))
        assert sample.size == 10 and len(set(sample.tolist())) == 10

    def test_with_replacement_draws_exactly(self):
        sample = sample_neighbors(star(3), 0, 10, np.random.default_rng(1), with_replacement=True)
        assert sample.size == 10 and set(sample.tolist()) <= {1, 2, 3}

    def test_uniform_over_neighbors(self):
        grn = star(100)
        rng = np.random.default_rng(12345)
        counts = np.zeros(101)
        for _ in range(10_000):
            np.add.at(counts, sample_neighbors(grn, 0, 10, rng), 1)
        assert counts[0] == 0
        assert stats.chisquare(counts[1:]).pvalue > 0.01


def test_n_replaced():
    assert n_replaced(0.2, 10) == 2
    assert n_replaced(0.2, 4) == 0
    assert n_replaced(0.0, 100) == 0
    assert n_replaced(0.3, 10) == 3


class TestPerturbGrn:
    def test_alpha_zero_is_identity(self, type_grns):
        co = build_co_expression_graph(np.ones(8), 8, "c0")
        grn = type_grns["A"]
        assert perturb_grn(grn, co, 0.0, np.random.default_rng(0)) is grn

    def test_ten_edges_swap_two(self, type_grns):
        grn = type_grns["A"]
        co = build_co_expression_graph(np.ones(8), 8, "c0")
        out = perturb_grn(grn, co, 0.2, np.random.default_rng(3))
        assert len(out) == 10
        assert len(grn.pairs - out.pairs) == 2
        added = [e for e in out.edges if e.pair not in grn.pairs]
        assert len(added) == 2
        assert all(e.provenance == EdgeProvenance.COEXPRESSION and e.weight == 1.0 for e in added)

    def test_set_algebra_over_random_graphs(self):
        rng = np.random.default_rng(2024)
        n_genes, tfs = 30, frozenset(range(5))
        for trial in range(1000):
            n_edges = int(rng.integers(5, 41))
            source = random_grn(n_edges, n_genes, tfs, rng, f"g{trial}", GrnScale.CELL)
            active = np.sort(rng.choice(n_genes, size=15, replace=False))
            co = CoExpressionGraph(f"c{trial}", active)
            alpha = float(rng.choice([0.1, 0.2, 0.5]))
            out = perturb_grn(source, co, alpha, rng)

            k = n_replaced(alpha, len(source))
            removed = source.pairs - out.pairs
            added = out.pairs - source.pairs
            assert len(out) == len(source)
            assert len(removed) == k and len(added) == k
            co_pairs = {tuple(p) for p in co.pairs().tolist()}
            added_undirected = {(min(u, v), max(u, v)) for u, v in added}
            assert added_undirected <= co_pairs
            assert not added_undirected & source.undirected_pairs
            for e in out.edges:
                if e.pair in added and (e.source in tfs) != (e.target in tfs):
                    assert e.source in tfs

    def test_too_few_pairs_warns(self, type_grns, caplog):
        grn = type_grns["A"]
        co = CoExpressionGraph("c0", np.array([2, 7]))
        with caplog.at_level(logging.WARNING):
            out = perturb_grn(grn, co, 0.2, np.random.default_rng(0))
        assert len(out) == 9
        assert "replacement edges" in caplog.text

    def test_large_clique_is_sampled_by_index(self, monkeypatch):
        def listed(self):
            raise AssertionError("clique was listed")

        monkeypatch.setattr(CoExpressionGraph, "pairs", listed)
        n_genes = 5000
        source = random_grn(40, n_genes, frozenset(range(5)), np.random.default_rng(1), "g", GrnScale.CELL)
        active = np.arange(0, n_genes, 2)
        out = perturb_grn(source, CoExpressionGraph("c0", active), 0.5, np.random.default_rng(2))
        added = out.pairs - source.pairs
        assert len(out) == len(source) and len(added) == 20
        active_set = set(active.tolist())
        assert all(u in active_set and v in active_set for u, v in added)
        assert not {(min(u, v), max(u, v)) for u, v in added} & source.undirected_pairs

    def test_deterministic_given_seed(self, type_grns):
        co = build_co_expression_graph(np.ones(8), 8, "c0")
        first = perturb_grn(type_grns["B"], co, 0.5, np.random.default_rng(9))
        second = perturb_grn(type_grns["B"], co, 0.5, np.random.default_rng(9))
        assert first == second


class TestRandomVariants:
    def test_random_perturbation_preserves_count(self, type_grns):
        grn = type_grns["A"]
        out = random_perturb_grn(grn, 0.5, np.random.default_rng(0))
        assert len(out) == len(grn)
        added = [e for e in out.edges if e.pair not in grn.pairs]
        assert len(added) == 5
        assert all(e.provenance == EdgeProvenance.RANDOM for e in added)

    def test_random_grn(self):
        tfs = frozenset({0, 1, 2})
        grn = random_grn(25, 20, tfs, np.random.default_rng(4), "r", GrnScale.CELL_TYPE)
        assert len(grn) == 25
        assert all(e.source in tfs for e in grn.edges)
        assert grn == random_grn(25, 20, tfs, np.random.default_rng(4), "r", GrnScale.CELL_TYPE)

    def test_random_grn_caps_at_capacity(self):
        grn = random_grn(100, 4, frozenset({0}), np.random.default_rng(0), "r", GrnScale.CELL)
        assert len(grn) == 3
