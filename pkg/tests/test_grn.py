import numpy as np
import pytest

from grnformer.errors import ContractError, DataError, ParseError, ShapeError
from grnformer.grn.io import (
    read_coordinates,
    read_edge_list,
    read_enhancers,
    read_eregulons,
    write_coordinates,
    write_edge_list,
    write_enhancers,
    write_eregulons,
)
from grnformer.grn.network import (
    build_co_expression_graph,
    degree_stats,
    grn_from_eregulons,
    link_eregulon,
    merge_grns,
    pearson,
)
from grnformer.models import (
    Edge,
    ERegulon,
    ExpressionMatrix,
    GeneVocabulary,
    GenomicPosition,
    Grn,
    GrnScale,
    Region,
)

LINK_GENES = ("TF", "NEAR", "FAR", "FLAT", "OTHERCHR", "UNCORR", "ANTI")


@pytest.fixture
def link_setup():
    coordinates = {
        "TF": GenomicPosition("chr1", 500_000),
        "NEAR": GenomicPosition("chr1", 1_100_500),
        "FAR": GenomicPosition("chr1", 1_200_501),
        "FLAT": GenomicPosition("chr1", 1_000_200),
        "OTHERCHR": GenomicPosition("chr2", 1_000_200),
        "UNCORR": GenomicPosition("chr1", 999_000),
        "ANTI": GenomicPosition("chr1", 1_050_000),
    }
    vocab = GeneVocabulary(LINK_GENES, frozenset({"TF"}), coordinates)
    tf = np.array([1.0, 2.0, 3.0, 4.0])
    columns = {
        "TF": tf,
        "NEAR": 2 * tf,
        "FAR": tf + 1,
        "FLAT": np.full(4, 2.0),
        "OTHERCHR": tf,
        "UNCORR": np.array([1.0, 0.0, 0.0, 1.0]),
        "ANTI": 5 - tf,
    }
    values = np.column_stack([columns[g] for g in LINK_GENES])
    expression = ExpressionMatrix(values, ("a", "b", "c", "d"), LINK_GENES)
    enhancers = (Region("chr1", 1_000_000, 1_000_500),)
    return vocab, expression, enhancers


class TestLinkEregulon:
    def test_proximity_and_correlation(self, link_setup):
        vocab, expression, enhancers = link_setup
        regulon = link_eregulon(0, enhancers, range(1, len(vocab)), vocab, expression)
        assert regulon.name == "TF_regulon"
        assert [vocab.genes[t] for t in regulon.target_indices] == ["NEAR", "ANTI"]
        weights = dict(regulon.targets)
        assert weights[vocab.index("NEAR")] == pytest.approx(1.0)
        assert weights[vocab.index("ANTI")] == pytest.approx(-1.0)

    def test_wider_window_admits_far_gene(self, link_setup):
        vocab, expression, enhancers = link_setup
        regulon = link_eregulon(0, enhancers, [2], vocab, expression, proximity_kb=250)
        assert regulon.target_indices == (2,)

    def test_requires_tf(self, link_setup):
        vocab, expression, enhancers = link_setup
        with pytest.raises(ContractError):
            link_eregulon(1, enhancers, [2], vocab, expression)


def test_pearson_constant_is_zero():
    assert pearson(np.ones(5), np.arange(5.0)) == 0.0
    assert pearson(np.arange(5.0), np.arange(5.0) * 3) == pytest.approx(1.0)


class TestGrnAssembly:
    def test_max_weight_merge(self):
        a = ERegulon("a", 0, (), ((2, 0.4), (3, -0.9)))
        b = ERegulon("b", 0, (), ((2, -0.7),))
        grn = grn_from_eregulons([a, b], GrnScale.CELL_TYPE, "T", 4, {0})
        assert {e.pair: e.weight for e in grn.edges} == {(0, 2): 0.7, (0, 3): 0.9}

    def test_needs_regulons(self):
        with pytest.raises(ContractError):
            grn_from_eregulons([], GrnScale.CELL_TYPE, "T", 4, {0})

    @pytest.mark.parametrize("tfs", [frozenset(), {1}])
    def test_regulon_tf_must_be_declared(self, tfs):
        regulon = ERegulon("a", 0, (), ((2, 0.4),))
        with pytest.raises(DataError, match="TF"):
            grn_from_eregulons([regulon], GrnScale.CELL_TYPE, "T", 4, tfs)

    def test_merge_first_occurrence_wins(self, make_grn):
        first = Grn(GrnScale.CELL_TYPE, (Edge(0, 2, 0.5),), "A", 8, frozenset({0, 1}))
        second = Grn(GrnScale.CELL_TYPE, (Edge(0, 2, 0.9), Edge(1, 3, 0.2)), "B", 8, frozenset({0, 1}))
        merged = merge_grns([first, second], "all")
        assert {e.pair: e.weight for e in merged.edges} == {(0, 2): 0.5, (1, 3): 0.2}
        assert merged.owner == "all"

    def test_merge_rejects_mixed_vocabularies(self, make_grn):
        with pytest.raises(ContractError):
            merge_grns([make_grn([], "a"), make_grn([], "b", n_genes=9)], "all")


class TestDegreeStats:
    def test_star(self):
        genes = ("T0",) + tuple(f"G{i}" for i in range(1, 15))
        vocab = GeneVocabulary(genes, frozenset({"T0"}))
        grn = Grn(GrnScale.CELL_TYPE, tuple(Edge(0, t) for t in range(1, 11)), "x", 15, frozenset({0}))
        report = degree_stats(grn, vocab)
        assert report.tf_mean_out_degree == 10.0
        assert report.non_tf_mean_degree == pytest.approx(10 / 14)
        assert report.zero_edge_fraction == pytest.approx(4 / 15)
        assert report.ratio == pytest.approx(14.0)

    def test_empty_graph(self, vocab, make_grn):
        report = degree_stats(make_grn([], "x"), vocab)
        assert report.zero_edge_fraction == 1.0
        assert report.ratio == float("inf")


class TestCoExpression:
    def test_active_genes(self):
        graph = build_co_expression_graph(np.array([0.0, 1.2, 0.0, 3.0, 0.5]), 5, "c0")
        assert list(graph.active) == [1, 3, 4]
        assert graph.n_pairs == 3

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            build_co_expression_graph(np.ones(4), 5)


class TestEdgeListIO:
    def test_round_trip_with_empty_owner(self, tmp_path, vocab, type_grns):
        path = tmp_path / "grns" / "celltype.tsv"
        write_edge_list(type_grns.values(), vocab, path)
        loaded = read_edge_list(path, vocab, ["A", "B", "C"], GrnScale.CELL_TYPE)
        assert loaded["A"].pairs == type_grns["A"].pairs
        assert loaded["B"].pairs == type_grns["B"].pairs
        assert len(loaded["C"]) == 0 and loaded["C"].scale == GrnScale.CELL_TYPE

    def test_weights_exact(self, tmp_path, vocab):
        grn = Grn(GrnScale.CELL, (Edge(0, 2, 0.123456789012345678),), "c0", len(vocab), vocab.tf_indices)
        path = tmp_path / "cell.tsv"
        write_edge_list([grn], vocab, path)
        assert read_edge_list(path, vocab)["c0"].edges[0].weight == grn.edges[0].weight

    def test_bad_scale_line(self, tmp_path, vocab):
        path = tmp_path / "e.tsv"
        path.write_text(
            "source\ttarget\tweight\tscale\towner\nTF0\tG2\t1\tcell-specific\tc0\nTF0\tG3\t1\tglobal\tc0\n",
            encoding="utf-8",
        )
        with pytest.raises(ParseError) as info:
            read_edge_list(path, vocab)
        assert info.value.line_number == 3

    def test_unknown_gene_line(self, tmp_path, vocab):
        path = tmp_path / "e.tsv"
        path.write_text("source\ttarget\tweight\tscale\towner\nTF0\tXX\t1\tcell-specific\tc0\n", encoding="utf-8")
        with pytest.raises(ParseError) as info:
            read_edge_list(path, vocab)
        assert info.value.line_number == 2


class TestAnnotationIO:
    def test_coordinates(self, tmp_path, vocab):
        path = tmp_path / "coords.tsv"
        write_coordinates(vocab.coordinates, path)
        assert read_coordinates(path) == vocab.coordinates

    def test_enhancers(self, tmp_path):
        enhancers = {"TF0": [Region("chr1", 10, 510), Region("chr2", 5, 505)], "TF1": [Region("chr1", 0, 0)]}
        path = tmp_path / "enh.tsv"
        write_enhancers(enhancers, path)
        assert read_enhancers(path) == enhancers

    def test_inverted_enhancer(self, tmp_path):
        path = tmp_path / "enh.tsv"
        path.write_text("tf\tchrom\tstart\tend\nTF0\tchr1\t10\t5\n", encoding="utf-8")
        with pytest.raises(ParseError) as info:
            read_enhancers(path)
        assert info.value.line_number == 2

    def test_eregulons(self, tmp_path, vocab):
        regulons = [ERegulon("TF0_regulon", 0, (Region("chr1", 1, 2),), ((2, 0.5), (3, -0.25)))]
        path = tmp_path / "eregulons.json"
        write_eregulons(regulons, vocab, path)
        assert read_eregulons(path, vocab) == regulons

    def test_eregulons_malformed(self, tmp_path, vocab):
        path = tmp_path / "eregulons.json"
        path.write_text("[{\"name\": \"x\"}]", encoding="utf-8")
        with pytest.raises(ParseError):
            read_eregulons(path, vocab)
