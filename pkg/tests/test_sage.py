import numpy as np
import pytest

from grnformer.core import constant, mul, parameter, sum_all
from grnformer.encoder import (
    GcnAggregator,
    GinAggregator,
    SageLayerParams,
    aggregation_matrices,
    combine_scales,
    get_aggregator,
    sage_forward,
)
from grnformer.errors import AlignmentError, ConfigError, ShapeError
from grnformer.models import EmbeddingSet


def dense_sage(grn, features, weights, activation="relu"):
    """Full-neighborhood mean aggregation, one gene at a time."""
    h = np.array(features)
    for w in weights:
        nxt = np.zeros((grn.n_genes, w.shape[1]))
        for v in range(grn.n_genes):
            neighbors = grn.neighbors[v]
            agg = h[neighbors].mean(axis=0) if neighbors.size else np.zeros(h.shape[1])
            row = np.concatenate([h[v], agg]) @ w
            nxt[v] = np.maximum(row, 0.0) if activation == "relu" else row
        h = nxt
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(17)


class TestSageForward:
    def test_empty_graph_uses_self_features_only(self, make_grn, rng):
        d = 4
        features = rng.normal(size=(8, d))
        w = np.vstack([np.eye(d), np.eye(d)])
        params = SageLayerParams([parameter(w)], activation="identity")
        out = sage_forward(make_grn([], "x"), constant(features), params, np.random.default_rng(0))
        assert np.array_equal(out.values.data, features)
        assert out.row_ids == tuple(range(8))

    def test_single_edge_passes_neighbor_features(self, make_grn, rng):
        d = 3
        features = rng.normal(size=(8, d))
        w = np.vstack([np.zeros((d, d)), np.eye(d)])
        params = SageLayerParams([parameter(w)], activation="identity", sample_size=1)
        out = sage_forward(make_grn([(0, 4)], "x"), constant(features), params, np.random.default_rng(0)).values.data
        assert np.array_equal(out[4], features[0])
        assert np.array_equal(out[0], features[4])
        assert np.array_equal(out[1], np.zeros(d))

    @pytest.mark.parametrize("activation", ["relu", "identity"])
    def test_matches_dense_oracle(self, type_grns, rng, activation):
        d = 5
        grn = type_grns["A"]
        features = rng.normal(size=(8, d))
        weights = [rng.normal(size=(2 * d, d)) for _ in range(2)]
        params = SageLayerParams([parameter(w) for w in weights], activation=activation, sample_size=10)
        out = sage_forward(grn, constant(features), params, np.random.default_rng(99))
        assert np.allclose(out.values.data, dense_sage(grn, features, weights, activation), rtol=0, atol=1e-12)

    def test_exhaustive_sampling_ignores_stream(self, type_grns, rng):
        d = 4
        features = constant(rng.normal(size=(8, d)))
        params = SageLayerParams([parameter(rng.normal(size=(2 * d, d)))], sample_size=6)
        first = sage_forward(type_grns["B"], features, params, np.random.default_rng(1))
        second = sage_forward(type_grns["B"], features, params, np.random.default_rng(2))
        assert np.array_equal(first.values.data, second.values.data)

    def test_subsampled_rows_average_sampled_neighbors(self, type_grns, rng):
        params = SageLayerParams([parameter(np.zeros((4, 2)))], sample_size=2)
        (a,) = aggregation_matrices(type_grns["A"], params, np.random.default_rng(0))
        assert np.allclose(a.sum(axis=1), [1.0] * 8)
        assert np.count_nonzero(a[0]) == 2
        assert set(np.flatnonzero(a[0])) <= set(type_grns["A"].neighbors[0].tolist())

    def test_gradients(self, type_grns, rng, grad_check):
        d = 3
        features = parameter(rng.normal(size=(8, d)))
        weights = [parameter(rng.normal(size=(2 * d, d))) for _ in range(2)]
        params = SageLayerParams(weights, activation="relu", sample_size=3)
        matrices = aggregation_matrices(type_grns["A"], params, np.random.default_rng(0))
        projection = constant(rng.normal(size=(8, d)))

        def loss():
            out = sage_forward(type_grns["A"], features, params, matrices=matrices)
            return sum_all(mul(out.values, projection))

        assert grad_check(loss, {"features": features, "w0": weights[0], "w1": weights[1]}) < 1e-4

    def test_feature_shape_checked(self, make_grn):
        params = SageLayerParams([parameter(np.zeros((4, 2)))])
        with pytest.raises(ShapeError):
            sage_forward(make_grn([], "x"), constant(np.zeros((7, 2))), params)

    def test_weight_shape_checked(self):
        with pytest.raises(ShapeError):
            SageLayerParams([parameter(np.zeros((3, 2)))])


class TestAggregators:
    def test_gcn_normalization(self, make_grn):
        grn = make_grn([(0, 2)], "x")
        a = GcnAggregator().matrix(grn, 1, np.random.default_rng(0))
        assert a[0, 2] == pytest.approx(0.5)
        assert a[0, 0] == pytest.approx(0.5)
        assert a[5, 5] == 1.0
        assert np.allclose(a, a.T)

    def test_gin_sum(self, make_grn):
        a = GinAggregator().matrix(make_grn([(0, 2), (0, 3)], "x"), 1, np.random.default_rng(0))
        assert list(a[0]) == [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]

    @pytest.mark.parametrize("name", ["gcn", "gin"])
    def test_unsampled_aggregators_forward(self, type_grns, rng, name):
        d = 2
        params = SageLayerParams([parameter(rng.normal(size=(2 * d, d)))], aggregator=name)
        out = sage_forward(type_grns["A"], constant(rng.normal(size=(8, d))), params)
        assert out.values.shape == (8, d)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            get_aggregator("lstm")


class TestCombineScales:
    def test_sum_and_identities(self, rng):
        cell = EmbeddingSet(constant(rng.normal(size=(4, 3))), range(4))
        zero = EmbeddingSet(constant(np.zeros((4, 3))), range(4))
        negated = EmbeddingSet(constant(-cell.values.data), range(4))
        other = EmbeddingSet(constant(rng.normal(size=(4, 3))), range(4))
        assert np.array_equal(combine_scales(cell, zero).values.data, cell.values.data)
        assert np.array_equal(combine_scales(cell, negated).values.data, np.zeros((4, 3)))
        assert np.array_equal(combine_scales(cell, other).values.data, cell.values.data + other.values.data)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            combine_scales(
                EmbeddingSet(constant(np.zeros((4, 3))), range(4)),
                EmbeddingSet(constant(np.zeros((4, 2))), range(4)),
            )

    def test_row_mismatch(self):
        with pytest.raises(AlignmentError):
            combine_scales(
                EmbeddingSet(constant(np.zeros((2, 3))), (0, 1)),
                EmbeddingSet(constant(np.zeros((2, 3))), (0, 5)),
            )
