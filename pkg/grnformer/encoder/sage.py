"""GraphSAGE-style encoding of regulatory graphs."""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from grnformer.core.tensor import Tensor, add, concat_cols, constant, matmul, relu
from grnformer.encoder.aggregators import get_aggregator
from grnformer.errors import AlignmentError, ShapeError
from grnformer.models import EmbeddingSet, Grn

NodeEmbeddings = EmbeddingSet


@dataclass
class SageLayerParams:
    """Per-layer projections W^k of shape (2d, d) plus sampling settings.

    Attributes:
        weights: one (2d, d) tensor per layer, applied to concat(self, neighborhood)
        activation: "relu" or "identity"
        sample_size: neighbors drawn per node and layer
        aggregator: "sage" (sampled mean), "gcn" or "gin"
        with_replacement: draw exactly ``sample_size`` neighbors with replacement
    """
    weights: List[Tensor]
    activation: str = "relu"
    sample_size: int = 10
    aggregator: str = "sage"
    with_replacement: bool = False

    def __post_init__(self):
        if not self.weights:
            raise ValueError("need at least one layer")
        if self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")
        if self.activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation: {self.activation}")
        width = self.weights[0].shape[1]
        for k, w in enumerate(self.weights):
            if w.shape != (2 * width, width):
                raise ShapeError(f"layer {k} weight must be (2d, d) with d={width}", w.shape)
        get_aggregator(self.aggregator)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def width(self) -> int:
        return self.weights[0].shape[1]


def aggregation_matrices(grn: Grn, params: SageLayerParams, rng: np.random.Generator) -> List[np.ndarray]:
    """One aggregation matrix per layer; sampled layers draw independently."""
    aggregator = get_aggregator(params.aggregator)
    return [
        aggregator.matrix(grn, params.sample_size, rng, params.with_replacement)
        for _ in range(params.n_layers)
    ]


def sage_forward(
    grn: Grn,
    input_features: Tensor,
    params: SageLayerParams,
    rng: Optional[np.random.Generator] = None,
    matrices: Optional[Sequence[np.ndarray]] = None,
    scale: str = "",
) -> NodeEmbeddings:
    """h_v^k = act(W^k concat(h_v^{k-1}, aggregate(h_u^{k-1} for sampled u))).

    Neighborhoods are undirected and isolated genes aggregate a zero vector,
    so every gene keeps a row.

    Args:
        grn: graph over the vocabulary
        input_features: (G, d) features, one row per gene
        params: layer weights and sampling settings
        rng: neighbor-sampling stream (unused when ``matrices`` is given)
        matrices: precomputed aggregation matrices, one per layer
        scale: tag stored on the returned embeddings

    Raises:
        ShapeError: feature rows or width disagree with the graph or weights
    """
    if input_features.shape != (grn.n_genes, params.width):
        raise ShapeError(
            f"features {input_features.shape} do not match {grn.n_genes} genes x width {params.width}",
            input_features.shape,
        )
    if matrices is None:
        matrices = aggregation_matrices(grn, params, rng if rng is not None else np.random.default_rng(0))
    h = input_features
    for weight, a in zip(params.weights, matrices):
        neighborhood = matmul(constant(a), h)
        h = matmul(concat_cols([h, neighborhood]), weight)
        if params.activation == "relu":
            h = relu(h)
    return EmbeddingSet(h, tuple(range(grn.n_genes)), scale)


def combine_scales(h_cell: NodeEmbeddings, h_type: NodeEmbeddings) -> NodeEmbeddings:
    """Element-wise sum of the two scales.

    Raises:
        ShapeError: shapes differ
        AlignmentError: rows refer to different genes
    """
    if h_cell.values.shape != h_type.values.shape:
        raise ShapeError("scale embeddings differ in shape", h_cell.values.shape, h_type.values.shape)
    if h_cell.row_ids != h_type.row_ids:
        mismatched = [a for a, b in zip(h_cell.row_ids, h_type.row_ids) if a != b]
        raise AlignmentError("scale embeddings cover different genes", mismatched)
    return EmbeddingSet(add(h_cell.values, h_type.values), h_cell.row_ids, "combined")


__all__ = ["NodeEmbeddings", "SageLayerParams", "aggregation_matrices", "sage_forward", "combine_scales"]
