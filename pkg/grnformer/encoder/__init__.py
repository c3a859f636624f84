"""Graph encoder: neighbor sampling, edge perturbation, aggregators and SAGE layers."""

from grnformer.encoder.sampling import n_replaced, perturb_grn, random_grn, random_perturb_grn, sample_neighbors
from grnformer.encoder.aggregators import (
    Aggregator,
    GcnAggregator,
    GinAggregator,
    SageMeanAggregator,
    get_aggregator,
)
from grnformer.encoder.sage import NodeEmbeddings, SageLayerParams, aggregation_matrices, combine_scales, sage_forward

__all__ = [
    "n_replaced",
    "perturb_grn",
    "random_grn",
    "random_perturb_grn",
    "sample_neighbors",
    "Aggregator",
    "GcnAggregator",
    "GinAggregator",
    "SageMeanAggregator",
    "get_aggregator",
    "NodeEmbeddings",
    "SageLayerParams",
    "aggregation_matrices",
    "combine_scales",
    "sage_forward",
]
