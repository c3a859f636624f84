"""Neighborhood aggregators for the graph encoder.

Every aggregator reduces to a G x G matrix ``A`` so that the neighborhood
term of a layer is ``A @ h``; the layer itself is shared.
"""

from abc import ABC, abstractmethod
from typing import Dict

import numpy as np

from grnformer.encoder.sampling import sample_neighbors
from grnformer.errors import ConfigError
from grnformer.models import Grn


class Aggregator(ABC):
    """Builds the aggregation matrix of one layer."""

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @property
    def samples(self) -> bool:
        """Whether the matrix depends on the random stream."""
        return False

    @abstractmethod
    def matrix(self, grn: Grn, sample_size: int, rng: np.random.Generator, with_replacement: bool = False) -> np.ndarray:
        pass


class SageMeanAggregator(Aggregator):
    """Mean over a fixed-size uniform neighbor sample; isolated nodes get a zero row."""

    @property
    def name(self) -> str:
        return "sage"

    @property
    def samples(self) -> bool:
        return True

    def matrix(self, grn: Grn, sample_size: int, rng: np.random.Generator, with_replacement: bool = False) -> np.ndarray:
        a = np.zeros((grn.n_genes, grn.n_genes))
        for v in range(grn.n_genes):
            sampled = sample_neighbors(grn, v, sample_size, rng, with_replacement)
            if sampled.size:
                np.add.at(a[v], sampled, 1.0 / sampled.size)
        return a


def _adjacency(grn: Grn) -> np.ndarray:
    adj = np.zeros((grn.n_genes, grn.n_genes))
    for u, v in grn.undirected_pairs:
        adj[u, v] = adj[v, u] = 1.0
    return adj


class GcnAggregator(Aggregator):
    """Symmetric-normalized full neighborhood with self loops, D^-1/2 (A + I) D^-1/2."""

    @property
    def name(self) -> str:
        return "gcn"

    def matrix(self, grn: Grn, sample_size: int, rng: np.random.Generator, with_replacement: bool = False) -> np.ndarray:
        a = _adjacency(grn) + np.eye(grn.n_genes)
        inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
        return a * inv_sqrt[:, None] * inv_sqrt[None, :]


class GinAggregator(Aggregator):
    """Unsampled neighbor sum plus the node itself."""

    @property
    def name(self) -> str:
        return "gin"

    def matrix(self, grn: Grn, sample_size: int, rng: np.random.Generator, with_replacement: bool = False) -> np.ndarray:
        return _adjacency(grn) + np.eye(grn.n_genes)


_AGGREGATORS: Dict[str, Aggregator] = {
    "sage": SageMeanAggregator(),
    "gcn": GcnAggregator(),
    "gin": GinAggregator(),
}


def get_aggregator(name: str) -> Aggregator:
    """Look up an aggregator by config name.

    Raises:
        ConfigError: unknown aggregator
    """
    key = name.lower().strip()
    if key not in _AGGREGATORS:
        raise ConfigError(f"Unsupported aggregator: {name}. Supported aggregators: {list(_AGGREGATORS.keys())}")
    return _AGGREGATORS[key]


__all__ = ["Aggregator", "SageMeanAggregator", "GcnAggregator", "GinAggregator", "get_aggregator"]
