"""Cell tokenization and expression masking."""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from grnformer.errors import ContractError, ShapeError

MASK_VALUE = -1.0


@dataclass(frozen=True)
class TokenSequence:
    """(gene index, expression value) tokens of one cell."""
    gene_ids: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        gene_ids = np.asarray(self.gene_ids, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if gene_ids.shape != values.shape or gene_ids.ndim != 1:
            raise ShapeError("token gene ids and values must be equal-length vectors", gene_ids.shape, values.shape)
        object.__setattr__(self, "gene_ids", gene_ids)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.gene_ids.size)

    def permute(self, order: np.ndarray) -> "TokenSequence":
        return TokenSequence(self.gene_ids[order], self.values[order])

    def with_values(self, values: np.ndarray) -> "TokenSequence":
        return TokenSequence(self.gene_ids, values)


@dataclass(frozen=True)
class MaskSpec:
    """Masked token positions (ascending) and their original values."""
    positions: np.ndarray
    originals: np.ndarray

    def __len__(self) -> int:
        return int(self.positions.size)


def tokenize_cell(
    cell_expression: np.ndarray,
    max_genes: int,
    n_genes: Optional[int] = None,
    include_zeros: bool = False,
) -> TokenSequence:
    """Tokens ordered by descending expression, ties by ascending gene index.

    Args:
        cell_expression: expression over the vocabulary
        max_genes: sequence length cap
        n_genes: vocabulary size to check against
        include_zeros: keep unexpressed genes (after every expressed one)

    Raises:
        ShapeError: vector length differs from ``n_genes``
    """
    x = np.asarray(cell_expression, dtype=np.float64)
    if x.ndim != 1 or (n_genes is not None and x.size != n_genes):
        raise ShapeError(f"cell expression {x.shape} does not match {n_genes} genes", x.shape)
    order = np.lexsort((np.arange(x.size), -x))
    if not include_zeros:
        order = order[x[order] > 0]
    order = order[:max_genes]
    return TokenSequence(order, x[order])


def mask_count(n_tokens: int, mask_ratio: float) -> int:
    return min(n_tokens, math.ceil(mask_ratio * n_tokens - 1e-9))


def apply_mask(tokens: TokenSequence, mask_ratio: float, rng: np.random.Generator) -> Tuple[TokenSequence, MaskSpec]:
    """Replace the values of ceil(ratio * n) uniformly chosen tokens with MASK_VALUE.

    Raises:
        ContractError: empty token sequence
    """
    n = len(tokens)
    if n == 0:
        raise ContractError("cannot mask an empty token sequence")
    positions = np.sort(rng.choice(n, size=max(1, mask_count(n, mask_ratio)), replace=False))
    values = tokens.values.copy()
    originals = values[positions].copy()
    values[positions] = MASK_VALUE
    return tokens.with_values(values), MaskSpec(positions, originals)


__all__ = ["MASK_VALUE", "TokenSequence", "MaskSpec", "tokenize_cell", "mask_count", "apply_mask"]
