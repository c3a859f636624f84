"""Reconstruction losses."""

import numpy as np

from grnformer.backbone.tokenize import MaskSpec
from grnformer.core.tensor import Tensor, constant, gather_rows, mean_all, square, sub
from grnformer.errors import ContractError, ShapeError


def masked_mse_loss(predictions: Tensor, mask_spec: MaskSpec) -> Tensor:
    """Mean squared error over the masked positions only.

    Raises:
        ContractError: nothing is masked
    """
    if len(mask_spec) == 0:
        raise ContractError("masked_mse_loss needs at least one masked position")
    if len(predictions.shape) != 1:
        raise ShapeError("predictions must be a vector", predictions.shape)
    picked = gather_rows(predictions, mask_spec.positions)
    return mean_all(square(sub(picked, constant(mask_spec.originals))))


def mse_loss(predictions: Tensor, targets: np.ndarray) -> Tensor:
    """Mean squared error over every token."""
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise ShapeError("predictions and targets differ in shape", predictions.shape, targets.shape)
    return mean_all(square(sub(predictions, constant(targets))))


__all__ = ["masked_mse_loss", "mse_loss"]
