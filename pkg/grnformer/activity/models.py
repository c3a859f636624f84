"""Activity scores, fitted mixtures and threshold decisions."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from grnformer.errors import DataError, ShapeError, UnknownCellError


@dataclass
class ActivityMatrix:
    """Cells x regulons AUCell scores in [0, 1]."""
    values: np.ndarray
    cell_ids: Tuple[str, ...]
    regulon_ids: Tuple[str, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.cell_ids = tuple(self.cell_ids)
        self.regulon_ids = tuple(self.regulon_ids)
        expected = (len(self.cell_ids), len(self.regulon_ids))
        if self.values.shape != expected:
            raise ShapeError(f"activity values {self.values.shape} do not match {expected}", self.values.shape, expected)
        if np.any(self.values < 0) or np.any(self.values > 1) or not np.all(np.isfinite(self.values)):
            raise DataError("AUC scores must lie in [0, 1]")
        self._cells = {c: i for i, c in enumerate(self.cell_ids)}
        self._regulons = {r: i for i, r in enumerate(self.regulon_ids)}

    def cell_index(self, cell_id: str) -> int:
        try:
            return self._cells[cell_id]
        except KeyError:
            raise UnknownCellError(f"unknown cell id: {cell_id}") from None

    def regulon_index(self, regulon: str) -> int:
        try:
            return self._regulons[regulon]
        except KeyError:
            raise DataError(f"unknown regulon: {regulon}") from None

    def score(self, cell_id: str, regulon: str) -> float:
        return float(self.values[self.cell_index(cell_id), self.regulon_index(regulon)])

    def column(self, regulon: str) -> np.ndarray:
        return self.values[:, self.regulon_index(regulon)]


@dataclass(frozen=True)
class GaussianMixtureModel:
    """Two-component 1-D mixture, components ordered by mean.

    Attributes:
        weights: mixing coefficients (pi1, pi2)
        means: (mu1, mu2) with mu1 <= mu2
        variances: (var1, var2), both positive
        log_likelihood: total log-likelihood at convergence
        trace: log-likelihood of the winning restart at its start and after every EM iteration
        n_iter: EM iterations run; the final parameters score ``trace[-1]``
    """
    weights: Tuple[float, float]
    means: Tuple[float, float]
    variances: Tuple[float, float]
    log_likelihood: float
    trace: Tuple[float, ...] = field(default=(), compare=False)
    n_iter: int = 0

    def __post_init__(self):
        if abs(sum(self.weights) - 1.0) > 1e-9 or min(self.weights) <= 0:
            raise ValueError(f"mixing weights {self.weights} must be positive and sum to 1")
        if self.means[0] > self.means[1]:
            raise ValueError("components must be ordered by mean")
        if min(self.variances) <= 0:
            raise ValueError("variances must be positive")

    @property
    def sigmas(self) -> Tuple[float, float]:
        return (float(np.sqrt(self.variances[0])), float(np.sqrt(self.variances[1])))

    @property
    def dominant(self) -> int:
        """Index of the component with the larger weight (first on ties)."""
        return 0 if self.weights[0] >= self.weights[1] else 1


class DistributionClass(str, Enum):
    BIMODAL = "Bimodal"
    SKEWED = "Skewed"


class ThresholdMethod(str, Enum):
    INTERSECTION = "intersection"
    MU_PLUS_2_SIGMA = "mu-plus-2-sigma"
    CONSTANT = "constant"


@dataclass(frozen=True)
class ThresholdDecision:
    """Activity cut-off for one regulon (within one cell type).

    ``CONSTANT`` decisions come from score columns with no spread; the
    threshold is the constant itself, so no cell is active.
    """
    classification: DistributionClass
    threshold: float
    method: ThresholdMethod
    gmm: Optional[GaussianMixtureModel] = field(default=None, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.classification == DistributionClass.BIMODAL and self.method != ThresholdMethod.INTERSECTION:
            raise ValueError("bimodal decisions use the intersection method")

    def is_active(self, score: float) -> bool:
        return score > self.threshold


__all__ = [
    "ActivityMatrix",
    "GaussianMixtureModel",
    "DistributionClass",
    "ThresholdMethod",
    "ThresholdDecision",
]
