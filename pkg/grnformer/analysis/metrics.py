"""Evaluation metrics: differential-expression correlation and ROC AUC."""

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from grnformer.errors import ContractError, ShapeError, UndefinedCorrelationError
from grnformer.models import PerturbationExample
from grnformer.tables import FLOAT_FORMAT

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

METRIC_COLUMNS = ("metric", "group", "value", "n")
ALL_GROUP = "all"


@dataclass(frozen=True)
class MetricRecord:
    """One metric value for one group of samples."""
    metric: str
    group: str
    value: float
    n: int

    def __post_init__(self):
        if self.metric == "pcc_delta" and not -1.0 <= self.value <= 1.0:
            raise ContractError(f"pcc_delta {self.value} outside [-1, 1]")
        if self.metric == "roc_auc" and not 0.0 <= self.value <= 1.0:
            raise ContractError(f"roc_auc {self.value} outside [0, 1]")

    def to_dict(self) -> Dict:
        return asdict(self)


def pcc_delta(predicted: np.ndarray, true: np.ndarray, control: np.ndarray) -> float:
    """Pearson correlation between predicted and true changes from control.

    Raises:
        ShapeError: lengths differ or fewer than two genes
        UndefinedCorrelationError: either delta vector is constant
    """
    predicted, true, control = (np.asarray(v, dtype=np.float64) for v in (predicted, true, control))
    if not (predicted.shape == true.shape == control.shape) or predicted.ndim != 1:
        raise ShapeError("pcc_delta needs three equal-length vectors", predicted.shape, true.shape, control.shape)
    if predicted.size < 2:
        raise ShapeError("pcc_delta needs at least two genes", predicted.shape)
    pred_delta = predicted - control
    true_delta = true - control
    if np.ptp(pred_delta) == 0 or np.ptp(true_delta) == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant delta vector")
    return float(stats.pearsonr(pred_delta, true_delta).statistic)


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """P(random positive outscores random negative), ties counted half.

    Computed from rank sums (Mann-Whitney U) with average ranks for ties.

    Raises:
        ShapeError: lengths differ
        ContractError: labels are not binary or only one class is present
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError("scores and labels must be equal-length vectors", scores.shape, labels.shape)
    if not np.all(np.isin(labels, (0, 1))):
        raise ContractError("labels must be 0/1")
    positives = labels == 1
    n_pos = int(positives.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("roc_auc needs at least one positive and one negative label")
    ranks = stats.rankdata(scores, method="average")
    u = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _group_records(metric: str, values: Mapping[str, List[float]]) -> List[MetricRecord]:
    records = [
        MetricRecord(metric, group, float(np.mean(v)), len(v))
        for group, v in sorted(values.items()) if v
    ]
    pooled = [x for group in sorted(values) for x in values[group]]
    if pooled:
        records.append(MetricRecord(metric, ALL_GROUP, float(np.mean(pooled)), len(pooled)))
    return records


def evaluate_perturbations(
    examples: Sequence[PerturbationExample],
    predictions: Mapping[str, np.ndarray],
) -> List[MetricRecord]:
    """PCC_delta per example, and ROC AUC of |predicted delta| against the target labels.

    Values are averaged per example group and over all examples. Examples
    whose correlation is undefined, or whose labels hold a single class, are
    left out of that metric with a warning.
    """
    pcc: Dict[str, List[float]] = {}
    auc: Dict[str, List[float]] = {}
    for example in examples:
        predicted = predictions[example.example_id]
        try:
            pcc.setdefault(example.group, []).append(pcc_delta(predicted, example.post, example.control))
        except UndefinedCorrelationError:
            logger.warning("pcc_delta undefined for example %s; skipped", example.example_id)
        labels = np.zeros(example.control.size, dtype=np.int64)
        labels[list(example.targets)] = 1
        if 0 < labels.sum() < labels.size:
            auc.setdefault(example.group, []).append(roc_auc(np.abs(predicted - example.control), labels))
        else:
            logger.warning("example %s has single-class target labels; roc_auc skipped", example.example_id)
    return _group_records("pcc_delta", pcc) + _group_records("roc_auc", auc)


def write_metrics(records: Sequence[MetricRecord], path: PathLike) -> None:
    """CSV ``metric,group,value,n``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.to_dict() for r in records], columns=list(METRIC_COLUMNS))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def read_metrics(path: PathLike) -> List[MetricRecord]:
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"metric": str, "group": str})
    return [MetricRecord(r.metric, r.group, float(r.value), int(r.n)) for r in frame.itertuples(index=False)]


__all__ = [
    "METRIC_COLUMNS",
    "ALL_GROUP",
    "MetricRecord",
    "pcc_delta",
    "roc_auc",
    "evaluate_perturbations",
    "write_metrics",
    "read_metrics",
]
