"""AUCell: recovery-curve enrichment of a target set in a cell's expression ranking."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence, Tuple

import numpy as np

from grnformer.activity.models import ActivityMatrix
from grnformer.errors import ContractError
from grnformer.models import ExpressionMatrix

logger = logging.getLogger(__name__)


def recovery_cutoff(n_genes: int, top_fraction: float) -> int:
    """Number of top-ranked genes scanned by the recovery curve."""
    if not 0 < top_fraction <= 1:
        raise ContractError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    return max(1, math.ceil(top_fraction * n_genes - 1e-9))


def expression_ranking(cell_expression: np.ndarray) -> np.ndarray:
    """Gene indices by descending expression, ties by ascending index."""
    x = np.asarray(cell_expression, dtype=np.float64)
    return np.lexsort((np.arange(x.size), -x))


def _score_ranking(ranking: np.ndarray, targets: np.ndarray, cutoff: int) -> float:
    hits = np.isin(ranking[:cutoff], targets)
    area = float(np.cumsum(hits).sum())
    ranks = np.arange(1, cutoff + 1)
    max_area = float(np.minimum(ranks, targets.size).sum())
    return area / max_area


def _target_array(target_set: Iterable[int], n_genes: int) -> np.ndarray:
    targets = np.unique(np.asarray(list(target_set), dtype=np.int64))
    if targets.size == 0:
        raise ContractError("target set must be non-empty")
    if targets[0] < 0 or targets[-1] >= n_genes:
        raise ContractError(f"target indices out of range for {n_genes} genes")
    return targets


def aucell_score(cell_expression: np.ndarray, target_set: Iterable[int], top_fraction: float = 0.05) -> float:
    """Normalized area under the recovery curve of ``target_set``.

    Args:
        cell_expression: expression vector over the vocabulary
        target_set: gene indices of the regulon's targets
        top_fraction: share of the ranking scanned (cutoff rounded up)

    Returns:
        Score in [0, 1]; 1 when the targets fill the top of the ranking.

    Raises:
        ContractError: empty or out-of-range target set
    """
    x = np.asarray(cell_expression, dtype=np.float64)
    targets = _target_array(target_set, x.size)
    return _score_ranking(expression_ranking(x), targets, recovery_cutoff(x.size, top_fraction))


def aucell_matrix(
    expression: ExpressionMatrix,
    regulons: Sequence[Tuple[str, Sequence[int]]],
    top_fraction: float = 0.05,
    workers: int = 1,
) -> ActivityMatrix:
    """Score every (cell, regulon) pair; one ranking per cell."""
    if not regulons:
        raise ContractError("no regulons to score")
    n_genes = expression.n_genes
    cutoff = recovery_cutoff(n_genes, top_fraction)
    target_arrays = [_target_array(targets, n_genes) for _, targets in regulons]

    def score_cell(row: np.ndarray) -> np.ndarray:
        ranking = expression_ranking(row)
        return np.array([_score_ranking(ranking, t, cutoff) for t in target_arrays])

    rows = list(expression.values)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(score_cell, rows))
    else:
        scores = [score_cell(row) for row in rows]
    values = np.vstack(scores) if scores else np.zeros((0, len(regulons)))
    logger.info("scored %d cells x %d regulons (cutoff %d genes)", len(rows), len(regulons), cutoff)
    return ActivityMatrix(values, expression.cell_ids, tuple(name for name, _ in regulons))


__all__ = ["recovery_cutoff", "expression_ranking", "aucell_score", "aucell_matrix"]
