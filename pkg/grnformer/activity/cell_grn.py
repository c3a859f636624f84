"""Cell-specific GRNs by activity thresholding, and embedding-space reference mapping."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from grnformer.activity.mixture import decide_threshold
from grnformer.activity.models import ActivityMatrix, ThresholdDecision
from grnformer.config import ActivityConfig
from grnformer.errors import ContractError, ShapeError
from grnformer.models import EmbeddingSet, Grn, GrnScale

logger = logging.getLogger(__name__)


def active_regulons(
    activity: ActivityMatrix,
    thresholds: Mapping[str, ThresholdDecision],
    cell: str,
) -> Tuple[str, ...]:
    """Regulons whose score in ``cell`` strictly exceeds their threshold."""
    row = activity.values[activity.cell_index(cell)]
    missing = [r for r in activity.regulon_ids if r not in thresholds]
    if missing:
        raise ContractError(f"no threshold for regulons {missing}")
    return tuple(
        regulon for regulon, score in zip(activity.regulon_ids, row)
        if thresholds[regulon].is_active(float(score))
    )


def derive_cell_grn(
    celltype_grn: Grn,
    eregulon_index: Mapping[str, int],
    activity: ActivityMatrix,
    thresholds: Mapping[str, ThresholdDecision],
    cell: str,
) -> Grn:
    """Keep the cell-type edges whose TF has at least one active regulon in ``cell``.

    Args:
        celltype_grn: GRN of the cell's type
        eregulon_index: regulon name -> TF gene index
        activity: AUCell scores covering ``cell``
        thresholds: regulon name -> decision for the cell's type
        cell: cell id

    Raises:
        UnknownCellError: ``cell`` is not in ``activity``
        ContractError: a scored regulon has no threshold
    """
    active_tfs = {eregulon_index[r] for r in active_regulons(activity, thresholds, cell) if r in eregulon_index}
    edges = tuple(e for e in celltype_grn.edges if e.source in active_tfs)
    return celltype_grn.replace(edges, owner=cell, scale=GrnScale.CELL)


def fit_type_thresholds(
    activity: ActivityMatrix,
    cell_types: Mapping[str, str],
    seed: int = 0,
    config: Optional[ActivityConfig] = None,
    workers: int = 1,
) -> Dict[Tuple[str, str], ThresholdDecision]:
    """One threshold decision per (cell type, regulon).

    A cell type with fewer cells than ``min_samples`` borrows the regulon's
    scores over all cells.
    """
    config = config or ActivityConfig()
    type_rows: Dict[str, np.ndarray] = {}
    for cell_type in sorted(set(cell_types[c] for c in activity.cell_ids)):
        type_rows[cell_type] = np.array(
            [i for i, c in enumerate(activity.cell_ids) if cell_types[c] == cell_type], dtype=np.int64
        )

    jobs = []
    for cell_type, rows in type_rows.items():
        pooled = rows.size < config.min_samples
        if pooled:
            logger.warning("cell type %s has %d cells; thresholds use all cells", cell_type, rows.size)
        for j, regulon in enumerate(activity.regulon_ids):
            column = activity.values[:, j] if pooled else activity.values[rows, j]
            jobs.append(((cell_type, regulon), column))

    def run(job):
        key, column = job
        return key, decide_threshold(column, seed=seed, config=config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    return dict(results)


def _unit_rows(values: np.ndarray, label: str) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1)
    if np.any(norms == 0):
        raise ContractError(f"{label} has zero-norm embeddings at rows {np.flatnonzero(norms == 0).tolist()}")
    return values / norms[:, None]


def reference_map(
    query_embeddings: EmbeddingSet,
    reference_embeddings: EmbeddingSet,
    k: int = 1,
) -> Dict[object, Tuple[object, ...]]:
    """Top-k reference cells per query by cosine similarity, ties to the lower reference index.

    Raises:
        ShapeError: embedding widths differ
        ContractError: a zero-norm embedding, or k outside [1, n_reference]
    """
    if query_embeddings.width != reference_embeddings.width:
        raise ShapeError(
            "query and reference embedding widths differ",
            query_embeddings.values.shape,
            reference_embeddings.values.shape,
        )
    if not 1 <= k <= len(reference_embeddings):
        raise ContractError(f"k={k} outside [1, {len(reference_embeddings)}]")
    q = _unit_rows(query_embeddings.values.data, "query")
    r = _unit_rows(reference_embeddings.values.data, "reference")
    similarity = q @ r.T
    order = np.argsort(-similarity, axis=1, kind="stable")[:, :k]
    refs = reference_embeddings.row_ids
    return {
        qid: tuple(refs[j] for j in row)
        for qid, row in zip(query_embeddings.row_ids, order)
    }


__all__ = [
    "active_regulons",
    "derive_cell_grn",
    "fit_type_thresholds",
    "reference_map",
]
