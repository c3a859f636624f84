"""Gene-wise attention importance and TF enrichment of the fusion layer."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from grnformer.config import AnalysisConfig
from grnformer.errors import ContractError, ShapeError
from grnformer.fusion.attention import write_attention_dump
from grnformer.models import ExpressionMatrix, GeneVocabulary, Grn
from grnformer.tables import FLOAT_FORMAT
from grnformer.training.model import Stream, stream
from grnformer.training.trainer import GrnLookup, TrainState, forward_cell

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ROW_SUM_TOLERANCE = 1e-6
JOIN_COLUMNS = ("gene", "is_tf", "degree", "phi")


@dataclass
class AttentionReport:
    """phi over ``genes`` (vocabulary indices), the TF enrichment ratio and its provenance."""
    phi: np.ndarray
    genes: Tuple[int, ...]
    rho: float
    n_heads: int
    n_tokens: int
    scope: str

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=np.float64)
        self.genes = tuple(int(g) for g in self.genes)
        if self.phi.shape != (len(self.genes),):
            raise ShapeError("phi must have one entry per gene", self.phi.shape)
        if np.any(self.phi < 0):
            raise ContractError("attention importance must be non-negative")

    def to_dict(self, vocab: Optional[GeneVocabulary] = None) -> Dict:
        genes = [vocab.genes[g] for g in self.genes] if vocab is not None else list(self.genes)
        return {
            "phi": self.phi.tolist(),
            "genes": genes,
            "rho": self.rho,
            "H": self.n_heads,
            "N": self.n_tokens,
            "scope": self.scope,
        }

    def write(self, path: PathLike, vocab: Optional[GeneVocabulary] = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(vocab), indent=2), encoding="utf-8")


def attention_importance(attention: Sequence[np.ndarray]) -> np.ndarray:
    """phi_j = (1 / (H N)) sum_h sum_i A^(h)_ij.

    Raises:
        ShapeError: heads are not square or disagree in size
        ContractError: some row is negative or does not sum to 1
    """
    if not attention:
        raise ContractError("attention_importance needs at least one head")
    stack = np.stack([np.asarray(a, dtype=np.float64) for a in attention])
    n_heads, n_rows, n_cols = stack.shape
    if n_rows != n_cols:
        raise ShapeError("attention matrices must be square", stack.shape)
    if np.any(stack < 0):
        raise ContractError("attention weights must be non-negative")
    row_sums = stack.sum(axis=2)
    if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOLERANCE):
        raise ContractError(f"attention rows must sum to 1 (worst {np.max(np.abs(row_sums - 1.0)):.3g})")
    phi = stack.sum(axis=(0, 1)) / (n_heads * n_rows)
    return phi


def tf_enrichment_ratio(phi: np.ndarray, tf_set: Iterable[int]) -> float:
    """Mean phi over TFs divided by mean phi over the other genes.

    Raises:
        ContractError: a TF index falls outside phi, either group is empty or
            the non-TF mean is zero
    """
    phi = np.asarray(phi, dtype=np.float64)
    tfs = sorted({int(t) for t in tf_set})
    outside = [t for t in tfs if not 0 <= t < phi.size]
    if outside:
        raise ContractError(f"TF indices {outside} outside the {phi.size} scored genes")
    is_tf = np.zeros(phi.size, dtype=bool)
    is_tf[tfs] = True
    if not is_tf.any() or is_tf.all():
        raise ContractError("TF enrichment needs both TF and non-TF genes")
    denominator = phi[~is_tf].mean()
    if denominator <= 0:
        raise ContractError("non-TF mean attention is zero")
    return float(phi[is_tf].mean() / denominator)


def corpus_importance(
    per_cell: Sequence[Tuple[np.ndarray, np.ndarray]],
    n_genes: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Pool per-cell (token genes, phi) pairs into one vocabulary-wide phi.

    Each cell's phi is scaled by its token count, averaged per gene over the
    cells where the gene was tokenized and renormalized to sum to 1.

    Returns:
        (phi over the genes seen at least once, those gene indices)
    """
    totals = np.zeros(n_genes)
    counts = np.zeros(n_genes, dtype=np.int64)
    for genes, phi in per_cell:
        np.add.at(totals, genes, phi * len(genes))
        np.add.at(counts, genes, 1)
    seen = np.flatnonzero(counts)
    if seen.size == 0:
        raise ContractError("no attention collected")
    pooled = totals[seen] / counts[seen]
    return pooled / pooled.sum(), seen


def sample_cells(n_cells: int, config: AnalysisConfig) -> np.ndarray:
    """Sorted indices of the evaluation cells (without replacement)."""
    size = min(config.n_cells, n_cells)
    return np.sort(stream(config.seed, Stream.ANALYSIS).choice(n_cells, size=size, replace=False))


def analyze_attention(
    expression: ExpressionMatrix,
    lookup: GrnLookup,
    state: TrainState,
    vocab: GeneVocabulary,
    config: Optional[AnalysisConfig] = None,
    dump_dir: Optional[PathLike] = None,
) -> AttentionReport:
    """Fusion-layer attention over sampled cells, pooled into phi and rho.

    Raises:
        ContractError: the model has no cross-attention fusion, or no sampled cell has tokens
    """
    config = config or AnalysisConfig()
    if state.config.grn_mode == "none" or state.config.fusion.mode != "cross_attention":
        raise ContractError("attention analysis needs the cross_attention fusion with a GRN path")
    per_cell: List[Tuple[np.ndarray, np.ndarray]] = []
    for i in sample_cells(expression.n_cells, config):
        cell_id = expression.cell_ids[i]
        out = forward_cell(
            cell_id, int(i), expression.values[i], lookup, state.params, state.config, 0,
            mask=False, perturb=False, return_attention=True,
        )
        if out is None:
            continue
        per_cell.append((out.tokens.gene_ids, attention_importance(out.attention)))
        if dump_dir is not None and config.dump_attention:
            write_attention_dump(dump_dir, cell_id, [vocab.genes[g] for g in out.tokens.gene_ids], out.attention)
    if not per_cell:
        raise ContractError("no sampled cell has expressed genes")
    phi, genes = corpus_importance(per_cell, len(vocab))
    tf_positions = [k for k, g in enumerate(genes) if vocab.is_tf(int(g))]
    rho = tf_enrichment_ratio(phi, tf_positions)
    logger.info("attention over %d cells: rho=%.4f across %d genes", len(per_cell), rho, genes.size)
    return AttentionReport(
        phi=phi, genes=tuple(genes), rho=rho, n_heads=state.config.fusion.n_heads,
        n_tokens=int(genes.size), scope=f"{len(per_cell)} cells",
    )


def degree_attention_join(grn: Grn, report: AttentionReport, vocab: GeneVocabulary) -> pd.DataFrame:
    """One row per reported gene: (gene, is_tf, degree, phi).

    Raises:
        ShapeError: the GRN and vocabulary sizes differ
    """
    if grn.n_genes != len(vocab):
        raise ShapeError("GRN and vocabulary sizes differ", (grn.n_genes,), (len(vocab),))
    degrees = grn.degrees()
    return pd.DataFrame({
        "gene": [vocab.genes[g] for g in report.genes],
        "is_tf": [vocab.is_tf(g) for g in report.genes],
        "degree": [int(degrees[g]) for g in report.genes],
        "phi": report.phi,
    }, columns=list(JOIN_COLUMNS))


def write_degree_table(table: pd.DataFrame, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, sep="\t", index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


__all__ = [
    "ROW_SUM_TOLERANCE",
    "AttentionReport",
    "attention_importance",
    "tf_enrichment_ratio",
    "corpus_importance",
    "sample_cells",
    "analyze_attention",
    "degree_attention_join",
    "write_degree_table",
]
