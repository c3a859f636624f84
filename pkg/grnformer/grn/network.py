"""Regulatory network construction: eRegulon linking, GRN assembly, co-expression graphs."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from grnformer.errors import ContractError, DataError, ShapeError
from grnformer.models import (
    CoExpressionGraph,
    Edge,
    ERegulon,
    ExpressionMatrix,
    GeneVocabulary,
    Grn,
    GrnScale,
    Region,
)

logger = logging.getLogger(__name__)


def build_co_expression_graph(
    cell_expression: np.ndarray,
    n_genes: Optional[int] = None,
    owner: str = "",
) -> CoExpressionGraph:
    """Active-gene set of one cell; the clique over it is left implicit.

    Raises:
        ShapeError: the vector length differs from ``n_genes``
    """
    x = np.asarray(cell_expression, dtype=np.float64)
    if x.ndim != 1 or (n_genes is not None and x.size != n_genes):
        raise ShapeError(f"cell expression of shape {x.shape} does not match {n_genes} genes", x.shape)
    return CoExpressionGraph(owner=owner, active=np.flatnonzero(x > 0).astype(np.int64))


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson r, defined as 0 when either vector is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 2 or np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(stats.pearsonr(x, y).statistic)


def link_eregulon(
    tf: int,
    enhancers: Sequence[Region],
    candidate_targets: Iterable[int],
    vocab: GeneVocabulary,
    expression: ExpressionMatrix,
    proximity_kb: float = 150.0,
    corr_floor: float = 0.03,
    name: Optional[str] = None,
) -> ERegulon:
    """Keep the candidates that are both near an enhancer and correlated with the TF.

    A candidate is retained when its coordinate lies within ``proximity_kb``
    of any enhancer interval and ``|r| > corr_floor`` for the Pearson
    correlation of its expression with the TF's across cells.

    Raises:
        ContractError: ``tf`` is not a transcription factor
        DataError: a gene has no coordinates or no expression column
    """
    if not vocab.is_tf(tf):
        raise ContractError(f"gene {vocab.genes[tf]} is not a transcription factor")
    vocab.coordinate(tf)
    columns = {g: i for i, g in enumerate(expression.gene_ids)}

    def column(index: int) -> np.ndarray:
        gene = vocab.genes[index]
        if gene not in columns:
            raise DataError(f"no expression column for gene {gene}")
        return expression.values[:, columns[gene]]

    tf_values = column(tf)
    window = proximity_kb * 1000.0
    targets = []
    for target in candidate_targets:
        target = int(target)
        if target == tf:
            continue
        position = vocab.coordinate(target)
        if not any(region.distance_to(position) <= window for region in enhancers):
            continue
        r = pearson(tf_values, column(target))
        if abs(r) > corr_floor:
            targets.append((target, r))
    return ERegulon(
        name=name or f"{vocab.genes[tf]}_regulon",
        tf=tf,
        enhancers=tuple(enhancers),
        targets=tuple(targets),
    )


def grn_from_eregulons(
    eregulons: Sequence[ERegulon],
    scale: GrnScale,
    owner: str,
    n_genes: int,
    tfs: Iterable[int],
) -> Grn:
    """Union of TF -> target edges weighted by |r|, duplicates keeping the max weight.

    Raises:
        ContractError: no eRegulons
        DataError: an eRegulon TF is not in ``tfs``
    """
    if not eregulons:
        raise ContractError("grn_from_eregulons needs at least one eRegulon")
    weights: Dict[Tuple[int, int], float] = {}
    for regulon in eregulons:
        for target, r in regulon.targets:
            pair = (regulon.tf, target)
            weight = min(abs(r), 1.0)
            if weight > weights.get(pair, 0.0):
                weights[pair] = weight
    edges = tuple(Edge(s, t, w) for (s, t), w in sorted(weights.items()))
    return Grn(scale=scale, edges=edges, owner=owner, n_genes=n_genes, tfs=frozenset(tfs))


def merge_grns(grns: Sequence[Grn], owner: str, scale: Optional[GrnScale] = None) -> Grn:
    """Union of several GRNs over one vocabulary; a repeated pair keeps its first occurrence.

    Raises:
        ContractError: no graphs, or graphs over different vocabulary sizes
    """
    if not grns:
        raise ContractError("merge_grns needs at least one GRN")
    n_genes = grns[0].n_genes
    if any(g.n_genes != n_genes for g in grns):
        raise ContractError("cannot merge GRNs over different vocabularies")
    edges: Dict[Tuple[int, int], Edge] = {}
    for grn in grns:
        for e in grn.edges:
            edges.setdefault(e.pair, e)
    tfs = frozenset().union(*(g.tfs for g in grns))
    return Grn(scale or grns[0].scale, tuple(edges[p] for p in sorted(edges)), owner, n_genes, tfs)


@dataclass(frozen=True)
class DegreeReport:
    """Connectivity asymmetry between TFs and other genes."""
    tf_mean_out_degree: float
    non_tf_mean_degree: float
    zero_edge_fraction: float

    @property
    def ratio(self) -> float:
        if self.non_tf_mean_degree == 0:
            return float("inf")
        return self.tf_mean_out_degree / self.non_tf_mean_degree

    def to_dict(self) -> dict:
        return {
            "tf_mean_out_degree": self.tf_mean_out_degree,
            "non_tf_mean_degree": self.non_tf_mean_degree,
            "zero_edge_fraction": self.zero_edge_fraction,
        }


def degree_stats(grn: Grn, vocab: GeneVocabulary) -> DegreeReport:
    if grn.n_genes != len(vocab):
        raise ShapeError(f"GRN over {grn.n_genes} genes, vocabulary has {len(vocab)}", (grn.n_genes,), (len(vocab),))
    tf_mask = np.zeros(len(vocab), dtype=bool)
    tf_mask[list(vocab.tf_indices)] = True
    out_deg = grn.out_degrees()
    total = grn.degrees()
    tf_mean = float(out_deg[tf_mask].mean()) if tf_mask.any() else 0.0
    non_tf_mean = float(total[~tf_mask].mean()) if (~tf_mask).any() else 0.0
    return DegreeReport(
        tf_mean_out_degree=tf_mean,
        non_tf_mean_degree=non_tf_mean,
        zero_edge_fraction=float(np.mean(total == 0)),
    )


__all__ = [
    "build_co_expression_graph",
    "pearson",
    "link_eregulon",
    "grn_from_eregulons",
    "merge_grns",
    "DegreeReport",
    "degree_stats",
]
