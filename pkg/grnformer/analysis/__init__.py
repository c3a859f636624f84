"""Attention-pattern analysis and evaluation metrics."""

from grnformer.analysis.attention import (
    AttentionReport,
    analyze_attention,
    attention_importance,
    corpus_importance,
    degree_attention_join,
    sample_cells,
    tf_enrichment_ratio,
    write_degree_table,
)
from grnformer.analysis.metrics import (
    MetricRecord,
    evaluate_perturbations,
    pcc_delta,
    read_metrics,
    roc_auc,
    write_metrics,
)

__all__ = [
    "AttentionReport",
    "analyze_attention",
    "attention_importance",
    "corpus_importance",
    "degree_attention_join",
    "sample_cells",
    "tf_enrichment_ratio",
    "write_degree_table",
    "MetricRecord",
    "evaluate_perturbations",
    "pcc_delta",
    "read_metrics",
    "roc_auc",
    "write_metrics",
]
