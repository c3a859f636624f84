"""Regulon activity: AUCell scoring, mixture thresholds, cell-specific GRNs and reference mapping."""

from grnformer.activity.models import (
    ActivityMatrix,
    DistributionClass,
    GaussianMixtureModel,
    ThresholdDecision,
    ThresholdMethod,
)
from grnformer.activity.aucell import aucell_matrix, aucell_score, expression_ranking, recovery_cutoff
from grnformer.activity.mixture import (
    classify_distribution,
    decide_threshold,
    fit_gmm2,
    select_threshold,
    weighted_density,
)
from grnformer.activity.cell_grn import active_regulons, derive_cell_grn, fit_type_thresholds, reference_map
from grnformer.activity.reports import threshold_records, write_activity_report, write_threshold_report

__all__ = [
    "ActivityMatrix",
    "DistributionClass",
    "GaussianMixtureModel",
    "ThresholdDecision",
    "ThresholdMethod",
    "aucell_matrix",
    "aucell_score",
    "expression_ranking",
    "recovery_cutoff",
    "classify_distribution",
    "decide_threshold",
    "fit_gmm2",
    "select_threshold",
    "weighted_density",
    "active_regulons",
    "derive_cell_grn",
    "fit_type_thresholds",
    "reference_map",
    "threshold_records",
    "write_activity_report",
    "write_threshold_report",
]
