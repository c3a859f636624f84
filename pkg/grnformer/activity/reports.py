"""Activity and threshold report files."""

import json
from pathlib import Path
from typing import Dict, List, Mapping, Tuple, Union

import pandas as pd

from grnformer.activity.models import ActivityMatrix, ThresholdDecision
from grnformer.tables import write_table

PathLike = Union[str, Path]

ACTIVITY_COLUMNS = ("cell", "regulon", "auc", "threshold", "active", "cell_type")


def write_activity_report(
    activity: ActivityMatrix,
    thresholds: Mapping[Tuple[str, str], ThresholdDecision],
    cell_types: Mapping[str, str],
    path: PathLike,
) -> None:
    """One row per (cell, regulon) with the threshold of the cell's type."""
    rows = []
    for i, cell in enumerate(activity.cell_ids):
        cell_type = cell_types[cell]
        for j, regulon in enumerate(activity.regulon_ids):
            decision = thresholds[(cell_type, regulon)]
            score = float(activity.values[i, j])
            rows.append((cell, regulon, score, decision.threshold, int(decision.is_active(score)), cell_type))
    write_table(pd.DataFrame(rows, columns=list(ACTIVITY_COLUMNS)), path)


def threshold_records(thresholds: Mapping[Tuple[str, str], ThresholdDecision]) -> List[Dict]:
    records = []
    for (cell_type, regulon), decision in sorted(thresholds.items()):
        gmm = decision.gmm
        records.append({
            "regulon": regulon,
            "cell_type": cell_type,
            "pi": list(gmm.weights) if gmm else None,
            "mu": list(gmm.means) if gmm else None,
            "sigma": list(gmm.sigmas) if gmm else None,
            "class": decision.classification.value,
            "threshold": decision.threshold,
            "method": decision.method.value,
        })
    return records


def write_threshold_report(thresholds: Mapping[Tuple[str, str], ThresholdDecision], path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(threshold_records(thresholds), indent=2), encoding="utf-8")


__all__ = ["ACTIVITY_COLUMNS", "write_activity_report", "threshold_records", "write_threshold_report"]
