"""Pipeline stages behind the CLI subcommands.

Each stage reads its inputs from the run's out-dir (as named by
``RunConfig.paths``), writes its outputs there and returns a short summary.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from grnformer.activity.aucell import aucell_matrix
from grnformer.activity.cell_grn import derive_cell_grn, fit_type_thresholds
from grnformer.activity.reports import write_activity_report, write_threshold_report
from grnformer.analysis.attention import analyze_attention, degree_attention_join, write_degree_table
from grnformer.analysis.metrics import evaluate_perturbations, write_metrics
from grnformer.config import GrnLinkConfig, RunConfig
from grnformer.data.manifest import Dataset, load_dataset, load_perturbation_task, query_profiles, split_examples
from grnformer.data.synthetic import gen_synthetic
from grnformer.grn.io import read_edge_list, read_eregulons, write_edge_list, write_eregulons
from grnformer.grn.network import degree_stats, grn_from_eregulons, link_eregulon, merge_grns
from grnformer.models import ERegulon, Grn, GrnScale
from grnformer.stage_logging import log_stage
from grnformer.tables import write_table
from grnformer.training.checkpoint import load_checkpoint, save_checkpoint
from grnformer.training.finetune import build_reference_aliases, finetune_perturbation
from grnformer.training.trainer import GrnLookup, TrainState, pretrain, write_loss_log

logger = logging.getLogger(__name__)

LOSS_LOG = "loss.csv"
FINETUNE_LOSS_LOG = "finetune_loss.csv"
ACTIVITY_REPORT = "activity.tsv"
THRESHOLD_REPORT = "thresholds.json"
ATTENTION_REPORT = "attention.json"
DEGREE_TABLE = "degree_attention.tsv"
ATTENTION_DUMP_DIR = "attention"
METRICS_FILE = "metrics.csv"
PREDICTIONS_FILE = "predictions.tsv"


@dataclass
class StageResult:
    """Files written by a stage and a one-line description."""
    summary: str
    outputs: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return self.summary


def _dataset(run: RunConfig) -> Dataset:
    return load_dataset(run.resolve(run.paths.manifest))


@log_stage("synth")
def synth_stage(run: RunConfig) -> StageResult:
    manifest = gen_synthetic(run.synthetic, run.out_dir)
    return StageResult(f"synthetic dataset with {len(manifest.files)} files", tuple(sorted(manifest.files.values())))


def link_type_eregulons(dataset: Dataset, cell_type: str, config: GrnLinkConfig) -> List[ERegulon]:
    """eRegulons of every TF with enhancers, linked on the cells of one type; empty ones dropped."""
    vocab = dataset.vocab
    expression = dataset.expression.subset(dataset.cells_of_type(cell_type))
    candidates = [g for g in range(len(vocab)) if not vocab.is_tf(g)]
    out = []
    for tf_name in sorted(dataset.enhancers):
        regulon = link_eregulon(
            vocab.index(tf_name), dataset.enhancers[tf_name], candidates, vocab, expression,
            config.proximity_kb, config.corr_floor,
        )
        if regulon.targets:
            out.append(regulon)
    return out


def pool_eregulons(per_type: Dict[str, List[ERegulon]]) -> List[ERegulon]:
    """One eRegulon per TF: union of targets over types, keeping the strongest |r|."""
    merged: Dict[str, Dict[int, float]] = {}
    first: Dict[str, ERegulon] = {}
    for cell_type in sorted(per_type):
        for regulon in per_type[cell_type]:
            first.setdefault(regulon.name, regulon)
            targets = merged.setdefault(regulon.name, {})
            for gene, r in regulon.targets:
                if gene not in targets or abs(r) > abs(targets[gene]):
                    targets[gene] = r
    return [
        ERegulon(name, first[name].tf, first[name].enhancers, tuple(sorted(merged[name].items())))
        for name in sorted(merged)
    ]


@log_stage("build-grn")
def build_grn_stage(run: RunConfig) -> StageResult:
    dataset = _dataset(run)
    vocab = dataset.vocab
    types = dataset.type_names

    def link(cell_type: str) -> List[ERegulon]:
        return link_type_eregulons(dataset, cell_type, run.grn)

    if run.workers > 1:
        with ThreadPoolExecutor(max_workers=run.workers) as pool:
            per_type = dict(zip(types, pool.map(link, types)))
    else:
        per_type = {t: link(t) for t in types}

    grns = []
    for cell_type in types:
        regulons = per_type[cell_type]
        if regulons:
            grns.append(grn_from_eregulons(regulons, GrnScale.CELL_TYPE, cell_type, len(vocab), vocab.tf_indices))
        else:
            logger.warning("no eRegulon linked for cell type %s; its GRN is empty", cell_type)
            grns.append(Grn(GrnScale.CELL_TYPE, (), cell_type, len(vocab), vocab.tf_indices))
    eregulons = pool_eregulons(per_type)
    grn_path = run.resolve(run.paths.celltype_grn)
    write_edge_list(grns, vocab, grn_path)
    write_eregulons(eregulons, vocab, run.resolve(run.paths.eregulons))
    report = degree_stats(merge_grns(grns, "all"), vocab)
    logger.info("degree ratio TF/non-TF %.2f", report.ratio)
    return StageResult(
        f"{len(grns)} cell-type GRNs, {sum(len(g) for g in grns)} edges, {len(eregulons)} eRegulons",
        (str(grn_path), run.paths.eregulons),
    )


def _type_grns(run: RunConfig, dataset: Dataset) -> Dict[str, Grn]:
    return read_edge_list(run.resolve(run.paths.celltype_grn), dataset.vocab, dataset.type_names, GrnScale.CELL_TYPE)


@log_stage("activity")
def activity_stage(run: RunConfig) -> StageResult:
    dataset = _dataset(run)
    type_grns = _type_grns(run, dataset)
    eregulons = read_eregulons(run.resolve(run.paths.eregulons), dataset.vocab)
    config = run.activity
    activity = aucell_matrix(
        dataset.expression, [(r.name, r.target_indices) for r in eregulons], config.top_fraction, run.workers,
    )
    thresholds = fit_type_thresholds(activity, dataset.cell_types, run.seed, config, run.workers)
    regulon_tf = {r.name: r.tf for r in eregulons}
    cell_grns = []
    for cell in dataset.expression.cell_ids:
        cell_type = dataset.cell_types[cell]
        decisions = {r: thresholds[(cell_type, r)] for r in activity.regulon_ids}
        cell_grns.append(derive_cell_grn(type_grns[cell_type], regulon_tf, activity, decisions, cell))
    write_edge_list(cell_grns, dataset.vocab, run.resolve(run.paths.cell_grn))
    write_activity_report(activity, thresholds, dataset.cell_types, run.resolve(ACTIVITY_REPORT))
    write_threshold_report(thresholds, run.resolve(THRESHOLD_REPORT))
    mean_edges = float(np.mean([len(g) for g in cell_grns])) if cell_grns else 0.0
    return StageResult(
        f"{len(cell_grns)} cell GRNs (mean {mean_edges:.1f} edges), {len(thresholds)} thresholds",
        (run.paths.cell_grn, ACTIVITY_REPORT, THRESHOLD_REPORT),
    )


def build_lookup(run: RunConfig, dataset: Dataset) -> GrnLookup:
    cell_grns = read_edge_list(
        run.resolve(run.paths.cell_grn), dataset.vocab, dataset.expression.cell_ids, GrnScale.CELL,
    )
    return GrnLookup(cell_grns, _type_grns(run, dataset), dict(dataset.cell_types))


def _restore(run: RunConfig, path: Optional[Path] = None) -> TrainState:
    state = load_checkpoint(path or run.resolve(run.paths.checkpoint))
    state.config = state.config.model_copy(update={"workers": run.workers})
    return state


def _lookup_for(state: TrainState, lookup: GrnLookup) -> GrnLookup:
    return lookup.randomized(state.config.seed) if state.config.grn_mode == "random" else lookup


@log_stage("pretrain")
def pretrain_stage(run: RunConfig, resume: Optional[str] = None) -> StageResult:
    dataset = _dataset(run)
    lookup = build_lookup(run, dataset)
    state = _restore(run, Path(resume)) if resume else None
    if state is not None:
        logger.info("resuming from step %d", state.step)
    state = pretrain(dataset.expression, lookup, run.train, state)
    checkpoint = save_checkpoint(state, run.resolve(run.paths.checkpoint))
    write_loss_log(state.loss_history, run.resolve(LOSS_LOG))
    last = state.loss_history[-1] if state.loss_history else float("nan")
    return StageResult(f"{state.step} steps, final loss {last:.6g}", (str(checkpoint), LOSS_LOG))


@log_stage("analyze")
def analyze_stage(run: RunConfig) -> StageResult:
    dataset = _dataset(run)
    state = _restore(run)
    lookup = _lookup_for(state, build_lookup(run, dataset))
    report = analyze_attention(
        dataset.expression, lookup, state, dataset.vocab, run.analysis, run.resolve(ATTENTION_DUMP_DIR),
    )
    report.write(run.resolve(ATTENTION_REPORT), dataset.vocab)
    merged = merge_grns(list(lookup.type_grns.values()), "all")
    write_degree_table(degree_attention_join(merged, report, dataset.vocab), run.resolve(DEGREE_TABLE))
    return StageResult(f"rho={report.rho:.4f} over {report.n_tokens} genes", (ATTENTION_REPORT, DEGREE_TABLE))


@log_stage("eval")
def eval_stage(run: RunConfig) -> StageResult:
    dataset = _dataset(run)
    state = _restore(run)
    lookup = _lookup_for(state, build_lookup(run, dataset))
    examples = load_perturbation_task(dataset.manifest, dataset.vocab)
    queries = query_profiles(examples, set(lookup.cell_grns))
    lookup = lookup.with_aliases(
        build_reference_aliases(queries, dataset.expression, lookup, state, run.finetune.reference_k)
    )
    heldout = split_examples(examples, "heldout")
    result = finetune_perturbation(state, split_examples(examples, "train"), lookup, run.finetune, heldout)
    records = evaluate_perturbations(heldout, result.predictions)
    write_metrics(records, run.resolve(METRICS_FILE))
    write_loss_log(result.loss_history, run.resolve(FINETUNE_LOSS_LOG))
    if heldout:
        frame = pd.DataFrame(np.vstack([result.predictions[e.example_id] for e in heldout]), columns=list(dataset.vocab.genes))
        frame.insert(0, "example", [e.example_id for e in heldout], allow_duplicates=True)
        write_table(frame, run.resolve(PREDICTIONS_FILE))
    overall = {r.metric: r.value for r in records if r.group == "all"}
    summary = ", ".join(f"{k}={v:.4f}" for k, v in sorted(overall.items())) or "no held-out metrics"
    return StageResult(summary, (METRICS_FILE, FINETUNE_LOSS_LOG, PREDICTIONS_FILE))


STAGES = {
    "synth": synth_stage,
    "build-grn": build_grn_stage,
    "activity": activity_stage,
    "pretrain": pretrain_stage,
    "analyze": analyze_stage,
    "eval": eval_stage,
}


__all__ = [
    "StageResult",
    "STAGES",
    "synth_stage",
    "build_grn_stage",
    "activity_stage",
    "pretrain_stage",
    "analyze_stage",
    "eval_stage",
    "link_type_eregulons",
    "pool_eregulons",
    "build_lookup",
]
