"""Synthetic paired expression / regulatory dataset with planted ground truth.

The generator plants, per cell type, a TF -> target GRN in which TFs carry
dense out-degree and most other genes are sparse or isolated (a target has a
single regulator while the regulated pool allows); places every
planted target within reach of an enhancer of its TF; and draws each
regulon's activity either from two well-separated modes or from a single
skewed mode, so that activity thresholding has something to find. Target
expression follows the activity of its active regulators plus noise.

A perturbation task rides along: perturbing a TF adds +1 to the expression
of its planted targets. Held-out examples use freshly simulated query cells
that have no GRNs of their own.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from grnformer.config import SyntheticConfig
from grnformer.core.random import Stream, stream
from grnformer.data.manifest import DatasetManifest
from grnformer.data.matrix_io import save_cell_types, save_gene_list, save_matrix
from grnformer.errors import ConfigError
from grnformer.grn.io import write_coordinates, write_edge_list, write_enhancers
from grnformer.grn.network import degree_stats, merge_grns
from grnformer.models import (
    Edge,
    ExpressionMatrix,
    GeneVocabulary,
    GenomicPosition,
    Grn,
    GrnScale,
    Region,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

GENERATOR_VERSION = "1"

N_CHROMOSOMES = 5
GENE_SPACING = 1_000_000
ENHANCER_REACH = 100_000
ENHANCER_WIDTH = 500
TF_ACTIVE_PROBABILITY = 0.7
BIMODAL_MODES = (0.2, 0.8)
BIMODAL_SD = 0.05
SKEWED_MEAN = 0.3
SKEWED_SD = 0.1
TARGET_GAIN = 3.0
DROPOUT = 0.2
PERTURBATION_EFFECT = 1.0

DATASET_FILES = {
    "expression": "expression.tsv",
    "coordinates": "coordinates.tsv",
    "enhancers": "enhancers.tsv",
    "tfs": "tfs.tsv",
    "cell_types": "cell_types.tsv",
    "truth_grn": "truth/celltype.tsv",
    "ground_truth": "ground_truth.json",
    "perturb_control": "perturbation/control.tsv",
    "perturb_post": "perturbation/post.tsv",
    "perturb_examples": "perturbation/examples.json",
}


@dataclass
class PlantedModel:
    """Generator state shared by reference cells and simulated query cells."""
    vocab: GeneVocabulary
    targets: Dict[int, List[Tuple[int, float]]]
    type_names: List[str]
    tf_active: np.ndarray
    bimodal: np.ndarray
    baseline: np.ndarray
    noise_scale: float

    @property
    def tf_order(self) -> List[int]:
        return sorted(self.targets)

    def type_grn(self, t: int) -> Grn:
        edges = [
            Edge(tf, target, weight)
            for k, tf in enumerate(self.tf_order) if self.tf_active[t, k]
            for target, weight in self.targets[tf]
        ]
        edges.sort(key=lambda e: e.pair)
        return Grn(GrnScale.CELL_TYPE, tuple(edges), self.type_names[t], len(self.vocab), self.vocab.tf_indices)

    def simulate(self, t: int, rng: np.random.Generator) -> np.ndarray:
        """Expression of one cell of type ``t``."""
        n_tfs = len(self.tf_order)
        activity = np.where(
            self.bimodal,
            rng.normal(np.where(rng.random(n_tfs) < 0.5, BIMODAL_MODES[1], BIMODAL_MODES[0]), BIMODAL_SD),
            rng.normal(SKEWED_MEAN, SKEWED_SD, size=n_tfs),
        )
        activity = np.clip(activity, 0.0, 1.0) * self.tf_active[t]
        x = self.baseline.copy()
        for k, tf in enumerate(self.tf_order):
            if self.tf_active[t, k]:
                x[tf] = 1.0 + 2.0 * activity[k]
                for target, weight in self.targets[tf]:
                    x[target] += weight * TARGET_GAIN * activity[k]
        x = x + self.noise_scale * rng.normal(size=x.size)
        silent = [tf for k, tf in enumerate(self.tf_order) if not self.tf_active[t, k]]
        x[silent] = 0.0
        non_tf = np.ones(x.size, dtype=bool)
        non_tf[self.tf_order] = False
        x[non_tf & (rng.random(x.size) < DROPOUT)] = 0.0
        return np.clip(x, 0.0, None)


def _gene_names(config: SyntheticConfig) -> Tuple[List[str], List[str]]:
    tfs = [f"TF{i:03d}" for i in range(config.n_tfs)]
    others = [f"G{i:04d}" for i in range(config.n_genes - config.n_tfs)]
    return tfs, tfs + others


def _check_feasible(config: SyntheticConfig) -> int:
    pool = int(round(config.regulated_fraction * (config.n_genes - config.n_tfs)))
    if pool < 1:
        raise ConfigError("regulated_fraction leaves no regulated genes")
    if config.mean_targets_per_tf > pool:
        raise ConfigError(
            f"mean_targets_per_tf {config.mean_targets_per_tf} exceeds the {pool} regulated genes available"
        )
    if config.n_perturbation_tfs > config.n_tfs:
        raise ConfigError("n_perturbation_tfs exceeds n_tfs")
    if config.n_perturbation_cells and not config.n_perturbation_tfs:
        raise ConfigError("perturbation examples need at least one perturbation TF")
    return pool


def plant_model(config: SyntheticConfig, rng: np.random.Generator) -> Tuple[PlantedModel, Dict[str, List[Region]]]:
    """Draw the planted GRNs, coordinates, enhancers and activity regimes.

    Raises:
        ConfigError: the configuration cannot be realized
    """
    pool_size = _check_feasible(config)
    tf_names, genes = _gene_names(config)
    n_tfs = config.n_tfs

    coordinates = {
        gene: GenomicPosition(f"chr{i % N_CHROMOSOMES + 1}", (i // N_CHROMOSOMES + 1) * GENE_SPACING)
        for i, gene in enumerate(genes)
    }
    vocab = GeneVocabulary(tuple(genes), frozenset(tf_names), coordinates)

    pool = np.sort(rng.choice(np.arange(n_tfs, config.n_genes), size=pool_size, replace=False))
    unclaimed = pool
    targets: Dict[int, List[Tuple[int, float]]] = {}
    enhancers: Dict[str, List[Region]] = {}
    for tf in range(n_tfs):
        k = int(np.clip(rng.poisson(config.mean_targets_per_tf), 1, pool_size))
        # regulons stay disjoint until the unclaimed genes run out
        candidates = unclaimed if unclaimed.size >= k else pool
        chosen = np.sort(rng.choice(candidates, size=k, replace=False))
        unclaimed = np.setdiff1d(unclaimed, chosen)
        weights = rng.uniform(0.5, 1.0, size=k)
        targets[tf] = [(int(g), float(w)) for g, w in zip(chosen, weights)]
        regions = []
        for g in chosen:
            position = coordinates[genes[g]]
            start = position.position + int(rng.integers(-ENHANCER_REACH, ENHANCER_REACH + 1))
            regions.append(Region(position.chrom, start, start + ENHANCER_WIDTH))
        enhancers[tf_names[tf]] = regions

    type_names = [f"type{t}" for t in range(config.n_cell_types)]
    tf_active = rng.random((config.n_cell_types, n_tfs)) < TF_ACTIVE_PROBABILITY
    for t in range(config.n_cell_types):
        if not tf_active[t].any():
            tf_active[t, rng.integers(n_tfs)] = True

    n_bimodal = int(round(config.bimodal_fraction * n_tfs))
    bimodal = np.zeros(n_tfs, dtype=bool)
    bimodal[rng.permutation(n_tfs)[:n_bimodal]] = True

    baseline = rng.uniform(0.2, 1.0, size=config.n_genes)
    baseline[:n_tfs] = 0.0
    model = PlantedModel(vocab, targets, type_names, tf_active, bimodal, baseline, config.noise_scale)
    return model, enhancers


def _cell_type_assignment(config: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.permutation(np.arange(config.n_cells) % config.n_cell_types)


def _ground_truth(model: PlantedModel, grns: List[Grn]) -> Dict:
    genes = model.vocab.genes
    report = degree_stats(merge_grns(grns, "planted"), model.vocab)
    return {
        "regulons": {
            genes[tf]: {
                "bimodal": bool(model.bimodal[k]),
                "modes": list(BIMODAL_MODES) if model.bimodal[k] else [SKEWED_MEAN],
                "targets": [[genes[g], w] for g, w in model.targets[tf]],
            }
            for k, tf in enumerate(model.tf_order)
        },
        "tf_activity": {
            name: [genes[tf] for k, tf in enumerate(model.tf_order) if model.tf_active[t, k]]
            for t, name in enumerate(model.type_names)
        },
        "degree_report": report.to_dict(),
    }


def _perturbation_task(
    config: SyntheticConfig,
    model: PlantedModel,
    expression: ExpressionMatrix,
    assignment: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[ExpressionMatrix, ExpressionMatrix, List[Dict]]:
    genes = model.vocab.genes
    n = config.n_perturbation_cells
    perturbed = sorted(rng.choice(config.n_tfs, size=config.n_perturbation_tfs, replace=False).tolist())
    n_heldout = int(math.floor(config.heldout_fraction * n + 1e-9))
    ids, controls, posts, records = [], [], [], []
    for e in range(n):
        tf = perturbed[e % len(perturbed)]
        heldout = e >= n - n_heldout
        if heldout:
            t = int(rng.integers(config.n_cell_types))
            cell = f"Q{e:04d}"
            control = model.simulate(t, rng)
        else:
            row = int(rng.integers(expression.n_cells))
            t = int(assignment[row])
            cell = expression.cell_ids[row]
            control = expression.values[row].copy()
        target_ids = [g for g, _ in model.targets[tf]]
        post = control.copy()
        post[target_ids] += PERTURBATION_EFFECT
        example_id = f"P{e:04d}"
        ids.append(example_id)
        controls.append(control)
        posts.append(post)
        records.append({
            "id": example_id,
            "cell": cell,
            "cell_type": model.type_names[t],
            "genes": [genes[tf]],
            "split": "heldout" if heldout else "train",
            "targets": [genes[g] for g in target_ids],
        })
    shape = (0, len(genes))
    control_matrix = ExpressionMatrix(np.array(controls).reshape(-1, len(genes)) if controls else np.zeros(shape), ids, genes)
    post_matrix = ExpressionMatrix(np.array(posts).reshape(-1, len(genes)) if posts else np.zeros(shape), ids, genes)
    return control_matrix, post_matrix, records


def gen_synthetic(config: SyntheticConfig, out_dir: PathLike) -> DatasetManifest:
    """Generate the dataset under ``out_dir`` and write its manifest.

    Output is a pure function of ``config``: the same config (seed included)
    gives byte-identical files.

    Raises:
        ConfigError: infeasible configuration
    """
    out_dir = Path(out_dir)
    rng = stream(config.seed, Stream.SYNTHETIC)
    model, enhancers = plant_model(config, rng)
    assignment = _cell_type_assignment(config, rng)
    cells = [f"C{i:04d}" for i in range(config.n_cells)]
    values = np.vstack([model.simulate(int(t), rng) for t in assignment])
    expression = ExpressionMatrix(values, tuple(cells), model.vocab.genes)
    grns = [model.type_grn(t) for t in range(config.n_cell_types)]
    control, post, records = _perturbation_task(config, model, expression, assignment, rng)

    manifest = DatasetManifest(
        root=out_dir, files=dict(DATASET_FILES), seed=config.seed,
        version=GENERATOR_VERSION, config=config.model_dump(),
    )
    save_matrix(expression, manifest.path("expression"))
    write_coordinates(model.vocab.coordinates, manifest.path("coordinates"))
    write_enhancers(enhancers, manifest.path("enhancers"))
    save_gene_list([model.vocab.genes[tf] for tf in model.tf_order], manifest.path("tfs"))
    save_cell_types({c: model.type_names[int(t)] for c, t in zip(cells, assignment)}, manifest.path("cell_types"))
    write_edge_list(grns, model.vocab, manifest.path("truth_grn"))
    _write_json(_ground_truth(model, grns), manifest.path("ground_truth"))
    save_matrix(control, manifest.path("perturb_control"))
    save_matrix(post, manifest.path("perturb_post"))
    _write_json(records, manifest.path("perturb_examples"))
    manifest.record_checksums()
    manifest.write()
    logger.info(
        "synthetic dataset: %d cells, %d genes, %d TFs, %d perturbation examples in %s",
        config.n_cells, config.n_genes, config.n_tfs, len(records), out_dir,
    )
    return manifest


def _write_json(payload, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


__all__ = [
    "GENERATOR_VERSION",
    "DATASET_FILES",
    "PlantedModel",
    "plant_model",
    "gen_synthetic",
]
