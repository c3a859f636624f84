"""Shared fixtures: a tiny vocabulary with its GRNs, expression, fast configs and gradient checks."""

from typing import Callable, Dict, Iterable, Tuple

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from grnformer.config import BackboneConfig, FusionConfig, SageConfig, SyntheticConfig, TrainConfig
from grnformer.core import ComputationTape, Tensor
from grnformer.models import Edge, ExpressionMatrix, GeneVocabulary, GenomicPosition, Grn, GrnScale
from grnformer.stage_logging import reset_stage_logger
from grnformer.training import GrnLookup

settings.register_profile(
    "grnformer",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("grnformer")

GENES = ("TF0", "TF1", "G2", "G3", "G4", "G5", "G6", "G7")
TF_NAMES = frozenset({"TF0", "TF1"})
TYPE_A_EDGES = [(0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7)]
TYPE_B_EDGES = [(1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (0, 5), (0, 6), (0, 7)]


def build_grn(pairs: Iterable[Tuple[int, int]], owner: str, scale: GrnScale = GrnScale.CELL_TYPE,
              n_genes: int = len(GENES), tfs=frozenset({0, 1})) -> Grn:
    return Grn(scale, tuple(Edge(s, t, 1.0) for s, t in pairs), owner, n_genes, frozenset(tfs))


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-3) -> float:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale))


def gradient_error(loss_fn: Callable[[], Tensor], params: Dict[str, Tensor], h: float = 1e-5) -> float:
    """Worst relative error between tape gradients and central differences over ``params``."""
    with ComputationTape() as tape:
        loss = loss_fn()
    grads = tape.gradients(loss)
    worst = 0.0
    for p in params.values():
        analytic = grads[id(p)][1] if id(p) in grads else np.zeros(p.shape)
        original = np.array(p.data)
        numeric = np.zeros(p.shape)
        for idx in np.ndindex(*p.shape):
            bumped = original.copy()
            bumped[idx] += h
            p.assign(bumped)
            up = loss_fn().item()
            bumped[idx] -= 2 * h
            p.assign(bumped)
            down = loss_fn().item()
            numeric[idx] = (up - down) / (2 * h)
        p.assign(original)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


@pytest.fixture(autouse=True)
def _fresh_stage_logger(monkeypatch):
    monkeypatch.delenv("GRNFORMER_SEED", raising=False)
    reset_stage_logger()
    yield


@pytest.fixture
def grad_check():
    return gradient_error


@pytest.fixture
def make_grn():
    return build_grn


@pytest.fixture
def vocab() -> GeneVocabulary:
    coordinates = {g: GenomicPosition("chr1", (i + 1) * 1_000_000) for i, g in enumerate(GENES)}
    return GeneVocabulary(GENES, TF_NAMES, coordinates)


@pytest.fixture
def cell_types() -> Dict[str, str]:
    return {f"c{i}": ("A" if i % 2 == 0 else "B") for i in range(6)}


@pytest.fixture
def expression() -> ExpressionMatrix:
    rng = np.random.default_rng(11)
    values = rng.uniform(0.1, 2.0, size=(6, len(GENES)))
    for i in range(6):
        values[i, (i + 2) % len(GENES)] = 0.0
    return ExpressionMatrix(values, tuple(f"c{i}" for i in range(6)), GENES)


@pytest.fixture
def type_grns() -> Dict[str, Grn]:
    return {"A": build_grn(TYPE_A_EDGES, "A"), "B": build_grn(TYPE_B_EDGES, "B")}


@pytest.fixture
def cell_grns(type_grns, cell_types) -> Dict[str, Grn]:
    out = {}
    for i, (cell, cell_type) in enumerate(sorted(cell_types.items())):
        source = type_grns[cell_type]
        keep_tf = i % 3
        edges = [e for e in source.edges if keep_tf == 2 or e.source == keep_tf]
        out[cell] = source.replace(edges, owner=cell, scale=GrnScale.CELL)
    return out


@pytest.fixture
def lookup(cell_grns, type_grns, cell_types) -> GrnLookup:
    return GrnLookup(cell_grns, type_grns, cell_types)


@pytest.fixture
def tiny_config() -> TrainConfig:
    return TrainConfig(
        alpha=0.2,
        batch_size=2,
        steps=4,
        log_every=1,
        backbone=BackboneConfig(hidden_width=8, n_layers=1, n_heads=2, ff_width=16, mask_ratio=0.3, max_genes=16),
        sage=SageConfig(n_layers=1, sample_size=4),
        fusion=FusionConfig(n_heads=2),
    )


@pytest.fixture
def small_synthetic() -> SyntheticConfig:
    return SyntheticConfig(
        n_cells=40, n_genes=40, n_tfs=4, n_cell_types=2, mean_targets_per_tf=5.0,
        n_perturbation_tfs=2, n_perturbation_cells=8, seed=3,
    )
