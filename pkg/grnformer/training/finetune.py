"""Perturbation-response fine-tuning on top of a pretrained checkpoint.

Perturbed genes are marked by adding a learned flag embedding (initialized at
zero) to their tokens; the regression head is trained on the observed
post-perturbation expression of every token.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from grnformer.activity.cell_grn import reference_map
from grnformer.backbone.loss import mse_loss
from grnformer.backbone.tokenize import tokenize_cell
from grnformer.backbone.transformer import encoder_forward
from grnformer.config import FinetuneConfig, TrainConfig
from grnformer.core.optim import OptimizerState
from grnformer.core.tensor import Tensor, add, constant
from grnformer.errors import ContractError, VocabularyError
from grnformer.models import EmbeddingSet, ExpressionMatrix, PerturbationExample
from grnformer.training.model import Stream
from grnformer.training.trainer import (
    CellForward,
    CellJob,
    GrnLookup,
    TrainState,
    batch_indices,
    forward_cell,
    run_batch,
)

logger = logging.getLogger(__name__)


@dataclass
class FinetuneResult:
    """Fine-tuned state, per-step losses and predictions keyed by example id."""
    state: TrainState
    loss_history: List[float] = field(default_factory=list)
    predictions: Dict[str, np.ndarray] = field(default_factory=dict)


def _check_vocabulary(examples: Sequence[PerturbationExample], n_genes: int) -> None:
    for example in examples:
        if example.control.size != n_genes:
            raise VocabularyError(
                f"example {example.example_id} covers {example.control.size} genes, model has {n_genes}"
            )
        unknown = [g for g in example.perturbed_genes if not 0 <= g < n_genes]
        if unknown:
            raise VocabularyError(f"example {example.example_id}: perturbed genes {unknown} not in vocabulary")


def _example_forward(
    example: PerturbationExample,
    key: int,
    step: int,
    lookup: GrnLookup,
    state: TrainState,
) -> Optional[CellForward]:
    return forward_cell(
        example.cell_id, key, example.control, lookup, state.params, state.config, step,
        mask=False, perturb=False, flagged_genes=example.perturbed_genes, include_zeros=True,
    )


def _predicted_values(out: CellForward, residual: bool) -> Tensor:
    if residual:
        return add(constant(out.tokens.values), out.predictions)
    return out.predictions


def predict(
    example: PerturbationExample,
    lookup: GrnLookup,
    state: TrainState,
    residual: bool = False,
    key: int = 0,
) -> np.ndarray:
    """Full post-perturbation profile; genes beyond the token cap keep their control value."""
    out = _example_forward(example, key, 0, lookup, state)
    predicted = example.control.copy()
    if out is not None:
        predicted[out.tokens.gene_ids] = _predicted_values(out, residual).data
    return predicted


def finetune_perturbation(
    state: TrainState,
    examples: Sequence[PerturbationExample],
    lookup: GrnLookup,
    config: FinetuneConfig,
    evaluate: Sequence[PerturbationExample] = (),
) -> FinetuneResult:
    """Train the flag embedding and model on (control, perturbed genes, post) examples.

    Args:
        state: pretrained state; its parameters are updated in place
        examples: training examples
        lookup: GRN resolver covering every example cell (aliases included)
        config: fine-tune settings
        evaluate: examples to predict once training finishes

    Returns:
        FinetuneResult with a fresh optimizer state wrapped around the same parameters.

    Raises:
        VocabularyError: an example names a gene outside the vocabulary
        ContractError: training steps requested without examples
    """
    n_genes = state.params.encoder.gene_embedding.shape[0]
    _check_vocabulary([*examples, *evaluate], n_genes)
    if config.steps > 0 and not examples:
        raise ContractError("fine-tuning needs at least one training example")

    state.params.ensure_perturbation_flag()
    opt = config.optimizer
    tuned = TrainState(
        params=state.params,
        optimizer=OptimizerState(
            learning_rate=opt.learning_rate, beta1=opt.beta1, beta2=opt.beta2,
            eps=opt.eps, kind=opt.kind, momentum=opt.momentum,
        ),
        config=state.config,
        frozen_groups=("backbone",) if config.freeze_backbone else (),
    )
    result = FinetuneResult(state=tuned)

    def job(i: int, step: int) -> CellJob:
        def run() -> Optional[Tensor]:
            example = examples[i]
            out = _example_forward(example, i, step, lookup, tuned)
            if out is None:
                return None
            return mse_loss(_predicted_values(out, config.residual), example.post[out.tokens.gene_ids])
        return run

    workers = state.config.workers
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for step in range(config.steps):
            batch = batch_indices(len(examples), config.batch_size, step, state.config.seed, Stream.FINETUNE_SHUFFLE)
            loss = run_batch([job(int(i), step) for i in batch], tuned, pool)
            tuned.step += 1
            result.loss_history.append(loss)
            if tuned.step % state.config.log_every == 0:
                logger.info("finetune step %d/%d loss %.6f", tuned.step, config.steps, loss)
    finally:
        if pool is not None:
            pool.shutdown()

    for j, example in enumerate(evaluate):
        result.predictions[example.example_id] = predict(example, lookup, tuned, config.residual, key=j)
    return result


def pooled_embeddings(
    profiles: Mapping[str, np.ndarray],
    state: TrainState,
    config: Optional[TrainConfig] = None,
) -> EmbeddingSet:
    """Mean over tokens of the unmasked backbone output, one row per cell.

    Raises:
        ContractError: a profile has no expressed gene
    """
    config = config or state.config
    rows = []
    for cell_id, x in profiles.items():
        tokens = tokenize_cell(x, config.backbone.max_genes, state.params.encoder.gene_embedding.shape[0])
        if len(tokens) == 0:
            raise ContractError(f"cell {cell_id} has no expressed genes to embed")
        rows.append(encoder_forward(tokens, config.backbone, state.params.encoder).values.data.mean(axis=0))
    return EmbeddingSet(constant(np.vstack(rows)), tuple(profiles), "cell")


def build_reference_aliases(
    queries: Mapping[str, np.ndarray],
    reference: ExpressionMatrix,
    lookup: GrnLookup,
    state: TrainState,
    k: int = 1,
) -> Dict[str, str]:
    """Map each query cell onto a reference cell whose GRNs it will borrow.

    Among the ``k`` most similar reference cells the majority cell type wins
    (ties to the nearer cell), and the nearest cell of that type is used.
    """
    if not queries:
        return {}
    ref_profiles = {c: reference.values[i] for i, c in enumerate(reference.cell_ids)}
    neighbours = reference_map(pooled_embeddings(queries, state), pooled_embeddings(ref_profiles, state), k)
    aliases: Dict[str, str] = {}
    for query, refs in neighbours.items():
        types = [lookup.cell_type(r) for r in refs]
        counts = {t: types.count(t) for t in types}
        winner = max(types, key=lambda t: (counts[t], -types.index(t)))
        aliases[query] = refs[types.index(winner)]
    logger.info("mapped %d query cells onto reference cells", len(aliases))
    return aliases


__all__ = [
    "FinetuneResult",
    "predict",
    "finetune_perturbation",
    "pooled_embeddings",
    "build_reference_aliases",
]
