"""Structure-aware masked-expression pretraining.

One step, per cell: build the co-expression graph from the unmasked
expression, perturb both GRN scales, encode them with the graph encoder and
sum the scales, encode the masked tokens with the backbone, fuse by
cross-attention, decode and score the masked positions. Per-cell gradients
are computed on separate tapes and reduced in batch order, so any worker
count gives the same update.
"""

import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from grnformer.backbone.loss import masked_mse_loss
from grnformer.backbone.tokenize import MaskSpec, TokenSequence, apply_mask, tokenize_cell
from grnformer.backbone.transformer import decoder_forward, encoder_forward, run_blocks
from grnformer.config import TrainConfig
from grnformer.core.optim import OptimizerState, optimizer_step
from grnformer.core.tensor import ComputationTape, Tensor, add, constant, matmul
from grnformer.encoder.sage import NodeEmbeddings, aggregation_matrices, combine_scales, sage_forward
from grnformer.encoder.sampling import perturb_grn, random_grn, random_perturb_grn
from grnformer.errors import ContractError, DataError
from grnformer.fusion.attention import fuse
from grnformer.grn.network import build_co_expression_graph
from grnformer.models import CoExpressionGraph, EmbeddingSet, ExpressionMatrix, Grn, GrnScale
from grnformer.tables import FLOAT_FORMAT
from grnformer.training.model import ModelParams, Stream, init_model, stream

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_CELL_SCALE_MODES = ("hybrid", "cell", "random")
_TYPE_SCALE_MODES = ("hybrid", "cell_type", "random")


@dataclass
class GrnLookup:
    """Resolves a cell to its (cell-specific, cell-type-specific) GRNs.

    ``aliases`` maps query cells without GRNs onto reference cells (see
    ``reference_map``).
    """
    cell_grns: Dict[str, Grn]
    type_grns: Dict[str, Grn]
    cell_types: Dict[str, str]
    aliases: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self._type_order = {t: i for i, t in enumerate(sorted(self.type_grns))}

    def _reference(self, cell: str) -> str:
        return self.aliases.get(cell, cell)

    def cell_type(self, cell: str) -> str:
        ref = self._reference(cell)
        if ref not in self.cell_types:
            raise DataError(f"no cell type known for cell {cell}")
        return self.cell_types[ref]

    def type_index(self, cell_type: str) -> int:
        return self._type_order[cell_type]

    def resolve(self, cell: str) -> Tuple[Grn, Grn]:
        """Both GRNs of ``cell``.

        Raises:
            DataError: the cell (or its alias) has no GRN at some scale
        """
        ref = self._reference(cell)
        g_cell = self.cell_grns.get(ref)
        g_type = self.type_grns.get(self.cell_types.get(ref, ""))
        if g_cell is None or g_type is None:
            raise DataError(f"no GRN resolvable for cell {cell}")
        return g_cell, g_type

    def with_aliases(self, aliases: Dict[str, str]) -> "GrnLookup":
        merged = dict(self.aliases)
        merged.update(aliases)
        return GrnLookup(self.cell_grns, self.type_grns, self.cell_types, merged)

    def randomized(self, seed: int) -> "GrnLookup":
        """Same owners and edge counts, TF -> gene edges drawn at random."""
        def rewire(grn: Grn, kind: int, key: int, scale: GrnScale) -> Grn:
            return random_grn(len(grn), grn.n_genes, grn.tfs, stream(seed, Stream.RANDOM_GRN, kind, key), grn.owner, scale)

        cells = {c: rewire(g, 0, i, GrnScale.CELL) for i, (c, g) in enumerate(sorted(self.cell_grns.items()))}
        types = {t: rewire(g, 1, i, GrnScale.CELL_TYPE) for i, (t, g) in enumerate(sorted(self.type_grns.items()))}
        return GrnLookup(cells, types, self.cell_types, self.aliases)


@dataclass
class TrainState:
    """Parameters, optimizer moments, step counter and loss history of a run."""
    params: ModelParams
    optimizer: OptimizerState
    config: TrainConfig
    step: int = 0
    loss_history: List[float] = field(default_factory=list)
    frozen_groups: Tuple[str, ...] = ()

    @classmethod
    def initial(cls, config: TrainConfig, n_genes: int) -> "TrainState":
        opt = config.optimizer
        return cls(
            params=init_model(config, n_genes),
            optimizer=OptimizerState(
                learning_rate=opt.learning_rate, beta1=opt.beta1, beta2=opt.beta2,
                eps=opt.eps, kind=opt.kind, momentum=opt.momentum,
            ),
            config=config,
        )

    def trainable(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for group, named in self.params.groups().items():
            if group not in self.frozen_groups:
                out.update(named)
        return out


@dataclass
class CellForward:
    """Outputs of one cell's forward pass."""
    tokens: TokenSequence
    predictions: Tensor
    h_expr: EmbeddingSet
    mask: Optional[MaskSpec] = None
    loss: Optional[Tensor] = None
    attention: Optional[List[np.ndarray]] = None


def _perturbed(
    grn: Grn,
    co_graph: Optional[CoExpressionGraph],
    alpha: float,
    strategy: str,
    rng: np.random.Generator,
) -> Grn:
    if alpha == 0:
        return grn
    if strategy == "random":
        return random_perturb_grn(grn, alpha, rng)
    return perturb_grn(grn, co_graph, alpha, rng)


def shared_type_matrices(
    lookup: GrnLookup,
    cell_type: str,
    params: ModelParams,
    seed: int,
    step: int,
) -> List[np.ndarray]:
    """Aggregation matrices of an unperturbed cell-type GRN, shared by its cells within a step."""
    return aggregation_matrices(
        lookup.type_grns[cell_type], params.sage,
        stream(seed, Stream.SAMPLE_TYPE_SHARED, step, lookup.type_index(cell_type)),
    )


def node_values(tokens: TokenSequence, n_genes: int) -> np.ndarray:
    """Token values scattered over the vocabulary; genes outside the sequence read 0."""
    values = np.zeros(n_genes)
    values[tokens.gene_ids] = tokens.values
    return values


def structure_features(
    params: ModelParams,
    values: np.ndarray,
    flagged: Optional[np.ndarray] = None,
) -> Tensor:
    """Graph-encoder input: gene identity plus projected value, as the backbone embeds a token.

    Args:
        params: model parameters (token embedding and flag are shared with the backbone)
        values: (G,) value per gene as the backbone sees it (masked genes hold the mask value)
        flagged: (G,) 0/1 perturbation flags
    """
    encoder = params.encoder
    column = constant(np.asarray(values, dtype=np.float64).reshape(-1, 1))
    features = add(encoder.gene_embedding, add(matmul(column, encoder.value_weight), encoder.value_bias))
    if flagged is not None and params.perturbation_flag is not None:
        flags = constant(np.asarray(flagged, dtype=np.float64).reshape(-1, 1))
        features = add(features, matmul(flags, params.perturbation_flag))
    return features


def structure_embeddings(
    cell_id: str,
    cell_key: int,
    x: np.ndarray,
    lookup: GrnLookup,
    params: ModelParams,
    config: TrainConfig,
    step: int,
    perturb: bool = True,
    type_matrices: Optional[Dict[str, List[np.ndarray]]] = None,
    values: Optional[np.ndarray] = None,
    flagged: Optional[np.ndarray] = None,
) -> Optional[NodeEmbeddings]:
    """h_struct of one cell under the configured GRN mode (None for ``none``).

    The co-expression graph always comes from the unmasked ``x``; node
    features read ``values`` (default ``x``), which the caller masks.
    """
    mode = config.grn_mode
    if mode == "none":
        return None
    seed = config.seed
    g_cell, g_type = lookup.resolve(cell_id)
    alpha = config.alpha if perturb else 0.0
    co_graph = None
    if alpha > 0 and config.perturbation == "coexpression":
        co_graph = build_co_expression_graph(x, g_cell.n_genes, cell_id)

    features = structure_features(params, x if values is None else values, flagged)
    parts: List[NodeEmbeddings] = []
    if mode in _CELL_SCALE_MODES:
        grn = _perturbed(g_cell, co_graph, alpha, config.perturbation, stream(seed, Stream.PERTURB_CELL, step, cell_key))
        matrices = aggregation_matrices(grn, params.sage, stream(seed, Stream.SAMPLE_CELL, step, cell_key))
        parts.append(sage_forward(grn, features, params.sage, matrices=matrices, scale=GrnScale.CELL.value))
    if mode in _TYPE_SCALE_MODES:
        if alpha == 0:
            cell_type = lookup.cell_type(cell_id)
            cached = (type_matrices or {}).get(cell_type)
            matrices = cached if cached is not None else shared_type_matrices(lookup, cell_type, params, seed, step)
            grn = g_type
        else:
            grn = _perturbed(g_type, co_graph, alpha, config.perturbation, stream(seed, Stream.PERTURB_TYPE, step, cell_key))
            matrices = aggregation_matrices(grn, params.sage, stream(seed, Stream.SAMPLE_TYPE, step, cell_key))
        parts.append(sage_forward(grn, features, params.sage, matrices=matrices, scale=GrnScale.CELL_TYPE.value))
    return parts[0] if len(parts) == 1 else combine_scales(parts[0], parts[1])


def forward_cell(
    cell_id: str,
    cell_key: int,
    x: np.ndarray,
    lookup: GrnLookup,
    params: ModelParams,
    config: TrainConfig,
    step: int,
    mask: bool = True,
    perturb: bool = True,
    return_attention: bool = False,
    type_matrices: Optional[Dict[str, List[np.ndarray]]] = None,
    flagged_genes: Optional[Iterable[int]] = None,
    include_zeros: bool = False,
) -> Optional[CellForward]:
    """Run the full model on one cell; None when the cell has no tokens.

    Args:
        cell_id: cell identifier used for GRN lookup
        cell_key: integer keying the cell's random streams
        x: unmasked expression over the vocabulary
        lookup: GRN resolver
        params: model parameters
        config: run settings
        step: step keying the random streams
        mask: mask tokens and compute the masked loss
        perturb: apply edge perturbation (pretraining only)
        return_attention: keep the fusion attention matrices
        type_matrices: cell-type aggregation matrices shared within the step
        flagged_genes: genes receiving the perturbation-flag embedding
        include_zeros: tokenize unexpressed genes too
    """
    backbone = config.backbone
    tokens = tokenize_cell(x, backbone.max_genes, params.encoder.gene_embedding.shape[0], include_zeros)
    if len(tokens) == 0:
        logger.debug("cell %s has no expressed genes; skipped", cell_id)
        return None
    spec = None
    inputs = tokens
    if mask:
        inputs, spec = apply_mask(tokens, backbone.mask_ratio, stream(config.seed, Stream.MASK, step, cell_key))

    n_genes = params.encoder.gene_embedding.shape[0]
    token_bias = None
    gene_flags = None
    if flagged_genes is not None and params.perturbation_flag is not None:
        gene_flags = np.zeros(n_genes)
        gene_flags[np.asarray(list(flagged_genes), dtype=np.int64)] = 1.0
        token_bias = matmul(constant(gene_flags[tokens.gene_ids].reshape(-1, 1)), params.perturbation_flag)

    split = backbone.fusion_point == "before_last_block"
    n_blocks = len(params.encoder.blocks) - 1 if split else None
    h_expr = encoder_forward(inputs, backbone, params.encoder, n_blocks, token_bias)

    h_struct = structure_embeddings(
        cell_id, cell_key, x, lookup, params, config, step, perturb, type_matrices,
        values=node_values(inputs, n_genes), flagged=gene_flags,
    )
    attention = None
    if h_struct is None:
        h = h_expr.values
    else:
        fused = fuse(h_expr, h_struct, params.fusion, config.fusion, return_attention)
        h, attention = fused.h_combined, fused.attention
    if split:
        h = run_blocks(h, params.encoder.blocks[-1:], backbone.n_heads)
    predictions = decoder_forward(h, params.decoder)
    loss = masked_mse_loss(predictions, spec) if spec is not None else None
    return CellForward(tokens=tokens, predictions=predictions, h_expr=h_expr, mask=spec, loss=loss, attention=attention)


GradientMap = Dict[int, Tuple[Tensor, np.ndarray]]
CellJob = Callable[[], Optional[Tensor]]


def _run_on_tape(job: CellJob) -> Optional[Tuple[float, GradientMap]]:
    with ComputationTape() as tape:
        loss = job()
    if loss is None:
        return None
    return loss.item(), tape.gradients(loss)


def reduce_gradients(maps: Sequence[GradientMap], params: Dict[str, Tensor]) -> Dict[str, np.ndarray]:
    """Mean of per-cell gradients, summed in the given order; untouched parameters get zeros."""
    names = {id(t): name for name, t in params.items()}
    total = {name: np.zeros_like(t.data) for name, t in params.items()}
    for grads in maps:
        for key, (_, grad) in grads.items():
            name = names.get(key)
            if name is not None:
                total[name] += grad
    return {name: g / len(maps) for name, g in total.items()}


def run_batch(
    jobs: Sequence[CellJob],
    state: TrainState,
    pool: Optional[Executor] = None,
) -> float:
    """Forward/backward every job, reduce in order, update once. Returns the batch-mean loss.

    Raises:
        DataError: no job produced a loss
    """
    results = list(pool.map(_run_on_tape, jobs)) if pool is not None else [_run_on_tape(job) for job in jobs]
    results = [r for r in results if r is not None]
    if not results:
        raise DataError(f"batch at step {state.step} has no cell with expressed genes")
    trainable = state.trainable()
    grads = reduce_gradients([g for _, g in results], trainable)
    optimizer_step(state.optimizer, trainable, grads)
    return float(np.sum([loss for loss, _ in results]) / len(results))


def batch_indices(n_cells: int, batch_size: int, step: int, seed: int, kind: Stream = Stream.SHUFFLE) -> np.ndarray:
    """Cells of batch ``step``: consecutive slices of per-epoch permutations.

    The order depends only on (seed, step), so a resumed run sees the same
    batches as an uninterrupted one.
    """
    positions = step * batch_size + np.arange(batch_size)
    epochs = positions // n_cells
    out = np.empty(batch_size, dtype=np.int64)
    for epoch in np.unique(epochs):
        perm = stream(seed, kind, int(epoch)).permutation(n_cells)
        chosen = epochs == epoch
        out[chosen] = perm[positions[chosen] % n_cells]
    return out


def pretrain_step(
    cell_indices: Sequence[int],
    expression: ExpressionMatrix,
    lookup: GrnLookup,
    state: TrainState,
    config: Optional[TrainConfig] = None,
    pool: Optional[Executor] = None,
) -> float:
    """One optimizer step over a batch of cells; returns the batch-mean masked loss.

    Raises:
        DataError: a batch cell has no resolvable GRN
    """
    config = config or state.config
    step = state.step
    type_matrices: Dict[str, List[np.ndarray]] = {}
    if config.alpha == 0 and config.grn_mode in _TYPE_SCALE_MODES:
        for i in cell_indices:
            cell_type = lookup.cell_type(expression.cell_ids[i])
            if cell_type not in type_matrices:
                type_matrices[cell_type] = shared_type_matrices(lookup, cell_type, state.params, config.seed, step)

    def job(i: int) -> CellJob:
        def run() -> Optional[Tensor]:
            out = forward_cell(
                expression.cell_ids[i], int(i), expression.values[i], lookup, state.params, config, step,
                type_matrices=type_matrices,
            )
            return out.loss if out is not None else None
        return run

    loss = run_batch([job(i) for i in cell_indices], state, pool)
    state.step += 1
    state.loss_history.append(loss)
    return loss


def pretrain(
    expression: ExpressionMatrix,
    lookup: GrnLookup,
    config: TrainConfig,
    state: Optional[TrainState] = None,
    until: Optional[int] = None,
) -> TrainState:
    """Run steps ``state.step .. until`` (default ``config.steps``).

    Raises:
        ContractError: empty dataset
    """
    if expression.n_cells == 0:
        raise ContractError("cannot pretrain on an empty dataset")
    state = state or TrainState.initial(config, expression.n_genes)
    if config.grn_mode == "random":
        lookup = lookup.randomized(config.seed)
    last = config.steps if until is None else until
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        while state.step < last:
            batch = batch_indices(expression.n_cells, config.batch_size, state.step, config.seed)
            loss = pretrain_step(batch, expression, lookup, state, config, pool)
            if state.step % config.log_every == 0 or state.step == last:
                logger.info("step %d/%d loss %.6f", state.step, last, loss)
    finally:
        if pool is not None:
            pool.shutdown()
    return state


def write_loss_log(history: Sequence[float], path: PathLike, first_step: int = 1) -> None:
    """CSV ``step,loss`` with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"step": np.arange(first_step, first_step + len(history)), "loss": list(history)})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def read_loss_log(path: PathLike) -> List[float]:
    frame = pd.read_csv(path, float_precision="round_trip")
    return frame["loss"].astype(float).tolist()


__all__ = [
    "GrnLookup",
    "TrainState",
    "CellForward",
    "node_values",
    "structure_features",
    "structure_embeddings",
    "forward_cell",
    "reduce_gradients",
    "run_batch",
    "batch_indices",
    "pretrain_step",
    "pretrain",
    "write_loss_log",
    "read_loss_log",
]
