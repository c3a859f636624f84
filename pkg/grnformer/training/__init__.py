"""Structure-aware pretraining, checkpoints and perturbation fine-tuning."""

from grnformer.training.checkpoint import CHECKPOINT_VERSION, load_checkpoint, read_checkpoint, save_checkpoint
from grnformer.training.finetune import (
    FinetuneResult,
    build_reference_aliases,
    finetune_perturbation,
    pooled_embeddings,
    predict,
)
from grnformer.training.model import ModelParams, Stream, init_model, stream
from grnformer.training.trainer import (
    CellForward,
    GrnLookup,
    TrainState,
    batch_indices,
    forward_cell,
    node_values,
    pretrain,
    pretrain_step,
    read_loss_log,
    reduce_gradients,
    structure_embeddings,
    structure_features,
    write_loss_log,
)

__all__ = [
    "CHECKPOINT_VERSION",
    "load_checkpoint",
    "read_checkpoint",
    "save_checkpoint",
    "FinetuneResult",
    "build_reference_aliases",
    "finetune_perturbation",
    "pooled_embeddings",
    "predict",
    "ModelParams",
    "Stream",
    "init_model",
    "stream",
    "CellForward",
    "GrnLookup",
    "TrainState",
    "batch_indices",
    "forward_cell",
    "node_values",
    "pretrain",
    "pretrain_step",
    "read_loss_log",
    "reduce_gradients",
    "structure_embeddings",
    "structure_features",
    "write_loss_log",
]
