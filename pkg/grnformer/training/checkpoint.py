"""Versioned ``.npz`` checkpoints of a training run.

Layout: ``param/<name>`` for every parameter, ``opt/m/<name>`` and
``opt/v/<name>`` for optimizer moments, and ``meta``, a JSON string with the
format version, train config, seed, step, optimizer counter and loss history.
Arrays are stored as float64, so a save/load cycle is bit-exact.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from grnformer.config import TrainConfig
from grnformer.errors import DataError
from grnformer.training.trainer import TrainState

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

PathLike = Union[str, Path]


def save_checkpoint(state: TrainState, path: PathLike) -> Path:
    """Write ``state`` to ``path`` (``.npz`` appended by numpy when missing)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, np.ndarray] = {
        f"param/{name}": tensor.data for name, tensor in state.params.named_parameters().items()
    }
    arrays.update({f"opt/{key}": value for key, value in state.optimizer.state_arrays().items()})
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": state.config.model_dump(),
        "seed": state.config.seed,
        "step": state.step,
        "optimizer_steps": state.optimizer.step_count,
        "loss_history": list(state.loss_history),
        "frozen_groups": list(state.frozen_groups),
    }
    arrays["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    logger.info("checkpoint at step %d written to %s", state.step, path)
    return path


def read_checkpoint(path: PathLike) -> Dict[str, Any]:
    """Raw contents: ``{"meta": dict, "params": {...}, "optimizer": {...}}``.

    Raises:
        FileNotFoundError: no file at ``path``
        DataError: unreadable file or unsupported version
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            contents = {key: archive[key] for key in archive.files}
    except (OSError, ValueError) as e:
        raise DataError(f"{path}: unreadable checkpoint ({e})") from None
    if "meta" not in contents:
        raise DataError(f"{path}: checkpoint has no metadata")
    meta = json.loads(str(contents.pop("meta")))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: checkpoint version {meta.get('version')} is not {CHECKPOINT_VERSION}")
    return {
        "meta": meta,
        "params": {k[len("param/"):]: v for k, v in contents.items() if k.startswith("param/")},
        "optimizer": {k[len("opt/"):]: v for k, v in contents.items() if k.startswith("opt/")},
    }


def load_checkpoint(path: PathLike) -> TrainState:
    """Rebuild the TrainState saved at ``path``.

    Raises:
        DataError: parameter names or shapes disagree with the stored config
    """
    raw = read_checkpoint(path)
    meta = raw["meta"]
    config = TrainConfig.model_validate(meta["config"])
    stored = raw["params"]
    embedding = stored.get("backbone.gene_embedding")
    if embedding is None:
        raise DataError(f"{path}: checkpoint has no gene embedding")
    state = TrainState.initial(config, embedding.shape[0])
    if "finetune.perturbation_flag" in stored:
        state.params.ensure_perturbation_flag()

    expected = state.params.named_parameters()
    missing = sorted(set(expected) - set(stored))
    extra = sorted(set(stored) - set(expected))
    if missing or extra:
        raise DataError(f"{path}: parameter mismatch (missing {missing}, unexpected {extra})")
    for name, tensor in expected.items():
        if stored[name].shape != tensor.shape:
            raise DataError(f"{path}: parameter '{name}' has shape {stored[name].shape}, expected {tensor.shape}")
        tensor.assign(np.array(stored[name], dtype=np.float64))

    state.optimizer.load_arrays(raw["optimizer"])
    state.optimizer.step_count = int(meta["optimizer_steps"])
    state.step = int(meta["step"])
    state.loss_history = [float(v) for v in meta["loss_history"]]
    state.frozen_groups = tuple(meta.get("frozen_groups", ()))
    return state


__all__ = ["CHECKPOINT_VERSION", "save_checkpoint", "read_checkpoint", "load_checkpoint"]
