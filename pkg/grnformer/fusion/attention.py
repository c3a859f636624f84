"""Cross-modal fusion of expression and structural embeddings."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from grnformer.backbone.transformer import AttentionParams, init_attention_params, multi_head_attention
from grnformer.config import FusionConfig
from grnformer.core.tensor import Tensor, add, concat_cols, matmul, parameter, scale
from grnformer.errors import ShapeError
from grnformer.models import EmbeddingSet
from grnformer.tables import FLOAT_FORMAT

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class CrossAttentionParams:
    """Projections of the fusion layer; ``concat_weight`` serves the concat baseline."""
    attention: AttentionParams
    n_heads: int
    concat_weight: Optional[Tensor] = None

    def __post_init__(self):
        width = self.attention.query.shape[0]
        if width % self.n_heads:
            raise ValueError(f"width {width} not divisible by {self.n_heads} heads")

    @property
    def width(self) -> int:
        return self.attention.query.shape[0]

    def named(self, prefix: str = "fusion") -> Dict[str, Tensor]:
        out = self.attention.named(f"{prefix}.attn")
        if self.concat_weight is not None:
            out[f"{prefix}.concat_weight"] = self.concat_weight
        return out


def init_fusion_params(width: int, config: FusionConfig, rng: np.random.Generator, init_scale: float = 0.1) -> CrossAttentionParams:
    attention = init_attention_params(width, rng, init_scale)
    concat_weight = None
    if config.mode == "concat":
        concat_weight = parameter(rng.normal(0.0, init_scale, size=(2 * width, width)), name="concat_weight")
    return CrossAttentionParams(attention=attention, n_heads=config.n_heads, concat_weight=concat_weight)


@dataclass
class FusionOutput:
    """h_fusion, optional per-head attention matrices, and h_combined once combined."""
    h_fusion: Tensor
    attention: Optional[List[np.ndarray]] = None
    h_combined: Optional[Tensor] = None


def align_structure(h_expr: EmbeddingSet, h_struct: EmbeddingSet) -> Tensor:
    """Structural rows in the expression token order.

    Raises:
        AlignmentError: some token genes have no structural row (lists them)
    """
    if h_struct.row_ids == h_expr.row_ids:
        return h_struct.values
    return h_struct.select(h_expr.row_ids).values


def cross_attention(
    h_expr: EmbeddingSet,
    h_struct: EmbeddingSet,
    params: CrossAttentionParams,
    return_attention: bool = False,
) -> FusionOutput:
    """Multi-head attention, queries from h_expr and keys/values from h_struct.

    Raises:
        AlignmentError: token genes missing from h_struct
        ShapeError: widths differ
    """
    if h_expr.width != h_struct.width or h_expr.width != params.width:
        raise ShapeError("fusion inputs must share the fusion width", h_expr.values.shape, h_struct.values.shape)
    keys = align_structure(h_expr, h_struct)
    h_fusion, attention = multi_head_attention(h_expr.values, keys, params.attention, params.n_heads, return_attention)
    return FusionOutput(h_fusion=h_fusion, attention=attention)


def combine(h_expr: Tensor, h_fusion: Tensor, beta: float = 1.0) -> Tensor:
    """h_expr + beta * h_fusion."""
    if h_expr.shape != h_fusion.shape:
        raise ShapeError("combine needs equal shapes", h_expr.shape, h_fusion.shape)
    return add(h_expr, scale(h_fusion, beta))


def fuse(
    h_expr: EmbeddingSet,
    h_struct: EmbeddingSet,
    params: CrossAttentionParams,
    config: FusionConfig,
    return_attention: bool = False,
) -> FusionOutput:
    """Run the configured fusion mode and the beta-weighted combination.

    ``add`` and ``concat`` are the naive baselines: the aligned structural
    rows themselves, or a projection of concat(h_expr, h_struct).
    """
    if config.mode == "cross_attention":
        out = cross_attention(h_expr, h_struct, params, return_attention)
    elif config.mode == "add":
        out = FusionOutput(h_fusion=align_structure(h_expr, h_struct))
    else:
        keys = align_structure(h_expr, h_struct)
        out = FusionOutput(h_fusion=matmul(concat_cols([h_expr.values, keys]), params.concat_weight))
    out.h_combined = combine(h_expr.values, out.h_fusion, config.beta)
    return out


def write_attention_dump(
    out_dir: PathLike,
    cell_id: str,
    genes: Sequence[str],
    attention: Sequence[np.ndarray],
) -> Path:
    """Write one TSV per head plus a JSON sidecar naming genes, head count and cell.

    Returns:
        Path of the sidecar.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for h, matrix in enumerate(attention):
        path = out_dir / f"{cell_id}.head{h}.tsv"
        pd.DataFrame(matrix).to_csv(path, sep="\t", header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        files.append(path.name)
    sidecar = out_dir / f"{cell_id}.json"
    sidecar.write_text(json.dumps({"cell": cell_id, "genes": list(genes), "heads": len(attention), "files": files}, indent=2), encoding="utf-8")
    return sidecar


__all__ = [
    "CrossAttentionParams",
    "FusionOutput",
    "init_fusion_params",
    "align_structure",
    "cross_attention",
    "combine",
    "fuse",
    "write_attention_dump",
]
