"""Toy expression transformer: token embedding, pre-norm self-attention blocks, linear decoder.

There is no positional encoding, so the encoder is equivariant under token
permutation.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from grnformer.backbone.tokenize import TokenSequence
from grnformer.config import BackboneConfig
from grnformer.core.tensor import (
    Tensor,
    add,
    concat_cols,
    constant,
    gather_rows,
    layer_norm_rows,
    matmul,
    parameter,
    relu,
    reshape,
    scale,
    slice_cols,
    softmax_rows,
    transpose,
)
from grnformer.errors import ShapeError
from grnformer.models import EmbeddingSet


@dataclass
class AttentionParams:
    """Query/key/value/output projections, all (d, d); heads are column blocks."""
    query: Tensor
    key: Tensor
    value: Tensor
    output: Tensor

    def named(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.query": self.query, f"{prefix}.key": self.key,
                f"{prefix}.value": self.value, f"{prefix}.output": self.output}


@dataclass
class BlockParams:
    attention: AttentionParams
    norm1_gain: Tensor
    norm1_bias: Tensor
    norm2_gain: Tensor
    norm2_bias: Tensor
    ff_in: Tensor
    ff_in_bias: Tensor
    ff_out: Tensor
    ff_out_bias: Tensor

    def named(self, prefix: str) -> Dict[str, Tensor]:
        out = self.attention.named(f"{prefix}.attn")
        out.update({
            f"{prefix}.norm1_gain": self.norm1_gain,
            f"{prefix}.norm1_bias": self.norm1_bias,
            f"{prefix}.norm2_gain": self.norm2_gain,
            f"{prefix}.norm2_bias": self.norm2_bias,
            f"{prefix}.ff_in": self.ff_in,
            f"{prefix}.ff_in_bias": self.ff_in_bias,
            f"{prefix}.ff_out": self.ff_out,
            f"{prefix}.ff_out_bias": self.ff_out_bias,
        })
        return out


@dataclass
class EncoderParams:
    """Gene identity table (G, d), scalar-to-vector value projection and blocks."""
    gene_embedding: Tensor
    value_weight: Tensor
    value_bias: Tensor
    blocks: List[BlockParams] = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.gene_embedding.shape[1]

    def named(self, prefix: str = "backbone") -> Dict[str, Tensor]:
        out = {
            f"{prefix}.gene_embedding": self.gene_embedding,
            f"{prefix}.value_weight": self.value_weight,
            f"{prefix}.value_bias": self.value_bias,
        }
        for i, block in enumerate(self.blocks):
            out.update(block.named(f"{prefix}.block{i}"))
        return out


@dataclass
class DecoderParams:
    """Per-token linear head d -> 1."""
    weight: Tensor
    bias: Tensor

    def named(self, prefix: str = "decoder") -> Dict[str, Tensor]:
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}


def _normal(rng: np.random.Generator, shape: Tuple[int, ...], std: float, name: str) -> Tensor:
    return parameter(rng.normal(0.0, std, size=shape), name=name)


def init_attention_params(width: int, rng: np.random.Generator, init_scale: float) -> AttentionParams:
    std = init_scale
    return AttentionParams(
        query=_normal(rng, (width, width), std, "query"),
        key=_normal(rng, (width, width), std, "key"),
        value=_normal(rng, (width, width), std, "value"),
        output=_normal(rng, (width, width), std, "output"),
    )


def init_encoder_params(
    config: BackboneConfig,
    n_genes: int,
    rng: np.random.Generator,
    init_scale: float = 0.1,
) -> EncoderParams:
    d, ff = config.hidden_width, config.ff_width
    blocks = []
    for _ in range(config.n_layers):
        blocks.append(BlockParams(
            attention=init_attention_params(d, rng, init_scale),
            norm1_gain=parameter(np.ones((1, d))),
            norm1_bias=parameter(np.zeros((1, d))),
            norm2_gain=parameter(np.ones((1, d))),
            norm2_bias=parameter(np.zeros((1, d))),
            ff_in=_normal(rng, (d, ff), init_scale, "ff_in"),
            ff_in_bias=parameter(np.zeros((1, ff))),
            ff_out=_normal(rng, (ff, d), init_scale, "ff_out"),
            ff_out_bias=parameter(np.zeros((1, d))),
        ))
    return EncoderParams(
        gene_embedding=_normal(rng, (n_genes, d), init_scale, "gene_embedding"),
        value_weight=_normal(rng, (1, d), init_scale, "value_weight"),
        value_bias=parameter(np.zeros((1, d))),
        blocks=blocks,
    )


def init_decoder_params(width: int, rng: np.random.Generator, init_scale: float = 0.1) -> DecoderParams:
    return DecoderParams(weight=_normal(rng, (width, 1), init_scale, "decoder"), bias=parameter(np.zeros((1, 1))))


def multi_head_attention(
    queries_in: Tensor,
    keys_in: Tensor,
    params: AttentionParams,
    n_heads: int,
    return_attention: bool = False,
) -> Tuple[Tensor, Optional[List[np.ndarray]]]:
    """Scaled dot-product attention with queries from ``queries_in`` and keys/values from ``keys_in``.

    Returns the output-projected concatenation of heads and, when asked,
    each head's (N_q, N_k) attention matrix.
    """
    width = params.query.shape[0]
    if queries_in.shape[1] != width or keys_in.shape[1] != width:
        raise ShapeError("attention inputs must match projection width", queries_in.shape, keys_in.shape)
    if width % n_heads:
        raise ShapeError(f"width {width} not divisible by {n_heads} heads", (width,))
    head_width = width // n_heads
    q = matmul(queries_in, params.query)
    k = matmul(keys_in, params.key)
    v = matmul(keys_in, params.value)
    heads = []
    attention = [] if return_attention else None
    for h in range(n_heads):
        lo, hi = h * head_width, (h + 1) * head_width
        scores = scale(matmul(slice_cols(q, lo, hi), transpose(slice_cols(k, lo, hi))), 1.0 / np.sqrt(head_width))
        weights = softmax_rows(scores)
        if attention is not None:
            attention.append(weights.data)
        heads.append(matmul(weights, slice_cols(v, lo, hi)))
    return matmul(concat_cols(heads), params.output), attention


def block_forward(x: Tensor, block: BlockParams, n_heads: int) -> Tensor:
    """Pre-norm residual block: x + MHA(LN(x)), then + FFN(LN(.))."""
    normed = layer_norm_rows(x, block.norm1_gain, block.norm1_bias)
    attended, _ = multi_head_attention(normed, normed, block.attention, n_heads)
    h = add(x, attended)
    normed = layer_norm_rows(h, block.norm2_gain, block.norm2_bias)
    hidden = relu(add(matmul(normed, block.ff_in), block.ff_in_bias))
    return add(h, add(matmul(hidden, block.ff_out), block.ff_out_bias))


def embed_tokens(tokens: TokenSequence, params: EncoderParams) -> Tensor:
    """Gene identity embedding plus projected expression value, per token."""
    identity = gather_rows(params.gene_embedding, tokens.gene_ids)
    values = constant(tokens.values.reshape(-1, 1))
    return add(identity, add(matmul(values, params.value_weight), params.value_bias))


def run_blocks(x: Tensor, blocks: List[BlockParams], n_heads: int) -> Tensor:
    for block in blocks:
        x = block_forward(x, block, n_heads)
    return x


def encoder_forward(
    tokens: TokenSequence,
    config: BackboneConfig,
    params: EncoderParams,
    n_blocks: Optional[int] = None,
    token_bias: Optional[Tensor] = None,
) -> EmbeddingSet:
    """h_expr for one cell, one row per token (rows keyed by gene index).

    Args:
        tokens: masked token sequence
        config: backbone settings (head count)
        params: encoder weights
        n_blocks: run only the first ``n_blocks`` blocks (defaults to all)
        token_bias: (n, d) term added to the token embeddings before the blocks
    """
    if params.width != config.hidden_width:
        raise ShapeError(
            f"encoder width {params.width} differs from configured {config.hidden_width}",
            (params.width,), (config.hidden_width,),
        )
    blocks = params.blocks if n_blocks is None else params.blocks[:n_blocks]
    h = embed_tokens(tokens, params)
    if token_bias is not None:
        h = add(h, token_bias)
    h = run_blocks(h, blocks, config.n_heads)
    return EmbeddingSet(h, tuple(int(g) for g in tokens.gene_ids), "expression")


def decoder_forward(h_combined: Tensor, params: DecoderParams) -> Tensor:
    """One predicted expression value per token, shape (n,)."""
    if h_combined.shape[1] != params.weight.shape[0]:
        raise ShapeError("decoder width mismatch", h_combined.shape, params.weight.shape)
    out = add(matmul(h_combined, params.weight), params.bias)
    return reshape(out, (h_combined.shape[0],))


__all__ = [
    "AttentionParams",
    "BlockParams",
    "EncoderParams",
    "DecoderParams",
    "init_attention_params",
    "init_encoder_params",
    "init_decoder_params",
    "multi_head_attention",
    "block_forward",
    "embed_tokens",
    "run_blocks",
    "encoder_forward",
    "decoder_forward",
]
