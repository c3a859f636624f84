"""Masked-expression transformer backbone."""

from grnformer.backbone.tokenize import MASK_VALUE, MaskSpec, TokenSequence, apply_mask, mask_count, tokenize_cell
from grnformer.backbone.transformer import (
    AttentionParams,
    BlockParams,
    DecoderParams,
    EncoderParams,
    block_forward,
    decoder_forward,
    embed_tokens,
    encoder_forward,
    init_attention_params,
    init_decoder_params,
    init_encoder_params,
    multi_head_attention,
    run_blocks,
)
from grnformer.backbone.loss import masked_mse_loss, mse_loss

__all__ = [
    "MASK_VALUE",
    "MaskSpec",
    "TokenSequence",
    "apply_mask",
    "mask_count",
    "tokenize_cell",
    "AttentionParams",
    "BlockParams",
    "DecoderParams",
    "EncoderParams",
    "block_forward",
    "decoder_forward",
    "embed_tokens",
    "encoder_forward",
    "init_attention_params",
    "init_decoder_params",
    "init_encoder_params",
    "multi_head_attention",
    "run_blocks",
    "masked_mse_loss",
    "mse_loss",
]
