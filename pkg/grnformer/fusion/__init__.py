"""Cross-attention fusion of expression and regulatory-structure embeddings."""

from grnformer.fusion.attention import (
    CrossAttentionParams,
    FusionOutput,
    align_structure,
    combine,
    cross_attention,
    fuse,
    init_fusion_params,
    write_attention_dump,
)

__all__ = [
    "CrossAttentionParams",
    "FusionOutput",
    "align_structure",
    "combine",
    "cross_attention",
    "fuse",
    "init_fusion_params",
    "write_attention_dump",
]
