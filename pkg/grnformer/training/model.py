"""Model parameter groups and their seeded initialization."""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from grnformer.backbone.transformer import DecoderParams, EncoderParams, init_decoder_params, init_encoder_params
from grnformer.config import TrainConfig
from grnformer.core.random import Stream, stream
from grnformer.core.tensor import Tensor, parameter
from grnformer.encoder.sage import SageLayerParams
from grnformer.fusion.attention import CrossAttentionParams, init_fusion_params


@dataclass
class ModelParams:
    """Backbone H, decoder, graph encoder F, fusion P and the fine-tune flag embedding.

    The graph encoder reads the backbone's token embedding (gene identity plus
    projected value) as its input features, so both views share it.
    """
    encoder: EncoderParams
    decoder: DecoderParams
    sage: SageLayerParams
    fusion: CrossAttentionParams
    perturbation_flag: Optional[Tensor] = None

    def groups(self) -> Dict[str, Dict[str, Tensor]]:
        groups = {
            "backbone": self.encoder.named("backbone"),
            "decoder": self.decoder.named("decoder"),
            "gnn": {f"gnn.layer{k}": w for k, w in enumerate(self.sage.weights)},
            "fusion": self.fusion.named("fusion"),
        }
        if self.perturbation_flag is not None:
            groups["finetune"] = {"finetune.perturbation_flag": self.perturbation_flag}
        return groups

    def named_parameters(self) -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for group in self.groups().values():
            out.update(group)
        return out

    def ensure_perturbation_flag(self) -> Tensor:
        """Zero-initialized (1, d) flag embedding added to perturbed gene tokens."""
        if self.perturbation_flag is None:
            self.perturbation_flag = parameter(np.zeros((1, self.encoder.width)), name="perturbation_flag")
        return self.perturbation_flag


def init_model(config: TrainConfig, n_genes: int, seed: Optional[int] = None) -> ModelParams:
    """Initialize every group from its own stream.

    Disabling a group (e.g. the structure path) therefore never changes the
    initial values of the others.
    """
    seed = config.seed if seed is None else seed
    width = config.backbone.hidden_width
    encoder = init_encoder_params(config.backbone, n_genes, stream(seed, Stream.INIT_BACKBONE), config.init_scale)
    decoder = init_decoder_params(width, stream(seed, Stream.INIT_DECODER), config.init_scale)
    sage_rng = stream(seed, Stream.INIT_SAGE)
    sage = SageLayerParams(
        weights=[
            parameter(sage_rng.normal(0.0, config.init_scale, size=(2 * width, width)), name=f"gnn.layer{k}")
            for k in range(config.sage.n_layers)
        ],
        activation=config.sage.activation,
        sample_size=config.sage.sample_size,
        aggregator=config.sage.aggregator,
        with_replacement=config.sage.with_replacement,
    )
    fusion = init_fusion_params(width, config.fusion, stream(seed, Stream.INIT_FUSION), config.init_scale)
    return ModelParams(encoder=encoder, decoder=decoder, sage=sage, fusion=fusion)


__all__ = ["Stream", "stream", "ModelParams", "init_model"]
