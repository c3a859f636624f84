"""Configuration for the grnformer pipeline.

All sections are strict pydantic models: an unknown key anywhere in a run
config fails fast instead of silently disabling an ablation switch.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from grnformer.errors import ConfigError

SEED_ENV_VAR = "GRNFORMER_SEED"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class OptimizerConfig(StrictModel):
    """First-order optimizer settings (Adam defaults)."""
    kind: Literal["adam", "sgd"] = "adam"
    learning_rate: float = Field(1e-3, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    momentum: float = Field(0.0, ge=0, lt=1)


class SyntheticConfig(StrictModel):
    """Shape of the planted multiome dataset."""
    n_cells: int = Field(500, gt=0)
    n_genes: int = Field(200, gt=0)
    n_tfs: int = Field(20, gt=0)
    n_cell_types: int = Field(4, gt=0)
    mean_targets_per_tf: float = Field(5.0, gt=0)
    regulated_fraction: float = Field(0.6, gt=0, le=1)
    bimodal_fraction: float = Field(0.5, ge=0, le=1)
    noise_scale: float = Field(0.1, ge=0)
    n_perturbation_tfs: int = Field(6, ge=0)
    n_perturbation_cells: int = Field(40, ge=0)
    heldout_fraction: float = Field(0.25, ge=0, lt=1)
    seed: int = 0

    @model_validator(mode="after")
    def _tfs_fit(self) -> "SyntheticConfig":
        if self.n_tfs >= self.n_genes:
            raise ValueError("n_tfs must be smaller than n_genes")
        return self


class GrnLinkConfig(StrictModel):
    """eRegulon linking criteria."""
    proximity_kb: float = Field(150.0, gt=0)
    corr_floor: float = Field(0.03, ge=0, lt=1)


class ActivityConfig(StrictModel):
    """AUCell scoring, EM fitting and threshold-rule constants."""
    top_fraction: float = Field(0.05, gt=0, le=1)
    em_restarts: int = Field(5, ge=1)
    em_tolerance: float = Field(1e-8, gt=0)
    em_max_iter: int = Field(500, ge=1)
    variance_floor: float = Field(1e-6, gt=0)
    pi_min: float = Field(0.15, gt=0, lt=0.5)
    separation: float = Field(2.0, gt=0)
    min_samples: int = Field(20, ge=2)


class BackboneConfig(StrictModel):
    """Toy expression transformer."""
    hidden_width: int = Field(64, gt=0)
    n_layers: int = Field(2, ge=0)
    n_heads: int = Field(4, gt=0)
    ff_width: int = Field(128, gt=0)
    mask_ratio: float = Field(0.15, gt=0, lt=1)
    max_genes: int = Field(256, gt=0)
    fusion_point: Literal["encoder_output", "before_last_block"] = "encoder_output"

    @model_validator(mode="after")
    def _heads_divide_width(self) -> "BackboneConfig":
        if self.hidden_width % self.n_heads:
            raise ValueError("hidden_width must be divisible by n_heads")
        if self.fusion_point == "before_last_block" and self.n_layers < 1:
            raise ValueError("before_last_block fusion needs at least one block")
        return self


class SageConfig(StrictModel):
    """Graph encoder: layer count K, neighbor sample size S, aggregator."""
    n_layers: int = Field(2, ge=1)
    sample_size: int = Field(10, ge=1)
    activation: Literal["relu", "identity"] = "relu"
    aggregator: Literal["sage", "gcn", "gin"] = "sage"
    with_replacement: bool = False


class FusionConfig(StrictModel):
    """Cross-modal fusion layer."""
    n_heads: int = Field(4, gt=0)
    beta: float = 1.0
    mode: Literal["cross_attention", "add", "concat"] = "cross_attention"


class TrainConfig(StrictModel):
    """Structure-aware pretraining run."""
    alpha: float = Field(0.2, ge=0, lt=1)
    batch_size: int = Field(8, gt=0)
    steps: int = Field(300, ge=0)
    seed: int = 0
    workers: int = Field(1, ge=1)
    grn_mode: Literal["hybrid", "cell_type", "cell", "random", "none"] = "hybrid"
    perturbation: Literal["coexpression", "random"] = "coexpression"
    init_scale: float = Field(0.1, gt=0)
    log_every: int = Field(10, ge=1)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    backbone: BackboneConfig = Field(default_factory=BackboneConfig)
    sage: SageConfig = Field(default_factory=SageConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)

    @model_validator(mode="after")
    def _fusion_heads(self) -> "TrainConfig":
        if self.backbone.hidden_width % self.fusion.n_heads:
            raise ValueError("hidden_width must be divisible by fusion.n_heads")
        return self


class FinetuneConfig(StrictModel):
    """Perturbation-prediction fine-tune."""
    steps: int = Field(300, ge=0)
    batch_size: int = Field(8, gt=0)
    freeze_backbone: bool = False
    reference_k: int = Field(1, ge=1)
    residual: bool = False
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)


class AnalysisConfig(StrictModel):
    """Attention analysis over sampled evaluation cells."""
    n_cells: int = Field(64, gt=0)
    seed: int = 0
    dump_attention: bool = False


class PathsConfig(StrictModel):
    """Input locations; relative paths resolve against the run's out-dir."""
    manifest: str = "manifest.json"
    celltype_grn: str = "grns/celltype.tsv"
    cell_grn: str = "grns/cell.tsv"
    eregulons: str = "eregulons.json"
    checkpoint: str = "checkpoint.npz"


class RunConfig(StrictModel):
    """Single JSON document covering every pipeline stage."""
    seed: int = 0
    out_dir: str = "runs/default"
    workers: int = Field(1, ge=1)
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)
    grn: GrnLinkConfig = Field(default_factory=GrnLinkConfig)
    activity: ActivityConfig = Field(default_factory=ActivityConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    finetune: FinetuneConfig = Field(default_factory=FinetuneConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    @field_validator("out_dir")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("out_dir cannot be empty")
        return value

    def resolve(self, relative: str) -> Path:
        path = Path(relative)
        return path if path.is_absolute() else Path(self.out_dir) / path


def resolve_seed(cli_seed: Optional[int], config_seed: int) -> int:
    """CLI flag wins, then ``GRNFORMER_SEED`` (``.env`` honoured), then the config."""
    if cli_seed is not None:
        return cli_seed
    load_dotenv(override=False)
    env_value = os.environ.get(SEED_ENV_VAR, "").strip()
    if env_value:
        try:
            return int(env_value)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got '{env_value}'") from None
    return config_seed


def apply_overrides(
    config: RunConfig,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    workers: Optional[int] = None,
) -> RunConfig:
    """Return a copy with CLI overrides applied and the seed pushed into every section."""
    data = config.model_dump()
    resolved = resolve_seed(seed, config.seed)
    data["seed"] = resolved
    for section in ("synthetic", "train", "analysis"):
        data[section]["seed"] = resolved
    if out_dir is not None:
        data["out_dir"] = out_dir
    if workers is not None:
        data["workers"] = workers
    data["train"]["workers"] = data["workers"]
    return _validate(data, "overrides")


def _validate(data: Dict[str, Any], source: str) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid config ({source}): {problems}") from None


def load_run_config(
    path: Optional[str] = None,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    workers: Optional[int] = None,
) -> RunConfig:
    """Read a run config JSON (defaults when ``path`` is None) and apply overrides.

    Raises:
        FileNotFoundError: the config path does not exist
        ConfigError: malformed JSON, unknown keys or invalid values
    """
    data: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise FileNotFoundError(f"config file not found: {config_path}")
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path}: invalid JSON - {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{config_path}: top level must be a JSON object")
    return apply_overrides(_validate(data, path or "defaults"), seed=seed, out_dir=out_dir, workers=workers)


def get_train_config(**overrides: Any) -> TrainConfig:
    """TrainConfig with keyword overrides applied on top of the defaults."""
    try:
        return TrainConfig(**overrides)
    except ValidationError as e:
        raise ConfigError(f"invalid train config: {e}") from None


def get_synthetic_config(**overrides: Any) -> SyntheticConfig:
    """SyntheticConfig with keyword overrides applied on top of the defaults."""
    try:
        return SyntheticConfig(**overrides)
    except ValidationError as e:
        raise ConfigError(f"invalid synthetic config: {e}") from None


__all__ = [
    "SEED_ENV_VAR",
    "OptimizerConfig",
    "SyntheticConfig",
    "GrnLinkConfig",
    "ActivityConfig",
    "BackboneConfig",
    "SageConfig",
    "FusionConfig",
    "TrainConfig",
    "FinetuneConfig",
    "AnalysisConfig",
    "PathsConfig",
    "RunConfig",
    "resolve_seed",
    "apply_overrides",
    "load_run_config",
    "get_train_config",
    "get_synthetic_config",
]
