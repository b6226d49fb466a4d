"""Experiment configuration: YAML files validated against a pydantic schema.

Every section has defaults, so an empty mapping plus ``scenario`` is a valid
config. Unknown keys are rejected. Validation errors name the offending
field path, e.g. ``attack.query_budget``.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .augment import ViewPolicy
from .exceptions import ExlabError
from .losses import LOSS_TAGS, LossKind
from .nn import OptimizerConfig
from .synthdata import DatasetSpec
from .victim import Architecture

SCENARIOS = (
    "train_victim",
    "steal",
    "linear_eval",
    "detect_calibrate",
    "watermark_verify",
    "dataset_inference",
    "poison_demo",
    "pow_demo",
    "full_pipeline",
)


class ConfigError(ExlabError, ValueError):
    """Invalid or unreadable experiment configuration."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OptimizerSection(_Section):
    kind: Literal["adam", "sgd_momentum"] = "adam"
    learning_rate: float = Field(1e-3, gt=0)
    momentum: float = Field(0.0, ge=0, lt=1)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    weight_decay: float = Field(0.0, ge=0)

    def build(self):
        return OptimizerConfig(**self.model_dump())


class PolicySection(_Section):
    """Augmentation ranges; ``preset: simclr`` fills unset operators."""

    preset: Literal["none", "simclr"] = "none"
    crop_scale: Optional[tuple[float, float]] = None
    flip_prob: Optional[float] = Field(None, ge=0, le=1)
    jitter_scale: Optional[tuple[float, float]] = None
    jitter_shift: Optional[tuple[float, float]] = None
    blur_sigma: Optional[tuple[float, float]] = None
    rotation: Optional[tuple[float, float]] = None

    def build(self):
        base = ViewPolicy.simclr().to_dict() if self.preset == "simclr" else ViewPolicy().to_dict()
        overrides = {k: v for k, v in self.model_dump(exclude={"preset"}).items() if v is not None}
        return ViewPolicy.from_dict({**base, **overrides})


def _simclr():
    return PolicySection(preset="simclr")


class DataSection(_Section):
    n_classes: int = Field(8, ge=2, le=14)
    samples_per_class: int = Field(200, ge=1)
    test_samples_per_class: int = Field(100, ge=1)
    image_size: int = Field(16, ge=4)
    noise: float = Field(0.08, ge=0)
    seed: int = 0

    def build(self, seed_offset=0):
        return DatasetSpec(
            n_classes=self.n_classes,
            samples_per_class=self.samples_per_class,
            test_samples_per_class=self.test_samples_per_class,
            image_size=self.image_size,
            noise=self.noise,
            seed=self.seed + seed_offset,
        )


class VictimSection(_Section):
    hidden: tuple[int, ...] = (256,)
    rep_dim: int = Field(64, ge=1)
    head_hidden: int = Field(64, ge=1)
    proj_dim: int = Field(32, ge=1)
    predictor_hidden: int = Field(64, ge=1)
    output_std: Optional[float] = Field(None, gt=0)
    epochs: int = Field(30, ge=0)
    batch_size: int = Field(128, ge=2)
    temperature: float = Field(0.5, gt=0)
    watermark: bool = False
    lambda_wm: float = Field(1.0, gt=0)
    policy: PolicySection = Field(default_factory=_simclr)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    checkpoint: Optional[str] = None
    probe_epochs: int = Field(50, ge=0)

    @field_validator("hidden")
    @classmethod
    def _positive_widths(cls, v):
        if any(h < 1 for h in v):
            raise ValueError("hidden widths must be >= 1")
        return v

    def architecture(self):
        return Architecture(
            hidden=tuple(self.hidden),
            rep_dim=self.rep_dim,
            head_hidden=self.head_hidden,
            proj_dim=self.proj_dim,
            predictor_hidden=self.predictor_hidden,
            output_std=self.output_std,
        )


class NoiseSpec(_Section):
    kind: Literal["noise"]
    mean: float = 10.0
    sigma: float = Field(1.0, ge=0)


class SimilaritySpec(_Section):
    kind: Literal["similarity_perturb"]
    metric: Literal["l2", "cosine"] = "l2"
    threshold: float = 1.0
    space: Literal["projection_z", "representation_y"] = "projection_z"
    big_mean: float = 1000.0
    big_sigma: float = Field(20.0, ge=0)


class PowSpec(_Section):
    kind: Literal["pow_gate"]
    base_bits: int = Field(8, ge=0, le=30)
    increment_bits_per_flag: int = Field(1, ge=0)
    cap_bits: int = Field(20, ge=0, le=30)


DefenseSpec = Annotated[Union[NoiseSpec, SimilaritySpec, PowSpec], Field(discriminator="kind")]


class ServeSection(_Section):
    expose: Literal["representations_y", "projections_z"] = "representations_y"
    logging: bool = True
    defenses: list[DefenseSpec] = Field(default_factory=list)


class AttackSection(_Section):
    loss: str = "mse"
    temperature: Optional[float] = Field(None, gt=0)
    query_budget: int = Field(1600, ge=0)
    epochs: int = Field(20, ge=0)
    batch_size: int = Field(64, ge=2)
    pool: Literal["fresh", "in_distribution", "out_distribution"] = "fresh"
    pool_size: Optional[int] = Field(None, ge=1)
    mode: Literal["direct", "recreated_head", "access_head"] = "direct"
    policy: PolicySection = Field(default_factory=PolicySection)
    optimizer: OptimizerSection = Field(default_factory=OptimizerSection)
    rep_dim: Optional[int] = Field(None, ge=1)
    hidden: Optional[tuple[int, ...]] = None

    @field_validator("loss")
    @classmethod
    def _known_loss(cls, v):
        if v not in LOSS_TAGS:
            raise ValueError(f"unknown loss {v!r}; expected one of {list(LOSS_TAGS)}")
        return v

    def loss_kind(self):
        return LossKind(self.loss, self.temperature)


class DetectSection(_Section):
    metrics: tuple[Literal["l2", "cosine"], ...] = ("l2", "cosine")
    n_pairs: int = Field(500, ge=2)
    max_fpr: float = Field(0.1, ge=0, le=1)
    policy: PolicySection = Field(default_factory=_simclr)


class WatermarkSection(_Section):
    n_sets: int = Field(20, ge=2)
    baseline: float = Field(0.5, ge=0, le=1)


class InferenceSection(_Section):
    n_aug: int = Field(10, ge=1)
    n_samples: Optional[int] = Field(None, ge=2)
    supervised_epochs: int = Field(30, ge=0)
    supervised_augment: bool = True
    policy: PolicySection = Field(default_factory=_simclr)


class PoisonSection(_Section):
    epsilon: float = Field(1.0, gt=0)
    beta: float = Field(1.0, ge=0)
    steps: int = Field(100, ge=1)
    input_dim: int = Field(16, ge=1)
    hidden: int = Field(16, ge=1)
    rep_dim: int = Field(8, ge=1)
    n_classes: int = Field(4, ge=2)
    target: int = Field(0, ge=0)


class PowDemoSection(_Section):
    difficulties: tuple[int, ...] = tuple(range(0, 13))
    trials: int = Field(50, ge=1)
    base_bits: int = Field(8, ge=0, le=30)
    increment_bits_per_flag: int = Field(1, ge=0)
    cap_bits: int = Field(20, ge=0, le=30)

    @field_validator("difficulties")
    @classmethod
    def _range(cls, v):
        if not v or any(not 0 <= d <= 30 for d in v):
            raise ValueError("difficulties must be a non-empty list of values in [0, 30]")
        return v


class ExperimentConfig(_Section):
    scenario: Literal[SCENARIOS]  # type: ignore[valid-type]
    seed: int = 0
    out: str = "out"
    data: DataSection = Field(default_factory=DataSection)
    victim: VictimSection = Field(default_factory=VictimSection)
    serve: ServeSection = Field(default_factory=ServeSection)
    attack: AttackSection = Field(default_factory=AttackSection)
    detect: DetectSection = Field(default_factory=DetectSection)
    watermark: WatermarkSection = Field(default_factory=WatermarkSection)
    inference: InferenceSection = Field(default_factory=InferenceSection)
    poison: PoisonSection = Field(default_factory=PoisonSection)
    pow: PowDemoSection = Field(default_factory=PowDemoSection)

    def config_hash(self):
        """Hash of everything that affects results (the output directory is excluded)."""
        payload = json.dumps(self.model_dump(mode="json", exclude={"out"}), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def to_yaml(self):
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=True)


def schema():
    """JSON schema of the config format."""
    return ExperimentConfig.model_json_schema()


def _error_path(err):
    return ".".join(str(p) for p in err["loc"] if not (isinstance(p, str) and p in ("noise", "similarity_perturb", "pow_gate")))


def parse_config(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], _error_path(first) or "<root>") from None


def read_config_data(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}", str(path)) from None
    return {} if data is None else data


def load_config(path) -> ExperimentConfig:
    return parse_config(read_config_data(path))


def get_path(data, dotted):
    node = data
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError("no such field", dotted)
        node = node[key]
    return node


def set_path(data, dotted, value):
    """Copy of ``data`` with the field at ``dotted`` replaced; parents are created."""
    data = copy.deepcopy(data)
    node = data
    keys = dotted.split(".")
    for key in keys[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError("not a section", dotted)
        node = child
    node[keys[-1]] = value
    return data


def numeric_field(cfg: ExperimentConfig, dotted):
    """Return ``int`` or ``float`` for a numeric field, else raise ``ConfigError``."""
    value = get_path(cfg.model_dump(mode="python"), dotted)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("sweep axis must address a numeric field", dotted)
    annotation = _field_annotation(dotted)
    return float if annotation is float or isinstance(value, float) else int


def _field_annotation(dotted):
    model = ExperimentConfig
    annotation = None
    for key in dotted.split("."):
        field = model.model_fields.get(key)
        if field is None:
            return None
        annotation = field.annotation
        model = annotation if isinstance(annotation, type) and issubclass(annotation, BaseModel) else None
        if model is None:
            break
    if annotation is Optional[float]:
        return float
    return annotation
