"""Model-extraction attacks on self-supervised encoders, and defenses against them, at desk scale."""

from .augment import ViewPolicy
from .extraction import AttackConfig, EncoderStealer, steal_direct
from .linear_eval import LinearProbe
from .losses import LossKind
from .nn import Network, OptimizerConfig, build_mlp
from .serving import RepresentationAPI, ServeConfig
from .supervised import SupervisedClassifier
from .synthdata import DatasetSpec, generate
from .victim import Architecture, ContrastiveVictim, VictimModel, train_victim, train_victim_watermarked

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "AttackConfig",
    "ContrastiveVictim",
    "DatasetSpec",
    "EncoderStealer",
    "LinearProbe",
    "LossKind",
    "Network",
    "OptimizerConfig",
    "RepresentationAPI",
    "ServeConfig",
    "SupervisedClassifier",
    "ViewPolicy",
    "VictimModel",
    "build_mlp",
    "generate",
    "steal_direct",
    "train_victim",
    "train_victim_watermarked",
]
