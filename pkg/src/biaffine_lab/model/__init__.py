from .checkpoint import CheckpointError, load_checkpoint, read_meta, save_checkpoint
from .config import ModelConfig
from .layers import Biaffine, BiLstmStack, GatLayer, Linear, Mlp, biaffine_score, gat_layer, layer_norm
from .parser import BiaffineParser, ForwardOutput, ScoreSet, build_parser

__all__ = [
    "Biaffine",
    "BiaffineParser",
    "BiLstmStack",
    "CheckpointError",
    "ForwardOutput",
    "GatLayer",
    "Linear",
    "Mlp",
    "ModelConfig",
    "ScoreSet",
    "biaffine_score",
    "build_parser",
    "gat_layer",
    "layer_norm",
    "load_checkpoint",
    "read_meta",
    "save_checkpoint",
]
