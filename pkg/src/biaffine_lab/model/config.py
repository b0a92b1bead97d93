from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

SCALINGS = ("none", "inv_sqrt_d")


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``scaling`` is ``"none"`` (a = 1) or ``"inv_sqrt_d"`` (a = 1/sqrt(d), with
    d the input width of the biaffine layer being scaled).
    """

    d_f: int = 100
    feature_mode: str = "trainable"
    tagger: bool = True
    tagger_bilstm: bool = True
    tagger_hidden: int = 100
    tag_embeddings: bool = True
    tag_embed_dim: int = 100
    tag_oracle: bool = False
    parser_layers: int = 1
    parser_hidden: int = 100
    d_mlp: int = 100
    d_rel: int = 100
    layer_norm: bool = False
    init: str = "uniform"
    scaling: str = "inv_sqrt_d"
    gat_pairs: int = 0
    n_tags: int = 0
    n_rels: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("d_f", "tagger_hidden", "tag_embed_dim", "parser_hidden", "d_mlp", "d_rel"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.parser_layers < 0 or self.gat_pairs < 0:
            raise ValueError("parser_layers and gat_pairs must be >= 0")
        if self.scaling not in SCALINGS:
            raise ValueError(f"scaling must be one of {SCALINGS}")
        if self.init not in ("uniform", "normal"):
            raise ValueError("init must be 'uniform' or 'normal'")
        if self.feature_mode not in ("trainable", "frozen"):
            raise ValueError("feature_mode must be 'trainable' or 'frozen'")
        if self.tag_oracle and not self.tag_embeddings:
            raise ValueError("tag_oracle only makes sense with tag_embeddings")

    def scale_for(self, d: int) -> float:
        return 1.0 / math.sqrt(d) if self.scaling == "inv_sqrt_d" else 1.0

    @property
    def predicts_tags(self) -> bool:
        return self.tagger and not self.tag_oracle

    @property
    def parser_input_dim(self) -> int:
        return self.d_f + (self.tag_embed_dim if self.tag_embeddings else 0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys {sorted(unknown)}")
        return cls(**d)
