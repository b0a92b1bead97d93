"""Checkpoint files.

A checkpoint is a numpy ``.npz`` archive holding one array per named
parameter plus a ``__meta__`` entry: a JSON document with the format version,
the model config, the vocabulary and an arbitrary ``extra`` mapping (run
config echo, step, ...). Frozen feature tables are not stored; the meta
records the vector file path instead.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..data.features import FeatureProvider
from ..data.vocab import Vocabulary
from ..numerics import SeededRng
from .config import ModelConfig
from .parser import BiaffineParser

FORMAT = "biaffine-lab-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: BiaffineParser, extra: dict | None = None, features_path: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if features_path is None:
        features_path = model.features.path
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "model_config": model.config.to_dict(),
        "vocab": model.vocab.to_dict(),
        "features_path": features_path,
        "extra": extra or {},
    }
    arrays = {f"param/{name}": p.value for name, p in model.params.items()}
    arrays["__meta__"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def read_meta(path) -> dict:
    with np.load(path) as data:
        if "__meta__" not in data:
            raise CheckpointError(f"{path}: not a checkpoint (no __meta__ entry)")
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path}: unknown format {meta.get('format')!r}")
    if meta.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {meta.get('version')}")
    return meta


def load_checkpoint(path) -> tuple[BiaffineParser, dict]:
    meta = read_meta(path)
    config = ModelConfig.from_dict(meta["model_config"])
    vocab = Vocabulary.from_dict(meta["vocab"])
    features = None
    if config.feature_mode == "frozen":
        if not meta.get("features_path"):
            raise CheckpointError(f"{path}: frozen-feature model without a recorded vector file")
        features = FeatureProvider.from_file(meta["features_path"], vocab)
    model = BiaffineParser(config, vocab, SeededRng(0), features)
    with np.load(path) as data:
        state = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
    model.params.load_state_dict(state)
    return model, meta
