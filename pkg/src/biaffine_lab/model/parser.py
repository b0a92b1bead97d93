"""The full parser: features -> tagger -> tag embeddings -> BiLSTM -> [biaffine+GAT]* -> MLP heads -> biaffine scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data.batching import Batch, collate
from ..data.features import FeatureProvider
from ..data.vocab import Vocabulary
from ..numerics import ParameterStore, SeededRng
from ..numerics import autograd as ag
from .config import ModelConfig
from .layers import Biaffine, BiLstmStack, GatLayer, Linear, Mlp


@dataclass
class ScoreSet:
    """Scores for one sentence of n words.

    ``edge`` is (n+1, n+1): row i scores candidate heads j of word i (row 0, ROOT, is unused).
    ``rel`` is (n, n+1, |R|): relation scores for word i+1 under head j.
    """

    edge: np.ndarray
    rel: np.ndarray
    scaling_applied: float

    @property
    def n(self) -> int:
        return self.edge.shape[0] - 1


@dataclass
class ForwardOutput:
    tag_logits: ag.Var | None  # (B, n, |T|)
    edge: ag.Var  # (B, n+1, n+1), dependent-major
    rel: ag.Var  # (B, n+1, n+1, |R|)
    pred_tags: np.ndarray  # (B, n)
    token_mask: np.ndarray  # (B, n+1), ROOT included
    word_mask: np.ndarray  # (B, n)
    edge_scale: float
    rel_scale: float

    def score_sets(self) -> list[ScoreSet]:
        out = []
        for b, n in enumerate(self.word_mask.sum(axis=1)):
            out.append(ScoreSet(self.edge.value[b, : n + 1, : n + 1].copy(),
                                self.rel.value[b, 1 : n + 1, : n + 1].copy(), self.edge_scale))
        return out


class BiaffineParser:
    def __init__(self, config: ModelConfig, vocab: Vocabulary, rng: SeededRng,
                 features: FeatureProvider | None = None):
        if config.n_tags == 0 or config.n_rels == 0:
            config.n_tags, config.n_rels = len(vocab.tags), len(vocab.relations)
        if (config.n_tags, config.n_rels) != (len(vocab.tags), len(vocab.relations)):
            raise ValueError("config label counts do not match the vocabulary")
        self.config = config
        self.vocab = vocab
        self.params = ParameterStore()
        p, c = self.params, config
        if features is not None and features.mode != "frozen":
            raise ValueError("only frozen feature providers can be passed in; trainable ones are built here")
        self.features = features or FeatureProvider("trainable", c.d_f, vocab, p, rng.spawn(1))
        if self.features.dim != c.d_f:
            raise ValueError(f"feature dim {self.features.dim} does not match d_f={c.d_f}")

        init_rng = rng.spawn(2)
        self.tagger_lstm = None
        self.tag_classifier = None
        if c.predicts_tags:
            tag_in = c.d_f
            if c.tagger_bilstm:
                self.tagger_lstm = BiLstmStack(p, "tagger.phi", c.d_f, c.tagger_hidden, 1, init_rng)
                tag_in = 2 * c.tagger_hidden
            self.tag_classifier = Mlp(p, "tagger.mlp", tag_in, c.tagger_hidden, c.n_tags, init_rng)
        self.tag_embed = Linear(p, "tagger.emb", c.n_tags, c.tag_embed_dim, init_rng) if c.tag_embeddings else None

        d_in = c.parser_input_dim
        self.root = p.add("parser.root", init_rng.normal(d_in))
        self.encoder = BiLstmStack(p, "parser.psi", d_in, c.parser_hidden, c.parser_layers, init_rng, c.layer_norm)
        d_node = self.encoder.output_dim
        self.gat_pairs = []
        for k in range(c.gat_pairs):
            scorer = Biaffine(p, f"parser.gat{k}.biaffine", d_node, 1, init_rng)
            self.gat_pairs.append((scorer, GatLayer(p, f"parser.gat{k}.gat", d_node, init_rng)))

        self.edge_head = Mlp(p, "parser.mlp_edge_head", d_node, c.d_mlp, c.d_mlp, init_rng, c.init)
        self.edge_dep = Mlp(p, "parser.mlp_edge_dep", d_node, c.d_mlp, c.d_mlp, init_rng, c.init)
        self.rel_head = Mlp(p, "parser.mlp_rel_head", d_node, c.d_rel, c.d_rel, init_rng)
        self.rel_dep = Mlp(p, "parser.mlp_rel_dep", d_node, c.d_rel, c.d_rel, init_rng)
        self.edge_scorer = Biaffine(p, "parser.biaffine_edge", c.d_mlp, 1, init_rng, c.init)
        self.rel_scorer = Biaffine(p, "parser.biaffine_rel", c.d_rel, c.n_rels, init_rng)

    # pieces, exposed individually for testing

    def tagger_forward(self, x: ag.Var, lengths: np.ndarray) -> ag.Var:
        h = self.tagger_lstm(x, lengths) if self.tagger_lstm is not None else x
        return self.tag_classifier(h)

    def tag_embeddings(self, tags: np.ndarray) -> ag.Var:
        """Dense embedding of one-hot tags, i.e. the tags' rows of the projection plus bias."""
        return self.tag_embed.weight.T[tags] + self.tag_embed.bias

    def encode(self, batch: Batch) -> tuple[ag.Var, ag.Var | None, np.ndarray]:
        """Parser representations (B, n+1, d_node), tag logits and the tags fed to the parser."""
        c = self.config
        lengths = batch.lengths
        x = self.features.lookup(batch.words, batch.word_ids)
        tag_logits = None
        pred_tags = np.zeros(batch.word_ids.shape, dtype=np.int64)
        if self.tag_classifier is not None:
            tag_logits = self.tagger_forward(x, lengths)
            pred_tags = np.argmax(tag_logits.value, axis=-1)
        if c.tag_oracle:
            pred_tags = np.maximum(batch.tags, 0)
        parts = [x]
        if self.tag_embed is not None:
            parts.append(self.tag_embeddings(pred_tags))
        x = ag.concat(parts, axis=-1) if len(parts) > 1 else x
        bsz = x.shape[0]
        root = ag.reshape(self.root, (1, 1, -1)) + np.zeros((bsz, 1, 1))
        x = ag.concat([root, x], axis=1)
        h = self.encoder(x, lengths + 1) if c.parser_layers > 0 else x
        token_mask = np.concatenate([np.ones((bsz, 1), dtype=bool), batch.mask], axis=1)
        for scorer, gat in self.gat_pairs:
            s = scorer(h, h, c.scale_for(scorer.d))
            bias = ag.reshape(s, s.shape[:3])
            h = gat(h, token_mask, bias)
        return h, tag_logits, pred_tags

    def forward(self, batch: Batch) -> ForwardOutput:
        c = self.config
        h, tag_logits, pred_tags = self.encode(batch)
        bsz = h.shape[0]
        token_mask = np.concatenate([np.ones((bsz, 1), dtype=bool), batch.mask], axis=1)
        e_scale, r_scale = c.scale_for(c.d_mlp), c.scale_for(c.d_rel)
        edge = self.edge_scorer(self.edge_head(h), self.edge_dep(h), e_scale)
        edge = ag.reshape(edge, edge.shape[:3])
        rel = self.rel_scorer(self.rel_head(h), self.rel_dep(h), r_scale)
        return ForwardOutput(tag_logits, edge, rel, pred_tags, token_mask, batch.mask, e_scale, r_scale)

    def parser_forward(self, sample) -> ScoreSet:
        return self.forward(collate([sample], self.vocab)).score_sets()[0]

    def parser_weight_matrices(self) -> dict[str, np.ndarray]:
        """All gate matrices of the parser BiLSTM stack, by parameter name."""
        return {m.name: m.value for m in self.encoder.weight_matrices()}


def build_parser(config: ModelConfig, vocab: Vocabulary, seed: int, features: FeatureProvider | None = None) -> BiaffineParser:
    return BiaffineParser(config, vocab, SeededRng(seed), features)

