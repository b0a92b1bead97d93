"""Joint training objective.

Per-sentence losses follow the usual biaffine-parser definitions: tag
cross-entropy averaged over words, edge and relation negative log-likelihoods
summed over words. A batch loss is the mean over its sentences. Positions
whose gold label is unknown (encoded -1) are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import autograd as ag


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.1
    lambda2: float = 1.0

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossParts:
    tag: ag.Var
    edge: ag.Var
    rel: ag.Var

    def values(self) -> tuple[float, float, float]:
        return float(self.tag.value), float(self.edge.value), float(self.rel.value)


def _sentence_mean(per_sentence: ag.Var) -> ag.Var:
    return ag.mean(per_sentence)


def _gather_last(logp: ag.Var, index: np.ndarray) -> ag.Var:
    """logp[..., index] elementwise over the leading dims."""
    lead = np.indices(index.shape, sparse=True)
    return logp[(*lead, index)]


def tag_loss(tag_logits: ag.Var, gold_tags: np.ndarray, mask: np.ndarray) -> ag.Var:
    """Mean over sentences of the per-word tag cross-entropy (averaged over each sentence's words)."""
    valid = mask & (gold_tags >= 0)
    logp = ag.log_softmax(tag_logits, axis=-1)
    picked = _gather_last(logp, np.maximum(gold_tags, 0))
    counts = np.maximum(valid.sum(axis=1), 1)
    per_sentence = ag.sum(picked * valid, axis=1) * (-1.0 / counts)
    return _sentence_mean(per_sentence)


def edge_loss(edge_scores: ag.Var, gold_heads: np.ndarray, mask: np.ndarray) -> ag.Var:
    """Sum over words of -log p(gold head), with p the softmax over the n+1 candidate heads.

    ``edge_scores`` is (B, n+1, n+1) with row i for word i (row 0 ignored);
    ``gold_heads`` and ``mask`` are (B, n).
    """
    bsz = mask.shape[0]
    token_mask = np.concatenate([np.ones((bsz, 1), dtype=bool), mask], axis=1)
    logp = ag.log_softmax(ag.masked_fill(edge_scores, ~token_mask[:, None, :]), axis=-1)
    words = logp[:, 1:, :]
    picked = _gather_last(words, gold_heads)
    return _sentence_mean(ag.sum(picked * mask, axis=1) * -1.0)


def relation_loss(rel_scores: ag.Var, gold_heads: np.ndarray, gold_relations: np.ndarray, mask: np.ndarray) -> ag.Var:
    """Relation cross-entropy evaluated only at the gold edges (teacher forcing)."""
    valid = mask & (gold_relations >= 0)
    b_idx, i_idx = np.indices(gold_heads.shape)
    at_gold = rel_scores[b_idx, i_idx + 1, gold_heads]  # (B, n, R)
    logp = ag.log_softmax(at_gold, axis=-1)
    picked = _gather_last(logp, np.maximum(gold_relations, 0))
    return _sentence_mean(ag.sum(picked * valid, axis=1) * -1.0)


def sigmoid_edge_loss(edge_scores: ag.Var, gold_adjacency: np.ndarray, mask: np.ndarray) -> ag.Var:
    """Binary cross-entropy over every (word, candidate head) pair, summed per sentence.

    ``gold_adjacency`` is (B, n, n+1) with 1 where an edge head -> word exists.
    """
    bsz = mask.shape[0]
    token_mask = np.concatenate([np.ones((bsz, 1), dtype=bool), mask], axis=1)
    pair_mask = mask[:, :, None] & token_mask[:, None, :]
    s = edge_scores[:, 1:, :]
    y = gold_adjacency.astype(np.float64)
    ll = ag.log_sigmoid(s) * y + ag.log_sigmoid(s * -1.0) * (1.0 - y)
    return _sentence_mean(ag.sum(ag.reshape(ll * pair_mask, (bsz, -1)), axis=1) * -1.0)


def graph_relation_loss(rel_scores: ag.Var, edges: list[list[tuple[int, int, int]]]) -> ag.Var:
    """Relation cross-entropy at every gold edge of a (possibly multi-head) graph.

    ``edges[b]`` lists (head, dependent, relation index) triples.
    """
    rows = [(b, d, h, r) for b, es in enumerate(edges) for h, d, r in es if r >= 0]
    bsz = len(edges)
    if not rows:
        return ag.mul(ag.sum(rel_scores), 0.0)
    b_idx, d_idx, h_idx, r_idx = (np.array(col) for col in zip(*rows))
    logp = ag.log_softmax(rel_scores[b_idx, d_idx, h_idx], axis=-1)
    picked = logp[np.arange(len(rows)), r_idx]
    return ag.sum(picked) * (-1.0 / bsz)


def total_loss(parts: LossParts, weights: LossWeights) -> ag.Var:
    out = ag.add(parts.edge, parts.rel) * weights.lambda2
    if weights.lambda1 != 0.0:
        out = out + parts.tag * weights.lambda1
    return out
