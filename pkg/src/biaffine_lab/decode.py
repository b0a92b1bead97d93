"""Turning score sets into dependency structures.

Conventions: node 0 is ROOT, words are 1..n. Score and energy matrices are
dependent-major: ``M[i, j]`` scores head j for dependent i. Ties always go to
the lowest index.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .data.conllu import to_conllu
from .data.sample import NO_EDGE, AnnotatedGraphSample
from .data.semgraph import to_semgraph_json
from .data.vocab import Vocabulary
from .model.parser import ScoreSet

DEFAULT_TAU = 10.0


@dataclass
class ValidityReport:
    single_root: bool
    acyclic: bool
    connected: bool
    no_self_loops: bool

    @property
    def valid(self) -> bool:
        return self.single_root and self.acyclic and self.connected and self.no_self_loops


@dataclass
class DecodedGraph:
    heads: list[int]
    relations: list[int]
    mode: str
    single_root: bool
    acyclic: bool
    edges: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.edges and self.mode != "sigmoid":
            self.edges = [(h, d, r) for d, (h, r) in enumerate(zip(self.heads, self.relations), start=1)]

    @property
    def n(self) -> int:
        return len(self.heads)


@dataclass
class EnergyMatrix:
    energy: np.ndarray  # (n+1, n+1), row 0 is -inf
    best_relation: np.ndarray  # (n+1, n+1), row 0 is -1


def validate_arborescence(heads: Sequence[int], n: int | None = None) -> ValidityReport:
    heads = list(heads)
    n = len(heads) if n is None else n
    if len(heads) != n:
        raise ValueError(f"expected {n} heads, got {len(heads)}")
    self_loops = any(h == d for d, h in enumerate(heads, start=1))
    in_range = all(0 <= h <= n for h in heads)
    single_root = sum(1 for h in heads if h == 0) == 1
    # follow head pointers; a word is connected iff it reaches ROOT within n hops
    parent = [0] + heads
    connected = in_range
    if in_range:
        for d in range(1, n + 1):
            cur, hops = d, 0
            while cur != 0 and hops <= n:
                cur = parent[cur]
                hops += 1
            if cur != 0:
                connected = False
                break
    acyclic = in_range and _find_cycle(np.array([-1] + heads)) is None
    return ValidityReport(single_root, acyclic, connected, not self_loops)


def _find_cycle(heads: np.ndarray) -> list[int] | None:
    """A cycle in the head-pointer graph (``heads[0] == -1``), or None."""
    m = len(heads)
    state = np.zeros(m, dtype=np.int8)  # 0 new, 1 on current path, 2 done
    for start in range(m):
        path = []
        v = start
        while v != -1 and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = heads[v]
        if v != -1 and state[v] == 1:
            return path[path.index(v):]
        for u in path:
            state[u] = 2
    return None


def greedy_decode(scores: ScoreSet) -> DecodedGraph:
    n = scores.n
    heads = [int(np.argmax(scores.edge[i])) for i in range(1, n + 1)]
    rels = [int(np.argmax(scores.rel[i - 1, heads[i - 1]])) for i in range(1, n + 1)]
    report = validate_arborescence(heads, n) if n else ValidityReport(False, True, True, True)
    return DecodedGraph(heads, rels, "greedy", report.single_root, report.acyclic and report.no_self_loops)


def _log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def build_energy(scores: ScoreSet, tau: float = DEFAULT_TAU) -> EnergyMatrix:
    """Combine sharpened edge and best-relation log-probabilities into one matrix."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = scores.n
    energy = np.full((n + 1, n + 1), -np.inf)
    best = np.full((n + 1, n + 1), -1, dtype=np.int64)
    if n == 0:
        return EnergyMatrix(energy, best)
    edge_lp = _log_softmax(tau * scores.edge[1:], axis=-1)
    rel_lp = _log_softmax(tau * scores.rel, axis=-1)
    best[1:] = np.argmax(scores.rel, axis=-1)
    energy[1:] = edge_lp + np.take_along_axis(rel_lp, best[1:, :, None], axis=-1)[..., 0]
    return EnergyMatrix(energy, best)


def _mst(weights: np.ndarray) -> np.ndarray:
    """Maximum spanning arborescence rooted at 0 by recursive cycle contraction.

    ``weights[d, h]`` is the weight of edge h -> d (-inf for forbidden edges).
    Returns the head array with ``heads[0] == -1``.
    """
    m = weights.shape[0]
    w = weights.copy()
    np.fill_diagonal(w, -np.inf)
    w[0, :] = -np.inf
    heads = np.argmax(w, axis=1)
    heads[0] = -1
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    cyc = np.array(sorted(cycle))
    in_cycle = np.zeros(m, dtype=bool)
    in_cycle[cyc] = True
    rest = np.flatnonzero(~in_cycle)  # contains 0
    k = len(rest)
    cycle_scores = w[cyc, heads[cyc]]

    contracted = np.full((k + 1, k + 1), -np.inf)
    contracted[:k, :k] = w[np.ix_(rest, rest)]
    leaving = w[np.ix_(rest, cyc)]  # cycle node as head of an outside dependent
    contracted[:k, k] = leaving.max(axis=1)
    leaving_head = cyc[np.argmax(leaving, axis=1)]
    entering = w[np.ix_(cyc, rest)] - cycle_scores[:, None]  # outside head into a cycle node
    contracted[k, :k] = entering.max(axis=0)
    entering_dep = cyc[np.argmax(entering, axis=0)]

    sub = _mst(contracted)
    out = heads.copy()
    for new, old in enumerate(rest):
        if old == 0:
            continue
        h = sub[new]
        out[old] = leaving_head[new] if h == k else rest[h]
    h = sub[k]
    out[entering_dep[h]] = rest[h]
    return out


def arborescence_weight(energy: np.ndarray, heads: Sequence[int]) -> float:
    return float(sum(energy[d, h] for d, h in enumerate(heads, start=1)))


def chu_liu_edmonds(em: EnergyMatrix) -> DecodedGraph:
    """Best single-root arborescence: one constrained MST per candidate root word, best kept."""
    energy = em.energy
    n = energy.shape[0] - 1
    if n == 0:
        return DecodedGraph([], [], "mst", True, True)
    # the unconstrained optimum bounds the constrained one; if it already has a
    # single root child it is the answer
    best_heads = _mst(energy)[1:].tolist()
    if sum(h == 0 for h in best_heads) == 1:
        rels = [int(em.best_relation[d, h]) for d, h in enumerate(best_heads, start=1)]
        return DecodedGraph(best_heads, rels, "mst", True, True)
    best_heads, best_total = None, -np.inf
    for root_child in range(1, n + 1):
        w = energy.copy()
        w[1:, 0] = -np.inf
        w[root_child, 0] = energy[root_child, 0]
        heads = _mst(w)[1:].tolist()
        total = arborescence_weight(energy, heads)
        if best_heads is None or total > best_total:
            best_heads, best_total = heads, total
    rels = [int(em.best_relation[d, h]) for d, h in enumerate(best_heads, start=1)]
    report = validate_arborescence(best_heads, n)
    return DecodedGraph(best_heads, rels, "mst", report.single_root, report.acyclic)


def mst_decode(scores: ScoreSet, tau: float = DEFAULT_TAU) -> DecodedGraph:
    return chu_liu_edmonds(build_energy(scores, tau))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid_edge_decode(edge_scores: np.ndarray, threshold: float = 0.5) -> set[tuple[int, int]]:
    """Every (head, dependent) pair whose sigmoid score exceeds the threshold; self-loops excluded."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    probs = _sigmoid(np.asarray(edge_scores, dtype=np.float64))
    n = probs.shape[0] - 1
    return {(j, i) for i in range(1, n + 1) for j in range(n + 1) if j != i and probs[i, j] > threshold}


def sigmoid_decode(scores: ScoreSet, threshold: float = 0.5) -> DecodedGraph:
    pairs = sorted(sigmoid_edge_decode(scores.edge, threshold), key=lambda e: (e[1], e[0]))
    edges = [(h, d, int(np.argmax(scores.rel[d - 1, h]))) for h, d in pairs]
    # heads/relations carry the best-scoring head per word for tree-style consumers
    heads = [int(np.argmax(scores.edge[i])) for i in range(1, scores.n + 1)]
    rels = [int(np.argmax(scores.rel[i - 1, heads[i - 1]])) for i in range(1, scores.n + 1)]
    report = validate_arborescence(heads, scores.n) if scores.n else ValidityReport(False, True, True, True)
    return DecodedGraph(heads, rels, "sigmoid", report.single_root, report.acyclic, edges)


def decode(scores: ScoreSet, mode: str = "mst", tau: float = DEFAULT_TAU, threshold: float = 0.5) -> DecodedGraph:
    if mode == "greedy":
        return greedy_decode(scores)
    if mode == "mst":
        return mst_decode(scores, tau)
    if mode == "sigmoid":
        return sigmoid_decode(scores, threshold)
    raise ValueError(f"unknown decode mode {mode!r}")


def decoded_to_conllu(samples: Sequence[AnnotatedGraphSample], graphs: Sequence[DecodedGraph], vocab: Vocabulary) -> str:
    rels = [[vocab.relations.lookup(r) for r in g.relations] for g in graphs]
    return to_conllu(samples, [g.heads for g in graphs], rels)


def decoded_to_semgraph(samples: Sequence[AnnotatedGraphSample], graphs: Sequence[DecodedGraph], vocab: Vocabulary,
                        pred_tags: Sequence[Sequence[int]] | None = None) -> str:
    tags = None if pred_tags is None else [[vocab.tags.lookup(t) for t in ts] for ts in pred_tags]
    edges = [[(h, d, vocab.relations.lookup(r)) for h, d, r in g.edges
              if vocab.relations.lookup(r) != NO_EDGE] for g in graphs]
    return to_semgraph_json(samples, tags, edges)
