"""Training loop with interval evaluation, best-dev selection and early stopping."""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..analysis import RankTrace, VarianceEntry, VarianceTrace, track_effective_rank
from ..data.batching import Batch, collate, make_batches
from ..data.sample import AnnotatedGraphSample, DataError
from ..decode import DEFAULT_TAU, decode
from ..eval import MetricsReport, evaluate_predictions
from ..model.checkpoint import save_checkpoint
from ..model.parser import BiaffineParser, ForwardOutput
from ..numerics import SeededRng
from ..numerics import autograd as ag
from .losses import (
    LossParts,
    LossWeights,
    edge_loss,
    graph_relation_loss,
    relation_loss,
    sigmoid_edge_loss,
    tag_loss,
    total_loss,
)
from .optim import OptimizerState, adamw_step, cosine_warmup_lr, grad_clip

HISTORY_COLUMNS = ("step", "split", "loss_total", "loss_tag", "loss_edge", "loss_rel",
                   "uas", "las", "f1_labeled", "f1_unlabeled", "f1_tags", "lr")
EDGE_MODES = ("softmax", "sigmoid")


class DivergenceError(ArithmeticError):
    def __init__(self, step: int, parts: tuple[float, float, float]):
        self.step = step
        self.parts = parts
        super().__init__(f"non-finite loss at step {step} (tag, edge, rel = {parts})")


@dataclass
class TrainSchedule:
    total_steps: int = 2000
    eval_interval: int = 100
    early_stop_fraction: float = 0.3
    batch_size: int = 8
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    warmup_fraction: float | None = None  # None: constant learning rate
    clip_norm: float | None = None

    def __post_init__(self):
        self.betas = tuple(self.betas)
        self.validate()

    def validate(self) -> None:
        if self.total_steps < 1 or self.eval_interval < 1:
            raise ValueError("total_steps and eval_interval must be >= 1")
        if self.total_steps % self.eval_interval:
            raise ValueError("eval_interval must divide total_steps")
        if not 0 < self.early_stop_fraction <= 1:
            raise ValueError("early_stop_fraction must lie in (0, 1]")
        if self.warmup_fraction is not None and not 0 < self.warmup_fraction <= 1:
            raise ValueError("warmup_fraction must lie in (0, 1]")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.batch_size < 1 or self.lr < 0 or self.weight_decay < 0:
            raise ValueError("batch_size >= 1, lr >= 0 and weight_decay >= 0 required")

    @property
    def patience_evals(self) -> int:
        """Early-stopping patience in evaluation intervals, rounded up."""
        return math.ceil(self.early_stop_fraction * self.total_steps / self.eval_interval - 1e-12)

    def lr_at(self, step: int) -> float:
        if self.warmup_fraction is None:
            return self.lr
        return cosine_warmup_lr(step, self.total_steps, self.lr, self.warmup_fraction)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSchedule":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown schedule keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class HistoryRow:
    step: int
    split: str
    loss_total: float
    loss_tag: float
    loss_edge: float
    loss_rel: float
    uas: float
    las: float
    f1_labeled: float
    f1_unlabeled: float
    f1_tags: float
    lr: float

    def metric(self, name: str) -> float:
        return getattr(self, name)


@dataclass
class TrainResult:
    history: list[HistoryRow]
    best_step: int
    best_metrics: dict[str, float]
    best_state: dict[str, np.ndarray]
    stopped_early: bool
    steps_run: int
    rank_trace: RankTrace = field(default_factory=RankTrace)
    variance_trace: VarianceTrace = field(default_factory=VarianceTrace)

    def rows(self, split: str) -> list[HistoryRow]:
        return [r for r in self.history if r.split == split]


def write_history(path, history: Sequence[HistoryRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for row in history:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(row, c) for c in HISTORY_COLUMNS)])
    return path


def read_history(path) -> list[HistoryRow]:
    with open(path, newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            out.append(HistoryRow(int(rec["step"]), rec["split"],
                                  *(float(rec[c]) for c in HISTORY_COLUMNS[2:])))
    return out


# losses and decoding for one batch


def _gold_graph(batch: Batch, vocab) -> tuple[np.ndarray, list[list[tuple[int, int, int]]]]:
    bsz, n = batch.mask.shape
    adj = np.zeros((bsz, n, n + 1))
    edges = []
    for b, s in enumerate(batch.samples):
        es = []
        for h, d, r in s.edges():
            adj[b, d - 1, h] = 1.0
            es.append((h, d, vocab.relations.stoi.get(r, -1)))
        edges.append(es)
    return adj, edges


def compute_losses(model: BiaffineParser, batch: Batch, out: ForwardOutput, edge_mode: str = "softmax") -> LossParts:
    if out.tag_logits is not None:
        lt = tag_loss(out.tag_logits, batch.tags, batch.mask)
    else:
        lt = ag.constant(np.float64(0.0))
    if edge_mode == "softmax":
        le = edge_loss(out.edge, batch.heads, batch.mask)
        lr = relation_loss(out.rel, batch.heads, batch.relations, batch.mask)
    elif edge_mode == "sigmoid":
        adj, edges = _gold_graph(batch, model.vocab)
        le = sigmoid_edge_loss(out.edge, adj, batch.mask)
        lr = graph_relation_loss(out.rel, edges)
    else:
        raise ValueError(f"edge_mode must be one of {EDGE_MODES}")
    return LossParts(lt, le, lr)


def decode_output(out: ForwardOutput, mode: str, tau: float = DEFAULT_TAU):
    return [decode(s, mode, tau) for s in out.score_sets()]


def _labelled(graphs, vocab) -> list[list[tuple[int, int, str]]]:
    return [[(h, d, vocab.relations.lookup(r)) for h, d, r in g.edges] for g in graphs]


@dataclass
class EvalResult:
    report: MetricsReport
    losses: tuple[float, float, float, float]  # total, tag, edge, rel
    graphs: list
    pred_tags: list | None
    score_mean: float
    score_variance: float


def evaluate_model(model: BiaffineParser, samples: Sequence[AnnotatedGraphSample], weights: LossWeights,
                   decode_mode: str = "mst", edge_mode: str = "softmax", tau: float = DEFAULT_TAU,
                   batch_size: int = 32) -> EvalResult:
    """Forward, decode and score a corpus; parameters are not modified."""
    if not samples:
        raise DataError("cannot evaluate an empty corpus")
    graphs, tags = [], []
    has_tags = model.config.predicts_tags or model.config.tag_oracle
    sums = np.zeros(4)
    edge_vals = []
    for k in range(0, len(samples), batch_size):
        chunk = list(samples[k : k + batch_size])
        batch = collate(chunk, model.vocab)
        out = model.forward(batch)
        parts = compute_losses(model, batch, out, edge_mode)
        tot = total_loss(parts, weights)
        sums += len(chunk) * np.array([float(tot.value), *parts.values()])
        graphs.extend(decode_output(out, decode_mode, tau))
        if has_tags:
            tags.extend([model.vocab.tags.lookup(t) for t in out.pred_tags[b, : len(s)]] for b, s in enumerate(chunk))
        word_rows = out.token_mask.copy()
        word_rows[:, 0] = False
        edge_vals.append(out.edge.value[word_rows[:, :, None] & out.token_mask[:, None, :]])
    report = evaluate_predictions(samples, tags if has_tags else None, _labelled(graphs, model.vocab))
    vals = np.concatenate(edge_vals)
    var = float(vals.var(ddof=1)) if vals.size > 1 else 0.0
    return EvalResult(report, tuple(sums / len(samples)), graphs, tags if has_tags else None,
                      float(vals.mean()), var)


def _row(step, split, losses, report: MetricsReport, lr) -> HistoryRow:
    return HistoryRow(step, split, *(float(x) for x in losses), report.uas, report.las,
                      report.f1_labeled, report.f1_unlabeled, report.f1_tags, float(lr))


def train_loop(model: BiaffineParser, train: Sequence[AnnotatedGraphSample], dev: Sequence[AnnotatedGraphSample],
               schedule: TrainSchedule, weights: LossWeights, rng: SeededRng,
               test: Sequence[AnnotatedGraphSample] | None = None, edge_mode: str = "softmax",
               eval_decode: str = "mst", tau: float = DEFAULT_TAU, selection_metric: str = "las",
               checkpoint_dir=None, track: bool = True, progress=None,
               checkpoint_extra: dict | None = None) -> TrainResult:
    """Train for ``schedule.total_steps`` optimizer steps.

    Every ``eval_interval`` steps one ``train`` row (interval-averaged losses,
    greedy-decoded training metrics), one ``dev`` row and optionally one
    ``test`` row are appended to the history. The parameters with the best
    dev ``selection_metric`` are restored into ``model`` at the end.
    """
    if not train:
        raise DataError("training corpus is empty")
    if not dev:
        raise DataError("development corpus is empty")
    if edge_mode not in EDGE_MODES:
        raise ValueError(f"edge_mode must be one of {EDGE_MODES}")
    train_decode = "sigmoid" if edge_mode == "sigmoid" else "greedy"
    opt = OptimizerState(lr=schedule.lr, betas=schedule.betas, eps=schedule.eps, weight_decay=schedule.weight_decay)
    params = model.params
    batch_rng = rng.spawn(7)
    queue: list[Batch] = []
    history: list[HistoryRow] = []
    rank_trace = RankTrace(config={"parser_layers": model.config.parser_layers,
                                   "parser_hidden": model.config.parser_hidden})
    var_trace = VarianceTrace()
    if track:
        rank_trace.append(track_effective_rank(model, 0))

    best_value, best_step, best_metrics = -math.inf, 0, {}
    best_state = params.state_dict()
    evals_since_best = 0
    stopped_early = False
    interval_losses = np.zeros(4)
    interval_samples: list[AnnotatedGraphSample] = []
    interval_graphs = []
    interval_tags = []
    has_tags = model.config.predicts_tags or model.config.tag_oracle
    step = 0
    lr = schedule.lr
    while step < schedule.total_steps:
        if not queue:
            queue = make_batches(train, model.vocab, schedule.batch_size, batch_rng)[::-1]
        batch = queue.pop()
        step += 1
        lr = schedule.lr_at(step - 1)
        params.zero_grads()
        out = model.forward(batch)
        parts = compute_losses(model, batch, out, edge_mode)
        loss = total_loss(parts, weights)
        vals = (float(loss.value), *parts.values())
        if not all(math.isfinite(v) for v in vals):
            raise DivergenceError(step, vals[1:])
        loss.backward()
        if schedule.clip_norm is not None:
            grad_clip(params, schedule.clip_norm)
        adamw_step(params, opt, lr)

        interval_losses += vals
        interval_samples.extend(batch.samples)
        interval_graphs.extend(decode_output(out, train_decode, tau))
        if has_tags:
            interval_tags.extend([model.vocab.tags.lookup(t) for t in out.pred_tags[b, : len(s)]]
                                 for b, s in enumerate(batch.samples))

        if step % schedule.eval_interval:
            continue
        train_report = evaluate_predictions(interval_samples, interval_tags if has_tags else None,
                                            _labelled(interval_graphs, model.vocab))
        history.append(_row(step, "train", interval_losses / schedule.eval_interval, train_report, lr))
        interval_losses[:] = 0
        interval_samples, interval_graphs, interval_tags = [], [], []

        dev_res = evaluate_model(model, dev, weights, eval_decode, edge_mode, tau)
        history.append(_row(step, "dev", dev_res.losses, dev_res.report, lr))
        if test:
            test_res = evaluate_model(model, test, weights, eval_decode, edge_mode, tau)
            history.append(_row(step, "test", test_res.losses, test_res.report, lr))
        if track:
            rank_trace.append(track_effective_rank(model, step))
            var_trace.append(VarianceEntry(step, _edge_scale(model), dev_res.score_mean, dev_res.score_variance))
        if checkpoint_dir is not None:
            save_checkpoint(Path(checkpoint_dir) / f"step{step:06d}.npz", model,
                            {**(checkpoint_extra or {}), "step": step})

        value = getattr(dev_res.report, selection_metric)
        if value > best_value:
            best_value, best_step = value, step
            best_metrics = dev_res.report.metrics()
            best_state = params.state_dict()
            evals_since_best = 0
        else:
            evals_since_best += 1
        if progress is not None:
            progress(step, history[-1])
        if evals_since_best >= schedule.patience_evals:
            stopped_early = True
            break

    params.load_state_dict(best_state)
    return TrainResult(history, best_step, best_metrics, best_state, stopped_early, step, rank_trace, var_trace)


def _edge_scale(model: BiaffineParser) -> float:
    return model.config.scale_for(model.config.d_mlp)
