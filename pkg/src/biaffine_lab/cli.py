"""Command-line tool: ``biaffine-lab {train,eval,grid,verify,analyze,synth}``.

Runs are described by a single JSON :class:`RunConfig`. Every field can be
overridden with ``--set dotted.key=value`` where the value is parsed as JSON
when possible (``--set model.d_mlp=500 --set model.layer_norm=true``) and kept
as a string otherwise.

Exit codes: 0 success, 1 verification failure, 2 config or usage error,
3 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import RankTrace, VarianceEntry, VarianceTrace, track_effective_rank
from .data import (
    DataError,
    FeatureProvider,
    build_vocabulary,
    read_conllu,
    read_semgraph_json,
    write_treebank,
)
from .decode import decoded_to_conllu, decoded_to_semgraph
from .eval import StatisticsError, aggregate_seeds, wilcoxon_one_tailed
from .model import CheckpointError, ModelConfig, build_parser, load_checkpoint, save_checkpoint
from .numerics import SeededRng
from .train import DivergenceError, LossWeights, TrainSchedule, evaluate_model, read_history, train_loop, write_history
from .verify import SUITES, run_suite

log = logging.getLogger("biaffine_lab")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3
TASKS = ("semdp", "syndp", "lgi")
DECODE_MODES = ("mst", "greedy", "sigmoid")
REPORT_METRICS = ("uas", "las", "f1_labeled", "f1_unlabeled", "f1_tags")
THREADS_ENV = "BIAFFINE_LAB_THREADS"

# sweep names as printed in hyperparameter tables -> config keys
SWEEP_ALIASES = {
    "N": "model.parser_layers",
    "h_psi": "model.parser_hidden",
    "d_mlp": "model.d_mlp",
    "a": "model.scaling",
    "LN_psi": "model.layer_norm",
    "I_par": "model.init",
    "L_gamma": "model.gat_pairs",
    "phi": "model.tagger_bilstm",
    "e_tag": "model.tag_embeddings",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything needed to reproduce a training run.

    ``train``/``dev``/``test`` are CoNLL-U files, or graph JSON files when the
    name ends in ``.json``. ``selection_metric`` defaults to LAS for ``syndp``
    and labeled F1 otherwise. In SynDP oracle mode (``model.tag_oracle``) the
    tag loss weight is forced to 0.
    """

    task: str = "syndp"
    train: str = ""
    dev: str = ""
    test: str | None = None
    drop_relations: list[str] = field(default_factory=list)
    features: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    loss: LossWeights = field(default_factory=LossWeights)
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    decode: str = "mst"
    edge_mode: str = "softmax"
    tau: float = 10.0
    selection_metric: str | None = None
    population_std: bool = True
    keep_checkpoints: bool = False
    out: str = "runs"

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["model"] = self.model.to_dict()
        d["schedule"] = self.schedule.to_dict()
        d["loss"] = asdict(self.loss)
        d["drop_relations"] = list(self.drop_relations)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        try:
            if "model" in d:
                d["model"] = ModelConfig.from_dict(d["model"])
            if "schedule" in d:
                d["schedule"] = TrainSchedule.from_dict(d["schedule"])
            if "loss" in d:
                d["loss"] = LossWeights(**d["loss"])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def with_overrides(self, assignments: Sequence[str]) -> "RunConfig":
        d = self.to_dict()
        for item in assignments:
            key, sep, raw = item.partition("=")
            if not sep or not key:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            set_dotted(d, SWEEP_ALIASES.get(key, key), parse_value(raw))
        return RunConfig.from_dict(d)

    @property
    def metric(self) -> str:
        return self.selection_metric or ("las" if self.task == "syndp" else "f1_labeled")

    @property
    def weights(self) -> LossWeights:
        if self.model.tag_oracle:
            return LossWeights(0.0, self.loss.lambda2)
        return self.loss

    def validate(self, check_paths: bool = True) -> "RunConfig":
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}")
        if self.decode not in DECODE_MODES:
            raise ConfigError(f"decode must be one of {DECODE_MODES}")
        if self.edge_mode not in ("softmax", "sigmoid"):
            raise ConfigError("edge_mode must be 'softmax' or 'sigmoid'")
        if (self.decode == "sigmoid") != (self.edge_mode == "sigmoid"):
            raise ConfigError("decode 'sigmoid' goes with edge_mode 'sigmoid' and only with it")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be a non-empty list of distinct integers")
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise ConfigError("seeds must be integers")
        if self.metric not in REPORT_METRICS:
            raise ConfigError(f"selection_metric must be one of {REPORT_METRICS}")
        if (self.features is None) != (self.model.feature_mode == "trainable"):
            raise ConfigError("features (a vector file) is required exactly when model.feature_mode is 'frozen'")
        if check_paths:
            for name in ("train", "dev", "test", "features"):
                path = getattr(self, name)
                if name in ("train", "dev") and not path:
                    raise ConfigError(f"{name} data path is required")
                if path and not Path(path).is_file():
                    raise ConfigError(f"{name} path does not exist: {path}")
        return self


def parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def set_dotted(d: dict, key: str, value) -> None:
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def read_samples(path, drop_relations=()) -> list:
    path = Path(path)
    if path.suffix == ".json":
        return read_semgraph_json(path, drop_relations)
    return read_conllu(path, drop_relations)


def max_workers(requested: int) -> int:
    """Process count for grid runs, capped by ``BIAFFINE_LAB_THREADS`` when set."""
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {cap!r}") from exc
    return max(1, requested)


def _write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _clean(metrics: dict) -> dict:
    # NaN is not valid JSON; absent metrics (no tags) become null
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in metrics.items()}


# train


@dataclass
class Corpora:
    train: list
    dev: list
    test: list | None


def load_corpora(config: RunConfig) -> Corpora:
    train = read_samples(config.train, config.drop_relations)
    dev = read_samples(config.dev, config.drop_relations)
    test = read_samples(config.test, config.drop_relations) if config.test else None
    if not train or not dev:
        raise DataError("train and dev corpora must be non-empty")
    return Corpora(train, dev, test)


def train_seed(config: RunConfig, seed: int, out_dir, corpora: Corpora | None = None) -> dict:
    """One seed of ``cmd_train``; returns the JSON summary written to ``summary.json``."""
    corpora = corpora or load_corpora(config)
    out_dir = Path(out_dir)
    vocab = build_vocabulary(corpora.train)
    features = FeatureProvider.from_file(config.features, vocab) if config.features else None
    model = build_parser(config.model, vocab, seed, features)
    echo = config.to_dict()
    result = train_loop(
        model, corpora.train, corpora.dev, config.schedule, config.weights, SeededRng(seed),
        test=corpora.test, edge_mode=config.edge_mode, eval_decode=config.decode, tau=config.tau,
        selection_metric=config.metric,
        checkpoint_dir=out_dir / "checkpoints" if config.keep_checkpoints else None,
        checkpoint_extra={"config": echo, "seed": seed},
        progress=lambda step, row: log.info("seed %d step %d %s %s=%.4f", seed, step, row.split,
                                            config.metric, row.metric(config.metric)),
    )
    write_history(out_dir / "history.csv", result.history)
    result.rank_trace.write_csv(out_dir / "rank_trace.csv")
    result.variance_trace.write_csv(out_dir / "variance_trace.csv")
    save_checkpoint(out_dir / "best.npz", model, {"config": echo, "seed": seed, "step": result.best_step})
    metrics = {"dev": _clean(result.best_metrics)}
    for row in result.rows("test"):
        if row.step == result.best_step:
            metrics["test"] = _clean({m: row.metric(m) for m in REPORT_METRICS})
    summary = {"config": echo, "seed": seed, "best_step": result.best_step, "steps_run": result.steps_run,
               "stopped_early": result.stopped_early, "metrics": metrics}
    _write_json(out_dir / "summary.json", summary)
    return summary


def aggregate_summaries(config: RunConfig, summaries: Sequence[dict]) -> dict:
    seeds = [s["seed"] for s in summaries]
    out: dict = {}
    for split in ("dev", "test"):
        if not all(split in s["metrics"] for s in summaries):
            continue
        out[split] = {}
        for m in REPORT_METRICS:
            values = [s["metrics"][split][m] for s in summaries]
            if any(v is None for v in values):
                continue
            if len(values) == 1:
                out[split][m] = {"mean": values[0], "std": 0.0, "values": values}
            else:
                agg = aggregate_seeds(values, seeds, config.population_std)
                out[split][m] = {"mean": agg.mean, "std": agg.std, "values": agg.values}
    return {"config": config.to_dict(), "seeds": seeds, "population_std": config.population_std, "metrics": out}


def cmd_train(config: RunConfig, out=None) -> dict:
    """Train every seed; writes ``seed{S}/`` run directories and ``aggregate.json`` under ``out``."""
    config.validate()
    out = Path(out or config.out)
    corpora = load_corpora(config)
    _write_json(out / "config.json", config.to_dict())
    summaries = [train_seed(config, seed, out / f"seed{seed}", corpora) for seed in config.seeds]
    aggregate = aggregate_summaries(config, summaries)
    _write_json(out / "aggregate.json", aggregate)
    return aggregate


# eval


def check_vocab(samples, model) -> None:
    vocab = model.vocab
    missing_rels = sorted({r for s in samples for r in s.relations if r not in vocab.relations}
                          | {r for s in samples for _, _, r in s.extra_edges if r not in vocab.relations})
    if missing_rels:
        raise DataError(f"vocab mismatch: relations not in the checkpoint vocabulary: {missing_rels[:10]}")
    if model.config.predicts_tags or model.config.tag_oracle:
        missing_tags = sorted({t for s in samples for t in s.tags if t not in vocab.tags})
        if missing_tags:
            raise DataError(f"vocab mismatch: tags not in the checkpoint vocabulary: {missing_tags[:10]}")


def cmd_eval(checkpoint, data, decode_mode: str = "mst", out=None) -> dict:
    """Evaluate a checkpoint on a data file; writes ``metrics.json`` and predictions to ``out``."""
    if decode_mode not in DECODE_MODES:
        raise ConfigError(f"decode mode must be one of {DECODE_MODES}")
    if not Path(data).is_file():
        raise ConfigError(f"data path does not exist: {data}")
    model, meta = load_checkpoint(checkpoint)
    echo = meta.get("extra", {}).get("config")
    run = RunConfig.from_dict(echo) if echo else RunConfig()
    samples = read_samples(data, run.drop_relations)
    if not samples:
        raise DataError(f"{data}: no sentences to evaluate")
    check_vocab(samples, model)
    edge_mode = "sigmoid" if decode_mode == "sigmoid" else "softmax"
    res = evaluate_model(model, samples, run.weights, decode_mode, edge_mode, run.tau)
    report = {"checkpoint": str(checkpoint), "data": str(data), "decode": decode_mode,
              "metrics": _clean(res.report.metrics()), "loss": res.losses[0]}
    if out is not None:
        out = Path(out)
        _write_json(out / "metrics.json", report)
        if decode_mode == "sigmoid" or Path(data).suffix == ".json":
            tags = None if res.pred_tags is None else [[model.vocab.tags.index(t) for t in ts] for ts in res.pred_tags]
            (out / "predictions.json").write_text(decoded_to_semgraph(samples, res.graphs, model.vocab, tags),
                                                  encoding="utf-8")
        else:
            (out / "predictions.conllu").write_text(decoded_to_conllu(samples, res.graphs, model.vocab),
                                                    encoding="utf-8")
    return report


# grid


def parse_sweep(spec: dict) -> dict[str, list]:
    sweep = {}
    for key, values in spec.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep values for {key!r} must be a non-empty list")
        sweep[SWEEP_ALIASES.get(key, key)] = values
    return sweep


def parse_sweep_args(items: Sequence[str]) -> dict[str, list]:
    spec = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--sweep expects KEY=V1,V2,..., got {item!r}")
        spec[key] = [parse_value(v) for v in raw.split(",")]
    return parse_sweep(spec)


def grid_configs(base: RunConfig, sweep: dict[str, list]) -> list[tuple[dict, RunConfig]]:
    keys = list(sweep)
    out = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        d = base.to_dict()
        for k, v in zip(keys, combo):
            set_dotted(d, k, v)
        out.append((dict(zip(keys, combo)), RunConfig.from_dict(d).validate()))
    return out


def _grid_job(args) -> dict:
    config_dict, seed, out_dir = args
    config = RunConfig.from_dict(config_dict)
    try:
        summary = train_seed(config, seed, out_dir)
        return {"status": "ok", "summary": summary}
    except (DivergenceError, DataError, ValueError, ArithmeticError) as exc:
        return {"status": f"error: {type(exc).__name__}: {exc}"}


def matched_checkpoint_scores(dir_a, dir_b, seeds: Sequence[int], metric: str) -> tuple[list[float], list[float]]:
    """Per-checkpoint scores of two runs paired on (seed, step), from their history CSVs.

    Test rows are used when both runs have them, dev rows otherwise.
    """
    xs, ys = [], []
    for seed in seeds:
        pa, pb = Path(dir_a) / f"seed{seed}" / "history.csv", Path(dir_b) / f"seed{seed}" / "history.csv"
        if not (pa.is_file() and pb.is_file()):
            continue
        ha, hb = read_history(pa), read_history(pb)
        split = "test" if any(r.split == "test" for r in ha) and any(r.split == "test" for r in hb) else "dev"
        a = {r.step: r.metric(metric) for r in ha if r.split == split}
        b = {r.step: r.metric(metric) for r in hb if r.split == split}
        for step in sorted(set(a) & set(b)):
            xs.append(a[step])
            ys.append(b[step])
    return xs, ys


def _cell(v) -> str:
    return v if isinstance(v, str) else json.dumps(v)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def cmd_grid(base: RunConfig, sweep: dict[str, list], out=None, jobs: int = 1) -> dict:
    """Cartesian-product sweep; writes ``grid_runs.csv``, ``grid_pivot.csv``/``.md`` and ``grid_wilcoxon.csv``."""
    base.validate()
    if not sweep:
        raise ConfigError("empty sweep")
    out = Path(out or base.out)
    configs = grid_configs(base, sweep)
    keys = list(sweep)
    tasks = [(cfg.to_dict(), seed, out / f"run{i:03d}" / f"seed{seed}")
             for i, (_, cfg) in enumerate(configs) for seed in cfg.seeds]
    workers = max_workers(jobs)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_grid_job, tasks))
    else:
        results = [_grid_job(t) for t in tasks]

    rows = []
    for (cfg_dict, seed, run_dir), res in zip(tasks, results):
        run_id = run_dir.parent.name
        values = configs[int(run_id[3:])][0]
        row = {"run_id": run_id, "seed": seed, **{k: _cell(values[k]) for k in keys}, "status": res["status"]}
        summary = res.get("summary")
        split = None
        if summary is not None:
            split = "test" if "test" in summary["metrics"] else "dev"
            row["best_step"] = summary["best_step"]
        row["split"] = split or ""
        for m in REPORT_METRICS:
            row[m] = _fmt(summary["metrics"][split][m]) if summary is not None else ""
        rows.append(row)
    columns = ["run_id", "seed", *keys, "status", "best_step", "split", *REPORT_METRICS]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "grid_runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, columns, lineterminator="\n", restval="")
        w.writeheader()
        w.writerows(rows)

    pivot = []
    for i, (values, cfg) in enumerate(configs):
        ok = [r for r in rows if r["run_id"] == f"run{i:03d}" and r["status"] == "ok"]
        prow = {"run_id": f"run{i:03d}", **{k: _cell(values[k]) for k in keys}, "n_ok": len(ok)}
        for m in REPORT_METRICS:
            vals = [float(r[m]) for r in ok if r[m] not in ("", None)]
            vals = [v for v in vals if not math.isnan(v)]
            if len(vals) >= 2:
                agg = aggregate_seeds(vals, population=base.population_std)
                prow[f"{m}_mean"], prow[f"{m}_std"] = agg.mean, agg.std
            elif vals:
                prow[f"{m}_mean"], prow[f"{m}_std"] = vals[0], 0.0
        pivot.append(prow)
    pcols = ["run_id", *keys, "n_ok", *(f"{m}_{s}" for m in REPORT_METRICS for s in ("mean", "std"))]
    with open(out / "grid_pivot.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, pcols, lineterminator="\n", restval="")
        w.writeheader()
        w.writerows({k: (repr(v) if isinstance(v, float) else v) for k, v in p.items()} for p in pivot)
    md = ["| " + " | ".join([*keys, *REPORT_METRICS]) + " |", "|" + "---|" * (len(keys) + len(REPORT_METRICS))]
    for p in pivot:
        cells = [p[k] for k in keys] + [
            f"{p[f'{m}_mean']:.4f} ± {p[f'{m}_std']:.4f}" if f"{m}_mean" in p else "-" for m in REPORT_METRICS]
        md.append("| " + " | ".join(cells) + " |")
    (out / "grid_pivot.md").write_text("\n".join(md) + "\n", encoding="utf-8")

    tests = wilcoxon_pairs(configs, out, base.metric)
    with open(out / "grid_wilcoxon.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["scaled_run", "unscaled_run", "metric", "n_pairs", "p_value", "note"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(tests)
    return {"rows": rows, "pivot": pivot, "wilcoxon": tests}


def wilcoxon_pairs(configs, out: Path, metric: str) -> list[dict]:
    """One-tailed Wilcoxon (a = 1/sqrt(d) better) for each pair of configs differing only in scaling."""
    tests = []
    for i, (_, ci) in enumerate(configs):
        if ci.model.scaling != "inv_sqrt_d":
            continue
        for j, (_, cj) in enumerate(configs):
            if cj.model.scaling != "none":
                continue
            a, b = ci.to_dict(), cj.to_dict()
            b["model"] = dict(b["model"], scaling="inv_sqrt_d")
            if a != b:
                continue
            xs, ys = matched_checkpoint_scores(out / f"run{i:03d}", out / f"run{j:03d}", ci.seeds, metric)
            note, p = "", float("nan")
            try:
                p = wilcoxon_one_tailed(xs, ys)
            except (StatisticsError, ValueError) as exc:
                note = str(exc)
            tests.append({"scaled_run": f"run{i:03d}", "unscaled_run": f"run{j:03d}", "metric": metric,
                          "n_pairs": len(xs), "p_value": repr(p), "note": note})
    return tests


# analyze


def cmd_analyze(run_dir, out=None, data=None) -> list[Path]:
    """Rank and variance traces recomputed from saved checkpoints.

    Every directory under ``run_dir`` holding ``step*.npz`` files is one run;
    its traces go to ``<run>/analysis/`` (or ``<out>/<relative path>/``) as
    ``rank_trace.csv`` and ``variance_trace.csv``. Variance is measured on ``data`` or, by default,
    on the dev file named in the checkpoint's config echo.
    """
    run_dir = Path(run_dir)
    groups: dict[Path, list[Path]] = {}
    for path in sorted(run_dir.rglob("step*.npz")):
        groups.setdefault(path.parent, []).append(path)
    if not groups:
        raise ConfigError(f"no checkpoints (step*.npz) under {run_dir}")
    written = []
    for ckpt_dir, paths in sorted(groups.items()):
        rank, var = RankTrace(), VarianceTrace()
        samples = None
        for path in sorted(paths):
            model, meta = load_checkpoint(path)
            extra = meta.get("extra", {})
            step = int(extra.get("step", int(path.stem[4:])))
            run = RunConfig.from_dict(extra["config"]) if "config" in extra else RunConfig()
            if samples is None:
                source = data or run.dev
                if not source or not Path(source).is_file():
                    raise ConfigError(f"{path}: no data to measure score variance on (pass --data)")
                samples = read_samples(source, run.drop_relations)
            rank.config = {"parser_layers": model.config.parser_layers, "parser_hidden": model.config.parser_hidden}
            rank.append(track_effective_rank(model, step))
            res = evaluate_model(model, samples, run.weights, "greedy" if run.decode != "sigmoid" else "sigmoid",
                                 run.edge_mode, run.tau)
            var.append(VarianceEntry(step, model.config.scale_for(model.config.d_mlp), res.score_mean,
                                     res.score_variance))
        home = ckpt_dir.parent if ckpt_dir.name == "checkpoints" else ckpt_dir
        target = home / "analysis" if out is None else Path(out) / home.relative_to(run_dir)
        written.append(rank.write_csv(target / "rank_trace.csv"))
        written.append(var.write_csv(target / "variance_trace.csv"))
    return written


# verify


def cmd_verify(suite: str = "all", out=None) -> int:
    checks = run_suite(suite)
    for c in checks:
        print(c.line())
    if out is not None:
        _write_json(Path(out) / f"verify_{suite}.json",
                    [{"name": c.name, "passed": bool(c.passed), "observed": str(c.observed),
                      "tolerance": c.tolerance, "seconds": c.seconds} for c in checks])
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# argument handling


def _config_from_args(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    config = config.with_overrides(args.set or [])
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--seeds expects comma-separated integers, got {args.seeds!r}") from exc
        config = _replace(config, seeds=seeds)
    if args.out:
        config = _replace(config, out=args.out)
    return config


def _replace(config: RunConfig, **changes) -> RunConfig:
    d = config.to_dict()
    d.update(changes)
    return RunConfig.from_dict(d)


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biaffine-lab", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def run_args(sp):
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--set", action="append", metavar="K=V", help="override a config field (repeatable)")
        sp.add_argument("--seeds", help="comma-separated seeds, e.g. 1,2,3,4,5")
        sp.add_argument("--out", help="output directory")

    run_args(sub.add_parser("train", help="train one model per seed"))
    g = sub.add_parser("grid", help="hyperparameter sweep")
    run_args(g)
    g.add_argument("--sweep", action="append", default=[], metavar="K=V1,V2",
                   help="swept values, e.g. a=none,inv_sqrt_d or model.d_mlp=100,500 (repeatable)")
    g.add_argument("--sweep-file", help="JSON object mapping keys to value lists")
    g.add_argument("--jobs", type=int, default=1, help=f"parallel processes (capped by {THREADS_ENV})")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("data")
    e.add_argument("--decode", default="mst", choices=DECODE_MODES)
    e.add_argument("--out")

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
    v.add_argument("--out")

    a = sub.add_parser("analyze", help="rank and variance traces from checkpoints")
    a.add_argument("run_dir")
    a.add_argument("--data", help="corpus for score variance (default: the run's dev file)")
    a.add_argument("--out")

    s = sub.add_parser("synth", help="write the synthetic treebank (train/dev/test .conllu)")
    s.add_argument("--out", required=True)
    s.add_argument("--train", type=int, default=1000)
    s.add_argument("--dev", type=int, default=200)
    s.add_argument("--test", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(message)s")
    try:
        if args.command == "train":
            agg = cmd_train(_config_from_args(args))
            print(json.dumps(agg["metrics"], indent=2, sort_keys=True))
        elif args.command == "grid":
            base = _config_from_args(args)
            spec = {}
            if args.sweep_file:
                spec.update(json.loads(Path(args.sweep_file).read_text(encoding="utf-8")))
            sweep = parse_sweep(spec)
            sweep.update(parse_sweep_args(args.sweep))
            res = cmd_grid(base, sweep, jobs=args.jobs)
            print((Path(base.out) / "grid_pivot.md").read_text(encoding="utf-8"), end="")
            for t in res["wilcoxon"]:
                print(f"wilcoxon {t['scaled_run']} > {t['unscaled_run']} ({t['metric']}, n={t['n_pairs']}): "
                      f"p={t['p_value']} {t['note']}".rstrip())
        elif args.command == "eval":
            print(json.dumps(cmd_eval(args.checkpoint, args.data, args.decode, args.out), indent=2, sort_keys=True))
        elif args.command == "verify":
            return cmd_verify(args.suite, args.out)
        elif args.command == "analyze":
            for path in cmd_analyze(args.run_dir, args.out, args.data):
                print(path)
        elif args.command == "synth":
            for path in write_treebank(args.out, args.train, args.dev, args.test, args.seed).values():
                print(path)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, DataError, CheckpointError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
