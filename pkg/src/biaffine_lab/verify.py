"""Self-contained verification suites with fixed seeds.

Each suite returns a list of :class:`Check` records carrying the observed
value and the tolerance it was held to.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .analysis import verify_claim1, verify_variance_law
from .data import AnnotatedGraphSample, build_vocabulary, collate
from .decode import build_energy, chu_liu_edmonds, greedy_decode, mst_decode, validate_arborescence
from .eval import attachment_scores, micro_f1, wilcoxon_bruteforce, wilcoxon_one_tailed
from .model import ModelConfig, build_parser
from .model.parser import ScoreSet
from .numerics import SeededRng, finite_diff_gradient, max_relative_error
from .train import LossWeights, compute_losses, total_loss

SUITES = ("claim1", "variance", "mst", "decode", "gradients", "metrics")


@dataclass
class Check:
    name: str
    passed: bool
    observed: object
    tolerance: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: observed={self.observed} tolerance={self.tolerance} ({self.seconds:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        checks = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        for c in checks:
            c.seconds = dt
        return checks

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def claim1_suite(trials: int = 100, max_dim: int = 16, seed: int = 0) -> list[Check]:
    report = verify_claim1(trials, max_dim, SeededRng(seed))
    return [
        Check("claim1 monotone trace sweeps", report.violation_count == 0,
              f"{report.violation_count} violations in {trials} trials", "0 beyond 1e-9 relative"),
        Check("claim1 direct vs cyclic trace", report.max_route_discrepancy <= 1e-9,
              f"{report.max_route_discrepancy:.3e}", "<= 1e-9 relative"),
    ]


@_timed
def variance_suite(d_values=(16, 64, 256), n_samples: int = 100_000, seed: int = 0) -> list[Check]:
    out = []
    for row in verify_variance_law(d_values, n_samples, SeededRng(seed)):
        out.append(Check(f"Var(q.k) = d at d={row.d}", row.relative_error < 0.05,
                         f"{row.variance:.3f} (ratio {row.ratio:.4f})", "within 5% of d"))
        out.append(Check(f"Var(q.k / sqrt(d)) = 1 at d={row.d}", row.scaled_relative_error < 0.05,
                         f"{row.scaled_variance:.4f}", "within 5% of 1"))
    return out


@lru_cache(maxsize=None)
def single_root_trees(n: int) -> np.ndarray:
    """All single-root arborescences over n words as a (count, n) head array, by exhaustive enumeration."""
    cand = np.array(list(itertools.product(range(n + 1), repeat=n)), dtype=np.int64).reshape(-1, n)
    words = np.arange(1, n + 1)
    ok = (cand != words).all(axis=1) & ((cand == 0).sum(axis=1) == 1)
    cand = cand[ok]
    # follow head pointers n times; every word of a tree reaches ROOT
    parent = np.concatenate([np.zeros((len(cand), 1), dtype=np.int64), cand], axis=1)
    cur = np.tile(np.arange(n + 1), (len(cand), 1))
    for _ in range(n):
        cur = np.take_along_axis(parent, cur, axis=1)
    return cand[(cur == 0).all(axis=1)]


def brute_force_max(energy: np.ndarray) -> float:
    n = energy.shape[0] - 1
    trees = single_root_trees(n)
    totals = energy[np.arange(1, n + 1), trees].sum(axis=1)
    return float(totals.max())


def random_score_set(rng: SeededRng, n: int, relations: int = 4) -> ScoreSet:
    return ScoreSet(rng.normal((n + 1, n + 1)), rng.normal((n, n + 1, relations)), 1.0)


@_timed
def mst_suite(instances: int = 500, max_n: int = 5, seed: int = 0) -> list[Check]:
    rng = SeededRng(seed)
    mismatches = 0
    for k in range(instances):
        n = 1 + k % max_n
        em = build_energy(random_score_set(rng, n), tau=float(rng.uniform(0.5, 10.0)))
        g = chu_liu_edmonds(em)
        total = float(sum(em.energy[d, h] for d, h in enumerate(g.heads, start=1)))
        mismatches += total != brute_force_max(em.energy)
    return [Check(f"MST total == brute-force optimum ({instances} instances, n<={max_n})", mismatches == 0,
                  f"{mismatches} mismatches", "exact")]


@_timed
def decode_suite(instances: int = 1000, max_n: int = 20, seed: int = 1) -> list[Check]:
    rng = SeededRng(seed)
    valid = greedy_invalid = 0
    for _ in range(instances):
        s = random_score_set(rng, int(rng.integers(1, max_n + 1)))
        valid += validate_arborescence(mst_decode(s).heads).valid
        greedy_invalid += not validate_arborescence(greedy_decode(s).heads).valid
    cycle = ScoreSet(np.array([[0, 0, 0], [0, -5, 5], [0, 5, -5]], dtype=float), np.zeros((2, 3, 1)), 1.0)
    cycle_caught = not validate_arborescence(greedy_decode(cycle).heads).valid
    return [
        Check(f"MST decodes valid ({instances} random ScoreSets, n<={max_n})", valid == instances,
              f"{valid}/{instances}", "100%"),
        Check("greedy decodes can be invalid", greedy_invalid >= 1 and cycle_caught,
              f"{greedy_invalid} invalid random decodes, cycle fixture caught={cycle_caught}", ">= 1"),
    ]


GRADIENT_SENTENCE = AnnotatedGraphSample(["dogs", "chase", "cats"], ["N", "V", "N"], [2, 0, 2],
                                         ["nsubj", "root", "obj"])


def gradient_check_config() -> ModelConfig:
    return ModelConfig(d_f=4, tagger_hidden=3, tag_embed_dim=3, parser_layers=2, parser_hidden=3,
                       d_mlp=4, d_rel=3, layer_norm=True, gat_pairs=1)


def parameter_group(name: str) -> str:
    """Coarse group of a parameter name, e.g. ``parser.psi.l1.bwd.U_f`` -> ``parser.psi.U``."""
    parts = name.split(".")
    if parts[:2] == ["parser", "psi"]:
        return "parser.psi.ln" if "ln" in parts else f"parser.psi.{parts[-1].split('_')[0]}"
    if parts[0] == "parser" and parts[1].startswith("gat"):
        return ".".join(parts[:3])
    if parts[1].startswith("biaffine"):
        return ".".join(parts[:2] + parts[-1:])
    return ".".join(parts[:2])


def gradient_errors(config: ModelConfig | None = None, seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    """Max relative error of the analytic total-loss gradient per parameter group on a 3-word sentence."""
    config = config or gradient_check_config()
    sample = GRADIENT_SENTENCE
    vocab = build_vocabulary([sample])
    model = build_parser(config, vocab, seed)
    batch = collate([sample], vocab)
    weights = LossWeights()

    def loss_value() -> float:
        out = model.forward(batch)
        return float(total_loss(compute_losses(model, batch, out), weights).value)

    model.params.zero_grads()
    out = model.forward(batch)
    total_loss(compute_losses(model, batch, out), weights).backward()
    analytic = {name: p.grad.copy() for name, p in model.params.items()}
    numeric = finite_diff_gradient(loss_value, model.params, h=h)
    errors: dict[str, float] = {}
    for name, g in analytic.items():
        group = parameter_group(name)
        errors[group] = max(errors.get(group, 0.0), max_relative_error(g, numeric[name]))
    return errors


@_timed
def gradients_suite(seed: int = 0, tol: float = 1e-4) -> list[Check]:
    errors = gradient_errors(seed=seed)
    return [Check(f"gradient {group}", err < tol, f"{err:.2e}", f"< {tol:g} max relative error")
            for group, err in sorted(errors.items())]


@_timed
def metrics_suite() -> list[Check]:
    f1 = micro_f1({(1, 0), (2, 1), (3, 1)}, {(1, 0), (2, 1), (3, 2)})
    uas, las = attachment_scores([0, 1, 1, 2], ["root", "a", "b", "x"], [0, 1, 1, 3], ["root", "a", "c", "x"])
    xs, ys = [1.0, 2.0, 3.0, 4.0, 5.0], [0.0] * 5
    p = wilcoxon_one_tailed(xs, ys)
    p_ref = wilcoxon_bruteforce(xs, ys)
    return [
        Check("micro-F1 (TP=2, FP=1, FN=1)", f1 == 2 / 3, f1, "exactly 2/3"),
        Check("UAS/LAS 4-word fixture", (uas, las) == (0.75, 0.5), (uas, las), "exactly (0.75, 0.5)"),
        Check("Wilcoxon exact p, 5 positive pairs", p == 0.03125 and p_ref == 0.03125, p, "exactly 1/32"),
    ]


def run_suite(name: str) -> list[Check]:
    runners = {
        "claim1": claim1_suite,
        "variance": variance_suite,
        "mst": mst_suite,
        "decode": decode_suite,
        "gradients": gradients_suite,
        "metrics": metrics_suite,
    }
    if name == "all":
        return [c for suite in SUITES for c in runners[suite]()]
    if name not in runners:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    return runners[name]()
