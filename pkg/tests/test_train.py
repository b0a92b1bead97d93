import math

import numpy as np
import pytest

from biaffine_lab.data import AnnotatedGraphSample, DataError, build_vocabulary, collate, generate_treebank
from biaffine_lab.model import ModelConfig, build_parser
from biaffine_lab.numerics import ParameterStore, SeededRng
from biaffine_lab.numerics import autograd as ag
from biaffine_lab.train import (
    DivergenceError,
    LossParts,
    LossWeights,
    OptimizerState,
    TrainSchedule,
    adamw_step,
    compute_losses,
    cosine_warmup_lr,
    edge_loss,
    evaluate_model,
    global_grad_norm,
    grad_clip,
    read_history,
    relation_loss,
    sigmoid_edge_loss,
    tag_loss,
    total_loss,
    train_loop,
    write_history,
)


def c(x):
    return ag.constant(np.asarray(x, dtype=np.float64))


# losses


def test_tag_loss_uniform_and_confident():
    mask = np.ones((1, 3), dtype=bool)
    assert tag_loss(c(np.zeros((1, 3, 4))), np.array([[0, 1, 2]]), mask).value == pytest.approx(math.log(4), abs=1e-12)
    logits = np.full((1, 3, 4), -50.0)
    logits[0, [0, 1, 2], [0, 1, 2]] = 50.0
    assert tag_loss(c(logits), np.array([[0, 1, 2]]), mask).value < 1e-30


def test_tag_loss_hand_value_and_padding():
    logits = np.array([[[1.0, 0.0], [0.0, 2.0], [9.0, 9.0]]])
    gold = np.array([[0, 0, 1]])
    mask = np.array([[True, True, False]])
    ce0 = -math.log(math.exp(1) / (math.exp(1) + 1))
    ce1 = -math.log(1 / (1 + math.exp(2)))
    assert tag_loss(c(logits), gold, mask).value == pytest.approx((ce0 + ce1) / 2, abs=1e-12)


def test_edge_loss_uniform_is_n_log_n_plus_one():
    for n in (1, 3, 7):
        mask = np.ones((1, n), dtype=bool)
        heads = np.zeros((1, n), dtype=np.int64)
        val = edge_loss(c(np.zeros((1, n + 1, n + 1))), heads, mask).value
        assert abs(val - n * math.log(n + 1)) <= 1e-12


def test_edge_loss_hand_value():
    s = np.array([[[0, 0, 0, 0], [1.0, 0.0, 2.0, 0.5], [0.0, 3.0, 0.0, 1.0], [2.0, 0.0, 1.0, 0.0]]])
    heads = np.array([[2, 1, 0]])
    expected = 0.0
    for i, h in enumerate(heads[0], start=1):
        row = s[0, i]
        expected -= row[h] - math.log(sum(math.exp(v) for v in row))
    assert edge_loss(c(s), heads, np.ones((1, 3), dtype=bool)).value == pytest.approx(expected, abs=1e-12)


def test_edge_loss_confident_gold_goes_to_zero():
    s = np.zeros((1, 3, 3))
    s[0, 1, 2] = s[0, 2, 0] = 500.0
    assert edge_loss(c(s), np.array([[2, 0]]), np.ones((1, 2), dtype=bool)).value < 1e-100


def test_relation_loss_uniform_and_single_class():
    n = 4
    heads = np.array([[0, 1, 1, 2]])
    mask = np.ones((1, n), dtype=bool)
    val = relation_loss(c(np.zeros((1, n + 1, n + 1, 13))), heads, np.zeros((1, n), dtype=np.int64), mask).value
    assert abs(val / n - math.log(13)) <= 1e-12
    rng = np.random.default_rng(0)
    one = relation_loss(c(rng.normal(size=(1, n + 1, n + 1, 1))), heads, np.zeros((1, n), dtype=np.int64), mask)
    assert one.value == 0.0


def test_relation_loss_reads_only_gold_edges():
    rng = np.random.default_rng(1)
    s = rng.normal(size=(1, 3, 3, 3))
    heads, rels, mask = np.array([[2, 0]]), np.array([[1, 2]]), np.ones((1, 2), dtype=bool)
    base = relation_loss(c(s), heads, rels, mask).value
    s2 = s.copy()
    s2[0, 1, 0] += 100.0  # non-gold head of word 1
    assert relation_loss(c(s2), heads, rels, mask).value == base
    expected = 0.0
    for i, (h, r) in enumerate(zip(heads[0], rels[0]), start=1):
        row = s[0, i, h]
        expected -= row[r] - math.log(np.exp(row).sum())
    assert base == pytest.approx(expected, abs=1e-12)


def test_sigmoid_edge_loss_zero_scores():
    mask = np.ones((1, 2), dtype=bool)
    adj = np.zeros((1, 2, 3))
    adj[0, 0, 2] = adj[0, 1, 0] = 1
    assert sigmoid_edge_loss(c(np.zeros((1, 3, 3))), adj, mask).value == pytest.approx(6 * math.log(2), abs=1e-12)


def test_total_loss_weights():
    parts = LossParts(c(1.0), c(2.0), c(3.0))
    assert total_loss(parts, LossWeights()).value == pytest.approx(5.1, abs=1e-15)
    a = total_loss(LossParts(c(1.0), c(2.0), c(3.0)), LossWeights(0.0, 1.0)).value
    b = total_loss(LossParts(c(99.0), c(2.0), c(3.0)), LossWeights(0.0, 1.0)).value
    assert a == b == 5.0
    with pytest.raises(ValueError):
        LossWeights(-1.0, 1.0)


SENTS = generate_treebank(12, 4, 4, seed=3)


def tiny_config(**kw):
    base = dict(d_f=8, tagger_hidden=6, tag_embed_dim=4, parser_layers=1, parser_hidden=6, d_mlp=8, d_rel=4)
    base.update(kw)
    return ModelConfig(**base)


def test_total_gradient_is_weighted_sum_of_parts():
    train, _, _ = SENTS
    vocab = build_vocabulary(train)
    model = build_parser(tiny_config(), vocab, 0)
    batch = collate(train[:2], vocab)
    w = LossWeights(0.3, 0.7)

    def grads(select):
        model.params.zero_grads()
        parts = compute_losses(model, batch, model.forward(batch))
        select(parts).backward()
        return {k: v.copy() for k, v in model.params.grads().items()}

    g_tot = grads(lambda p: total_loss(p, w))
    g_tag = grads(lambda p: p.tag)
    g_er = grads(lambda p: p.edge + p.rel)
    for k in g_tot:
        np.testing.assert_allclose(g_tot[k], 0.3 * g_tag[k] + 0.7 * g_er[k], atol=1e-12)


def test_losses_are_padding_invariant():
    train, _, _ = SENTS
    vocab = build_vocabulary(train)
    model = build_parser(tiny_config(), vocab, 1)
    batch = collate(train[:3], vocab)
    a = compute_losses(model, batch, model.forward(batch)).values()
    padded = batch.padded(4)
    b = compute_losses(model, padded, model.forward(padded)).values()
    for x, y in zip(a, b):
        assert abs(x - y) <= 1e-12


# optimizer


def store_with(value, grad):
    s = ParameterStore()
    p = s.add("theta", np.array(value, dtype=float))
    p.grad[...] = grad
    return s


def test_adamw_hand_value():
    s = store_with([1.0], [0.5])
    adamw_step(s, OptimizerState(lr=1e-3, weight_decay=0.01))
    expected = 1 - 0.001 * (0.5 / (0.5 + 1e-8)) - 0.001 * 0.01 * 1.0
    assert s["theta"].value[0] == pytest.approx(expected, abs=1e-15)
    assert s["theta"].value[0] == pytest.approx(0.99899, abs=1e-8)


def test_adamw_zero_gradient_no_decay_is_identity():
    s = store_with([1.0, -2.0], [0.0, 0.0])
    adamw_step(s, OptimizerState(weight_decay=0.0))
    assert s["theta"].value.tolist() == [1.0, -2.0]


def test_adamw_without_decay_matches_reference_adam():
    rng = np.random.default_rng(2)
    grads = rng.normal(size=(20, 3))
    s = store_with(np.ones(3), np.zeros(3))
    state = OptimizerState(lr=0.01, weight_decay=0.0)
    theta, m, v = np.ones(3), np.zeros(3), np.zeros(3)
    for t, g in enumerate(grads, start=1):
        s["theta"].grad[...] = g
        adamw_step(s, state)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta = theta - 0.01 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(s["theta"].value, theta, rtol=1e-13)
    assert state.step == 20


def test_grad_clip():
    s = store_with([0.0, 0.0], [0.3, 0.4])
    assert grad_clip(s, 1.0) == pytest.approx(0.5)
    assert s["theta"].grad.tolist() == [0.3, 0.4]
    s = store_with([0.0, 0.0], [1.2, 1.6])
    before = s["theta"].grad.copy()
    assert grad_clip(s, 1.0) == pytest.approx(2.0)
    assert abs(global_grad_norm(s) - 1.0) <= 1e-12
    after = s["theta"].grad
    cos = before @ after / (np.linalg.norm(before) * np.linalg.norm(after))
    assert cos == pytest.approx(1.0, abs=1e-15)


def test_cosine_warmup_schedule():
    assert cosine_warmup_lr(0, 1000, 1e-3) == 0.0
    assert cosine_warmup_lr(60, 1000, 1e-3) == pytest.approx(1e-3)
    assert cosine_warmup_lr(30, 1000, 1e-3) == pytest.approx(5e-4)
    assert cosine_warmup_lr(1000, 1000, 1e-3) == pytest.approx(0.0, abs=1e-18)
    lrs = [cosine_warmup_lr(s, 1000, 1e-3) for s in range(60, 1001)]
    assert all(a >= b for a, b in zip(lrs, lrs[1:]))
    with pytest.raises(ValueError):
        cosine_warmup_lr(1001, 1000, 1e-3)


# loop


def test_schedule_validation_and_patience():
    assert TrainSchedule().patience_evals == 6
    assert TrainSchedule(total_steps=50, eval_interval=10, early_stop_fraction=0.3).patience_evals == 2
    assert TrainSchedule(total_steps=50, eval_interval=10, early_stop_fraction=0.25).patience_evals == 2
    with pytest.raises(ValueError):
        TrainSchedule(total_steps=50, eval_interval=7)
    with pytest.raises(ValueError):
        TrainSchedule(early_stop_fraction=0)
    s = TrainSchedule(warmup_fraction=0.06, clip_norm=1.0)
    assert TrainSchedule.from_dict(s.to_dict()) == s


def run_tiny(seed=0, steps=50, interval=10, lr=1e-3, frac=1.0, **kw):
    train, dev, test = SENTS
    vocab = build_vocabulary(train)
    model = build_parser(tiny_config(**kw), vocab, seed)
    sched = TrainSchedule(total_steps=steps, eval_interval=interval, early_stop_fraction=frac, batch_size=4, lr=lr)
    return model, train_loop(model, train[:5], dev, sched, LossWeights(), SeededRng(seed), test=test)


def test_loop_bookkeeping_and_best_restore():
    model, res = run_tiny()
    dev_rows = res.rows("dev")
    assert [r.step for r in dev_rows] == [10, 20, 30, 40, 50]
    assert len(res.rows("train")) == 5 and len(res.rows("test")) == 5
    assert res.best_step in [r.step for r in dev_rows]
    assert res.best_metrics["las"] == max(r.las for r in dev_rows)
    first_best = next(r for r in dev_rows if r.las == max(x.las for x in dev_rows))
    assert res.best_step == first_best.step
    for name, value in res.best_state.items():
        assert np.array_equal(model.params[name].value, value)
    assert res.rank_trace.steps == [0, 10, 20, 30, 40, 50]
    assert len(res.variance_trace.entries) == 5


def test_loop_is_deterministic(tmp_path):
    _, a = run_tiny(seed=3)
    _, b = run_tiny(seed=3)
    pa = write_history(tmp_path / "a.csv", a.history)
    pb = write_history(tmp_path / "b.csv", b.history)
    assert pa.read_bytes() == pb.read_bytes()
    assert read_history(pa) == a.history


def test_early_stopping_on_frozen_run():
    _, res = run_tiny(steps=100, interval=10, lr=0.0, frac=0.3)
    # lr = 0 (and so no decay either): dev never improves after the first eval
    assert res.stopped_early
    assert res.steps_run == 40
    assert res.best_step == 10


def test_divergence_aborts():
    train, dev, _ = SENTS
    vocab = build_vocabulary(train)
    model = build_parser(tiny_config(), vocab, 0)
    model.params["parser.biaffine_edge.W"].value[...] = np.nan
    with pytest.raises(DivergenceError):
        train_loop(model, train, dev, TrainSchedule(total_steps=10, eval_interval=5), LossWeights(), SeededRng(0))


def test_empty_corpus_rejected():
    train, dev, _ = SENTS
    vocab = build_vocabulary(train)
    model = build_parser(tiny_config(), vocab, 0)
    with pytest.raises(DataError):
        train_loop(model, [], dev, TrainSchedule(total_steps=10, eval_interval=5), LossWeights(), SeededRng(0))


def test_loss_decreases_on_learnable_fixture():
    train, dev, _ = generate_treebank(10, 4, 1, seed=9)
    vocab = build_vocabulary(train)
    decreased = 0
    for seed in range(5):
        model = build_parser(ModelConfig(), vocab, seed)
        before = evaluate_model(model, train, LossWeights()).losses[0]
        sched = TrainSchedule(total_steps=50, eval_interval=50, early_stop_fraction=1.0)
        train_loop(model, train, dev, sched, LossWeights(), SeededRng(seed), track=False)
        after = evaluate_model(model, train, LossWeights()).losses[0]
        decreased += after < before
    assert decreased >= 4


def test_sigmoid_edge_mode_trains_on_graphs():
    graph = [
        AnnotatedGraphSample(["a", "b", "c"], ["E", "O", "E"], [0, 0, 1], ["<none>", "<none>", "r"],
                             extra_edges=[(2, 3, "s")]),
        AnnotatedGraphSample(["c", "a"], ["E", "E"], [0, 1], ["<none>", "r"]),
    ]
    vocab = build_vocabulary(graph)
    model = build_parser(tiny_config(), vocab, 0)
    sched = TrainSchedule(total_steps=20, eval_interval=10, early_stop_fraction=1.0, batch_size=2)
    res = train_loop(model, graph, graph, sched, LossWeights(), SeededRng(0), edge_mode="sigmoid",
                     eval_decode="sigmoid", selection_metric="f1_labeled")
    assert all(math.isfinite(r.loss_total) for r in res.history)
