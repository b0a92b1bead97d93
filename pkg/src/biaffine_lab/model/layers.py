"""Building blocks of the parser: BiLSTM stacks, MLPs, biaffine scorers, GAT layers.

Every layer registers its tensors in a shared ParameterStore under a name
prefix and exposes a ``__call__`` over padded batches of shape (B, T, d).
"""

from __future__ import annotations

import numpy as np

from ..numerics import ParameterStore, SeededRng, xavier_init
from ..numerics import autograd as ag
from ..numerics.linalg import LAYER_NORM_EPS

GATES = ("i", "f", "g", "o")


def layer_norm(x: ag.Var, gain: ag.Var, bias: ag.Var, eps: float = LAYER_NORM_EPS) -> ag.Var:
    mu = ag.mean(x, axis=-1, keepdims=True)
    centred = x - mu
    var = ag.mean(centred * centred, axis=-1, keepdims=True)
    return centred / ag.sqrt(var + eps) * gain + bias


class Linear:
    def __init__(self, params: ParameterStore, name: str, d_in: int, d_out: int, rng: SeededRng,
                 init: str = "uniform", bias: bool = True):
        self.weight = params.add(f"{name}.W", xavier_init((d_out, d_in), init, rng))
        self.bias = params.add(f"{name}.b", np.zeros(d_out)) if bias else None

    def __call__(self, x: ag.Var) -> ag.Var:
        out = x @ self.weight.T
        return out + self.bias if self.bias is not None else out


class Mlp:
    """Affine -> ELU -> affine."""

    def __init__(self, params, name, d_in, d_hidden, d_out, rng, init="uniform"):
        self.hidden = Linear(params, f"{name}.hidden", d_in, d_hidden, rng, init)
        self.out = Linear(params, f"{name}.out", d_hidden, d_out, rng, init)

    def __call__(self, x):
        return self.out(ag.elu(self.hidden(x)))


def reverse_index(lengths: np.ndarray, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays that reverse each row's first ``lengths[b]`` entries and leave padding in place."""
    t = np.arange(steps)[None, :]
    lengths = np.asarray(lengths)[:, None]
    idx = np.where(t < lengths, lengths - 1 - t, t)
    return np.arange(len(lengths))[:, None], idx


class LstmDirection:
    def __init__(self, params, name, d_in, hidden, rng):
        self.hidden = hidden
        self.w = [params.add(f"{name}.W_{g}", xavier_init((hidden, d_in), "uniform", rng)) for g in GATES]
        self.u = [params.add(f"{name}.U_{g}", xavier_init((hidden, hidden), "uniform", rng)) for g in GATES]
        self.b = [params.add(f"{name}.b_{g}", np.zeros(hidden)) for g in GATES]

    def __call__(self, x: ag.Var) -> ag.Var:
        return ag.lstm_scan(x, ag.concat(self.w, axis=0), ag.concat(self.u, axis=0), ag.concat(self.b, axis=0))

    def matrices(self):
        return [*self.w, *self.u]


class BiLstmStack:
    """N stacked bidirectional LSTM layers; each layer outputs [forward ; backward] of width 2h."""

    def __init__(self, params, name, d_in, hidden, layers, rng, use_layer_norm=False):
        self.layers = []
        self.norms = []
        for k in range(layers):
            width = d_in if k == 0 else 2 * hidden
            fwd = LstmDirection(params, f"{name}.l{k}.fwd", width, hidden, rng)
            bwd = LstmDirection(params, f"{name}.l{k}.bwd", width, hidden, rng)
            self.layers.append((fwd, bwd))
            if use_layer_norm:
                self.norms.append((params.add(f"{name}.l{k}.ln.gain", np.ones(2 * hidden)),
                                   params.add(f"{name}.l{k}.ln.bias", np.zeros(2 * hidden))))
        self.output_dim = 2 * hidden if layers else d_in

    def __call__(self, x: ag.Var, lengths: np.ndarray) -> ag.Var:
        rows, rev = reverse_index(lengths, x.shape[1])
        for k, (fwd, bwd) in enumerate(self.layers):
            forward = fwd(x)
            backward = bwd(x[rows, rev])[rows, rev]
            x = ag.concat([forward, backward], axis=-1)
            if self.norms:
                x = layer_norm(x, *self.norms[k])
        return x

    def weight_matrices(self) -> list:
        return [m for fwd, bwd in self.layers for m in (*fwd.matrices(), *bwd.matrices())]


class Biaffine:
    """f(x1, x2) = x1^T W_c x2 + x1^T b_c for each class c, times the scale ``a``.

    W has shape (d, c, d) and b shape (d, c).
    """

    def __init__(self, params, name, d, classes, rng, init="uniform"):
        w = np.stack([xavier_init((d, d), init, rng) for _ in range(classes)], axis=1)
        self.weight = params.add(f"{name}.W", w)
        self.bias = params.add(f"{name}.b", np.zeros((d, classes)))
        self.d = d
        self.classes = classes

    def __call__(self, x1: ag.Var, x2: ag.Var, a: float) -> ag.Var:
        """Batched scores for x1 (B, m, d) and x2 (B, k, d), returned as (B, k, m, c)."""
        return biaffine_batched(x1, x2, self.weight, self.bias, a)


def biaffine_batched(x1, x2, weight, bias, a: float) -> ag.Var:
    if x1.shape[-1] != weight.shape[0] or x2.shape[-1] != weight.shape[2]:
        raise ValueError(f"biaffine dimension mismatch: {x1.shape[-1]}/{x2.shape[-1]} vs W {weight.shape}")
    right = ag.einsum("pcq,bkq->bkpc", weight, x2)
    bilinear = ag.einsum("bmp,bkpc->bkmc", x1, right)
    linear = ag.einsum("bmp,pc->bmc", x1, bias)
    out = bilinear + ag.reshape(linear, (linear.shape[0], 1) + linear.shape[1:])
    return out * a if a != 1.0 else out


def biaffine_score(x1, x2, weight, bias, a: float = 1.0) -> ag.Var:
    """Single-sentence scorer: x1 (m, d), x2 (k, d) -> (m, c, k) with entry (i, c, j) = a(x1_i W_c x2_j + x1_i b_c)."""
    x1, x2 = ag.as_var(x1), ag.as_var(x2)
    weight, bias = ag.as_var(weight), ag.as_var(bias)
    if bias.ndim == 1:
        bias = ag.reshape(bias, (bias.shape[0], 1))
    out = biaffine_batched(ag.reshape(x1, (1,) + x1.shape), ag.reshape(x2, (1,) + x2.shape), weight, bias, a)
    return ag.transpose(ag.reshape(out, out.shape[1:]), (1, 2, 0))


class GatLayer:
    """Single-head graph attention over a fully connected graph (output width = input width).

    e_ij = LeakyReLU(a_src . W h_i + a_dst . W h_j) [+ bias_ij], alpha = softmax_j(e),
    h'_i = ELU(sum_j alpha_ij W h_j). Masked nodes are never attended to.
    """

    def __init__(self, params, name, d, rng, slope: float = 0.2):
        self.proj = Linear(params, f"{name}.proj", d, d, rng, bias=False)
        self.att_src = params.add(f"{name}.att_src", xavier_init((d, 1), "uniform", rng)[:, 0])
        self.att_dst = params.add(f"{name}.att_dst", xavier_init((d, 1), "uniform", rng)[:, 0])
        self.slope = slope

    def attention(self, h: ag.Var, mask: np.ndarray, bias: ag.Var | None = None) -> tuple[ag.Var, ag.Var]:
        z = self.proj(h)
        src = ag.einsum("btd,d->bt", z, self.att_src)
        dst = ag.einsum("btd,d->bt", z, self.att_dst)
        bsz, steps = src.shape
        logits = ag.leaky_relu(ag.reshape(src, (bsz, steps, 1)) + ag.reshape(dst, (bsz, 1, steps)), self.slope)
        if bias is not None:
            logits = logits + bias
        logits = ag.masked_fill(logits, ~mask[:, None, :])
        return ag.softmax(logits, axis=-1), z

    def __call__(self, h: ag.Var, mask: np.ndarray, bias: ag.Var | None = None) -> ag.Var:
        alpha, z = self.attention(h, mask, bias)
        return ag.elu(alpha @ z)


def gat_layer(node_feats, params: GatLayer, bias=None) -> ag.Var:
    """Apply one GAT layer to a single graph's node features (n+1, d)."""
    h = ag.as_var(node_feats)
    mask = np.ones((1, h.shape[0]), dtype=bool)
    b = None if bias is None else ag.reshape(ag.as_var(bias), (1,) + ag.as_var(bias).shape)
    out = params(ag.reshape(h, (1,) + h.shape), mask, b)
    return ag.reshape(out, h.shape)
