"""Central finite differences, the oracle for every analytic backward pass."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParameterStore


def finite_diff_gradient(loss_fn: Callable[[], float], params: ParameterStore, h: float = 1e-5,
                         names=None, max_entries: int | None = None, rng=None) -> dict[str, np.ndarray]:
    """Estimate dL/dθ coordinate by coordinate with (L(θ+h) - L(θ-h)) / 2h.

    ``loss_fn`` must read the current parameter values and return a float.
    With ``max_entries`` set, only that many randomly chosen coordinates per
    parameter are probed; the rest are left as NaN.
    """
    out = {}
    for name in names or [p.name for p in params.trainable()]:
        p = params[name]
        grad = np.full(p.value.shape, np.nan)
        flat_idx = np.arange(p.value.size)
        if max_entries is not None and p.value.size > max_entries:
            gen = getattr(rng, "generator", rng) or np.random.default_rng(0)
            flat_idx = np.sort(gen.choice(p.value.size, size=max_entries, replace=False))
        view = p.value.reshape(-1)
        gview = grad.reshape(-1)
        for k in flat_idx:
            orig = view[k]
            view[k] = orig + h
            up = loss_fn()
            view[k] = orig - h
            down = loss_fn()
            view[k] = orig
            gview[k] = (up - down) / (2.0 * h)
        out[name] = grad
    return out


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Largest |a - n| / max(|a|, |n|, floor) over the probed (non-NaN) coordinates."""
    sel = ~np.isnan(numeric)
    a, n = analytic[sel], numeric[sel]
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))
