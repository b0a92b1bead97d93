"""Dense linear-algebra and analysis primitives (float64 throughout)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-10
LAYER_NORM_EPS = 1e-5


class DimensionError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SvdResult:
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank(self) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.count_nonzero(s > RANK_TOL * s[0]))

    def reconstruct(self, r: int | None = None) -> np.ndarray:
        r = len(self.singular_values) if r is None else r
        u = self.left_vectors[:, :r]
        v = self.right_vectors[:, :r]
        return (u * self.singular_values[:r]) @ v.T


def _check_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries")
    return a


def _fix_signs(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # make the largest-magnitude entry of each right vector positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, v * signs


def svd(a) -> SvdResult:
    """Thin SVD via LAPACK (divide and conquer, falling back to the QR driver)."""
    a = _check_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        try:
            u, s, vt = scipy.linalg.svd(a, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"SVD did not converge: {exc}") from exc
    u, v = _fix_signs(u, vt.T)
    return SvdResult(s, u, v)


def jacobi_svd(a, tol: float = 1e-15, max_sweeps: int = 60) -> SvdResult:
    """One-sided Jacobi SVD (Hestenes). Slow but independent of LAPACK's SVD drivers.

    Raises NumericError with the sweep count if orthogonality is not reached.
    """
    a = _check_matrix(a)
    m, n = a.shape
    transposed = m < n
    work = (a.T if transposed else a).copy()
    rows, cols = work.shape
    v = np.eye(cols)
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(cols - 1):
            for q in range(p + 1, cols):
                alpha = work[:, p] @ work[:, p]
                beta = work[:, q] @ work[:, q]
                gamma = work[:, p] @ work[:, q]
                if abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta)) if zeta != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                wp, wq = work[:, p].copy(), work[:, q].copy()
                work[:, p] = c * wp - s * wq
                work[:, q] = s * wp + c * wq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise NumericError(f"Jacobi SVD did not converge after {max_sweeps} sweeps")

    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    work = work[:, order]
    v = v[:, order]
    u = np.zeros((rows, cols))
    nonzero = sigma > 0
    u[:, nonzero] = work[:, nonzero] / sigma[nonzero]
    # complete u for zero singular values so its columns stay orthonormal
    if not np.all(nonzero):
        q, _ = np.linalg.qr(np.hstack([u[:, nonzero], np.eye(rows)]))
        u[:, ~nonzero] = q[:, np.count_nonzero(nonzero) : cols]
    if transposed:
        u, v = v, u
    u, v = _fix_signs(u, v)
    return SvdResult(sigma, u, v)


def effective_rank(a) -> float:
    """Exponential of the entropy of the normalised singular-value distribution."""
    s = svd(a).singular_values
    total = s.sum()
    if total == 0:
        raise ValueError("effective rank is undefined for the zero matrix")
    p = s[s > 0] / total
    return float(np.exp(-(p * np.log(p)).sum()))


def truncate_rank(a, r: int, decomposition: SvdResult | None = None) -> np.ndarray:
    a = _check_matrix(a)
    k = min(a.shape)
    if not 1 <= r <= k:
        raise ValueError(f"rank {r} outside [1, {k}]")
    dec = decomposition if decomposition is not None else svd(a)
    return dec.reconstruct(r)


def scaled_softmax(row, a: float = 1.0) -> np.ndarray:
    row = np.asarray(row, dtype=np.float64)
    if not np.all(np.isfinite(row)):
        raise NumericError("softmax input has non-finite entries")
    if a <= 0:
        raise ValueError("scale must be positive")
    z = a * row
    z = np.exp(z - z.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def layer_norm(x, gain, bias, eps: float = LAYER_NORM_EPS) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return gain * (x - mu) / np.sqrt(var + eps) + bias


def xavier_init(shape, mode: str = "uniform", rng=None) -> np.ndarray:
    """Glorot initialisation. ``rng`` is a SeededRng or numpy Generator."""
    if len(shape) != 2:
        raise DimensionError("xavier_init expects a 2-D shape")
    fan_out, fan_in = shape
    gen = getattr(rng, "generator", rng)
    if gen is None:
        raise ValueError("xavier_init needs an explicit rng")
    if mode == "uniform":
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return gen.uniform(-bound, bound, size=shape)
    if mode == "normal":
        return gen.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=shape)
    raise ValueError(f"unknown init mode {mode!r}")
