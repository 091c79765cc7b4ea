"""Dense float64 matrix helpers and a finite-difference gradient checker.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. The helpers
here add the shape and finiteness checks every learnable module relies on,
plus the closed-form backward passes for layer normalization and sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

LN_EPS = 1e-5
GRAD_EPS = 1e-5


class ShapeMismatch(ValueError):
    pass


class NonFiniteFunctionValue(ArithmeticError):
    pass


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array (copying only if needed)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name}: expected 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite entries")
    return arr


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeMismatch(msg)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = as_matrix(a, "A"), as_matrix(b, "B")
    _require(a.shape[1] == b.shape[0], f"matmul: {a.shape} @ {b.shape}")
    return a @ b


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = as_matrix(a, "A"), as_matrix(b, "B")
    _require(a.shape == b.shape, f"hadamard: {a.shape} vs {b.shape}")
    return a * b


def transpose(a: np.ndarray) -> np.ndarray:
    return as_matrix(a).T.copy()


def sigmoid(a):
    """Numerically stable logistic function, elementwise."""
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def layer_norm(a: np.ndarray, gain: np.ndarray, bias: np.ndarray,
               eps: float = LN_EPS) -> np.ndarray:
    """Row-wise layer normalization followed by per-column gain and bias."""
    return layer_norm_forward(a, gain, bias, eps)[0]


def layer_norm_forward(a, gain, bias, eps: float = LN_EPS):
    """Forward pass returning ``(out, (xhat, inv_std))`` for the backward pass."""
    a = as_matrix(a, "A")
    gain = np.asarray(gain, dtype=np.float64).ravel()
    bias = np.asarray(bias, dtype=np.float64).ravel()
    _require(gain.shape[0] == a.shape[1] and bias.shape[0] == a.shape[1],
             f"layer_norm: {a.shape[1]} columns, gain {gain.shape}, bias {bias.shape}")
    mu = a.mean(axis=1, keepdims=True)
    centered = a - mu
    var = (centered ** 2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    return xhat * gain + bias, (xhat, inv_std)


def layer_norm_backward(grad_out, cache, gain):
    """Gradients of layer norm w.r.t. its input, gain and bias."""
    xhat, inv_std = cache
    gain = np.asarray(gain, dtype=np.float64).ravel()
    d_gain = (grad_out * xhat).sum(axis=0)
    d_bias = grad_out.sum(axis=0)
    dxhat = grad_out * gain
    d_in = inv_std * (dxhat
                      - dxhat.mean(axis=1, keepdims=True)
                      - xhat * (dxhat * xhat).mean(axis=1, keepdims=True))
    return d_in, d_gain, d_bias


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_err: float
    worst_index: tuple
    analytic: float
    numeric: float

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_err < tol


def numeric_grad(f: Callable[[np.ndarray], float], theta: np.ndarray,
                 eps: float = GRAD_EPS) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``theta``."""
    theta = np.array(theta, dtype=np.float64, copy=True)
    grad = np.zeros_like(theta)
    flat = theta.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        fp = f(theta)
        flat[k] = orig - eps
        fm = f(theta)
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            idx = np.unravel_index(k, theta.shape)
            raise NonFiniteFunctionValue(f"f is not finite near index {idx}")
        gflat[k] = (fp - fm) / (2.0 * eps)
    return grad


def grad_check(f: Callable[[np.ndarray], float], analytic_grad,
               theta, eps: float = GRAD_EPS) -> GradCheckReport:
    """Compare an analytic gradient against central finite differences.

    The relative error per entry is ``|g_a - g_n| / max(1e-8, |g_a| + |g_n|)``;
    the report carries the worst entry.
    """
    theta = np.asarray(theta, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    if analytic.shape != theta.shape:
        raise ShapeMismatch(f"grad_check: gradient {analytic.shape} vs theta {theta.shape}")
    f0 = f(theta.copy())
    if not np.isfinite(f0):
        raise NonFiniteFunctionValue("f is not finite at theta")
    numeric = numeric_grad(f, theta, eps)
    rel = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    if rel.size == 0:
        return GradCheckReport(0.0, (), 0.0, 0.0)
    k = int(np.argmax(rel))
    idx = tuple(int(i) for i in np.unravel_index(k, theta.shape))
    return GradCheckReport(float(rel.flat[k]), idx, float(analytic.flat[k]), float(numeric.flat[k]))
