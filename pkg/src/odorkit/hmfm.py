"""Harmonic modulated feature mapping.

Per row of the input ``x`` (N x A)::

    w_imp = sigmoid(LayerNorm(x @ W_imp + b_imp))        importance gates, N x A
    x'    = x * w_imp
    f     = sigmoid(x' @ W_mod + b_mod)                   modulation, N x D
    m     = base_freq * f                                 base_freq[j] = 2*pi*sigma'*j/D
    x_enc = m * (x' @ W_proj)                             (or m * x' when D == A)
    out   = [cos(x_enc) | sin(x_enc)]                     N x 2D

``base_freq`` is fixed; every other tensor is learnable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore import (ShapeMismatch, as_matrix, layer_norm_backward,
                      layer_norm_forward, sigmoid)

LEARNABLE = ("imp_W", "imp_b", "ln_gain", "ln_bias", "mod_W", "mod_b", "proj_W")


def base_frequencies(D: int, sigma_prime: float) -> np.ndarray:
    return 2.0 * np.pi * sigma_prime * np.arange(D) / D


@dataclass
class HmfmParams:
    imp_W: np.ndarray
    imp_b: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray
    mod_W: np.ndarray
    mod_b: np.ndarray
    proj_W: np.ndarray | None
    base_freq: np.ndarray
    sigma_prime: float = 1.0

    @property
    def A(self) -> int:
        return self.imp_W.shape[0]

    @property
    def D(self) -> int:
        return self.mod_W.shape[1]

    @property
    def identity_projection(self) -> bool:
        return self.proj_W is None

    @classmethod
    def init(cls, A: int, D: int, sigma_prime: float = 1.0,
             identity_projection: bool = False, rng=None) -> "HmfmParams":
        """Uniform(+-1/sqrt(fan_in)) weights, zero biases, unit LayerNorm gain."""
        if identity_projection and A != D:
            raise ShapeMismatch(f"identity projection needs D == A, got A={A}, D={D}")
        if sigma_prime < 0:
            raise ValueError("sigma_prime must be non-negative")
        rng = np.random.default_rng(rng)
        bound = 1.0 / np.sqrt(A)
        return cls(
            imp_W=rng.uniform(-bound, bound, (A, A)),
            imp_b=np.zeros(A),
            ln_gain=np.ones(A),
            ln_bias=np.zeros(A),
            mod_W=rng.uniform(-bound, bound, (A, D)),
            mod_b=np.zeros(D),
            proj_W=None if identity_projection else rng.uniform(-bound, bound, (A, D)),
            base_freq=base_frequencies(D, sigma_prime),
            sigma_prime=float(sigma_prime),
        )

    def learnable(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in LEARNABLE if getattr(self, k) is not None}

    def replace(self, **arrays) -> "HmfmParams":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(arrays)
        return HmfmParams(**kw)


@dataclass
class HmfmOutput:
    encoded: np.ndarray
    w_imp: np.ndarray
    x_weighted: np.ndarray
    f: np.ndarray
    m: np.ndarray
    x_encoded: np.ndarray
    # backward-pass cache
    _x: np.ndarray = None
    _ln_cache: tuple = None
    _proj: np.ndarray = None


def _check(x: np.ndarray, p: HmfmParams) -> np.ndarray:
    x = as_matrix(x, "x")
    if x.shape[1] != p.A:
        raise ShapeMismatch(f"x has {x.shape[1]} columns, encoder expects {p.A}")
    return x


def importance_weights(x, p: HmfmParams) -> np.ndarray:
    x = _check(x, p)
    z, _ = layer_norm_forward(x @ p.imp_W + p.imp_b, p.ln_gain, p.ln_bias)
    return sigmoid(z)


def encode(x, p: HmfmParams) -> HmfmOutput:
    x = _check(x, p)
    ln_out, ln_cache = layer_norm_forward(x @ p.imp_W + p.imp_b, p.ln_gain, p.ln_bias)
    w_imp = sigmoid(ln_out)
    xw = x * w_imp
    f = sigmoid(xw @ p.mod_W + p.mod_b)
    m = p.base_freq * f
    proj = xw if p.proj_W is None else xw @ p.proj_W
    x_enc = m * proj
    encoded = np.concatenate([np.cos(x_enc), np.sin(x_enc)], axis=1)
    return HmfmOutput(encoded, w_imp, xw, f, m, x_enc, x, ln_cache, proj)


def encode_backward(x, p: HmfmParams, upstream_grad, out: HmfmOutput | None = None):
    """Gradients of ``sum(upstream_grad * encode(x, p).encoded)``.

    Returns ``(grad_x, grads)`` where ``grads`` maps each learnable tensor name
    to its gradient. ``out`` may be passed to reuse a forward pass.
    """
    if out is None:
        out = encode(x, p)
    x = out._x
    G = np.asarray(upstream_grad, dtype=np.float64)
    N, D = out.x_encoded.shape
    if G.shape != (N, 2 * D):
        raise ShapeMismatch(f"upstream gradient {G.shape}, expected {(N, 2 * D)}")

    d_enc = -np.sin(out.x_encoded) * G[:, :D] + np.cos(out.x_encoded) * G[:, D:]
    d_m = d_enc * out._proj
    d_proj = d_enc * out.m
    grads = {}
    if p.proj_W is None:
        d_xw = d_proj.copy()
    else:
        grads["proj_W"] = out.x_weighted.T @ d_proj
        d_xw = d_proj @ p.proj_W.T

    d_zmod = d_m * p.base_freq * out.f * (1.0 - out.f)
    grads["mod_W"] = out.x_weighted.T @ d_zmod
    grads["mod_b"] = d_zmod.sum(axis=0)
    d_xw += d_zmod @ p.mod_W.T

    d_x = d_xw * out.w_imp
    d_ln = d_xw * x * out.w_imp * (1.0 - out.w_imp)
    d_zimp, grads["ln_gain"], grads["ln_bias"] = layer_norm_backward(d_ln, out._ln_cache, p.ln_gain)
    grads["imp_W"] = x.T @ d_zimp
    grads["imp_b"] = d_zimp.sum(axis=0)
    d_x += d_zimp @ p.imp_W.T
    return d_x, {k: grads[k] for k in LEARNABLE if k in grads}


def params_to_dict(p: HmfmParams) -> dict:
    d = {k: v for k, v in p.learnable().items()}
    d["base_freq"] = p.base_freq
    return d


def params_from_dict(d: dict, sigma_prime: float) -> HmfmParams:
    return HmfmParams(
        imp_W=d["imp_W"], imp_b=d["imp_b"], ln_gain=d["ln_gain"], ln_bias=d["ln_bias"],
        mod_W=d["mod_W"], mod_b=d["mod_b"], proj_W=d.get("proj_W"),
        base_freq=d["base_freq"], sigma_prime=sigma_prime,
    )
