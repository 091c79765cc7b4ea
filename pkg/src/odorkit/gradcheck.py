"""Finite-difference verification of every hand-written backward pass.

Hinge losses, the similar-pair mask and ReLU are only piecewise smooth. Random
inputs landing within ``KINK_MARGIN`` of a kink are perturbed until they do
not; such items are reported as nudged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cil, hmfm
from .model import Batch, Model, ModelConfig
from .numcore import grad_check, sigmoid

TOLERANCE = 1e-4
KINK_MARGIN = 1e-4
MAX_NUDGES = 100


@dataclass(frozen=True)
class CheckRow:
    item: str
    max_rel_err: float
    nudged: bool = False

    @property
    def passed(self) -> bool:
        return self.max_rel_err < TOLERANCE


def _near_kink(z, Y, S, cfg) -> bool:
    Yhat = sigmoid(z)
    E = Yhat.mean(axis=0)
    m_in, m_out = cil.energy_targets(Y, cfg)
    expected = cfg.e1 + cfg.e2 * Y.sum(axis=1)
    mask = cil.similar_pairs(S, cfg)
    _, dist = cil._pair_distances(Yhat)
    return bool(
        np.any(np.abs(E - m_in) < KINK_MARGIN)
        or np.any(np.abs(m_out - E) < KINK_MARGIN)
        or np.any(np.abs(expected - Yhat.sum(axis=1)) < KINK_MARGIN)
        # exactly coincident rows stay coincident under perturbation; not a kink
        or np.any((dist[mask > 0] > 0) & (dist[mask > 0] < KINK_MARGIN))
        or np.any(np.abs(z) > 15.0)
    )


def loss_problem(seed: int, N: int = 8, M: int = 12, F: int = 6,
                 cfg: cil.LossConfig = cil.LossConfig()):
    """Random ``(logits, Y, S, nudged)`` with a few strongly negative label columns.

    The negative columns push the class-energy hinge into its active region so
    its gradient is exercised, not just its zero branch.
    """
    rng = np.random.default_rng(seed)
    Y = (rng.random((N, M)) < 0.35).astype(float)
    S = rng.random((N, F))
    offset = np.where(rng.random(M) < 0.3, -4.0, rng.normal(0.0, 1.0, M))
    z = rng.normal(0.0, 1.5, (N, M)) + offset
    nudged = False
    for _ in range(MAX_NUDGES):
        if not _near_kink(z, Y, S, cfg):
            return z, Y, S, nudged
        z = z + rng.normal(0.0, 1e-2, z.shape)
        nudged = True
    raise RuntimeError(f"seed {seed}: could not move logits off a kink")


def check_loss(seed: int, N: int = 8, M: int = 12, F: int = 6,
               cfg: cil.LossConfig = cil.LossConfig()) -> list[CheckRow]:
    z, Y, S, nudged = loss_problem(seed, N, M, F, cfg)
    mask = cil.similar_pairs(S, cfg)
    ref = cil.total_loss(z, Y, S, cfg, mask=mask)
    rows = []
    for name in cil.COMPONENTS:
        rep = grad_check(lambda t: cil.total_loss(t, Y, S, cfg, mask=mask).as_dict()[name],
                         ref.component_grads[name], z)
        rows.append(CheckRow(f"cil.{name}", rep.max_rel_err, nudged))
    rep = grad_check(lambda t: cil.total_loss(t, Y, S, cfg, mask=mask).total, ref.grad_logits, z)
    rows.append(CheckRow("cil.total", rep.max_rel_err, nudged))
    return rows


def check_hmfm(seed: int, N: int = 8, A: int = 22, D: int = 16,
               sigma_prime: float = 1.0) -> list[CheckRow]:
    rng = np.random.default_rng(seed)
    p = hmfm.HmfmParams.init(A, D, sigma_prime, rng=rng)
    # move off the default init so gain/bias gradients are generic
    p = p.replace(imp_b=rng.normal(0, 0.3, A), ln_gain=1.0 + rng.normal(0, 0.3, A),
                  ln_bias=rng.normal(0, 0.3, A), mod_b=rng.normal(0, 0.3, D))
    x = rng.random((N, A))
    G = rng.normal(size=(N, 2 * D))
    gx, grads = hmfm.encode_backward(x, p, G)

    def objective(params, inp):
        return float((hmfm.encode(inp, params).encoded * G).sum())

    rows = [CheckRow("hmfm.x", grad_check(lambda t: objective(p, t), gx, x).max_rel_err)]
    for name, value in p.learnable().items():
        rep = grad_check(lambda t: objective(p.replace(**{name: t}), x), grads[name], value)
        rows.append(CheckRow(f"hmfm.{name}", rep.max_rel_err))
    return rows


def _mlp_problem(seed: int, N: int, M: int, hidden, D: int, sigma_prime: float,
                 cfg: cil.LossConfig):
    rng = np.random.default_rng(seed)
    Y = (rng.random((N, M)) < 0.4).astype(float)
    pooled = rng.random((N, 22))
    batch = Batch(pooled, Y)
    for sub in range(MAX_NUDGES):
        model = Model.create(ModelConfig("mlp", tuple(hidden), D, sigma_prime, seed=seed * 1000 + sub),
                             [f"l{j}" for j in range(M)])
        for k, v in model.params.items():
            if k.endswith(".b"):
                model.params[k] = rng.normal(0, 0.2, v.shape)
        logits, cache = model.forward(batch)
        pres = [pre for _, pre in cache[2]]
        if min(np.abs(pre).min() for pre in pres) > KINK_MARGIN and \
                not _near_kink(logits, Y, pooled, cfg):
            return model, batch, sub > 0
    raise RuntimeError(f"seed {seed}: could not find a kink-free model")


def check_model(seed: int, N: int = 4, M: int = 6, hidden=(8,), D: int = 8,
                sigma_prime: float = 1.0, cfg: cil.LossConfig = cil.LossConfig()) -> list[CheckRow]:
    """End-to-end: total loss w.r.t. every parameter of a small MLP+HMFM model."""
    model, batch, nudged = _mlp_problem(seed, N, M, hidden, D, sigma_prime, cfg)
    mask = cil.similar_pairs(batch.pooled, cfg)
    logits, cache = model.forward(batch)
    br = cil.total_loss(logits, batch.Y, batch.pooled, cfg, mask=mask)
    grads = model.backward(cache, br.grad_logits)
    rows = []
    for name in model.learnable():
        original = model.params[name]

        def f(t, name=name):
            model.params[name] = t
            try:
                return cil.total_loss(model.predict_logits(batch), batch.Y, batch.pooled,
                                      cfg, mask=mask).total
            finally:
                model.params[name] = original

        rep = grad_check(f, grads[name], original)
        rows.append(CheckRow(f"model.{name}", rep.max_rel_err, nudged))
    return rows


def run_suite(seed: int = 0, sigma_prime: float = 1.0) -> list[CheckRow]:
    return (check_loss(seed)
            + check_hmfm(seed, sigma_prime=sigma_prime)
            + check_model(seed, sigma_prime=sigma_prime))
