"""Chemically-informed loss for multi-label prediction.

Five terms on predicted probabilities ``Yhat = sigmoid(logits)`` against
binary targets ``Y`` (both N x M):

* ``basis``   class-weighted binary cross-entropy
* ``stt``     prediction distance between structurally similar molecules
* ``class``   hinge on per-label mean prediction vs co-occurrence-shifted targets
* ``sample``  hinge on per-molecule prediction mass vs label count
* ``col``     squared Frobenius gap between predicted and true label Gram matrices

``total_loss`` returns every term plus the gradient of the weighted total
w.r.t. the logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numcore import ShapeMismatch, sigmoid

PROB_CLAMP = 1e-7
COMPONENTS = ("basis", "stt", "class", "sample", "col")


@dataclass(frozen=True)
class LossConfig:
    lambda1: float = 0.3
    lambda2: float = 0.3
    lambda3: float = 0.5
    lambda4: float = 0.3
    tau: float = 0.8
    c: float = 0.2
    e1: float = 1.0
    e2: float = 1.0
    weight_min: float = 0.1
    weight_max: float = 10.0
    weight_scope: str = "batch"
    sim_mode: str = "pairwise_cosine"
    class_count_scaling: bool = True

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        for k in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if not getattr(self, k) >= 0:
                errors.append(f"loss.{k} must be >= 0")
        if not 0 < self.tau <= 1:
            errors.append("loss.tau must lie in (0, 1]")
        if not self.weight_min <= self.weight_max:
            errors.append("loss.weight_min must be <= loss.weight_max")
        if self.weight_scope not in ("batch", "global"):
            errors.append("loss.weight_scope must be 'batch' or 'global'")
        if self.sim_mode not in ("pairwise_cosine", "frobenius_literal"):
            errors.append("loss.sim_mode must be 'pairwise_cosine' or 'frobenius_literal'")
        return errors

    @property
    def lambdas(self) -> tuple[float, float, float, float]:
        return (self.lambda1, self.lambda2, self.lambda3, self.lambda4)


@dataclass
class LossBreakdown:
    basis: float
    stt: float
    class_energy: float
    sample: float
    col: float
    total: float
    grad_logits: np.ndarray
    component_grads: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict[str, float]:
        return {"basis": self.basis, "stt": self.stt, "class": self.class_energy,
                "sample": self.sample, "col": self.col, "total": self.total}


def _shapes(Yhat, Y):
    Yhat = np.asarray(Yhat, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Yhat.ndim != 2 or Yhat.shape != Y.shape:
        raise ShapeMismatch(f"predictions {Yhat.shape} vs labels {Y.shape}")
    return Yhat, Y


def class_weights(Y, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Add-one smoothed negative/positive ratio per label, clamped."""
    Y = np.asarray(Y, dtype=np.float64)
    pos = Y.sum(axis=0)
    neg = Y.shape[0] - pos
    return np.clip((neg + 1.0) / (pos + 1.0), cfg.weight_min, cfg.weight_max)


def loss_basis(Yhat, Y, w) -> float:
    Yhat, Y = _shapes(Yhat, Y)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (Y.shape[1],):
        raise ShapeMismatch(f"weights {w.shape}, expected ({Y.shape[1]},)")
    P = np.clip(Yhat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    ll = Y * np.log(P) + (1.0 - Y) * np.log(1.0 - P)
    return float(-(ll * w).sum() / Y.shape[0])


def _basis_grad(Yhat, Y, w):
    P = np.clip(Yhat, PROB_CLAMP, 1.0 - PROB_CLAMP)
    inside = (Yhat > PROB_CLAMP) & (Yhat < 1.0 - PROB_CLAMP)
    g = -(w / Y.shape[0]) * (Y / P - (1.0 - Y) / (1.0 - P))
    return g * inside


def similarity_matrix(S, mode: str = "pairwise_cosine") -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    gram = S @ S.T
    if mode == "frobenius_literal":
        fro2 = float((S ** 2).sum())
        return gram / fro2 if fro2 > 0 else np.zeros_like(gram)
    norms = np.sqrt((S ** 2).sum(axis=1))
    return gram / (np.outer(norms, norms) + 1e-12)


def similar_pairs(S, cfg: LossConfig = LossConfig()) -> np.ndarray:
    mask = (similarity_matrix(S, cfg.sim_mode) > cfg.tau).astype(np.float64)
    np.fill_diagonal(mask, 0.0)
    return mask


def _pair_distances(Yhat):
    diff = Yhat[:, None, :] - Yhat[None, :, :]
    return diff, np.sqrt((diff ** 2).sum(axis=2))


def loss_stt(Yhat, S, cfg: LossConfig = LossConfig(), mask=None) -> float:
    Yhat = np.asarray(Yhat, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != Yhat.shape[0] or S.shape[1] < 1:
        raise ShapeMismatch(f"similarity features {S.shape} vs {Yhat.shape[0]} rows")
    if mask is None:
        mask = similar_pairs(S, cfg)
    _, dist = _pair_distances(Yhat)
    N = Yhat.shape[0]
    return float((mask * dist).sum() / N ** 2)


def _stt_grad(Yhat, mask):
    N = Yhat.shape[0]
    diff, dist = _pair_distances(Yhat)
    coef = np.divide(mask + mask.T, dist, out=np.zeros_like(dist), where=dist > 0)
    return (coef[:, :, None] * diff).sum(axis=1) / N ** 2


def class_energy(Yhat) -> np.ndarray:
    return np.asarray(Yhat, dtype=np.float64).mean(axis=0)


def energy_targets(Y, cfg: LossConfig = LossConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Per-label ``(m_in, m_out)`` = ``(1 + c*p, c*(1 - p))`` for positive rate ``p``."""
    Y = np.asarray(Y, dtype=np.float64)
    N = Y.shape[0]
    # diagonals of Y^T Y / N and (1-Y)^T (1-Y) / N
    p_in = (Y * Y).sum(axis=0) / N
    p_out = ((1.0 - Y) * (1.0 - Y)).sum(axis=0) / N
    return 1.0 + cfg.c * p_in, cfg.c * p_out


def _class_terms(Yhat, Y, cfg):
    E = class_energy(Yhat)
    m_in, m_out = energy_targets(Y, cfg)
    if cfg.class_count_scaling:
        n_pos = Y.sum(axis=0)
        n_neg = Y.shape[0] - n_pos
    else:
        n_pos = n_neg = np.ones(Y.shape[1])
    over = np.maximum(0.0, E - m_in)
    under = np.maximum(0.0, m_out - E)
    return n_pos, n_neg, over, under


def loss_class(Yhat, Y, cfg: LossConfig = LossConfig()) -> float:
    Yhat, Y = _shapes(Yhat, Y)
    n_pos, n_neg, over, under = _class_terms(Yhat, Y, cfg)
    return float((n_pos * over ** 2 + n_neg * under ** 2).sum())


def _class_grad(Yhat, Y, cfg):
    n_pos, n_neg, over, under = _class_terms(Yhat, Y, cfg)
    dE = 2.0 * n_pos * over - 2.0 * n_neg * under
    return np.broadcast_to(dE / Y.shape[0], Yhat.shape).copy()


def _sample_gap(Yhat, Y, cfg):
    expected = cfg.e1 + cfg.e2 * Y.sum(axis=1)
    return np.maximum(0.0, expected - Yhat.sum(axis=1))


def loss_sample(Yhat, Y, cfg: LossConfig = LossConfig()) -> float:
    Yhat, Y = _shapes(Yhat, Y)
    return float((_sample_gap(Yhat, Y, cfg) ** 2).mean())


def _sample_grad(Yhat, Y, cfg):
    gap = _sample_gap(Yhat, Y, cfg)
    return np.broadcast_to((-2.0 * gap / Y.shape[0])[:, None], Yhat.shape).copy()


def _gram_gap(Yhat, Y):
    N = Y.shape[0]
    return (Yhat.T @ Yhat - Y.T @ Y) / N


def loss_col(Yhat, Y) -> float:
    Yhat, Y = _shapes(Yhat, Y)
    return float((_gram_gap(Yhat, Y) ** 2).sum())


def _col_grad(Yhat, Y):
    return (4.0 / Y.shape[0]) * Yhat @ _gram_gap(Yhat, Y)


def total_loss(logits, Y, S, cfg: LossConfig = LossConfig(), weights=None,
               mask=None) -> LossBreakdown:
    """Evaluate all five terms and the logit gradient of their weighted sum.

    ``weights`` overrides the per-batch class weights (used for
    ``weight_scope="global"``); ``mask`` overrides the similar-pair mask
    computed from ``S``.
    """
    logits, Y = _shapes(logits, Y)
    Yhat = sigmoid(logits)
    if weights is None:
        weights = class_weights(Y, cfg)
    if mask is None:
        S = np.asarray(S, dtype=np.float64)
        if S.ndim != 2 or S.shape[0] != Y.shape[0]:
            raise ShapeMismatch(f"similarity features {S.shape} vs {Y.shape[0]} rows")
        mask = similar_pairs(S, cfg)

    values = {
        "basis": loss_basis(Yhat, Y, weights),
        "stt": float((mask * _pair_distances(Yhat)[1]).sum() / Y.shape[0] ** 2),
        "class": loss_class(Yhat, Y, cfg),
        "sample": loss_sample(Yhat, Y, cfg),
        "col": loss_col(Yhat, Y),
    }
    dsig = Yhat * (1.0 - Yhat)
    grads = {
        "basis": _basis_grad(Yhat, Y, weights) * dsig,
        "stt": _stt_grad(Yhat, mask) * dsig,
        "class": _class_grad(Yhat, Y, cfg) * dsig,
        "sample": _sample_grad(Yhat, Y, cfg) * dsig,
        "col": _col_grad(Yhat, Y) * dsig,
    }
    lam = dict(zip(COMPONENTS[1:], cfg.lambdas))
    total = values["basis"] + sum(lam[k] * values[k] for k in lam)
    grad = grads["basis"] + sum(lam[k] * grads[k] for k in lam)
    return LossBreakdown(values["basis"], values["stt"], values["class"], values["sample"],
                         values["col"], total, grad, grads)
