"""Adam, seeded batching and the epoch loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import cil
from .analyze import macro_auroc, macro_f1
from .model import Batch, Model
from .numcore import sigmoid


class NonFiniteLoss(ArithmeticError):
    def __init__(self, batch_index: int, epoch: int | None = None):
        self.batch_index = batch_index
        self.epoch = epoch
        super().__init__(f"non-finite loss in batch {batch_index}" +
                         ("" if epoch is None else f" of epoch {epoch}"))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 100
    train_fraction: float = 0.8
    val_fraction: float = 0.2

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if not self.lr >= 0:
            errors.append("train.lr must be >= 0")
        if self.batch_size < 1:
            errors.append("train.batch_size must be >= 1")
        if self.epochs < 0:
            errors.append("train.epochs must be >= 0")
        if not (0 < self.train_fraction <= 1 and 0 <= self.val_fraction < 1):
            errors.append("train.train_fraction / train.val_fraction out of range")
        elif abs(self.train_fraction + self.val_fraction - 1.0) > 1e-9:
            errors.append("train.train_fraction + train.val_fraction must equal 1")
        return errors


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def split_indices(n: int, cfg: TrainConfig, seed: int) -> tuple[np.ndarray, np.ndarray]:
    order = np.random.default_rng(seed).permutation(n)
    n_train = n if cfg.val_fraction == 0 else int(round(cfg.train_fraction * n))
    n_train = min(max(n_train, 1), n)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def batch_loss(model: Model, batch: Batch, loss_cfg: cil.LossConfig, weights=None):
    logits, cache = model.forward(batch)
    br = cil.total_loss(logits, batch.Y, batch.pooled, loss_cfg, weights=weights)
    return br, cache


def train_epoch(model: Model, data: Batch, cfg: TrainConfig, loss_cfg: cil.LossConfig,
                opt: Adam, rng: np.random.Generator, weights=None, epoch: int | None = None):
    """One shuffled pass of Adam steps; returns epoch-mean component losses.

    ``weights`` fixes the class weights (``weight_scope="global"``); otherwise
    they are recomputed from each batch.
    """
    order = rng.permutation(len(data))
    sums = dict.fromkeys(("basis", "stt", "class", "sample", "col", "total"), 0.0)
    n_batches = 0
    for b, start in enumerate(range(0, len(order), cfg.batch_size)):
        # sorted so a batch's loss depends only on its membership, not the shuffle order
        batch = data.subset(np.sort(order[start:start + cfg.batch_size]))
        br, cache = batch_loss(model, batch, loss_cfg, weights)
        if not np.isfinite(br.total) or not np.all(np.isfinite(br.grad_logits)):
            raise NonFiniteLoss(b, epoch)
        grads = model.backward(cache, br.grad_logits)
        opt.step(model.params, grads)
        for k, v in br.as_dict().items():
            sums[k] += v
        n_batches += 1
    return {k: v / max(n_batches, 1) for k, v in sums.items()}


def evaluate(model: Model, data: Batch, loss_cfg: cil.LossConfig, weights=None) -> dict:
    logits = model.predict_logits(data)
    br = cil.total_loss(logits, data.Y, data.pooled, loss_cfg, weights=weights)
    probs = sigmoid(logits)
    auroc = macro_auroc(probs, data.Y)
    return {"total": br.total, "f1": macro_f1(probs, data.Y),
            "auroc": None if auroc is None else auroc}


@dataclass
class FitResult:
    model: Model
    best_params: dict[str, np.ndarray]
    log: list[dict] = field(default_factory=list)
    train_idx: np.ndarray | None = None
    val_idx: np.ndarray | None = None


def fit(model: Model, data: Batch, cfg: TrainConfig, loss_cfg: cil.LossConfig,
        seed: int = 0, log_file=None) -> FitResult:
    """Train for ``cfg.epochs`` epochs, tracking the best validation macro-F1.

    Without a validation split the training macro-F1 selects the best epoch.
    Each epoch appends one JSON object to ``log_file`` when given.
    """
    train_idx, val_idx = split_indices(len(data), cfg, seed)
    train = data.subset(train_idx)
    val = data.subset(val_idx) if len(val_idx) else None
    weights = cil.class_weights(train.Y, loss_cfg) if loss_cfg.weight_scope == "global" else None
    opt = Adam(model.params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(seed + 1)
    best_params = {k: v.copy() for k, v in model.params.items()}
    best_f1 = -1.0
    best_val_total = float("inf")
    log = []
    for epoch in range(1, cfg.epochs + 1):
        means = train_epoch(model, train, cfg, loss_cfg, opt, rng, weights, epoch)
        scored = evaluate(model, val if val is not None else train, loss_cfg, weights)
        best_val_total = min(best_val_total, scored["total"])
        record = {"epoch": epoch, **means, "val_f1": scored["f1"],
                  "val_auroc": scored["auroc"], "val_total": scored["total"],
                  "best_val_total": best_val_total}
        log.append(record)
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")
            log_file.flush()
        if scored["f1"] > best_f1:
            best_f1 = scored["f1"]
            best_params = {k: v.copy() for k, v in model.params.items()}
    return FitResult(model, best_params, log, train_idx, val_idx)
