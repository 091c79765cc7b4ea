"""Small trainable backbones that put HMFM in front of their first layer.

``mlp``   pooled molecule features -> HMFM -> ReLU dense stack -> M logits
``graph`` atom features -> HMFM per atom -> rounds of mean aggregation over
          each atom and its neighbours (linear + ReLU) -> mean pool -> linear head
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import hmfm
from .featurize import N_FEATURES, featurize_graphs
from .numcore import ShapeMismatch

SCHEMA_VERSION = 1


class EmptyBatch(ValueError):
    pass


class CheckpointError(ValueError):
    pass


class SchemaVersionMismatch(CheckpointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    mode: str = "mlp"
    hidden_dims: tuple[int, ...] = (64, 64)
    hmfm_D: int = 32
    sigma_prime: float = 1.0
    identity_projection: bool = False
    n_features: int = N_FEATURES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        errors = self.validate()
        if errors:
            raise ValueError("; ".join(errors))

    def validate(self) -> list[str]:
        errors = []
        if self.mode not in ("mlp", "graph"):
            errors.append("model.mode must be 'mlp' or 'graph'")
        if not self.hidden_dims or any(h < 1 for h in self.hidden_dims):
            errors.append("model.hidden_dims must be a non-empty list of positive sizes")
        if self.hmfm_D < 1:
            errors.append("hmfm.D must be >= 1")
        if self.sigma_prime < 0:
            errors.append("hmfm.sigma_prime must be >= 0")
        if self.identity_projection and self.hmfm_D != self.n_features:
            errors.append(f"hmfm.identity_projection requires hmfm.D == {self.n_features}")
        return errors


@dataclass
class Batch:
    """Featurized molecules. ``agg`` and ``pool`` are only needed in graph mode."""

    pooled: np.ndarray
    Y: np.ndarray | None = None
    atoms: np.ndarray | None = None
    agg: sp.csr_matrix | None = None
    pool: sp.csr_matrix | None = None

    def __len__(self):
        return self.pooled.shape[0]

    def subset(self, idx) -> "Batch":
        idx = np.asarray(idx)
        Y = None if self.Y is None else self.Y[idx]
        if self.atoms is None:
            return Batch(self.pooled[idx], Y)
        rows = self.pool[idx]
        keep = np.unique(rows.indices)
        return Batch(self.pooled[idx], Y, self.atoms[keep],
                     self.agg[keep][:, keep].tocsr(), rows[:, keep].tocsr())


def make_batch(graphs, Y=None, with_graph: bool = True) -> Batch:
    atom_mats, pooled = featurize_graphs(graphs)
    if not with_graph:
        return Batch(pooled, Y)
    sizes = [a.shape[0] for a in atom_mats]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rows, cols, vals = [], [], []
    for g, off in zip(graphs, offsets):
        for v, nbrs in enumerate(g.neighbors()):
            group = [v] + nbrs
            rows.extend([off + v] * len(group))
            cols.extend(off + u for u in group)
            vals.extend([1.0 / len(group)] * len(group))
    T = int(offsets[-1])
    agg = sp.csr_matrix((vals, (rows, cols)), shape=(T, T))
    prow = np.repeat(np.arange(len(graphs)), sizes)
    pvals = np.concatenate([np.full(s, 1.0 / s) for s in sizes]) if sizes else np.zeros(0)
    pool = sp.csr_matrix((pvals, (prow, np.arange(T))), shape=(len(graphs), T))
    return Batch(pooled, Y, np.vstack(atom_mats) if atom_mats else np.zeros((0, N_FEATURES)),
                 agg, pool)


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


@dataclass
class Model:
    config: ModelConfig
    labels: list[str]
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def create(cls, config: ModelConfig, labels) -> "Model":
        labels = list(labels)
        if not labels:
            raise ValueError("model needs at least one label")
        rng = np.random.default_rng(config.seed)
        enc = hmfm.HmfmParams.init(config.n_features, config.hmfm_D, config.sigma_prime,
                                   config.identity_projection, rng)
        params = {f"hmfm.{k}": v for k, v in hmfm.params_to_dict(enc).items()}
        width = 2 * config.hmfm_D
        prefix = "dense" if config.mode == "mlp" else "gnn"
        for k, h in enumerate(config.hidden_dims):
            params[f"{prefix}{k}.W"] = _uniform(rng, width, (width, h))
            params[f"{prefix}{k}.b"] = np.zeros(h)
            width = h
        params["out.W"] = _uniform(rng, width, (width, len(labels)))
        params["out.b"] = np.zeros(len(labels))
        return cls(config, labels, params)

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def learnable(self) -> list[str]:
        return [k for k in self.params if k != "hmfm.base_freq"]

    def encoder(self) -> hmfm.HmfmParams:
        d = {k[5:]: v for k, v in self.params.items() if k.startswith("hmfm.")}
        return hmfm.params_from_dict(d, self.config.sigma_prime)

    def forward(self, batch: Batch):
        """Return ``(logits, cache)``; the cache feeds :meth:`backward`."""
        if len(batch) == 0:
            raise EmptyBatch("empty batch")
        graph = self.config.mode == "graph"
        x = batch.atoms if graph else batch.pooled
        if graph and (x is None or batch.agg is None):
            raise ShapeMismatch("graph mode needs atom features and adjacency")
        if x.shape[1] != self.config.n_features:
            raise ShapeMismatch(f"features have {x.shape[1]} columns, model expects "
                                f"{self.config.n_features}")
        enc_params = self.encoder()
        enc = hmfm.encode(x, enc_params)
        h = enc.encoded
        layers = []
        prefix = "gnn" if graph else "dense"
        for k in range(len(self.config.hidden_dims)):
            W, b = self.params[f"{prefix}{k}.W"], self.params[f"{prefix}{k}.b"]
            inp = batch.agg @ h if graph else h
            pre = inp @ W + b
            layers.append((inp, pre))
            h = np.maximum(pre, 0.0)
        if graph:
            pooled = batch.pool @ h
        else:
            pooled = h
        logits = pooled @ self.params["out.W"] + self.params["out.b"]
        return logits, (enc_params, enc, layers, pooled, batch)

    def predict_logits(self, batch: Batch) -> np.ndarray:
        return self.forward(batch)[0]

    def backward(self, cache, grad_logits) -> dict[str, np.ndarray]:
        enc_params, enc, layers, pooled, batch = cache
        graph = self.config.mode == "graph"
        prefix = "gnn" if graph else "dense"
        grads = {"out.W": pooled.T @ grad_logits, "out.b": grad_logits.sum(axis=0)}
        d_h = grad_logits @ self.params["out.W"].T
        if graph:
            d_h = batch.pool.T @ d_h
        for k in reversed(range(len(layers))):
            inp, pre = layers[k]
            d_pre = d_h * (pre > 0)
            W = self.params[f"{prefix}{k}.W"]
            grads[f"{prefix}{k}.W"] = inp.T @ d_pre
            grads[f"{prefix}{k}.b"] = d_pre.sum(axis=0)
            d_h = d_pre @ W.T
            if graph:
                d_h = batch.agg.T @ d_h
        _, enc_grads = hmfm.encode_backward(None, enc_params, d_h, enc)
        for k, g in enc_grads.items():
            grads[f"hmfm.{k}"] = g
        return {k: np.asarray(grads[k]) for k in self.learnable()}


def save_checkpoint(model: Model, path) -> None:
    record = {
        "schema_version": SCHEMA_VERSION,
        "model_config": asdict(model.config),
        "labels": model.labels,
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                   for k, v in model.params.items()},
    }
    Path(path).write_text(json.dumps(record), encoding="utf-8")


def load_checkpoint(path, n_labels: int | None = None) -> Model:
    """Load a checkpoint written by :func:`save_checkpoint`.

    Every tensor shape is checked against the stored config; a mismatch (or a
    label count different from ``n_labels``) raises
    :class:`SchemaVersionMismatch` instead of truncating.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        record = json.loads(text)
        version = record["schema_version"]
        cfg = ModelConfig(**record["model_config"])
        labels = list(record["labels"])
        raw = record["params"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"{path}: schema version {version}, expected {SCHEMA_VERSION}")
    if n_labels is not None and n_labels != len(labels):
        raise SchemaVersionMismatch(f"{path}: checkpoint has {len(labels)} labels, expected {n_labels}")
    reference = Model.create(cfg, labels)
    params = {}
    for name, ref in reference.params.items():
        if name not in raw:
            raise SchemaVersionMismatch(f"{path}: missing tensor {name}")
        shape = tuple(raw[name]["shape"])
        data = np.asarray(raw[name]["data"], dtype=np.float64)
        if shape != ref.shape or data.size != ref.size:
            raise SchemaVersionMismatch(f"{path}: tensor {name} has shape {shape}, expected {ref.shape}")
        params[name] = data.reshape(shape)
    extra = set(raw) - set(reference.params)
    if extra:
        raise SchemaVersionMismatch(f"{path}: unexpected tensors {sorted(extra)}")
    return Model(cfg, labels, params)
