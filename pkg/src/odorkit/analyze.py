"""Multi-label metrics and descriptor statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .numcore import ShapeMismatch


def _pair(Yhat, Y):
    Yhat = np.asarray(Yhat, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if Yhat.shape != Y.shape or Y.ndim != 2:
        raise ShapeMismatch(f"predictions {Yhat.shape} vs labels {Y.shape}")
    return Yhat, Y


def _confusion(pred, Y):
    tp = (pred * Y).sum(axis=0)
    fp = (pred * (1 - Y)).sum(axis=0)
    fn = ((1 - pred) * Y).sum(axis=0)
    return tp, fp, fn


def per_label_f1(Yhat, Y, threshold: float = 0.5) -> np.ndarray:
    Yhat, Y = _pair(Yhat, Y)
    tp, fp, fn = _confusion((Yhat >= threshold).astype(float), Y)
    denom = 2 * tp + fp + fn
    # 2PR/(P+R) == 2TP/(2TP+FP+FN); zero when TP == 0
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(Yhat, Y, threshold: float = 0.5) -> float:
    """Mean per-label F1 over labels with at least one positive target."""
    Yhat, Y = _pair(Yhat, Y)
    f1 = per_label_f1(Yhat, Y, threshold)
    support = Y.sum(axis=0) > 0
    return float(f1[support].mean()) if support.any() else 0.0


def micro_f1(Yhat, Y, threshold: float = 0.5) -> float:
    Yhat, Y = _pair(Yhat, Y)
    tp, fp, fn = (v.sum() for v in _confusion((Yhat >= threshold).astype(float), Y))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom > 0 else 0.0


def auroc(scores, labels) -> float | None:
    """Mann-Whitney AUROC with half credit for ties; ``None`` for single-class labels."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)  # midranks for ties
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def macro_auroc(Yhat, Y) -> float | None:
    Yhat, Y = _pair(Yhat, Y)
    vals = [auroc(Yhat[:, j], Y[:, j]) for j in range(Y.shape[1])]
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


@dataclass
class MetricsReport:
    macro_f1: float
    macro_auroc: float | None
    micro_f1: float
    n_auroc_undefined: int
    per_label: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"macro_f1": self.macro_f1, "macro_auroc": self.macro_auroc,
                "micro_f1": self.micro_f1, "n_auroc_undefined": self.n_auroc_undefined,
                "per_label": self.per_label}


def metrics_report(Yhat, Y, labels, threshold: float = 0.5) -> MetricsReport:
    Yhat, Y = _pair(Yhat, Y)
    f1 = per_label_f1(Yhat, Y, threshold)
    rows = []
    undefined = 0
    for j, name in enumerate(labels):
        a = auroc(Yhat[:, j], Y[:, j])
        undefined += a is None
        rows.append({"label": name, "f1": float(f1[j]), "auroc": a,
                     "support": int(Y[:, j].sum())})
    return MetricsReport(macro_f1(Yhat, Y, threshold), macro_auroc(Yhat, Y),
                         micro_f1(Yhat, Y, threshold), undefined, rows)


def _label_sets(dataset):
    for item in dataset:
        labels = getattr(item, "labels", item)
        yield set(labels)


def descriptor_frequencies(dataset) -> list[tuple[str, int]]:
    """``(label, count)`` pairs, most frequent first, ties by name."""
    counts = Counter()
    for labels in _label_sets(dataset):
        counts.update(labels)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def label_count_distribution(dataset) -> dict[int, tuple[int, float]]:
    """Map label count k to (number of molecules, fraction of molecules)."""
    sizes = Counter(len(labels) for labels in _label_sets(dataset))
    total = sum(sizes.values())
    return {k: (n, n / total) for k, n in sorted(sizes.items())}


@dataclass(frozen=True)
class CoOccurrenceMatrix:
    counts: np.ndarray
    labels: tuple[str, ...]

    def __getitem__(self, pair: tuple[str, str]) -> int:
        i, j = (self.labels.index(p) for p in pair)
        return int(self.counts[i, j])


def co_occurrence(dataset, top_k: int | None = None) -> CoOccurrenceMatrix:
    """Pair counts among the ``top_k`` most frequent descriptors (all when None)."""
    freq = descriptor_frequencies(dataset)
    if top_k is not None:
        if top_k > len(freq):
            raise ValueError(f"top_k={top_k} exceeds the {len(freq)} descriptors present")
        freq = freq[:top_k]
    labels = tuple(name for name, _ in freq)
    index = {name: k for k, name in enumerate(labels)}
    C = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for labels_i in _label_sets(dataset):
        ids = [index[x] for x in labels_i if x in index]
        for a in ids:
            for b in ids:
                C[a, b] += 1
    return CoOccurrenceMatrix(C, labels)
