"""Seeded synthetic molecules with linearly-determined labels, for smoke tests."""

from __future__ import annotations

import numpy as np

from .dataset import Record
from .featurize import featurize_graphs
from .smiles import parse_smiles

FRAGMENTS = (
    "C", "CC", "CCC", "C(C)", "C(C)(C)", "C(=O)", "O", "N", "S", "C=C", "C(O)",
    "C(N)", "C(Cl)", "C(F)", "C(Br)", "c1ccccc1", "C1CCCCC1", "c1ccoc1", "c1ccncc1",
    "C1CCOC1", "C(=O)O", "C(C#N)", "c1ccsc1", "CC(=O)C", "[NH3+]", "C([O-])",
)


def random_smiles(rng: np.random.Generator, min_parts: int = 2, max_parts: int = 7) -> str:
    n = int(rng.integers(min_parts, max_parts + 1))
    return "".join(FRAGMENTS[int(k)] for k in rng.integers(0, len(FRAGMENTS), n))


def synthetic_dataset(n: int = 200, n_labels: int = 10, seed: int = 0):
    """Return ``(records, graphs, Y, label_names)``.

    Label k is ``1[z @ w_k > t_k]`` where ``z`` is the standardized pooled
    feature vector, ``w_k`` a random direction and ``t_k`` a quantile giving
    a positive rate between 20% and 50%.
    """
    rng = np.random.default_rng(seed)
    smiles = [random_smiles(rng) for _ in range(n)]
    graphs = [parse_smiles(s) for s in smiles]
    _, pooled = featurize_graphs(graphs)
    mu, sd = pooled.mean(axis=0), pooled.std(axis=0)
    z = (pooled - mu) / np.where(sd > 0, sd, 1.0)
    W = rng.normal(size=(pooled.shape[1], n_labels))
    scores = z @ W
    rates = rng.uniform(0.2, 0.5, n_labels)
    thresholds = np.array([np.quantile(scores[:, k], 1.0 - rates[k]) for k in range(n_labels)])
    Y = (scores > thresholds).astype(float)
    names = [f"odor{k:02d}" for k in range(n_labels)]
    records = [Record(s, tuple(names[k] for k in np.flatnonzero(row)))
               for s, row in zip(smiles, Y)]
    return records, graphs, Y, names
