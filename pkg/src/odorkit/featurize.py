"""Per-atom feature matrices and mean-pooled molecule vectors.

Atom schema (22 columns)::

    0-10   element one-hot over B C N O P S F Cl Br I, other
    11     degree / 6
    12-16  formal charge clamped to [-2, 2], one-hot
    17     aromatic flag
    18     hydrogen count / 4
    19     ring membership flag
    20     molecule atom count / 50 (capped at 2)
    21     heavy-neighbor count / 6
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .smiles import MoleculeGraph

ELEMENT_SLOTS = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
N_FEATURES = 22

FEATURE_NAMES = (
    [f"elem_{e}" for e in ELEMENT_SLOTS] + ["elem_other", "degree"]
    + [f"charge_{c:+d}" for c in range(-2, 3)]
    + ["aromatic", "h_count", "in_ring", "mol_size", "heavy_degree"]
)


class EmptyMolecule(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    data: np.ndarray
    row_meaning: str = "atom"

    def __post_init__(self):
        if self.data.ndim != 2 or not np.all(np.isfinite(self.data)):
            raise ValueError("FeatureMatrix needs a finite 2-D array")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def atom_features(g: MoleculeGraph) -> FeatureMatrix:
    n = g.n_atoms
    if n == 0:
        raise EmptyMolecule("molecule has no atoms")
    X = np.zeros((n, N_FEATURES))
    heavy = [0] * n
    for bond in g.bonds:
        if g.atoms[bond.b].element != "H":
            heavy[bond.a] += 1
        if g.atoms[bond.a].element != "H":
            heavy[bond.b] += 1
    size = min(n / 50.0, 2.0)
    for k, atom in enumerate(g.atoms):
        slot = ELEMENT_SLOTS.index(atom.element) if atom.element in ELEMENT_SLOTS else 10
        X[k, slot] = 1.0
        X[k, 11] = atom.degree / 6.0
        X[k, 12 + max(-2, min(2, atom.formal_charge)) + 2] = 1.0
        X[k, 17] = float(atom.aromatic)
        X[k, 18] = atom.total_h / 4.0
        X[k, 19] = float(atom.in_ring)
        X[k, 20] = size
        X[k, 21] = heavy[k] / 6.0
    return FeatureMatrix(np.clip(X, -1.0, 2.0), "atom")


def pool_molecule(F: FeatureMatrix) -> FeatureMatrix:
    data = np.asarray(F, dtype=np.float64)
    if data.shape[0] < 1:
        raise EmptyMolecule("cannot pool zero rows")
    return FeatureMatrix(data.mean(axis=0, keepdims=True), "molecule")


def featurize_graphs(graphs) -> tuple[list[np.ndarray], np.ndarray]:
    """Atom matrices for each graph and the stacked pooled matrix (N x 22)."""
    atoms = [atom_features(g).data for g in graphs]
    pooled = np.vstack([a.mean(axis=0) for a in atoms]) if atoms else np.zeros((0, N_FEATURES))
    return atoms, pooled
