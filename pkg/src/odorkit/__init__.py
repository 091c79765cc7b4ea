"""Odor-descriptor prediction toolkit: SMILES ingestion, HMFM encoding, CIL loss."""

from .cil import LossBreakdown, LossConfig, total_loss
from .featurize import FeatureMatrix, atom_features, featurize_graphs, pool_molecule
from .hmfm import HmfmParams, encode, encode_backward
from .smiles import MoleculeGraph, ParseError, parse_smiles

__version__ = "0.1.0"

__all__ = [
    "FeatureMatrix", "HmfmParams", "LossBreakdown", "LossConfig", "MoleculeGraph",
    "ParseError", "atom_features", "encode", "featurize_graphs", "encode_backward", "parse_smiles",
    "pool_molecule", "total_loss",
]
