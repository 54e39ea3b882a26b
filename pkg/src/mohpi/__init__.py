"""Hyperparameter importance for bi-objective HPO runs.

Objectives are scalarized along the Pareto front and each tradeoff is
analysed with fANOVA or surrogate-based ablation paths.
"""

__version__ = "0.1.0"

from mohpi.configspace import ConfigSpace, HyperparameterSpec, parse_space, load_space
from mohpi.dataset import MetaDataset, ObjectiveColumn, MinMaxNormalizer, load_csv
from mohpi.pareto import WeightVector, pareto_mask, derive_weights, grid_weights
from mohpi.forest import Forest, ForestParams, RegressionTree
from mohpi.fanova import FanovaOptions, ImportanceCurve, mo_fanova
from mohpi.ablation import AblationPath, AblationStep, mo_ablation

__all__ = [
    "ConfigSpace",
    "HyperparameterSpec",
    "parse_space",
    "load_space",
    "MetaDataset",
    "ObjectiveColumn",
    "MinMaxNormalizer",
    "load_csv",
    "WeightVector",
    "pareto_mask",
    "derive_weights",
    "grid_weights",
    "Forest",
    "ForestParams",
    "RegressionTree",
    "FanovaOptions",
    "ImportanceCurve",
    "mo_fanova",
    "AblationPath",
    "AblationStep",
    "mo_ablation",
]
