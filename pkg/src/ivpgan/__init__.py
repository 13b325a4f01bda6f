"""Drug-target binding affinity regression with a neighborhood-alignment adversarial loss."""

from .advloss import (
    TrainConfig,
    Trainer,
    alignment_matrix,
    composite_generator_loss,
    discriminator_loss,
    generator_adv_loss,
    mse_loss,
    train,
)
from .chemgraph import MolGraph, SmilesError, parse_smiles
from .datasets import (
    FoldAssignment,
    InteractionTable,
    apply_filter_threshold,
    featurize_table,
    load_table,
    make_synthetic_table,
    split,
)
from .estimator import IVPGANRegressor
from .fingerprint import ECFPTransformer, FingerprintVector, ecfp
from .metrics import MetricReport, aggregate, concordance_index, pearson_r2, rmse
from .netmodels import Network, NetworkConfig
from .protfeat import PSCTransformer, psc

__version__ = "0.1.0"

__all__ = [
    "ECFPTransformer",
    "FingerprintVector",
    "FoldAssignment",
    "IVPGANRegressor",
    "InteractionTable",
    "MetricReport",
    "MolGraph",
    "Network",
    "NetworkConfig",
    "PSCTransformer",
    "SmilesError",
    "TrainConfig",
    "Trainer",
    "aggregate",
    "alignment_matrix",
    "apply_filter_threshold",
    "composite_generator_loss",
    "concordance_index",
    "discriminator_loss",
    "ecfp",
    "featurize_table",
    "generator_adv_loss",
    "load_table",
    "make_synthetic_table",
    "mse_loss",
    "parse_smiles",
    "pearson_r2",
    "psc",
    "rmse",
    "split",
    "train",
]
