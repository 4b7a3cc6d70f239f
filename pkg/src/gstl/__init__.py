"""Group-sparse transfer learning for low-rank factor models and GloVe embeddings."""
from .align import align, error_frobenius_theta, error_l21, procrustes_rotation
from .core import l21_norm, project_l21_ball, row_group_soft_threshold
from .factor import FactorProblem, SolverConfig, fit_burer_monteiro
from .glovetl import (GloveConfig, PretrainedEmbeddings, fit_glove, fit_glove_transfer,
                      fit_mittens, rank_domain_words)
from .sensing import SyntheticSpec, gaussian_ensemble, generate_synthetic
from .transfer import TransferProblem, cross_validate_lambda, fit_transfer

__version__ = "0.1.0"
