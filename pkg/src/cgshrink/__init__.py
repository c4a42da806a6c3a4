"""Bayesian sparse regression with fast structured-Gaussian sampling.

Horseshoe Gibbs sampling driven by direct, Bhattacharya or prior-preconditioned
conjugate-gradient draws, Metropolis-Hastings and HMC kernels with an adaptive
diagonal mass matrix, exact reference oracles, and ESS diagnostics.
"""

__version__ = "0.1.0"

from .cg import CGReport, Preconditioner, apply_prior_preconditioner, cg_solve
from .data import Dataset, parse_dataset, synthetic_linear, synthetic_logistic
from .diagnostics import ChainTrace, EssReport, effective_sample_size, ess_per_second, ess_report
from .errors import (
    ConfigError,
    ConsistencyError,
    DimensionError,
    FormatError,
    NotPositiveDefiniteError,
    NumericalError,
    SingularMatrixError,
)
from .gaussian import (
    StructuredGaussianTarget,
    draw_rhs,
    sample_bhattacharya,
    sample_cg,
    sample_direct,
)
from .gibbs import GibbsConfig, ShrinkageState, run_gibbs
from .kernels import (
    GaussianTarget,
    HMCConfig,
    MHConfig,
    ShrinkagePosterior,
    hmc_step,
    leapfrog,
    mh_step,
    run_chain,
)
from .linalg import DenseMatrix, DiagonalOperator, LinearOperator, SparseMatrix, cholesky, matvec
from .oracles import best_subset_brute, ridge_fit, score_statistic, spike_slab_enumerate
from .polyagamma import sample_pg1
from .rng import chain_rngs, make_rng
