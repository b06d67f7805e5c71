"""Completion of partially observed harmonic tensors via a block-term
decomposition with Hankel nuclear-norm regularization, solved by ADMM."""

from .hankel import hankel_adjoint, hankel_counts, hankel_shape, hankelize, svt
from .model import (
    AdmmState,
    BlockStructure,
    BtdFactors,
    eval_f1,
    eval_f2,
    eval_lagrangian,
    harmonicity,
    reconstruct,
)
from .solver import (
    ConfigError,
    NumericalError,
    SolveReport,
    SolverConfig,
    admm_iterate,
    init_state,
    solve,
)
from .synth import GenConfig, GroundTruth, add_noise, gen_btd_tensor, gen_csi_like, gen_mask, generate, rlne
from .sweep import SweepSpec, run_sweep
from .tensor_ops import hadamard, masked_sq_error, outer_rank1

__version__ = "0.1.0"

__all__ = [
    "AdmmState",
    "BlockStructure",
    "BtdFactors",
    "ConfigError",
    "GenConfig",
    "GroundTruth",
    "NumericalError",
    "SolveReport",
    "SolverConfig",
    "SweepSpec",
    "add_noise",
    "admm_iterate",
    "eval_f1",
    "eval_f2",
    "eval_lagrangian",
    "gen_btd_tensor",
    "gen_csi_like",
    "gen_mask",
    "generate",
    "hadamard",
    "hankel_adjoint",
    "hankel_counts",
    "hankel_shape",
    "hankelize",
    "harmonicity",
    "init_state",
    "masked_sq_error",
    "outer_rank1",
    "reconstruct",
    "rlne",
    "run_sweep",
    "solve",
    "svt",
]
