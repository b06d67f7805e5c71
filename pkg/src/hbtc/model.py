"""Block-term decomposition model with multilinear rank (Lr, Lr, 1) blocks.

Holds the factor container, tensor reconstruction, and the objective
evaluations used by the ADMM solver:

    f1     masked least-squares fit of the block-term reconstruction
    f2     sum of nuclear norms of hankelized B/C columns + ||A||_F^2
    f_lag  augmented Lagrangian with auxiliaries E_{r,l}, F_r and
           multipliers M_{r,l}, N_r
    g      the factor subproblem objective (f_lag up to terms constant
           in A, B, C)

Column layout of A and B is block-major: column col(r, l) = l + sum_{i<r} L_i
(1-based), so block r occupies a contiguous slice of width L_r.
"""

from dataclasses import dataclass, field

import numpy as np

from .hankel import hankelize
from .tensor_ops import check_same_shape, masked_sq_error

__all__ = [
    "BlockStructure",
    "BtdFactors",
    "AdmmState",
    "expand_c",
    "reconstruct",
    "block_pair_products",
    "eval_f1",
    "eval_f2",
    "eval_lagrangian",
    "eval_g",
    "harmonicity",
]


@dataclass(frozen=True)
class BlockStructure:
    """Block sizes [L_1 .. L_R]; F = sum L_r columns in A and B."""

    L: tuple

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(int(l) for l in self.L))
        if len(self.L) == 0 or any(l < 1 for l in self.L):
            raise ValueError(f"block sizes must be >= 1, got {self.L}")

    @property
    def R(self):
        return len(self.L)

    @property
    def F(self):
        return sum(self.L)

    @property
    def offsets(self):
        """Start column of each block, plus the end sentinel F."""
        return np.concatenate([[0], np.cumsum(self.L)])

    @property
    def block_of_column(self):
        """Map column index f -> block index r."""
        return np.repeat(np.arange(self.R), self.L)

    @classmethod
    def cpd(cls, F):
        """Degenerate structure with all L_r = 1 (canonical polyadic model)."""
        return cls((1,) * int(F))


@dataclass
class BtdFactors:
    """Factor matrices A (I x F), B (J x F), C (K x R) with block structure."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    structure: BlockStructure

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.complex128)
        self.B = np.asarray(self.B, dtype=np.complex128)
        self.C = np.asarray(self.C, dtype=np.complex128)
        F, R = self.structure.F, self.structure.R
        if self.A.ndim != 2 or self.A.shape[1] != F:
            raise ValueError(f"A must have {F} columns, got shape {self.A.shape}")
        if self.B.ndim != 2 or self.B.shape[1] != F:
            raise ValueError(f"B must have {F} columns, got shape {self.B.shape}")
        if self.C.ndim != 2 or self.C.shape[1] != R:
            raise ValueError(f"C must have {R} columns, got shape {self.C.shape}")
        for name, m in (("A", self.A), ("B", self.B), ("C", self.C)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"factor {name} contains NaN/Inf")

    @property
    def dims(self):
        return self.A.shape[0], self.B.shape[0], self.C.shape[0]

    def copy(self):
        return BtdFactors(self.A.copy(), self.B.copy(), self.C.copy(), self.structure)


@dataclass
class AdmmState:
    """Mutable solver state: factors, auxiliaries, multipliers, penalty."""

    factors: BtdFactors
    E: list          # F matrices, Hankel shape of J, one per column (r, l)
    F_aux: list      # R matrices, Hankel shape of K
    M: list          # multipliers matching E
    N: list          # multipliers matching F_aux
    beta: float
    lam: float
    iteration: int = 0
    tr_radius: float = 1.0

    def __post_init__(self):
        s = self.factors.structure
        if len(self.E) != s.F or len(self.M) != s.F:
            raise ValueError("need one auxiliary/multiplier per (r, l) column")
        if len(self.F_aux) != s.R or len(self.N) != s.R:
            raise ValueError("need one auxiliary/multiplier per block r")
        if not self.beta > 0:
            raise ValueError(f"penalty beta must be positive, got {self.beta}")


def expand_c(C, structure):
    """Replicate column r of C over the L_r columns of block r (K x F)."""
    return C[:, structure.block_of_column]


def reconstruct(factors):
    """Evaluate the model tensor sum_r (A_r B_r^T) outer c_r."""
    ce = expand_c(factors.C, factors.structure)
    return np.einsum("if,jf,kf->ijk", factors.A, factors.B, ce, optimize=True)


def block_pair_products(A, B, structure):
    """Per-block slice products D_r(i,j) = sum_l A(i, col(r,l)) B(j, col(r,l)).

    Returns an (I, J, R) array; this is the design tensor of the C update.
    """
    full = np.einsum("if,jf->ijf", A, B)
    return np.add.reduceat(full, structure.offsets[:-1], axis=2)


def eval_f1(y, w, factors):
    """Masked squared fit error of the reconstruction against y."""
    return masked_sq_error(y, w, reconstruct(factors))


def eval_f2(factors):
    """Sum of nuclear norms of hankelized B and C columns plus ||A||_F^2."""
    total = float(np.linalg.norm(factors.A) ** 2)
    for f in range(factors.structure.F):
        total += float(np.linalg.svd(hankelize(factors.B[:, f]), compute_uv=False).sum())
    for r in range(factors.structure.R):
        total += float(np.linalg.svd(hankelize(factors.C[:, r]), compute_uv=False).sum())
    return total


def _rip(x, y):
    """Real part of the matrix inner product <x, y>."""
    return float(np.real(np.vdot(x, y)))


def eval_lagrangian(y, w, state):
    """Augmented Lagrangian: lam*f1 + ||A||^2 + coupling and penalty terms."""
    fac = state.factors
    check_same_shape(np.asarray(y), np.asarray(w))
    val = state.lam * eval_f1(y, w, fac) + float(np.linalg.norm(fac.A) ** 2)
    for f in range(fac.structure.F):
        d = hankelize(fac.B[:, f]) - state.E[f]
        val += _rip(state.M[f], d) + state.beta * float(np.linalg.norm(d) ** 2)
    for r in range(fac.structure.R):
        d = hankelize(fac.C[:, r]) - state.F_aux[r]
        val += _rip(state.N[r], d) + state.beta * float(np.linalg.norm(d) ** 2)
    return val


def eval_g(y, w, state, factors=None):
    """Factor subproblem objective:

    lam*f1 + ||A||^2 + beta*sum ||H(b) - E + M/beta||^2
                     + beta*sum ||H(c) - F + N/beta||^2
    """
    fac = state.factors if factors is None else factors
    beta = state.beta
    val = state.lam * eval_f1(y, w, fac) + float(np.linalg.norm(fac.A) ** 2)
    for f in range(fac.structure.F):
        d = hankelize(fac.B[:, f]) - state.E[f] + state.M[f] / beta
        val += beta * float(np.linalg.norm(d) ** 2)
    for r in range(fac.structure.R):
        d = hankelize(fac.C[:, r]) - state.F_aux[r] + state.N[r] / beta
        val += beta * float(np.linalg.norm(d) ** 2)
    return val


def harmonicity(factors):
    """Mean spectral-to-Frobenius ratio of hankelized B/C columns.

    1.0 means every column is an exact harmonic (rank-1 Hankel matrix).
    """
    scores = []
    for f in range(factors.structure.F):
        h = hankelize(factors.B[:, f])
        s = np.linalg.svd(h, compute_uv=False)
        scores.append(s[0] / max(np.linalg.norm(s), np.finfo(float).tiny))
    for r in range(factors.structure.R):
        h = hankelize(factors.C[:, r])
        s = np.linalg.svd(h, compute_uv=False)
        scores.append(s[0] / max(np.linalg.norm(s), np.finfo(float).tiny))
    return float(np.mean(scores))
