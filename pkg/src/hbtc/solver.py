"""Outer ADMM loop: factor pass, SVT prox of the auxiliaries, multiplier
ascent, and geometric penalty growth."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .hankel import hankelize, svt
from .model import AdmmState, BtdFactors, eval_f1, eval_f2, eval_lagrangian, reconstruct
from .tensor_ops import as_mask, as_tensor, frob

__all__ = [
    "ConfigError",
    "NumericalError",
    "SolverConfig",
    "SolveReport",
    "init_state",
    "admm_iterate",
    "solve",
]


class ConfigError(ValueError):
    """Invalid configuration value; message names the offending field."""


class NumericalError(RuntimeError):
    """Numerical failure inside a solver step; message names the step."""


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 10.0
    beta0: float = 1e-3
    rho_penalty: float = 1.05
    max_iterations: int = 500
    tol_rel_change: float = 1e-8
    backend: str = "als"
    seed: int = 0
    # Threshold of the SVT prox as a multiple of 1/beta.  The Lagrangian
    # penalty is beta*||.||^2 (not beta/2), so the exact prox parameter is
    # 1/(2*beta); 1/beta is kept as a compatibility option.
    svt_threshold: str = "half"  # "half" -> 1/(2*beta), "full" -> 1/beta
    # Overwrite observed entries of the output with the data values.
    overwrite_observed: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if not self.beta0 > 0:
            raise ConfigError(f"beta0 must be positive, got {self.beta0}")
        if not 1.0 < self.rho_penalty <= 1.1:
            raise ConfigError(
                f"rho_penalty must lie in (1.0, 1.1], got {self.rho_penalty}")
        if self.max_iterations < 0:
            raise ConfigError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if self.tol_rel_change < 0:
            raise ConfigError(f"tol_rel_change must be >= 0, got {self.tol_rel_change}")
        if self.backend not in ("als", "gn"):
            raise ConfigError(f"backend must be 'als' or 'gn', got {self.backend!r}")
        if self.svt_threshold not in ("half", "full"):
            raise ConfigError(
                f"svt_threshold must be 'half' or 'full', got {self.svt_threshold!r}")


@dataclass
class SolveReport:
    completed: np.ndarray
    factors: BtdFactors
    iterations_run: int
    trace: list          # rows of (iter, f1, f2, f_lag, beta, rel_change)
    converged: bool

    TRACE_HEADER = ("iter", "f1", "f2", "f_lag", "beta", "rel_change")


def _unit_harmonics(n, count, rng):
    """Columns [1, z, ..., z^(n-1)] with generators uniform on the unit circle."""
    z = np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size=count))
    return z[None, :] ** np.arange(n)[:, None]


def init_state(y, w, structure, config, factors=None):
    """Random (seeded) or provided initialization of the ADMM state.

    A is scaled complex Gaussian, B and C columns are unit-modulus
    harmonics, auxiliaries start feasible (E = H(b), F = H(c)) and the
    multipliers at zero.
    """
    y = as_tensor(y)
    w = as_mask(w)
    I, J, K = y.shape
    if structure.F > J * K:
        raise ConfigError(
            f"structure: F={structure.F} exceeds J*K={J * K}")
    n_obs = int(w.sum())
    if n_obs == 0:
        raise ConfigError("mask: no observed entries")
    if factors is None:
        rng = np.random.default_rng(config.seed)
        scale = frob(y) / math.sqrt(n_obs)
        a = scale * (rng.standard_normal((I, structure.F))
                     + 1j * rng.standard_normal((I, structure.F))) / math.sqrt(2)
        b = _unit_harmonics(J, structure.F, rng)
        c = _unit_harmonics(K, structure.R, rng)
        factors = BtdFactors(a, b, c, structure)
    e = [hankelize(factors.B[:, f]) for f in range(structure.F)]
    f_aux = [hankelize(factors.C[:, r]) for r in range(structure.R)]
    m = [np.zeros_like(x) for x in e]
    n = [np.zeros_like(x) for x in f_aux]
    return AdmmState(factors=factors, E=e, F_aux=f_aux, M=m, N=n,
                     beta=config.beta0, lam=config.lam)


def admm_iterate(y, w, state, config):
    """One ADMM iteration: (a) factor pass, (b) SVT of auxiliaries,
    (c) multiplier ascent with step size beta, (d) beta <- rho*beta."""
    from .updaters import update_factors

    step = "factor update"
    try:
        state = update_factors(y, w, state, backend=config.backend)
        fac = state.factors
        beta = state.beta
        tau = 1.0 / (2.0 * beta) if config.svt_threshold == "half" else 1.0 / beta

        step = "svt"
        hb = [hankelize(fac.B[:, f]) for f in range(fac.structure.F)]
        hc = [hankelize(fac.C[:, r]) for r in range(fac.structure.R)]
        state.E = [svt(h + m / beta, tau) for h, m in zip(hb, state.M)]
        state.F_aux = [svt(h + n / beta, tau) for h, n in zip(hc, state.N)]

        step = "multiplier ascent"
        state.M = [m + beta * (h - e) for m, h, e in zip(state.M, hb, state.E)]
        state.N = [n + beta * (h - f) for n, h, f in zip(state.N, hc, state.F_aux)]
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"ADMM step failed ({step}): {exc}") from exc

    state.beta = beta * config.rho_penalty
    state.iteration += 1
    return state


def solve(y, w, structure, config, factors=None):
    """Run ADMM until max_iterations or the reconstruction stabilizes."""
    y = as_tensor(y)
    w = as_mask(w)
    state = init_state(y, w, structure, config, factors=factors)
    t_prev = reconstruct(state.factors)
    trace = []
    converged = False
    zero_streak = 0
    it = 0
    for it in range(1, config.max_iterations + 1):
        state = admm_iterate(y, w, state, config)
        t_cur = reconstruct(state.factors)
        denom = max(frob(t_prev), np.finfo(float).tiny)
        rel_change = frob(t_cur - t_prev) / denom
        trace.append((
            it,
            eval_f1(y, w, state.factors),
            eval_f2(state.factors),
            eval_lagrangian(y, w, state),
            state.beta,
            rel_change,
        ))
        if not np.all(np.isfinite(t_cur)):
            raise NumericalError("reconstruction diverged (non-finite entries)")
        t_prev = t_cur
        # A rejected trust-region step leaves the reconstruction bit-identical
        # (rel_change == 0); that alone is not convergence, but a persistent
        # zero change means the iterate is stationary.
        zero_streak = zero_streak + 1 if rel_change == 0.0 else 0
        if 0.0 < rel_change < config.tol_rel_change or zero_streak >= 3:
            converged = True
            break
    completed = t_prev
    if config.overwrite_observed:
        completed = np.where(w > 0, y, completed)
    return SolveReport(
        completed=completed,
        factors=state.factors,
        iterations_run=it,
        trace=trace,
        converged=converged,
    )
