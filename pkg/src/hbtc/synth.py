"""Ground-truth generation for experiments.

Generates random block-term harmonic tensors, norm-matched noise at a
prescribed SNR, fixed-count sampling masks, a clustered channel-like
scenario, and the RLNE recovery metric.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .model import BlockStructure, BtdFactors, reconstruct
from .tensor_ops import frob

__all__ = [
    "GenConfig",
    "GroundTruth",
    "gen_btd_tensor",
    "add_noise",
    "gen_mask",
    "gen_csi_like",
    "generate",
    "rlne",
]

# Clustered-scenario defaults: antenna/time/frequency tensor with 7 clusters
# of 3 paths each.
CSI_DIMS = (32, 16, 100)
CSI_STRUCTURE = BlockStructure((3,) * 7)
CSI_ANGLE_SPREAD_DEG = 5.0
CSI_DOPPLER_MAX = 0.05
CSI_DOPPLER_SPREAD = 0.01


@dataclass(frozen=True)
class GenConfig:
    dims: tuple = (20, 20, 20)
    structure: BlockStructure = field(default_factory=lambda: BlockStructure((3, 3, 3)))
    snr_db: float = math.inf
    sample_ratio: float = 0.15
    seed: int = 0
    scenario: str = "generic"  # "generic" or "csi_like"

    def __post_init__(self):
        if not 0.0 < self.sample_ratio <= 1.0:
            raise ValueError(f"sample_ratio must be in (0, 1], got {self.sample_ratio}")
        if self.scenario not in ("generic", "csi_like"):
            raise ValueError(f"unknown scenario {self.scenario!r}")


@dataclass
class GroundTruth:
    clean: np.ndarray
    noisy: np.ndarray
    mask: np.ndarray
    factors: BtdFactors


def _unit_circle(rng, size):
    return np.exp(2j * np.pi * rng.uniform(0.0, 1.0, size=size))


def _harmonics(generators, n):
    """Columns [1, z, z^2, ...] for each generator z."""
    g = np.atleast_1d(generators)
    return g[None, :] ** np.arange(n)[:, None]


def gen_btd_tensor(config):
    """Random harmonic block-term ground truth (noiseless).

    Generators of the B and C columns are i.i.d. uniform on the unit circle;
    A is standard complex Gaussian.
    """
    rng = np.random.default_rng(config.seed)
    i_dim, j_dim, k_dim = config.dims
    s = config.structure
    a = (rng.standard_normal((i_dim, s.F))
         + 1j * rng.standard_normal((i_dim, s.F))) / math.sqrt(2)
    b = _harmonics(_unit_circle(rng, s.F), j_dim)
    c = _harmonics(_unit_circle(rng, s.R), k_dim)
    factors = BtdFactors(a, b, c, s)
    clean = reconstruct(factors)
    return clean, factors


def add_noise(clean, snr_db, seed):
    """Norm-matched complex Gaussian noise at the given SNR (dB).

    The perturbation is scaled so that ||noisy - clean||_F / ||clean||_F is
    exactly 10^(-snr_db/20); infinite SNR returns the clean tensor.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy()
    rng = np.random.default_rng(seed)
    noise = (rng.standard_normal(clean.shape)
             + 1j * rng.standard_normal(clean.shape))
    ratio = 10.0 ** (-snr_db / 20.0)  # sigma_n / sigma_s
    return clean + (ratio * frob(clean) / frob(noise)) * noise


def gen_mask(dims, sample_ratio, seed):
    """Fixed-count mask: exactly round(ratio * I*J*K) entries observed."""
    total = int(np.prod(dims))
    count = int(round(sample_ratio * total))
    if count < 1:
        raise ValueError(
            f"sample_ratio {sample_ratio} yields zero observed entries for dims {dims}")
    rng = np.random.default_rng(seed)
    flat = np.zeros(total)
    flat[rng.choice(total, size=count, replace=False)] = 1.0
    return flat.reshape(dims)


def gen_csi_like(config):
    """Clustered channel-like ground truth with the same block structure.

    Mode 1 holds steering-like unit-modulus harmonics whose angles are drawn
    within +-5 degrees of a per-cluster center, scaled by per-path complex
    gains; mode 2 holds per-cluster Doppler harmonics with a narrow spread;
    mode 3 holds one delay harmonic per cluster.
    """
    rng = np.random.default_rng(config.seed)
    i_dim, j_dim, k_dim = config.dims
    s = config.structure
    spread = math.radians(CSI_ANGLE_SPREAD_DEG)

    a_cols, b_gens = [], []
    for r in range(s.R):
        center = rng.uniform(-math.pi / 3, math.pi / 3)
        doppler_center = rng.uniform(-CSI_DOPPLER_MAX, CSI_DOPPLER_MAX)
        for _ in range(s.L[r]):
            angle = center + rng.uniform(-spread, spread)
            gain = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
            steer = np.exp(1j * math.pi * math.sin(angle) * np.arange(i_dim))
            a_cols.append(gain * steer)
            doppler = doppler_center + rng.uniform(-CSI_DOPPLER_SPREAD,
                                                   CSI_DOPPLER_SPREAD)
            b_gens.append(np.exp(2j * np.pi * doppler))
    a = np.stack(a_cols, axis=1)
    b = _harmonics(np.array(b_gens), j_dim)
    c = _harmonics(_unit_circle(rng, s.R), k_dim)
    factors = BtdFactors(a, b, c, s)
    return reconstruct(factors), factors


def generate(config):
    """Full ground truth per config: clean + noisy tensors, mask, factors."""
    if config.scenario == "csi_like":
        clean, factors = gen_csi_like(config)
    else:
        clean, factors = gen_btd_tensor(config)
    noisy = add_noise(clean, config.snr_db, config.seed + 1)
    mask = gen_mask(config.dims, config.sample_ratio, config.seed + 2)
    return GroundTruth(clean=clean, noisy=noisy, mask=mask, factors=factors)


def rlne(estimate, clean):
    """Relative normalized error min(||est - clean||_F / ||clean||_F, 1)."""
    estimate = np.asarray(estimate)
    clean = np.asarray(clean)
    denom = frob(clean)
    if denom == 0:
        raise ValueError("clean tensor must be nonzero")
    return min(frob(estimate - clean) / denom, 1.0)
