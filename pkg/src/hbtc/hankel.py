"""Hankelization, its adjoint, anti-diagonal multiplicities, and the
singular-value-thresholding prox of the nuclear norm."""

import numpy as np
import scipy.linalg

__all__ = [
    "hankel_shape",
    "hankelize",
    "hankel_adjoint",
    "hankel_counts",
    "svt",
]


def hankel_shape(n):
    """Near-square Hankel shape (n1, n2) for a length-n vector.

    n1 = ceil((n+1)/2), n2 = n + 1 - n1.  Requires n >= 2; a 1x1 Hankel
    matrix is trivially rank-1 and carries no constraint.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"hankel_shape requires n >= 2, got {n}")
    n1 = (n + 2) // 2
    return n1, n + 1 - n1


def hankelize(v):
    """Map a length-n vector to its n1 x n2 Hankel matrix X(p,q) = v(p+q-1)."""
    v = np.asarray(v).ravel()
    n1, n2 = hankel_shape(v.size)
    return scipy.linalg.hankel(v[:n1], v[n1 - 1:])


def hankel_adjoint(x):
    """Adjoint of hankelize: anti-diagonal sums, a length n1+n2-1 vector."""
    x = np.asarray(x)
    n1, n2 = x.shape
    out = np.zeros(n1 + n2 - 1, dtype=x.dtype)
    for p in range(n1):
        out[p:p + n2] += x[p, :]
    return out


def hankel_counts(n):
    """Anti-diagonal multiplicities: hankel_adjoint of the all-ones matrix."""
    n1, n2 = hankel_shape(n)
    t = np.arange(1, n + 1)
    return np.minimum.reduce([t, np.full(n, n1), np.full(n, n2), n + 1 - t])


def svt(x, tau):
    """Singular value thresholding: prox of tau*||.||_* at x.

    Returns U * max(S - tau, 0) * Vh, the unique minimizer of
    tau*||E||_* + 0.5*||x - E||_F^2.
    """
    if not tau > 0:
        raise ValueError(f"svt threshold must be positive, got {tau}")
    u, s, vh = np.linalg.svd(np.asarray(x), full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (u * s) @ vh
