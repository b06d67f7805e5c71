"""Dense third-order complex tensor arithmetic.

Tensors are numpy arrays of shape (I, J, K) and dtype complex128; observation
masks are arrays of the same shape with {0, 1} entries.  Indices in docstrings
follow the 1-based convention (i, j, k); storage is 0-based with the first
index fastest in the on-disk format (see `hbtc.fileio`).
"""

import numpy as np

__all__ = [
    "as_tensor",
    "as_mask",
    "check_same_shape",
    "hadamard",
    "outer_rank1",
    "masked_sq_error",
    "frob",
]


def as_tensor(t):
    """Coerce to a dense complex third-order tensor and validate finiteness."""
    t = np.asarray(t, dtype=np.complex128)
    if t.ndim != 3:
        raise ValueError(f"expected a third-order tensor, got ndim={t.ndim}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor contains NaN/Inf entries")
    return t


def as_mask(w):
    """Coerce to a binary observation mask of shape (I, J, K)."""
    w = np.asarray(w)
    if w.ndim != 3:
        raise ValueError(f"expected a third-order mask, got ndim={w.ndim}")
    w = w.astype(np.float64)
    if not np.all((w == 0) | (w == 1)):
        raise ValueError("mask entries must be 0 or 1")
    return w


def check_same_shape(*arrays):
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def hadamard(p, q):
    """Entrywise product of two tensors of identical shape."""
    p, q = np.asarray(p), np.asarray(q)
    check_same_shape(p, q)
    return p * q


def outer_rank1(a, b, c):
    """Rank-1 tensor with entries a(i)*b(j)*c(k)."""
    a, b, c = (np.asarray(v).ravel() for v in (a, b, c))
    if min(a.size, b.size, c.size) == 0:
        raise ValueError("outer_rank1 requires nonempty vectors")
    return np.einsum("i,j,k->ijk", a, b, c)


def masked_sq_error(y, w, t_hat):
    """Squared Frobenius error between y and t_hat over observed entries of w."""
    y, t_hat = np.asarray(y), np.asarray(t_hat)
    w = np.asarray(w)
    check_same_shape(y, w, t_hat)
    d = w * (y - t_hat)
    return float(np.real(np.vdot(d, d)))


def frob(t):
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(t).ravel()))
