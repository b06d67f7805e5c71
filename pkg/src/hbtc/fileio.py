"""Binary file formats.

CT3 (complex tensor): magic b"CT3\\0", three little-endian uint64 dims
(I, J, K), then I*J*K entries as interleaved little-endian float64 (re, im)
with the first index fastest (column-major storage order).

CM3 (mask): same header with magic b"CM3\\0", entries as single bytes {0, 1}.

BTD1 (factors): magic b"BTD1", uint64 I, J, K, R, then R uint64 block sizes,
then A (I x F), B (J x F), C (K x R) as interleaved float64 pairs in
column-major order.
"""

import numpy as np

from .model import BlockStructure, BtdFactors

__all__ = [
    "write_ct3", "read_ct3",
    "write_cm3", "read_cm3",
    "write_btd1", "read_btd1",
]

_CT3_MAGIC = b"CT3\x00"
_CM3_MAGIC = b"CM3\x00"
_BTD1_MAGIC = b"BTD1"


def _write_dims(fh, dims):
    fh.write(np.asarray(dims, dtype="<u8").tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise ValueError(f"truncated file while reading {what}")
    return buf


def _read_dims(fh, count, what="dims"):
    return tuple(int(d) for d in
                 np.frombuffer(_read_exact(fh, 8 * count, what), dtype="<u8"))


def _complex_bytes(arr):
    """Interleaved (re, im) float64 pairs, first index fastest."""
    flat = np.asarray(arr, dtype=np.complex128).ravel(order="F")
    out = np.empty(2 * flat.size, dtype="<f8")
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tobytes()


def _complex_from_bytes(buf, shape):
    raw = np.frombuffer(buf, dtype="<f8")
    flat = raw[0::2] + 1j * raw[1::2]
    return flat.reshape(shape, order="F").copy()


def write_ct3(path, tensor):
    tensor = np.asarray(tensor, dtype=np.complex128)
    if tensor.ndim != 3:
        raise ValueError(f"CT3 stores third-order tensors, got ndim={tensor.ndim}")
    with open(path, "wb") as fh:
        fh.write(_CT3_MAGIC)
        _write_dims(fh, tensor.shape)
        fh.write(_complex_bytes(tensor))


def read_ct3(path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != _CT3_MAGIC:
            raise ValueError(f"{path}: not a CT3 file")
        dims = _read_dims(fh, 3)
        n = int(np.prod(dims))
        return _complex_from_bytes(_read_exact(fh, 16 * n, "entries"), dims)


def write_cm3(path, mask):
    mask = np.asarray(mask)
    if mask.ndim != 3:
        raise ValueError(f"CM3 stores third-order masks, got ndim={mask.ndim}")
    vals = mask.ravel(order="F")
    if not np.all((vals == 0) | (vals == 1)):
        raise ValueError("mask entries must be 0 or 1")
    with open(path, "wb") as fh:
        fh.write(_CM3_MAGIC)
        _write_dims(fh, mask.shape)
        fh.write(vals.astype(np.uint8).tobytes())


def read_cm3(path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != _CM3_MAGIC:
            raise ValueError(f"{path}: not a CM3 file")
        dims = _read_dims(fh, 3)
        n = int(np.prod(dims))
        vals = np.frombuffer(_read_exact(fh, n, "entries"), dtype=np.uint8)
        if not np.all((vals == 0) | (vals == 1)):
            raise ValueError(f"{path}: mask entries must be 0 or 1")
        return vals.astype(np.float64).reshape(dims, order="F").copy()


def write_btd1(path, factors):
    i_dim, j_dim, k_dim = factors.dims
    s = factors.structure
    with open(path, "wb") as fh:
        fh.write(_BTD1_MAGIC)
        _write_dims(fh, (i_dim, j_dim, k_dim, s.R))
        _write_dims(fh, s.L)
        fh.write(_complex_bytes(factors.A))
        fh.write(_complex_bytes(factors.B))
        fh.write(_complex_bytes(factors.C))


def read_btd1(path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != _BTD1_MAGIC:
            raise ValueError(f"{path}: not a BTD1 file")
        i_dim, j_dim, k_dim, r = _read_dims(fh, 4, "header")
        blocks = _read_dims(fh, r, "block sizes")
        s = BlockStructure(blocks)
        a = _complex_from_bytes(_read_exact(fh, 16 * i_dim * s.F, "A"), (i_dim, s.F))
        b = _complex_from_bytes(_read_exact(fh, 16 * j_dim * s.F, "B"), (j_dim, s.F))
        c = _complex_from_bytes(_read_exact(fh, 16 * k_dim * s.R, "C"), (k_dim, s.R))
        return BtdFactors(a, b, c, s)
