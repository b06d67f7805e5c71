"""Factor-matrix updates for the ADMM outer loop.

Both backends take one pass at minimizing the factor subproblem

    g(A, B, C) = lam*f1 + ||A||_F^2
               + beta * sum_{r,l} ||H(b_{r,l}) - E_{r,l} + M_{r,l}/beta||^2
               + beta * sum_r    ||H(c_r)     - F_r     + N_r/beta||^2

ALS solves the three block subproblems exactly (they decompose row-wise
into small ridge systems because the Hankel penalty is separable across
vector entries after applying the adjoint).  GN takes one dogleg
trust-region step on the real-stacked variable collecting re/im of all
factor entries.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hankel import hankel_adjoint, hankel_counts
from .model import block_pair_products, eval_g, expand_c, reconstruct

__all__ = [
    "als_update_A",
    "als_update_B",
    "als_update_C",
    "gn_step",
    "update_factors",
    "pack_factors",
    "unpack_factors",
    "residual_and_jacobian",
]

# Textbook dogleg constants: accept / shrink / expand thresholds.
TR_ACCEPT = 0.1
TR_SHRINK = 0.25
TR_EXPAND = 0.75
TR_GROW = 2.0
TR_CUT = 0.25

# Direct sparse solve below this variable count, CG above (problems > ~64^3).
_DIRECT_SOLVE_LIMIT = 60_000


def _aux_targets_B(state):
    """Adjoint images s_f = H*(E_f - M_f/beta), stacked as a J x F matrix."""
    cols = [hankel_adjoint(e - m / state.beta) for e, m in zip(state.E, state.M)]
    return np.stack(cols, axis=1)


def _aux_targets_C(state):
    cols = [hankel_adjoint(f - n / state.beta) for f, n in zip(state.F_aux, state.N)]
    return np.stack(cols, axis=1)


def als_update_A(y, w, state):
    """Exact minimizer of g over A at fixed B, C (row-wise ridge solves)."""
    fac = state.factors
    lam = state.lam
    ce = expand_c(fac.C, fac.structure)
    m = np.einsum("jf,kf->jkf", fac.B, ce)
    gram = lam * np.einsum("ijk,jkf,jkg->ifg", w, m.conj(), m, optimize=True)
    gram += np.eye(fac.structure.F)
    rhs = lam * np.einsum("ijk,jkf->if", w * y, m.conj(), optimize=True)
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def als_update_B(y, w, state):
    """Exact minimizer of g over B at fixed A, C.

    The Hankel penalty contributes a diagonal beta*count(j) ridge per row j
    and a linear pull toward the de-hankelized auxiliary targets.
    """
    fac = state.factors
    lam, beta = state.lam, state.beta
    ce = expand_c(fac.C, fac.structure)
    p = np.einsum("if,kf->ikf", fac.A, ce)
    gram = lam * np.einsum("ijk,ikf,ikg->jfg", w, p.conj(), p, optimize=True)
    counts = hankel_counts(fac.B.shape[0])
    gram += beta * counts[:, None, None] * np.eye(fac.structure.F)
    rhs = lam * np.einsum("ijk,ikf->jf", w * y, p.conj(), optimize=True)
    rhs += beta * _aux_targets_B(state)
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


def als_update_C(y, w, state):
    """Exact minimizer of g over C at fixed A, B (R-column analogue)."""
    fac = state.factors
    lam, beta = state.lam, state.beta
    d = block_pair_products(fac.A, fac.B, fac.structure)
    gram = lam * np.einsum("ijk,ijr,ijs->krs", w, d.conj(), d, optimize=True)
    counts = hankel_counts(fac.C.shape[0])
    gram += beta * counts[:, None, None] * np.eye(fac.structure.R)
    rhs = lam * np.einsum("ijk,ijr->kr", w * y, d.conj(), optimize=True)
    rhs += beta * _aux_targets_C(state)
    return np.linalg.solve(gram, rhs[..., None])[..., 0]


# --- Gauss-Newton with dogleg trust region --------------------------------

def pack_factors(factors):
    """Stack re/im of all entries of A, B, C into one real vector."""
    parts = []
    for mat in (factors.A, factors.B, factors.C):
        parts.append(mat.real.ravel())
        parts.append(mat.imag.ravel())
    return np.concatenate(parts)


def unpack_factors(z, template):
    """Inverse of pack_factors against a template BtdFactors."""
    out = template.copy()
    pos = 0
    mats = []
    for mat in (template.A, template.B, template.C):
        n = mat.size
        re = z[pos:pos + n].reshape(mat.shape)
        im = z[pos + n:pos + 2 * n].reshape(mat.shape)
        mats.append(re + 1j * im)
        pos += 2 * n
    out.A, out.B, out.C = mats
    return out


def residual_and_jacobian(y, w, factors):
    """Observed-entry residual r = y - that (real-stacked) and its Jacobian.

    The Jacobian is sparse: each observed entry depends only on row i of A,
    row j of B and row k of C.  Rows 0..N-1 are real parts, N..2N-1
    imaginary parts; columns follow the pack_factors layout.
    """
    s = factors.structure
    I, J, K = factors.dims
    F, R = s.F, s.R
    ii, jj, kk = np.nonzero(np.asarray(w))
    n_obs = ii.size
    ce = expand_c(factors.C, s)
    that = reconstruct(factors)
    rc = (np.asarray(y) - that)[ii, jj, kk]
    r_real = np.concatenate([rc.real, rc.imag])

    # Complex derivatives of the model value at each observed entry.
    d_a = factors.B[jj, :] * ce[kk, :]                       # n_obs x F
    d_b = factors.A[ii, :] * ce[kk, :]                       # n_obs x F
    d_c = block_pair_products(factors.A, factors.B, s)[ii, jj, :]  # n_obs x R

    rows_re = np.arange(n_obs)
    rows_im = rows_re + n_obs
    blocks = [
        (0, I * F, F, ii, d_a),
        (2 * I * F, J * F, F, jj, d_b),
        (2 * (I * F + J * F), K * R, R, kk, d_c),
    ]
    data, rows, cols = [], [], []
    for b0, size, width, ridx, d in blocks:
        m = -d  # residual is y - model
        col_re = b0 + ridx[:, None] * width + np.arange(width)[None, :]
        col_im = col_re + size
        rr = np.broadcast_to(rows_re[:, None], m.shape)
        ri = np.broadcast_to(rows_im[:, None], m.shape)
        # d/d re(z): m ; d/d im(z): i*m
        for rws, dat, cls in (
            (rr, m.real, col_re),
            (ri, m.imag, col_re),
            (rr, -m.imag, col_im),
            (ri, m.real, col_im),
        ):
            rows.append(np.asarray(rws).ravel())
            cols.append(np.asarray(cls).ravel())
            data.append(np.ascontiguousarray(dat).ravel())
    nz = 2 * (I * F + J * F + K * R)
    jac = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * n_obs, nz),
    ).tocsr()
    return r_real, jac


def _quadratic_terms(state):
    """Gradient and diagonal Hessian of h (all g terms except lam*f1)."""
    fac = state.factors
    beta = state.beta
    counts_j = hankel_counts(fac.B.shape[0])
    counts_k = hankel_counts(fac.C.shape[0])
    sb = _aux_targets_B(state)
    sc = _aux_targets_C(state)

    ga = 2.0 * fac.A
    gb = 2.0 * beta * (counts_j[:, None] * fac.B - sb)
    gc = 2.0 * beta * (counts_k[:, None] * fac.C - sc)
    grad = np.concatenate([
        ga.real.ravel(), ga.imag.ravel(),
        gb.real.ravel(), gb.imag.ravel(),
        gc.real.ravel(), gc.imag.ravel(),
    ])

    da = np.full(fac.A.size, 2.0)
    db = np.broadcast_to(2.0 * beta * counts_j[:, None], fac.B.shape).ravel()
    dc = np.broadcast_to(2.0 * beta * counts_k[:, None], fac.C.shape).ravel()
    hdiag = np.concatenate([da, da, db, db, dc, dc])
    return grad, hdiag


def _dogleg(grad, hess, radius, solve):
    """Dogleg step for model m(p) = g.p + 0.5 p.H.p within ||p|| <= radius."""
    p_newton = solve(-grad)
    if np.linalg.norm(p_newton) <= radius:
        return p_newton, False
    ghg = float(grad @ (hess @ grad))
    p_cauchy = -(float(grad @ grad) / ghg) * grad
    nc = np.linalg.norm(p_cauchy)
    if nc >= radius:
        return (-radius / np.linalg.norm(grad)) * grad, True
    d = p_newton - p_cauchy
    a = float(d @ d)
    b = 2.0 * float(p_cauchy @ d)
    c = nc ** 2 - radius ** 2
    t = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return p_cauchy + t * d, True


def gn_step(y, w, state):
    """One Gauss-Newton dogleg step on g; updates factors and trust radius.

    The f1 residual is linearized; the remaining terms of g are an exact
    quadratic with diagonal Hessian, so the model Hessian is
    2*lam*J^T J + diag(h).  Steps are accepted when the actual-to-model
    reduction ratio exceeds 0.1.
    """
    fac = state.factors
    lam = state.lam
    r_real, jac = residual_and_jacobian(y, w, fac)
    gh, hdiag = _quadratic_terms(state)
    grad = 2.0 * lam * (jac.T @ r_real) + gh
    gnorm = np.linalg.norm(grad)
    if gnorm <= 1e-14 * (1.0 + np.linalg.norm(pack_factors(fac))):
        return state  # stationary point of the model

    hess = (2.0 * lam) * (jac.T @ jac) + sp.diags(hdiag)
    hess = hess.tocsr()
    if hess.shape[0] <= _DIRECT_SOLVE_LIMIT:
        def solve(b):
            return spla.spsolve(hess, b)
    else:
        precond = sp.diags(1.0 / hess.diagonal())
        def solve(b):
            x, _ = spla.cg(hess, b, maxiter=50, M=precond)
            return x

    p, hit_boundary = _dogleg(grad, hess, state.tr_radius, solve)
    model_decrease = -(float(grad @ p) + 0.5 * float(p @ (hess @ p)))
    z = pack_factors(fac)
    candidate = unpack_factors(z + p, fac)
    g_old = eval_g(y, w, state)
    g_new = eval_g(y, w, state, factors=candidate)

    if not np.isfinite(g_new) or model_decrease <= 0:
        state.tr_radius *= TR_CUT
        return state
    ratio = (g_old - g_new) / model_decrease
    if ratio > TR_ACCEPT:
        state.factors = candidate
    if ratio > TR_EXPAND and hit_boundary:
        state.tr_radius *= TR_GROW
    elif ratio < TR_SHRINK:
        state.tr_radius *= TR_CUT
    return state


def update_factors(y, w, state, backend="als"):
    """One factor pass: a full ALS sweep (A then B then C) or one GN step."""
    if backend == "als":
        state.factors.A = als_update_A(y, w, state)
        state.factors.B = als_update_B(y, w, state)
        state.factors.C = als_update_C(y, w, state)
        return state
    if backend == "gn":
        return gn_step(y, w, state)
    raise ValueError(f"unknown backend {backend!r}, expected 'als' or 'gn'")
