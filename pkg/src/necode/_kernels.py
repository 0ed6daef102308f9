"""Hot numerical kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time: numba when importable, unless the
env var NECODE_PURE_NUMPY=1 forces the numpy path.  Both backends implement
the same algorithms (round-robin Jacobi sweeps, im2col loops) and agree
within the package tolerances; they are not bit-identical to each other
because summation orders differ.  Determinism holds per backend.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PURE_NUMPY = os.environ.get("NECODE_PURE_NUMPY", "") == "1"

if not PURE_NUMPY:
    try:
        from numba import njit

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False
else:
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not PURE_NUMPY

JACOBI_EPS = 1e-13
JACOBI_MAX_SWEEPS = 60


def active_backend():
    """Name of the kernel backend selected at import time."""
    return "numba" if USE_NUMBA else "numpy"


def _round_robin_rounds(n):
    """Tournament schedule: n-1 rounds of disjoint (p, q) pairs, p < q.

    Every unordered pair appears exactly once per sweep.  Pairs within one
    round touch disjoint columns, so sequential and batched application of
    the round's rotations agree.
    """
    idx = list(range(n)) + ([-1] if n % 2 else [])
    nn = len(idx)
    rounds = []
    for _ in range(max(nn - 1, 0)):
        ps, qs = [], []
        for i in range(nn // 2):
            a, b = idx[i], idx[nn - 1 - i]
            if a >= 0 and b >= 0:
                ps.append(min(a, b))
                qs.append(max(a, b))
        if ps:
            rounds.append((np.asarray(ps, dtype=np.int64),
                           np.asarray(qs, dtype=np.int64)))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def _flat_schedule(n):
    """Concatenated round-robin pairs for one sweep, as flat index arrays."""
    rounds = _round_robin_rounds(n)
    if not rounds:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    ps = np.concatenate([r[0] for r in rounds])
    qs = np.concatenate([r[1] for r in rounds])
    return ps, qs


# ---------------------------------------------------------------------------
# One-sided Jacobi SVD: orthogonalize the columns of A, accumulating V.

def _onesided_sweeps_numpy(A, V, eps, max_sweeps):
    m, n = A.shape
    rounds = _round_robin_rounds(n)
    sweeps = 0
    for _ in range(max_sweeps):
        rotated = False
        for ps, qs in rounds:
            Ap = A[:, ps]
            Aq = A[:, qs]
            app = np.einsum("ij,ij->j", Ap, Ap)
            aqq = np.einsum("ij,ij->j", Aq, Aq)
            apq = np.einsum("ij,ij->j", Ap, Aq)
            denom = np.sqrt(app * aqq)
            act = (denom > 0.0) & (np.abs(apq) > eps * denom)
            if not act.any():
                continue
            rotated = True
            zeta = (aqq[act] - app[act]) / (2.0 * apq[act])
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (
                np.abs(zeta) + np.sqrt(1.0 + zeta * zeta)
            )
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            pa, qa = ps[act], qs[act]
            Apa, Aqa = A[:, pa], A[:, qa]
            A[:, pa] = c * Apa - s * Aqa
            A[:, qa] = s * Apa + c * Aqa
            Vpa, Vqa = V[:, pa], V[:, qa]
            V[:, pa] = c * Vpa - s * Vqa
            V[:, qa] = s * Vpa + c * Vqa
        sweeps += 1
        if not rotated:
            break
    return sweeps


if USE_NUMBA:

    @njit(cache=True)
    def _onesided_sweeps_numba(A, V, eps, max_sweeps, ps, qs):  # pragma: no cover
        m, n = A.shape
        npairs = ps.shape[0]
        sweeps = 0
        for _ in range(max_sweeps):
            rotated = False
            for k in range(npairs):
                p = ps[k]
                q = qs[k]
                app = 0.0
                aqq = 0.0
                apq = 0.0
                for r in range(m):
                    ap = A[r, p]
                    aq = A[r, q]
                    app += ap * ap
                    aqq += aq * aq
                    apq += ap * aq
                if app * aqq == 0.0:
                    continue
                if abs(apq) <= eps * np.sqrt(app * aqq):
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for r in range(m):
                    ap = A[r, p]
                    aq = A[r, q]
                    A[r, p] = c * ap - s * aq
                    A[r, q] = s * ap + c * aq
                for r in range(n):
                    vp = V[r, p]
                    vq = V[r, q]
                    V[r, p] = c * vp - s * vq
                    V[r, q] = s * vp + c * vq
            sweeps += 1
            if not rotated:
                break
        return sweeps


def _complete_basis(B, dim):
    """Orthonormal complement of the columns of B inside R^dim.

    B has orthonormal columns (possibly zero of them).  Householder QR of B
    yields a full orthogonal Q whose trailing columns span the complement;
    the result is deterministic.
    """
    k = B.shape[1] if B.size else 0
    if k == 0:
        return np.eye(dim)
    q = np.linalg.qr(B, mode="complete")[0]
    return q[:, k:]


def _fix_right_signs(U, S, V):
    """Flip column signs so each right vector's first nonzero entry is >= 0."""
    n = V.shape[1]
    r = S.shape[0]
    for j in range(n):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-10)
        i0 = nz[0] if nz.size else int(np.argmax(np.abs(col)))
        if col[i0] < 0.0:
            V[:, j] = -col
            if j < r and U is not None:
                U[:, j] = -U[:, j]


def jacobi_svd(W, eps=JACOBI_EPS, max_sweeps=JACOBI_MAX_SWEEPS):
    """Full SVD W = U diag(S) V^T via one-sided Jacobi.

    Returns (U, S, V): U is m x m orthogonal, V is n x n orthogonal, S holds
    the min(m, n) singular values in ascending order.  The first len(S)
    columns of U and V pair with S; trailing columns of the larger factor are
    an exact orthonormal completion (for wide W the trailing V columns are
    nullspace vectors).  Right-singular vectors carry a deterministic sign:
    first nonzero component >= 0.
    """
    W = np.ascontiguousarray(W, dtype=np.float64)
    m, n = W.shape
    if m < n:
        Ut, S, Vt = jacobi_svd(W.T, eps=eps, max_sweeps=max_sweeps)
        U = Vt
        V = Ut
        _fix_right_signs(U, S, V)
        return U, S, V

    A = W.copy()
    V = np.eye(n)
    if USE_NUMBA:
        ps, qs = _flat_schedule(n)
        _onesided_sweeps_numba(A, V, eps, max_sweeps, ps, qs)
    else:
        _onesided_sweeps_numpy(A, V, eps, max_sweeps)

    norms = np.sqrt(np.einsum("ij,ij->j", A, A))
    order = np.argsort(norms, kind="stable")
    S = norms[order]
    V = np.ascontiguousarray(V[:, order])
    A = A[:, order]

    U = np.zeros((m, m))
    # rank cut at the standard max(m, n) * eps * s_max: rotated-away
    # columns of a rank-deficient input keep tiny nonzero norms, and
    # normalizing by those produces junk directions; completion is exact
    known = S > max(m, n) * np.finfo(np.float64).eps * S[-1]
    U[:, :n][:, known] = A[:, known] / S[known]
    fill = np.concatenate([np.flatnonzero(~known), np.arange(n, m)])
    if fill.size:
        comp = _complete_basis(U[:, :n][:, known], m)
        U[:, fill] = comp[:, : fill.size]
    _fix_right_signs(U, S, V)
    return U, S, V


# ---------------------------------------------------------------------------
# Two-sided Jacobi eigendecomposition of a symmetric matrix.

def _twosided_sweeps_numpy(G, V, eps, max_sweeps):
    n = G.shape[0]
    rounds = _round_robin_rounds(n)
    scale = np.linalg.norm(G)
    if scale == 0.0:
        return 0
    thresh = eps * scale
    sweeps = 0
    for _ in range(max_sweeps):
        rotated = False
        for ps, qs in rounds:
            gpq = G[ps, qs]
            act = np.abs(gpq) > thresh
            if not act.any():
                continue
            rotated = True
            pa, qa = ps[act], qs[act]
            gpp = G[pa, pa]
            gqq = G[qa, qa]
            zeta = (gqq - gpp) / (2.0 * gpq[act])
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (
                np.abs(zeta) + np.sqrt(1.0 + zeta * zeta)
            )
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            Gp, Gq = G[pa, :], G[qa, :]
            G[pa, :] = c[:, None] * Gp - s[:, None] * Gq
            G[qa, :] = s[:, None] * Gp + c[:, None] * Gq
            Gp, Gq = G[:, pa], G[:, qa]
            G[:, pa] = c[None, :] * Gp - s[None, :] * Gq
            G[:, qa] = s[None, :] * Gp + c[None, :] * Gq
            Vp, Vq = V[:, pa], V[:, qa]
            V[:, pa] = c[None, :] * Vp - s[None, :] * Vq
            V[:, qa] = s[None, :] * Vp + c[None, :] * Vq
        sweeps += 1
        if not rotated:
            break
    return sweeps


if USE_NUMBA:

    @njit(cache=True)
    def _twosided_sweeps_numba(G, V, eps, max_sweeps, ps, qs):  # pragma: no cover
        n = G.shape[0]
        scale = 0.0
        for i in range(n):
            for j in range(n):
                scale += G[i, j] * G[i, j]
        scale = np.sqrt(scale)
        if scale == 0.0:
            return 0
        thresh = eps * scale
        npairs = ps.shape[0]
        sweeps = 0
        for _ in range(max_sweeps):
            rotated = False
            for k in range(npairs):
                p = ps[k]
                q = qs[k]
                gpq = G[p, q]
                if abs(gpq) <= thresh:
                    continue
                rotated = True
                zeta = (G[q, q] - G[p, p]) / (2.0 * gpq)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + np.sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for r in range(n):
                    gp = G[p, r]
                    gq = G[q, r]
                    G[p, r] = c * gp - s * gq
                    G[q, r] = s * gp + c * gq
                for r in range(n):
                    gp = G[r, p]
                    gq = G[r, q]
                    G[r, p] = c * gp - s * gq
                    G[r, q] = s * gp + c * gq
                for r in range(n):
                    vp = V[r, p]
                    vq = V[r, q]
                    V[r, p] = c * vp - s * vq
                    V[r, q] = s * vp + c * vq
            sweeps += 1
            if not rotated:
                break
        return sweeps


def jacobi_eigh(C, eps=JACOBI_EPS, max_sweeps=JACOBI_MAX_SWEEPS):
    """Eigendecomposition C = V diag(vals) V^T of a symmetric matrix.

    Returns (vals, V) with eigenvalues ascending and the same deterministic
    column-sign convention as jacobi_svd.
    """
    G = np.ascontiguousarray(C, dtype=np.float64).copy()
    n = G.shape[0]
    V = np.eye(n)
    if USE_NUMBA:
        ps, qs = _flat_schedule(n)
        _twosided_sweeps_numba(G, V, eps, max_sweeps, ps, qs)
    else:
        _twosided_sweeps_numpy(G, V, eps, max_sweeps)
    vals = np.diag(G).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    V = np.ascontiguousarray(V[:, order])
    _fix_right_signs(None, np.empty(0), V)
    return vals, V


# ---------------------------------------------------------------------------
# im2col / col2im.

def conv_out_dims(in_shape, kernel, stride, padding):
    """Output (oh, ow) of a sliding window; raises if the window never fits."""
    _, h, w = in_shape
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    if kh > h + 2 * ph or kw > w + 2 * pw or oh < 1 or ow < 1:
        raise ValueError(
            f"kernel {kernel} does not fit input {in_shape} "
            f"with padding {padding}"
        )
    return oh, ow


def _unfold_numpy(x, kernel, stride, padding):
    c = x.shape[0]
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    oh, ow = win.shape[1], win.shape[2]
    cols = win.transpose(0, 3, 4, 1, 2).reshape(c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols)


if USE_NUMBA:

    @njit(cache=True)
    def _unfold_numba(x, kh, kw, sh, sw, ph, pw, oh, ow):  # pragma: no cover
        c, h, w = x.shape
        cols = np.zeros((c * kh * kw, oh * ow))
        for ch in range(c):
            for ki in range(kh):
                for kj in range(kw):
                    row = (ch * kh + ki) * kw + kj
                    for oi in range(oh):
                        ii = oi * sh + ki - ph
                        if ii < 0 or ii >= h:
                            continue
                        for oj in range(ow):
                            jj = oj * sw + kj - pw
                            if jj < 0 or jj >= w:
                                continue
                            cols[row, oi * ow + oj] = x[ch, ii, jj]
        return cols

    @njit(cache=True)
    def _fold_numba(cols, c, h, w, kh, kw, sh, sw, ph, pw, oh, ow):  # pragma: no cover
        acc = np.zeros((c, h, w))
        cnt = np.zeros((c, h, w))
        for ch in range(c):
            for ki in range(kh):
                for kj in range(kw):
                    row = (ch * kh + ki) * kw + kj
                    for oi in range(oh):
                        ii = oi * sh + ki - ph
                        if ii < 0 or ii >= h:
                            continue
                        for oj in range(ow):
                            jj = oj * sw + kj - pw
                            if jj < 0 or jj >= w:
                                continue
                            acc[ch, ii, jj] += cols[row, oi * ow + oj]
                            cnt[ch, ii, jj] += 1.0
        for ch in range(c):
            for ii in range(h):
                for jj in range(w):
                    if cnt[ch, ii, jj] > 0.0:
                        acc[ch, ii, jj] /= cnt[ch, ii, jj]
        return acc


def _fold_numpy(cols, shape, kernel, stride, padding, oh, ow):
    c, h, w = shape
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    acc = np.zeros(c * h * w)
    cnt = np.zeros(c * h * w)
    ki = np.arange(kh)
    kj = np.arange(kw)
    oi = np.arange(oh)
    oj = np.arange(ow)
    ii = oi[:, None] * sh + ki[None, :] - ph  # (oh, kh)
    jj = oj[:, None] * sw + kj[None, :] - pw  # (ow, kw)
    for ch in range(c):
        rows = (ch * kh + ki[:, None]) * kw + kj[None, :]  # (kh, kw)
        vals = cols[rows.ravel()].reshape(kh, kw, oh, ow)
        src = vals.transpose(2, 0, 3, 1)  # (oh, kh, ow, kw)
        tgt_i = ii[:, :, None, None]
        tgt_j = jj[None, None, :, :]
        ok = (tgt_i >= 0) & (tgt_i < h) & (tgt_j >= 0) & (tgt_j < w)
        flat = (ch * h + tgt_i) * w + tgt_j
        flat = np.broadcast_to(flat, src.shape)[ok]
        np.add.at(acc, flat, src[ok])
        np.add.at(cnt, flat, 1.0)
    out = np.where(cnt > 0, acc / np.maximum(cnt, 1.0), 0.0)
    return out.reshape(c, h, w)


def unfold(x, kernel, stride, padding):
    """Rearrange sliding windows of x (c, h, w) into a column matrix.

    Column p holds the receptive field of output position p (positions
    row-major); rows are channel-major, then kernel-row-major.  Padding is
    zeros.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    oh, ow = conv_out_dims(x.shape, kernel, stride, padding)
    if USE_NUMBA:
        return _unfold_numba(x, kernel[0], kernel[1], stride[0], stride[1],
                             padding[0], padding[1], oh, ow)
    return _unfold_numpy(x, kernel, stride, padding)


def fold_delta(cols, shape, kernel, stride, padding):
    """Least-squares preimage of a column matrix under unfold.

    Scatter-adds every column entry back to its input position and divides
    by the overlap count; positions never covered stay zero and padding
    contributions are dropped.  Exact inverse when stride = kernel.
    """
    cols = np.ascontiguousarray(cols, dtype=np.float64)
    oh, ow = conv_out_dims(shape, kernel, stride, padding)
    c, h, w = shape
    if cols.shape != (c * kernel[0] * kernel[1], oh * ow):
        raise ValueError(
            f"column matrix {cols.shape} inconsistent with geometry "
            f"{(c * kernel[0] * kernel[1], oh * ow)}"
        )
    if USE_NUMBA:
        return _fold_numba(cols, c, h, w, kernel[0], kernel[1], stride[0],
                           stride[1], padding[0], padding[1], oh, ow)
    return _fold_numpy(cols, shape, kernel, stride, padding, oh, ow)
