"""Hot numeric kernels, implemented twice.

Each kernel has a vectorized pure-numpy implementation and a numba ``@njit``
implementation with fused loops. In the default ``auto`` mode each kernel
binds to its measured winner (benchmarks/bench_kernels.py): the fused
numba loop for the scatter-bound error-filter kernel, BLAS-backed numpy
for the GEMM-bound ranking and convolution kernels. ``LEXEMBED_NUMBA``
forces one path for everything (see backend module).

Kernels do no validation: callers guarantee float64 C-contiguous parameter
arrays and int64 index arrays. Gradient conventions match the batch-loss
operations that wrap them (sums over the batch, not means).
"""

from __future__ import annotations

import math

import numpy as np

from .backend import KERNEL_MODE, NUMBA_AVAILABLE

if NUMBA_AVAILABLE:
    from numba import njit


# ---------------------------------------------------------------------------
# error-filter ngram regression (sigmoid over a linear filter)
# ---------------------------------------------------------------------------

def _eswe_batch_np(emb, idx, gold, w, b):
    B, n = idx.shape
    d = emb.shape[1]
    vng = emb[idx].reshape(B, n * d)
    z = vng @ w + b
    s = 1.0 / (1.0 + np.exp(-z))
    diff = s - gold
    loss = float(diff @ diff)
    dz = 2.0 * diff * s * (1.0 - s)
    dw = vng.T @ dz
    db = float(dz.sum())
    demb = np.zeros_like(emb)
    np.add.at(demb, idx, np.outer(dz, w).reshape(B, n, d))
    return loss, dw, db, demb


def _make_eswe_batch_nb():
    @njit(cache=True)
    def _eswe_batch_nb(emb, idx, gold, w, b):
        B, n = idx.shape
        d = emb.shape[1]
        dw = np.zeros(n * d)
        demb = np.zeros_like(emb)
        db = 0.0
        loss = 0.0
        for i in range(B):
            z = b
            for j in range(n):
                row = idx[i, j]
                off = j * d
                for t in range(d):
                    z += w[off + t] * emb[row, t]
            s = 1.0 / (1.0 + math.exp(-z))
            diff = s - gold[i]
            loss += diff * diff
            dz = 2.0 * diff * s * (1.0 - s)
            db += dz
            for j in range(n):
                row = idx[i, j]
                off = j * d
                for t in range(d):
                    dw[off + t] += dz * emb[row, t]
                    demb[row, t] += dz * w[off + t]
        return loss, dw, db, demb

    return _eswe_batch_nb


# ---------------------------------------------------------------------------
# ranking + score network (tanh hidden layer, hinge over noisy ngrams)
# ---------------------------------------------------------------------------

def _sswe_batch_np(emb, idx, noisy, gold, Wh, bh, wr, br, ws, bs, alpha):
    B, n = idx.shape
    k = noisy.shape[1]
    d = emb.shape[1]
    nd = n * d
    Vc = emb[idx].reshape(B, nd)
    Vn = emb[noisy.reshape(B * k, n)].reshape(B * k, nd)
    Hc = np.tanh(Vc @ Wh.T + bh)
    Hn = np.tanh(Vn @ Wh.T + bh)
    # the shared rank bias cancels in the pairwise margins, so keep the
    # hinge bias-free: its gradient is identically zero
    rc = Hc @ wr
    rn = (Hn @ wr).reshape(B, k)
    sc = Hc @ ws + bs

    margins = 1.0 - rc[:, None] + rn
    active = margins > 0.0
    diff = sc - gold
    loss = alpha * float(margins[active].sum()) + (1.0 - alpha) * float(diff @ diff)

    drc = -alpha * active.sum(axis=1).astype(np.float64)
    drn = np.where(active, alpha, 0.0).reshape(B * k)
    dsc = (1.0 - alpha) * 2.0 * diff

    dwr = Hc.T @ drc + Hn.T @ drn
    dbr = 0.0
    dws = Hc.T @ dsc
    dbs = float(dsc.sum())

    dAc = (drc[:, None] * wr + dsc[:, None] * ws) * (1.0 - Hc * Hc)
    dAn = (drn[:, None] * wr) * (1.0 - Hn * Hn)
    dWh = dAc.T @ Vc + dAn.T @ Vn
    dbh = dAc.sum(axis=0) + dAn.sum(axis=0)

    demb = np.zeros_like(emb)
    np.add.at(demb, idx, (dAc @ Wh).reshape(B, n, d))
    np.add.at(demb, noisy.reshape(B * k, n), (dAn @ Wh).reshape(B * k, n, d))
    return loss, dWh, dbh, dwr, dbr, dws, dbs, demb


def _make_sswe_batch_nb():
    @njit(cache=True)
    def _sswe_batch_nb(emb, idx, noisy, gold, Wh, bh, wr, br, ws, bs, alpha):
        B, n = idx.shape
        k = noisy.shape[1]
        H, nd = Wh.shape
        d = emb.shape[1]
        loss = 0.0
        dWh = np.zeros((H, nd))
        dbh = np.zeros(H)
        dwr = np.zeros(H)
        dbr = 0.0
        dws = np.zeros(H)
        dbs = 0.0
        demb = np.zeros_like(emb)
        v = np.empty(nd)
        vn = np.empty(nd)
        hc = np.empty(H)
        hq = np.empty(H)
        dv = np.empty(nd)
        for i in range(B):
            for j in range(n):
                row = idx[i, j]
                off = j * d
                for t in range(d):
                    v[off + t] = emb[row, t]
            # bias-free rank responses: the shared rank bias cancels in the
            # pairwise margins and its gradient is identically zero
            rc = 0.0
            sc = bs
            for u in range(H):
                z = bh[u]
                for t in range(nd):
                    z += Wh[u, t] * v[t]
                hu = math.tanh(z)
                hc[u] = hu
                rc += wr[u] * hu
                sc += ws[u] * hu
            diff = sc - gold[i]
            loss += (1.0 - alpha) * diff * diff
            dsc = (1.0 - alpha) * 2.0 * diff
            drc = 0.0
            for q in range(k):
                for j in range(n):
                    row = noisy[i, q, j]
                    off = j * d
                    for t in range(d):
                        vn[off + t] = emb[row, t]
                rq = 0.0
                for u in range(H):
                    z = bh[u]
                    for t in range(nd):
                        z += Wh[u, t] * vn[t]
                    hu = math.tanh(z)
                    hq[u] = hu
                    rq += wr[u] * hu
                if 1.0 - rc + rq > 0.0:
                    loss += alpha * (1.0 - rc + rq)
                    drc -= alpha
                    for t in range(nd):
                        dv[t] = 0.0
                    for u in range(H):
                        dwr[u] += alpha * hq[u]
                        da = alpha * wr[u] * (1.0 - hq[u] * hq[u])
                        dbh[u] += da
                        for t in range(nd):
                            dWh[u, t] += da * vn[t]
                            dv[t] += da * Wh[u, t]
                    for j in range(n):
                        row = noisy[i, q, j]
                        off = j * d
                        for t in range(d):
                            demb[row, t] += dv[off + t]
            dbs += dsc
            for t in range(nd):
                dv[t] = 0.0
            for u in range(H):
                dwr[u] += drc * hc[u]
                dws[u] += dsc * hc[u]
                da = (drc * wr[u] + dsc * ws[u]) * (1.0 - hc[u] * hc[u])
                dbh[u] += da
                for t in range(nd):
                    dWh[u, t] += da * v[t]
                    dv[t] += da * Wh[u, t]
            for j in range(n):
                row = idx[i, j]
                off = j * d
                for t in range(d):
                    demb[row, t] += dv[off + t]
        return loss, dWh, dbh, dwr, dbr, dws, dbs, demb

    return _sswe_batch_nb


# ---------------------------------------------------------------------------
# script convolution (ReLU feature maps, average pooling, linear head)
# ---------------------------------------------------------------------------

def _aa_forward_np(emb, idx, W, b, wreg, breg):
    h, md = W.shape
    d = emb.shape[1]
    m = md // d
    windows = np.lib.stride_tricks.sliding_window_view(idx, m)
    Vw = emb[windows].reshape(-1, md)
    Z = Vw @ W.T + b
    S = np.maximum(Z, 0.0).mean(axis=0)
    pred = float(S @ wreg + breg)
    return pred, S


def _make_aa_forward_nb():
    @njit(cache=True)
    def _aa_forward_nb(emb, idx, W, b, wreg, breg):
        l = idx.shape[0]
        h, md = W.shape
        d = emb.shape[1]
        m = md // d
        L = l - m + 1
        S = np.zeros(h)
        for p in range(L):
            for u in range(h):
                z = b[u]
                for j in range(m):
                    row = idx[p + j]
                    off = j * d
                    for t in range(d):
                        z += W[u, off + t] * emb[row, t]
                if z > 0.0:
                    S[u] += z
        for u in range(h):
            S[u] /= L
        pred = breg
        for u in range(h):
            pred += wreg[u] * S[u]
        return pred, S

    return _aa_forward_nb


def _aa_grads_np(emb, idx, W, b, wreg, breg, gold, dW, db, dwreg, dbreg, demb):
    h, md = W.shape
    d = emb.shape[1]
    m = md // d
    windows = np.lib.stride_tricks.sliding_window_view(idx, m)
    L = windows.shape[0]
    Vw = emb[windows].reshape(L, md)
    Z = Vw @ W.T + b
    M = np.maximum(Z, 0.0)
    S = M.mean(axis=0)
    pred = float(S @ wreg + breg)
    diff = pred - gold
    dpred = 2.0 * diff
    dwreg += dpred * S
    dbreg[0] += dpred
    dZ = np.where(Z > 0.0, dpred / L, 0.0) * wreg
    dW += dZ.T @ Vw
    db += dZ.sum(axis=0)
    np.add.at(demb, windows, (dZ @ W).reshape(L, m, d))
    return diff * diff, pred


def _make_aa_grads_nb():
    @njit(cache=True)
    def _aa_grads_nb(emb, idx, W, b, wreg, breg, gold, dW, db, dwreg, dbreg, demb):
        l = idx.shape[0]
        h, md = W.shape
        d = emb.shape[1]
        m = md // d
        L = l - m + 1
        S = np.zeros(h)
        Z = np.empty((L, h))
        for p in range(L):
            for u in range(h):
                z = b[u]
                for j in range(m):
                    row = idx[p + j]
                    off = j * d
                    for t in range(d):
                        z += W[u, off + t] * emb[row, t]
                Z[p, u] = z
                if z > 0.0:
                    S[u] += z
        for u in range(h):
            S[u] /= L
        pred = breg
        for u in range(h):
            pred += wreg[u] * S[u]
        diff = pred - gold
        dpred = 2.0 * diff
        for u in range(h):
            dwreg[u] += dpred * S[u]
        dbreg[0] += dpred
        for p in range(L):
            for u in range(h):
                if Z[p, u] > 0.0:
                    g = dpred * wreg[u] / L
                    db[u] += g
                    for j in range(m):
                        row = idx[p + j]
                        off = j * d
                        for t in range(d):
                            dW[u, off + t] += g * emb[row, t]
                            demb[row, t] += g * W[u, off + t]
        return diff * diff, pred

    return _aa_grads_nb


_NUMPY_IMPL = {
    "eswe_batch": _eswe_batch_np,
    "sswe_batch": _sswe_batch_np,
    "aa_forward": _aa_forward_np,
    "aa_grads": _aa_grads_np,
}

if NUMBA_AVAILABLE:
    _NUMBA_IMPL = {
        "eswe_batch": _make_eswe_batch_nb(),
        "sswe_batch": _make_sswe_batch_nb(),
        "aa_forward": _make_aa_forward_nb(),
        "aa_grads": _make_aa_grads_nb(),
    }
else:  # pragma: no cover
    _NUMBA_IMPL = {}

IMPLEMENTATIONS = {"numpy": _NUMPY_IMPL, "numba": _NUMBA_IMPL}

# measured on desk-scale shapes; gather/scatter-bound work favors the fused
# loops, GEMM-bound work favors BLAS through numpy
_AUTO_CHOICE = {
    "eswe_batch": "numba",
    "sswe_batch": "numpy",
    "aa_forward": "numpy",
    "aa_grads": "numpy",
}


def _bind(name: str):
    if KERNEL_MODE == "numba":
        return _NUMBA_IMPL[name]
    if KERNEL_MODE == "numpy":
        return _NUMPY_IMPL[name]
    return IMPLEMENTATIONS[_AUTO_CHOICE[name]][name]


def active_backends() -> dict[str, str]:
    """Which implementation each kernel is bound to in this process."""
    if KERNEL_MODE in ("numba", "numpy"):
        return {name: KERNEL_MODE for name in _NUMPY_IMPL}
    return dict(_AUTO_CHOICE)


eswe_batch = _bind("eswe_batch")
sswe_batch = _bind("sswe_batch")
aa_forward = _bind("aa_forward")
aa_grads = _bind("aa_grads")
