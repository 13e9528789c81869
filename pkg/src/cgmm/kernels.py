"""Hot loops of a deep layer: E-step, sufficient statistics, log-likelihood, argmax.

Every kernel works on the sparse neighbor-frequency layout built by
:func:`cgmm.layer.neighbor_frequency`: entries ``ptr[u]:ptr[u+1]`` belong to
vertex ``u`` and carry ``(pred, arc, state, weight)``, i.e. the predecessor
slot, 0-based arc label, neighbor state (the empty-neighborhood symbol is
the last state of that predecessor) and empirical frequency. Only nonzero
frequencies are stored, so an E-step costs ``O(nnz * C)``.

Two implementations exist for each kernel: explicit loops compiled with
numba, and vectorized numpy. ``BACKEND`` names the one the public names
dispatch to. Reductions over vertices are done sequentially in vertex order
so results do not depend on the thread count.
"""

import numpy as np

from ._backend import HAS_NUMBA, njit

if HAS_NUMBA:
    from numba import prange
else:
    prange = range

BACKEND = "numba" if HAS_NUMBA else "numpy"


# --------------------------------------------------------------------------
# loop implementations (compiled by numba)
# --------------------------------------------------------------------------

def _estep_loops(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans):
    n = ptr.shape[0] - 1
    C = emission.shape[0]
    resp = np.zeros((pred.shape[0], C))
    logz = np.empty(n)
    for u in prange(n):
        z = 0.0
        yu = y[u]
        for e in range(ptr[u], ptr[u + 1]):
            p = pred[e]
            a = arc[e]
            j = state[e]
            c = weight[e] * layer_w[p] * arc_w[p, a]
            for i in range(C):
                v = c * emission[i, yu] * trans[p, a, i, j]
                resp[e, i] = v
                z += v
        if z > 0.0:
            logz[u] = np.log(z)
            for e in range(ptr[u], ptr[u + 1]):
                for i in range(C):
                    resp[e, i] /= z
        else:
            logz[u] = -np.inf
    return resp, logz


def _loglik_loops(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans):
    n = ptr.shape[0] - 1
    C = emission.shape[0]
    logz = np.empty(n)
    for u in prange(n):
        z = 0.0
        yu = y[u]
        for e in range(ptr[u], ptr[u + 1]):
            p = pred[e]
            a = arc[e]
            j = state[e]
            c = weight[e] * layer_w[p] * arc_w[p, a]
            for i in range(C):
                z += c * emission[i, yu] * trans[p, a, i, j]
        logz[u] = np.log(z) if z > 0.0 else -np.inf
    return logz


def _accumulate_loops(ptr, y, pred, arc, state, resp, n_symbols, n_pred, n_arcs, n_cols):
    n = ptr.shape[0] - 1
    C = resp.shape[1]
    emis = np.zeros((C, n_symbols))
    lw = np.zeros(n_pred)
    aw = np.zeros((n_pred, n_arcs))
    tr = np.zeros((n_pred, n_arcs, C, n_cols))
    for u in range(n):
        yu = y[u]
        for e in range(ptr[u], ptr[u + 1]):
            p = pred[e]
            a = arc[e]
            j = state[e]
            s = 0.0
            for i in range(C):
                r = resp[e, i]
                emis[i, yu] += r
                tr[p, a, i, j] += r
                s += r
            lw[p] += s
            aw[p, a] += s
    return emis, lw, aw, tr


def _infer_loops(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans):
    n = ptr.shape[0] - 1
    C = emission.shape[0]
    out = np.empty(n, dtype=np.int64)
    for u in prange(n):
        acc = np.zeros(C)
        for e in range(ptr[u], ptr[u + 1]):
            p = pred[e]
            a = arc[e]
            j = state[e]
            c = weight[e] * layer_w[p] * arc_w[p, a]
            for i in range(C):
                acc[i] += c * trans[p, a, i, j]
        best = 0
        best_score = emission[0, y[u]] * acc[0]
        for i in range(1, C):
            score = emission[i, y[u]] * acc[i]
            if score > best_score:
                best = i
                best_score = score
        out[u] = best
    return out


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def _entry_vertex(ptr):
    return np.repeat(np.arange(ptr.shape[0] - 1), np.diff(ptr))


def _unnormalized(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans):
    vert = _entry_vertex(ptr)
    coef = weight * layer_w[pred] * arc_w[pred, arc]
    return vert, coef[:, None] * emission[:, y[vert]].T * trans[pred, arc, :, state]


def _estep_numpy(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans):
    n = ptr.shape[0] - 1
    vert, unn = _unnormalized(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans)
    z = np.bincount(vert, weights=unn.sum(axis=1), minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        logz = np.log(z)
        scale = np.where(z > 0, 1.0 / z, 0.0)
    resp = unn * scale[vert][:, None]
    return resp, logz


def _loglik_numpy(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans):
    n = ptr.shape[0] - 1
    vert, unn = _unnormalized(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans)
    z = np.bincount(vert, weights=unn.sum(axis=1), minlength=n)
    with np.errstate(divide="ignore"):
        return np.log(z)


def _accumulate_numpy(ptr, y, pred, arc, state, resp, n_symbols, n_pred, n_arcs, n_cols):
    C = resp.shape[1]
    vert = _entry_vertex(ptr)
    yv = y[vert]
    emis = np.stack([np.bincount(yv, weights=resp[:, i], minlength=n_symbols) for i in range(C)])
    rs = resp.sum(axis=1)
    aw = np.bincount(pred * n_arcs + arc, weights=rs, minlength=n_pred * n_arcs).reshape(n_pred, n_arcs)
    lw = np.bincount(pred, weights=rs, minlength=n_pred).astype(np.float64)
    flat = ((pred * n_arcs + arc)[:, None] * C + np.arange(C)[None, :]) * n_cols + state[:, None]
    tr = np.bincount(flat.ravel(), weights=resp.ravel(), minlength=n_pred * n_arcs * C * n_cols)
    return emis.reshape(C, n_symbols), lw, aw, tr.reshape(n_pred, n_arcs, C, n_cols)


def _infer_numpy(ptr, y, pred, arc, state, weight, emission, layer_w, arc_w, trans):
    n = ptr.shape[0] - 1
    C = emission.shape[0]
    vert = _entry_vertex(ptr)
    contrib = (weight * layer_w[pred] * arc_w[pred, arc])[:, None] * trans[pred, arc, :, state]
    acc = np.stack([np.bincount(vert, weights=contrib[:, i], minlength=n) for i in range(C)], axis=1)
    scores = emission[:, y].T * acc.reshape(n, C)
    return np.argmax(scores, axis=1).astype(np.int64)


NUMPY_KERNELS = dict(
    estep=_estep_numpy,
    loglik=_loglik_numpy,
    accumulate=_accumulate_numpy,
    infer=_infer_numpy,
)

if HAS_NUMBA:
    NUMBA_KERNELS = dict(
        estep=njit(parallel=True)(_estep_loops),
        loglik=njit(parallel=True)(_loglik_loops),
        accumulate=njit()(_accumulate_loops),
        infer=njit(parallel=True)(_infer_loops),
    )
    _ACTIVE = NUMBA_KERNELS
else:
    NUMBA_KERNELS = None
    _ACTIVE = NUMPY_KERNELS

estep = _ACTIVE["estep"]
loglik = _ACTIVE["loglik"]
accumulate = _ACTIVE["accumulate"]
infer = _ACTIVE["infer"]
