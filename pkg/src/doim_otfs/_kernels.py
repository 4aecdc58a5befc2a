"""Fused message-passing iteration (numba).

Same arithmetic as the numpy step functions in :mod:`doim_otfs.cmp_detector`,
without the ``(E, K)`` temporaries.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _softmax(a, b, out):
    """``out = softmax(a - b)``."""
    m = -np.inf
    for k in range(a.shape[0]):
        out[k] = a[k] - b[k]
        if out[k] > m:
            m = out[k]
    s = 0.0
    for k in range(a.shape[0]):
        out[k] = np.exp(out[k] - m)
        s += out[k]
    for k in range(a.shape[0]):
        out[k] /= s


@njit(cache=True, fastmath=True)
def mp_iteration(y, indptr, cols, h, col_indptr, col_edges, alphabet, noise_var, damping,
                 var_floor, p_edge, log_v, posterior):
    """One flooding iteration, updating ``p_edge``, ``log_v`` and ``posterior`` in place."""
    n = y.shape[0]
    K = alphabet.shape[0]
    E = h.shape[0]
    a2 = np.empty(K)
    for k in range(K):
        a2[k] = alphabet[k].real ** 2 + alphabet[k].imag ** 2
    hm = np.empty(E, dtype=np.complex128)
    ve = np.empty(E)
    lv = np.empty(K)

    for d in range(n):
        mu = 0j
        var = 0.0
        for e in range(indptr[d], indptr[d + 1]):
            m = 0j
            s2 = 0.0
            for k in range(K):
                m += p_edge[e, k] * alphabet[k]
                s2 += p_edge[e, k] * a2[k]
            he = h[e]
            hme = he * m
            h2 = he.real ** 2 + he.imag ** 2
            vee = s2 * h2 - (hme.real ** 2 + hme.imag ** 2)
            hm[e] = hme
            ve[e] = vee
            mu += hme
            var += vee
        for e in range(indptr[d], indptr[d + 1]):
            z = y[d] - (mu - hm[e])
            v = var - ve[e] + noise_var
            if v < var_floor:
                v = var_floor
            # per-edge normalisers cancel downstream, only shift by the max
            m = -np.inf
            for k in range(K):
                diff = z - h[e] * alphabet[k]
                lv[k] = -(diff.real ** 2 + diff.imag ** 2) / v
                if lv[k] > m:
                    m = lv[k]
            for k in range(K):
                log_v[e, k] = lv[k] - m

    tot = np.empty(K)
    for c in range(n):
        for k in range(K):
            tot[k] = 0.0
        for j in range(col_indptr[c], col_indptr[c + 1]):
            e = col_edges[j]
            for k in range(K):
                tot[k] += log_v[e, k]
        for j in range(col_indptr[c], col_indptr[c + 1]):
            e = col_edges[j]
            _softmax(tot, log_v[e], lv)
            for k in range(K):
                p_edge[e, k] = damping * lv[k] + (1.0 - damping) * p_edge[e, k]
        _softmax(tot, np.zeros(K), lv)
        for k in range(K):
            posterior[c, k] = lv[k]
