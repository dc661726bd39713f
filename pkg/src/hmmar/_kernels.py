"""Compiled scaled forward/backward recursions.

``logd[t, h]`` is the log emission density of modeled observation ``t``
under regime ``h``.  Densities are shifted by their per-step maximum before
exponentiation; the shift is folded back into the log-likelihood.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def forward(logd, P, rho):
    T, K = logd.shape
    filt = np.empty((T, K))
    dens = np.empty((T, K))
    scale = np.empty(T)
    pred = rho.copy()
    ll = 0.0
    for t in range(T):
        m = logd[t, 0]
        for h in range(1, K):
            if logd[t, h] > m:
                m = logd[t, h]
        c = 0.0
        for h in range(K):
            dens[t, h] = math.exp(logd[t, h] - m)
            filt[t, h] = pred[h] * dens[t, h]
            c += filt[t, h]
        scale[t] = c
        if not c > 0.0:
            return filt, dens, scale, -np.inf, t
        for h in range(K):
            filt[t, h] /= c
        ll += m + math.log(c)
        for j in range(K):
            s = 0.0
            for i in range(K):
                s += filt[t, i] * P[i, j]
            pred[j] = s
    return filt, dens, scale, ll, -1


@njit(cache=True, nogil=True)
def backward(dens, scale, P):
    T, K = dens.shape
    beta = np.empty((T, K))
    for h in range(K):
        beta[T - 1, h] = 1.0
    tmp = np.empty(K)
    for t in range(T - 2, -1, -1):
        for j in range(K):
            tmp[j] = dens[t + 1, j] * beta[t + 1, j]
        for i in range(K):
            s = 0.0
            for j in range(K):
                s += P[i, j] * tmp[j]
            beta[t, i] = s / scale[t + 1]
    return beta
