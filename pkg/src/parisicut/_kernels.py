"""Compiled inner loops shared by the cut and SK solvers.

All kernels work on a symmetric CSR adjacency (no diagonal) with float
weights and the quadratic form Q(sigma) = sum_{i<j} W_ij sigma_i sigma_j.
Flipping spin i changes Q by -2 sigma_i h_i with h_i = sum_j W_ij sigma_j.
Configurations are encoded as integers: bit i set means sigma_i = -1.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _trailing_zeros(k):
    t = 0
    while (k & 1) == 0:
        k >>= 1
        t += 1
    return t


@njit(cache=True)
def _field(indptr, indices, weights, sigma, i):
    h = 0.0
    for p in range(indptr[i], indptr[i + 1]):
        h += weights[p] * sigma[indices[p]]
    return h


@njit(cache=True)
def quadratic_form(indptr, indices, weights, sigma):
    q = 0.0
    for i in range(len(sigma)):
        q += sigma[i] * _field(indptr, indices, weights, sigma, i)
    return 0.5 * q


@njit(cache=True)
def gray_extremes(indptr, indices, weights, n):
    """Extremes of Q over the cube and over zero magnetization, sigma_0 = +1 fixed.

    Walks all 2^(n-1) configurations in Gray-code order.  Returns
    (qmin, code, qmax, code, bal_min, code, bal_max, code); balanced entries
    are +-inf when n is odd.
    """
    sigma = np.ones(n, dtype=np.float64)
    q = quadratic_form(indptr, indices, weights, sigma)
    mag = n
    code = 0
    qmin = q
    qmax = q
    cmin = 0
    cmax = 0
    bmin = np.inf
    bmax = -np.inf
    cbmin = -1
    cbmax = -1
    for k in range(1, 1 << (n - 1)):
        i = _trailing_zeros(k) + 1
        h = _field(indptr, indices, weights, sigma, i)
        q -= 2.0 * sigma[i] * h
        mag -= 2 * int(sigma[i])
        sigma[i] = -sigma[i]
        code ^= 1 << i
        if q < qmin:
            qmin = q
            cmin = code
        if q > qmax:
            qmax = q
            cmax = code
        if mag == 0:
            if q < bmin:
                bmin = q
                cbmin = code
            if q > bmax:
                bmax = q
                cbmax = code
    return qmin, cmin, qmax, cmax, bmin, cbmin, bmax, cbmax


@njit(cache=True)
def gray_all(indptr, indices, weights, n):
    """Q for every code in [0, 2^n) (full cube, no symmetry reduction)."""
    out = np.empty(1 << n, dtype=np.float64)
    sigma = np.ones(n, dtype=np.float64)
    q = quadratic_form(indptr, indices, weights, sigma)
    code = 0
    out[0] = q
    for k in range(1, 1 << n):
        i = _trailing_zeros(k)
        h = _field(indptr, indices, weights, sigma, i)
        q -= 2.0 * sigma[i] * h
        sigma[i] = -sigma[i]
        code ^= 1 << i
        out[code] = q
    return out


@njit(cache=True)
def _pair_weight(indptr, indices, weights, i, j):
    for p in range(indptr[i], indptr[i + 1]):
        if indices[p] == j:
            return weights[p]
    return 0.0


@njit(cache=True)
def anneal(indptr, indices, weights, sigma0, sign, balanced, temps, sweeps, seed):
    """Metropolis annealing of E = sign * Q from ``sigma0``.

    Balanced runs use swap moves (one + and one - spin flip together) and
    keep the magnetization; otherwise single flips.  Returns the best
    configuration seen, its Q, and (proposed, accepted) move counts.
    """
    np.random.seed(seed)
    n = len(sigma0)
    sigma = sigma0.astype(np.float64)
    h = np.empty(n)
    for i in range(n):
        h[i] = _field(indptr, indices, weights, sigma, i)
    q = 0.5 * np.dot(sigma, h)
    best = sigma.copy()
    best_q = q
    # position lists for swap moves
    plus = np.empty(n, dtype=np.int64)
    minus = np.empty(n, dtype=np.int64)
    where = np.empty(n, dtype=np.int64)
    n_plus = 0
    n_minus = 0
    for i in range(n):
        if sigma[i] > 0:
            where[i] = n_plus
            plus[n_plus] = i
            n_plus += 1
        else:
            where[i] = n_minus
            minus[n_minus] = i
            n_minus += 1
    proposed = 0
    accepted = 0
    if balanced and (n_plus == 0 or n_minus == 0):
        return best, best_q, proposed, accepted
    for t in range(len(temps)):
        beta = 1.0 / temps[t]
        for _ in range(sweeps):
            proposed += 1
            if balanced:
                a = plus[np.random.randint(n_plus)]
                b = minus[np.random.randint(n_minus)]
                dq = -2.0 * sigma[a] * h[a] - 2.0 * sigma[b] * h[b] \
                    + 4.0 * sigma[a] * sigma[b] * _pair_weight(indptr, indices, weights, a, b)
            else:
                a = np.random.randint(n)
                b = -1
                dq = -2.0 * sigma[a] * h[a]
            de = sign * dq
            if de > 0.0 and np.random.random() >= np.exp(-beta * de):
                continue
            accepted += 1
            q += dq
            for v in (a, b):
                if v < 0:
                    continue
                s = sigma[v]
                for p in range(indptr[v], indptr[v + 1]):
                    h[indices[p]] -= 2.0 * weights[p] * s
                sigma[v] = -s
            if balanced:
                ia = where[a]
                ib = where[b]
                plus[ia] = b
                minus[ib] = a
                where[a] = ib
                where[b] = ia
            if sign * q < sign * best_q - 1e-9:
                best_q = q
                best[:] = sigma
    return best, best_q, proposed, accepted
