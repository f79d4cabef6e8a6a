"""Compiled loops for the hot paths of the EP engine.

The categorical kernels work for any antenna count.  The Gaussian phase
kernels cover the single-antenna (N = 1) case and follow the same update
rules as the vectorized numpy path in :mod:`bilinear_ep.jcd`, written as
scalar loops so that no per-symbol temporaries are allocated.  Their inputs
are flattened to ``(M, L, K, T)`` with precisions as real arrays.
"""
import math

import numpy as np
from numba import njit

from .gaussian import EPS_CAT, EPS_PD_REL


@njit(cache=True, nogil=True)
def _normalize(logw, out, floor):
    S = logw.shape[0]
    top = -np.inf
    for s in range(S):
        if logw[s] > top:
            top = logw[s]
    if not np.isfinite(top):
        for s in range(S):
            out[s] = 1.0 / S
        return 1
    tot = 0.0
    for s in range(S):
        out[s] = math.exp(logw[s] - top)
        tot += out[s]
    for s in range(S):
        out[s] /= tot
    if floor > 0:
        tot = 0.0
        for s in range(S):
            if out[s] < floor:
                out[s] = floor
            tot += out[s]
        for s in range(S):
            out[s] /= tot
    return 0


@njit(cache=True, nogil=True)
def _normalize_weighted(logw, prior, out):
    """Normalize ``prior * exp(logw)`` without taking logs of the prior."""
    S = logw.shape[0]
    top = -np.inf
    for s in range(S):
        if prior[s] > 0 and logw[s] > top:
            top = logw[s]
    if not np.isfinite(top):
        for s in range(S):
            out[s] = 1.0 / S
        return 1
    tot = 0.0
    for s in range(S):
        out[s] = prior[s] * math.exp(logw[s] - top) if prior[s] > 0 else 0.0
        tot += out[s]
    for s in range(S):
        out[s] /= tot
    return 0


@njit(cache=True, nogil=True)
def _exclusive(a, out):
    """out[i] = sum_{j != i} a[j] along the single axis."""
    n = a.shape[0]
    acc = 0.0 * a[0]
    for i in range(n):
        out[i] = acc
        acc += a[i]
    acc = 0.0 * a[0]
    for i in range(n - 1, -1, -1):
        out[i] += acc
        acc += a[i]


@njit(cache=True, nogil=True)
def aggregate_rows(x1):
    """Normalized product over axis 1 of ``(M, L, S)`` PMFs, no floor."""
    M, L, S = x1.shape
    out = np.empty((M, S))
    logw = np.empty(S)
    for m in range(M):
        for s in range(S):
            acc = 0.0
            for l in range(L):
                acc += np.log(x1[m, l, s])
            logw[s] = acc
        _normalize(logw, out[m], 0.0)
    return out


@njit(cache=True, nogil=True)
def extrinsic_rows(total, own, prior, floor):
    """Rows of ``total / max(own, floor) * prior``, normalized and floored."""
    M, S = total.shape
    out = np.empty((M, S))
    logw = np.empty(S)
    under = 0
    for m in range(M):
        for s in range(S):
            logw[s] = (np.log(total[m, s]) - np.log(max(own[m, s], floor))
                       + np.log(prior[m, s]))
        under += _normalize(logw, out[m], floor)
    return out, under


@njit(cache=True, nogil=True)
def _h_cavity(prior_p, prior_s, h1p, h1s, hp, hs):
    _exclusive(h1p, hp)
    _exclusive(h1s, hs)
    for t in range(hp.shape[0]):
        hp[t] += prior_p
        hs[t] += prior_s


@njit(cache=True, nogil=True)
def psi1_update(mode, zp, zs, prior_p, prior_s, h1p, h1s, mx, x, eta,
                old_p, old_s):
    """Psi1->z (mode 0) or Psi1->h (mode 1) update, damped.

    Returns new precision/shift arrays and ``(clips, degenerate, underflow)``.
    """
    M, L, K, T = zp.shape
    S = x.shape[0]
    amps = np.abs(x) ** 2
    xc = np.conj(x)
    out_p = np.empty_like(old_p)
    out_s = np.empty_like(old_s)
    hp = np.empty(T)
    hs = np.empty(T, dtype=np.complex128)
    logw = np.empty(S)
    w = np.empty(S)
    mu = np.empty(S, dtype=np.complex128)
    q = np.empty(S)
    clips = 0
    degen = 0
    under = 0
    for m in range(M):
        for l in range(L):
            for k in range(K):
                _h_cavity(prior_p[m, l, k], prior_s[m, l, k], h1p[m, l, k], h1s[m, l, k], hp, hs)
                for t in range(T):
                    a_p = zp[m, l, k, t]
                    a_s = zs[m, l, k, t]
                    iq = 0.0
                    lq = 0.0
                    for s in range(S):
                        if s > 0 and amps[s] == amps[s - 1]:
                            q[s] = q[s - 1]
                        else:
                            q[s] = hp[t] + amps[s] * a_p
                            iq = 1.0 / q[s]
                            lq = math.log(q[s])
                        c = hs[t] + xc[s] * a_s
                        mu[s] = c * iq
                        logw[s] = (c.real * c.real + c.imag * c.imag) * iq - lq
                    under += _normalize_weighted(logw, mx[m, l, k, t], w)
                    mean = 0j
                    if mode == 0:
                        for s in range(S):
                            mean += w[s] * x[s] * mu[s]
                        var = 0.0
                        for s in range(S):
                            d = x[s] * mu[s] - mean
                            var += w[s] * (amps[s] / q[s] + d.real * d.real + d.imag * d.imag)
                        cav_p, cav_s = a_p, a_s
                    else:
                        for s in range(S):
                            mean += w[s] * mu[s]
                        var = 0.0
                        for s in range(S):
                            d = mu[s] - mean
                            var += w[s] * (1.0 / q[s] + d.real * d.real + d.imag * d.imag)
                        cav_p, cav_s = hp[t], hs[t]
                    if var < EPS_PD_REL * var:
                        degen += 1
                    prec = 1.0 / var
                    new_p = prec - cav_p
                    new_s = prec * mean - cav_s
                    if new_p <= 0.0:
                        if new_p < 0.0:
                            clips += 1
                        new_p = 0.0
                        new_s = 0j
                    out_p[m, l, k, t] = eta * new_p + (1.0 - eta) * old_p[m, l, k, t]
                    out_s[m, l, k, t] = eta * new_s + (1.0 - eta) * old_s[m, l, k, t]
    return out_p, out_s, clips, degen, under


@njit(cache=True, nogil=True)
def psi1_to_x(zp, zs, prior_p, prior_s, h1p, h1s, x, eta, old):
    M, L, K, T = zp.shape
    S = x.shape[0]
    amps = np.abs(x) ** 2
    xc = np.conj(x)
    out = np.empty_like(old)
    hp = np.empty(T)
    hs = np.empty(T, dtype=np.complex128)
    logw = np.empty(S)
    w = np.empty(S)
    under = 0
    for m in range(M):
        for l in range(L):
            for k in range(K):
                _h_cavity(prior_p[m, l, k], prior_s[m, l, k], h1p[m, l, k], h1s[m, l, k], hp, hs)
                for t in range(T):
                    for s in range(S):
                        q = hp[t] + amps[s] * zp[m, l, k, t]
                        c = hs[t] + xc[s] * zs[m, l, k, t]
                        logw[s] = (c.real * c.real + c.imag * c.imag) / q - math.log(q)
                    under += _normalize(logw, w, EPS_CAT)
                    tot = 0.0
                    for s in range(S):
                        v = eta * w[s] + (1.0 - eta) * old[m, l, k, t, s]
                        out[m, l, k, t, s] = v
                        tot += v
                    for s in range(S):
                        out[m, l, k, t, s] /= tot
    return out, under


@njit(cache=True, nogil=True)
def psi0_to_z(z1p, z1s, y, noise_var, eta, old_p, old_s):
    M, L, K, T = z1p.shape
    out_p = np.empty_like(old_p)
    out_s = np.empty_like(old_s)
    cov = np.empty(K)
    mean = np.empty(K, dtype=np.complex128)
    bad = np.empty(K)
    ex_cov = np.empty(K)
    ex_mean = np.empty(K, dtype=np.complex128)
    ex_bad = np.empty(K)
    unbounded = 0
    for m in range(M):
        for l in range(L):
            for t in range(T):
                for k in range(K):
                    p = z1p[m, l, k, t]
                    if p > 0.0:
                        cov[k] = 1.0 / p
                        mean[k] = cov[k] * z1s[m, l, k, t]
                        bad[k] = 0.0
                    else:
                        cov[k] = 0.0
                        mean[k] = 0j
                        bad[k] = 1.0
                _exclusive(cov, ex_cov)
                _exclusive(mean, ex_mean)
                _exclusive(bad, ex_bad)
                for k in range(K):
                    if ex_bad[k] > 0:
                        unbounded += 1
                        new_p = 0.0
                        new_s = 0j
                    else:
                        new_p = 1.0 / (noise_var + ex_cov[k])
                        new_s = new_p * (y[m, l, t] - ex_mean[k])
                    out_p[m, l, k, t] = eta * new_p + (1.0 - eta) * old_p[m, l, k, t]
                    out_s[m, l, k, t] = eta * new_s + (1.0 - eta) * old_s[m, l, k, t]
    return out_p, out_s, unbounded
