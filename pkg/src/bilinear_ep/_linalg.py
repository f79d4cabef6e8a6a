"""Batched small Hermitian matrix helpers.

Everything operates on stacks of ``N x N`` matrices with arbitrary leading
axes.  The ``N == 1`` case is routed to plain elementwise arithmetic, which
matters because the single-antenna setting is by far the most common one
and numpy's gufuncs carry a large per-matrix overhead.
"""
import numpy as np


def hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def herm_t(a):
    return np.conj(np.swapaxes(a, -1, -2))


def inv(a):
    if a.shape[-1] == 1:
        return 1.0 / a
    return np.linalg.inv(a)


def matmul(a, b):
    if a.shape[-1] == 1:
        return a * b
    return a @ b


def matvec(a, v):
    if a.shape[-1] == 1:
        return a[..., 0] * v
    return np.einsum("...ij,...j->...i", a, v)


def outer(u, v):
    """u v^H for stacks of vectors."""
    return u[..., :, None] * np.conj(v[..., None, :])


def quad(v, a):
    """Real part of v^H a v."""
    return np.real(np.sum(np.conj(v) * matvec(a, v), axis=-1))


def vdot(u, v):
    return np.sum(np.conj(u) * v, axis=-1)


def trace(a):
    return np.real(np.trace(a, axis1=-2, axis2=-1))


def eye_like(a):
    n = a.shape[-1]
    return np.broadcast_to(np.eye(n, dtype=a.dtype), a.shape)


def logdet_pd(a):
    """log det of Hermitian positive definite matrices."""
    if a.shape[-1] == 1:
        return np.log(np.real(a[..., 0, 0]))
    c = np.linalg.cholesky(hermitize(a))
    return 2.0 * np.sum(np.log(np.real(np.diagonal(c, axis1=-2, axis2=-1))), axis=-1)


def min_eig(a):
    if a.shape[-1] == 1:
        return np.real(a[..., 0, 0])
    return np.linalg.eigvalsh(hermitize(a))[..., 0]


def floor_eigenvalues(a, floor):
    """Raise every eigenvalue of ``a`` below ``floor`` (broadcast) to ``floor``.

    Returns the repaired stack and a boolean mask of matrices that changed.
    """
    floor = np.asarray(floor, dtype=float)
    if a.shape[-1] == 1:
        d = np.real(a[..., 0, 0])
        hit = d < floor
        out = np.where(hit[..., None, None], floor[..., None, None] + 0j, a)
        return out, hit
    w, v = np.linalg.eigh(hermitize(a))
    hit = np.any(w < floor[..., None], axis=-1)
    if not np.any(hit):
        return a, hit
    w = np.maximum(w, floor[..., None])
    rebuilt = (v * w[..., None, :]) @ herm_t(v)
    return np.where(hit[..., None, None], rebuilt, a), hit


def clip_and_project(prec, shift, rtol=1e-13):
    """Zero the negative eigenvalues of ``prec``; project ``shift`` onto its range.

    Matrices with no negative eigenvalue are returned bit-for-bit unchanged.
    Returns ``(prec, shift, clipped_mask)``.
    """
    if prec.shape[-1] == 1:
        d = np.real(prec[..., 0, 0])
        keep = d > 0
        clipped = d < 0
        prec = np.where(keep[..., None, None], prec, 0.0)
        shift = np.where(keep[..., None], shift, 0.0)
        return prec, shift, clipped
    w, v = np.linalg.eigh(hermitize(prec))
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    keep = w > rtol * scale
    clipped = np.any(w < 0, axis=-1)
    # singular but PSD inputs still need their shift projected
    touched = np.any(~keep, axis=-1)
    if not np.any(touched):
        return prec, shift, clipped
    wp = np.where(keep, w, 0.0)
    rebuilt = (v * wp[..., None, :]) @ herm_t(v)
    vk = v * keep[..., None, :]
    projected = matvec(vk @ herm_t(v), shift)
    prec = np.where(clipped[..., None, None], rebuilt, prec)
    prec = np.where(touched[..., None, None], hermitize(prec), prec)
    shift = np.where(touched[..., None], projected, shift)
    return prec, shift, clipped


def sum_except(a, axis):
    """For every index i along ``axis``, the sum over all other indices.

    Uses prefix and suffix sums, so no cancellation occurs.
    """
    a = np.moveaxis(a, axis, 0)
    n = a.shape[0]
    out = np.zeros_like(a)
    if n > 1:
        prefix = np.cumsum(a[:-1], axis=0)
        suffix = np.cumsum(a[:0:-1], axis=0)[::-1]
        out[1:] += prefix
        out[:-1] += suffix
    return np.moveaxis(out, 0, axis)
