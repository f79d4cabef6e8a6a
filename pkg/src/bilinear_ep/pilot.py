"""Pilot-based Bayesian MMSE channel estimation.

The posterior ``CN(mu_lk, C_lk)`` of every AP-UE channel becomes the
constant prior message on ``h_lk`` used by the EP engine.
"""
from dataclasses import dataclass

import numpy as np

from . import _linalg as la


@dataclass
class ChannelPrior:
    mean: np.ndarray  # (..., L, K, N)
    cov: np.ndarray   # (..., L, K, N, N)

    @property
    def shape(self):
        return self.mean.shape[-3:-1]


def _vec(Y):
    """Column-stacking vec over the last two axes."""
    return np.swapaxes(Y, -1, -2).reshape(Y.shape[:-2] + (-1,))


def _block_diag_mask(K, N):
    return np.kron(np.eye(K), np.ones((N, N))).astype(bool)


def mmse_estimate(Yp_l, Xp, Xi_l, noise_var):
    """Dense Bayesian MMSE estimate of ``vec(H_l)`` from pilot observations.

    Parameters
    ----------
    Yp_l : ndarray, shape (..., N, P)
        Received pilot block at one AP.
    Xp : ndarray, shape (K, P)
    Xi_l : ndarray, shape (NK, NK)
        Prior covariance of ``vec(H_l)``; must be positive definite.
    noise_var : float

    Returns
    -------
    mean : ndarray, shape (..., K, N)
    cov : ndarray, shape (K, N, N)
        Per-user diagonal blocks of the posterior covariance.
    """
    Yp_l = np.asarray(Yp_l, complex)
    Xp = np.asarray(Xp, complex)
    N = Yp_l.shape[-2]
    K = Xp.shape[0]
    Xi_l = np.asarray(Xi_l, complex)
    try:
        np.linalg.cholesky(la.hermitize(Xi_l))
    except np.linalg.LinAlgError as exc:
        raise ValueError("prior channel covariance must be positive definite") from exc
    A = np.kron(Xp.T, np.eye(N))
    info = np.linalg.inv(Xi_l) + (A.conj().T @ A) / noise_var
    C = la.hermitize(np.linalg.inv(info))
    rhs = np.einsum("ij,...j->...i", A.conj().T, _vec(Yp_l)) / noise_var
    mu = np.einsum("ij,...j->...i", C, rhs)
    mean = mu.reshape(mu.shape[:-1] + (K, N))
    cov = np.stack([C[k * N:(k + 1) * N, k * N:(k + 1) * N] for k in range(K)])
    return mean, cov


def orthogonal_fast_path(Yp_l, Xp, Xi_l, noise_var):
    """Per-user estimate valid when ``Xp Xp^H`` is diagonal.

    ``Xi_l`` may be given as the full ``NK x NK`` matrix or as ``(K, N, N)``
    blocks.  Falls back to :func:`mmse_estimate` for non-orthogonal pilots.
    """
    Yp_l = np.asarray(Yp_l, complex)
    Xp = np.asarray(Xp, complex)
    N = Yp_l.shape[-2]
    K = Xp.shape[0]
    Xi_l = np.asarray(Xi_l, complex)
    if Xi_l.ndim == 2:
        blocks = np.stack([Xi_l[k * N:(k + 1) * N, k * N:(k + 1) * N] for k in range(K)])
        full = Xi_l
    else:
        blocks = Xi_l
        full = None
    gram = Xp @ Xp.conj().T
    offdiag = gram - np.diag(np.diag(gram))
    if np.any(np.abs(offdiag) > 1e-12 * np.max(np.abs(gram))) or (
            full is not None and np.any(full[~_block_diag_mask(K, N)])):
        if full is None:
            full = np.zeros((N * K, N * K), complex)
            for k in range(K):
                full[k * N:(k + 1) * N, k * N:(k + 1) * N] = blocks[k]
        return mmse_estimate(Yp_l, Xp, full, noise_var)
    energy = np.real(np.diag(gram))
    if N == 1:
        beta = np.real(blocks[:, 0, 0])
        c = 1.0 / (1.0 / beta + energy / noise_var)
        cov = c[:, None, None] + 0j
        corr = Yp_l[..., 0, :] @ Xp.conj().T  # (..., K)
        mean = (c * corr / noise_var)[..., None]
        return mean, cov
    info = np.linalg.inv(blocks) + (energy / noise_var)[:, None, None] * np.eye(N)
    cov = la.hermitize(np.linalg.inv(info))
    corr = np.einsum("...np,kp->...kn", Yp_l, Xp.conj())
    mean = np.einsum("kij,...kj->...ki", cov, corr) / noise_var
    return mean, cov


def estimate_channels(scenario, Yp):
    """Pilot MMSE priors for every AP; ``Yp`` has shape ``(..., L, N, P)``."""
    means, covs = [], []
    for l in range(scenario.L):
        m, c = orthogonal_fast_path(Yp[..., l, :, :], scenario.pilot_matrix,
                                    scenario.channel_cov[l], scenario.noise_var)
        means.append(m)
        covs.append(c)
    return ChannelPrior(np.stack(means, axis=-3), np.stack(covs, axis=0))
