"""Reference receivers: centralized LMMSE detection and pilot-only estimates."""
import numpy as np

from .metrics import link_nmse, weak_link_mask


def stack_observations(Y):
    """``(..., L, N, T)`` per-AP observations to ``(..., L*N, T)``."""
    Y = np.asarray(Y)
    return Y.reshape(Y.shape[:-3] + (-1, Y.shape[-1]))


def stack_channels(h):
    """``(..., L, K, N)`` per-AP channel vectors to the ``(..., L*N, K)`` matrix."""
    h = np.swapaxes(np.asarray(h), -1, -2)  # (..., L, N, K)
    return h.reshape(h.shape[:-3] + (-1, h.shape[-1]))


def lmmse_filter(Y, H_hat, noise_var, p):
    """Soft estimates ``p H^H (p H H^H + s2 I)^-1 Y``, shape ``(..., K, T)``."""
    Y = np.asarray(Y, complex)
    H = np.asarray(H_hat, complex)
    M = H.shape[-2]
    Hh = np.conj(np.swapaxes(H, -1, -2))
    R = p * (H @ Hh) + noise_var * np.eye(M)
    return p * (Hh @ np.linalg.solve(R, Y))


def nearest_symbol(x, constellation):
    """Index of the closest constellation point for every entry of ``x``."""
    d = np.abs(np.asarray(x)[..., None] - np.asarray(constellation)) ** 2
    return np.argmin(d, axis=-1)


def centralized_lmmse_detect(Y, H_hat, noise_var, p, constellation):
    """Hard decisions of the CPU-side linear MMSE receiver.

    Parameters
    ----------
    Y : ndarray, shape (..., L*N, T)
        Data observations stacked over all APs.
    H_hat : ndarray, shape (..., L*N, K)
        Channel estimates, used as if they were exact.
    noise_var, p : float
        Noise variance and symbol energy.
    constellation : ndarray, shape (S,)

    Returns
    -------
    ndarray, shape (..., K, T)
        Constellation indices.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    return nearest_symbol(lmmse_filter(Y, H_hat, noise_var, p), constellation)


def pilot_only_nmse_reference(priors, H, scenario):
    """Per-link NMSE of the pilot MMSE means against the true channels.

    ``H`` is ``(..., L, N, K)`` over any number of transmissions.  Returns
    the ``(L, K)`` NMSE samples, NaN on links excluded by the weak-link rule.
    """
    h = np.swapaxes(np.asarray(H), -1, -2)
    out = link_nmse(priors.mean, h)
    return np.where(weak_link_mask(scenario), np.nan, out)
