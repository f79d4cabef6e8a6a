"""Performance metrics and the weak-link rule used for channel-estimation CDFs."""
import numpy as np


def ser(decisions, truth):
    """Fraction of symbol decisions that differ from the transmitted ones."""
    decisions, truth = np.asarray(decisions), np.asarray(truth)
    if decisions.shape != truth.shape:
        raise ValueError(f"shape mismatch: {decisions.shape} vs {truth.shape}")
    if decisions.size == 0:
        raise ValueError("cannot compute SER of an empty set")
    return float(np.mean(decisions != truth))


def nmse(h_hat, h, axis=None):
    """``||h_hat - h||^2 / ||h||^2``; NaN where the truth is zero."""
    err = np.sum(np.abs(np.asarray(h_hat) - np.asarray(h)) ** 2, axis=axis)
    ref = np.sum(np.abs(np.asarray(h)) ** 2, axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ref > 0, err / np.where(ref > 0, ref, 1.0), np.nan)


def link_nmse(h_hat, h):
    """Per-link NMSE over a set of transmissions, ``(..., L, K, N)`` to ``(L, K)``.

    Squared errors and channel powers are summed over all transmissions
    before dividing.  The mean of per-transmission ratios is not used: for
    Rayleigh links ``E[1/|h|^2]`` is infinite, so that average never settles.
    """
    err, ref = link_error_power(h_hat, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ref > 0, err / np.where(ref > 0, ref, 1.0), np.nan)


def link_error_power(h_hat, h):
    """Summed ``||h_hat - h||^2`` and ``||h||^2`` per link, each ``(L, K)``."""
    h_hat, h = np.asarray(h_hat), np.asarray(h)
    lead = tuple(range(h.ndim - 3))
    err = np.sum(np.abs(h_hat - h) ** 2, axis=lead + (h.ndim - 1,))
    ref = np.sum(np.abs(h) ** 2, axis=lead + (h.ndim - 1,))
    return err, ref


def weak_link_mask(scenario):
    """``(L, K)`` mask of links whose mean received power is below the noise."""
    return scenario.tx_power * scenario.gains < scenario.noise_var


def weak_link_filter(scenario, l, k):
    """True if link ``(l, k)`` is excluded from channel-estimation statistics."""
    return bool(weak_link_mask(scenario)[l, k])


def empirical_cdf(samples):
    """Right-continuous empirical CDF as ``(values, fractions)`` arrays.

    Duplicated values appear once, carrying the fraction of samples ``<=`` them.
    """
    x = np.sort(np.asarray(samples, float).ravel())
    if x.size == 0:
        raise ValueError("need at least one sample")
    values, counts = np.unique(x, return_counts=True)
    return values, np.cumsum(counts) / x.size
