"""Message algebra for complex Gaussian and categorical messages.

Gaussian messages are stored in precision form ``(Lambda, gamma)`` with
``gamma = Lambda @ mu``.  The all-zero pair is the exact uninformative
message, so messages with unbounded covariance need no special casing when
multiplied or divided.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _linalg as la

EPS_CAT = 1e-30
EPS_PD_REL = 1e-12
HERMITIAN_RTOL = 1e-10


class UnboundedCovarianceError(ValueError):
    """Raised when a covariance is requested from a singular precision."""


class SingularCovarianceError(ValueError):
    """Raised when a density is evaluated with a singular covariance."""


@dataclass
class Diagnostics:
    """Counters for numerical repair events; never abort a run."""

    psd_clips: int = 0
    degenerate_cov: int = 0
    categorical_underflow: int = 0
    unbounded_interference: int = 0

    def merge(self, other):
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self


def _check_hermitian(m, what="matrix"):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"{what} must be square, got shape {m.shape}")
    scale = max(np.linalg.norm(m), 1e-300)
    if np.linalg.norm(m - la.herm_t(m)) > HERMITIAN_RTOL * scale:
        raise ValueError(f"{what} is not Hermitian")


@dataclass(frozen=True)
class GaussianMessage:
    """Circularly-symmetric complex Gaussian in precision form."""

    precision: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        prec = np.asarray(self.precision, dtype=complex)
        shift = np.asarray(self.shift, dtype=complex)
        if prec.ndim != 2 or prec.shape != (shift.size, shift.size):
            raise ValueError(
                f"precision {prec.shape} does not match shift {shift.shape}")
        object.__setattr__(self, "precision", prec)
        object.__setattr__(self, "shift", shift.reshape(-1))

    @property
    def dim(self):
        return self.shift.size

    @classmethod
    def uninformative(cls, dim):
        return cls(np.zeros((dim, dim), complex), np.zeros(dim, complex))

    @classmethod
    def from_moments(cls, mean, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=complex))
        prec = np.linalg.inv(cov)
        prec = la.hermitize(prec)
        return cls(prec, prec @ np.atleast_1d(np.asarray(mean, dtype=complex)))

    def is_uninformative(self):
        return not np.any(self.precision) and not np.any(self.shift)

    def mean_cov(self):
        return mean_cov(self)


@dataclass(frozen=True)
class CategoricalMessage:
    """Normalized PMF over an ordered finite support."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=complex).reshape(-1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if support.shape != weights.shape:
            raise ValueError("support and weights differ in length")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, support):
        support = np.asarray(support, dtype=complex).reshape(-1)
        ones = np.ones(support.size)
        return cls(support, ones / ones.sum())

    def argmax(self):
        return int(np.argmax(self.weights))


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray = field(default=None)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=complex))
        cov = self.cov
        if cov is None:
            cov = np.zeros((mean.size, mean.size), complex)
        cov = np.atleast_2d(np.asarray(cov, dtype=complex))
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ValueError("mixture weight must be finite and nonnegative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


# -- Gaussian operations ----------------------------------------------------

def _same_dim(a, b):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def multiply(a, b):
    """Product of two Gaussian messages (precisions and shifts add)."""
    _same_dim(a, b)
    return GaussianMessage(a.precision + b.precision, a.shift + b.shift)


def divide(num, den, diagnostics=None):
    """Quotient ``num / den`` with negative eigenvalues of the precision zeroed.

    The shift is projected onto the range of the repaired precision so that
    the mean stays finite on the informative subspace.
    """
    _same_dim(num, den)
    prec, shift, clipped = la.clip_and_project(
        (num.precision - den.precision)[None], (num.shift - den.shift)[None])
    if diagnostics is not None:
        diagnostics.psd_clips += int(np.sum(clipped))
    return GaussianMessage(prec[0], shift[0])


def clip_psd(m):
    """Nearest (Frobenius) PSD matrix: negative eigenvalues replaced by zero."""
    m = np.asarray(m, dtype=complex)
    _check_hermitian(m)
    w, v = np.linalg.eigh(la.hermitize(m))
    if np.all(w >= 0):
        return m.copy()
    return la.hermitize((v * np.maximum(w, 0.0)) @ v.conj().T)


def pd_threshold(prec):
    n = prec.shape[-1]
    return EPS_PD_REL * np.abs(la.trace(prec)) / n


def mean_cov(m):
    """Convert to ``(mean, covariance)``.

    Raises
    ------
    UnboundedCovarianceError
        If the precision is not strictly positive definite.
    """
    prec = m.precision
    if not np.any(prec) or la.min_eig(prec) <= pd_threshold(prec):
        raise UnboundedCovarianceError(
            "precision is singular; the message has unbounded covariance")
    cov = la.hermitize(np.linalg.inv(prec))
    return cov @ m.shift, cov


def log_gaussian_density_at_zero(mean, cov):
    mean = np.atleast_1d(np.asarray(mean, dtype=complex))
    cov = np.atleast_2d(np.asarray(cov, dtype=complex))
    n = mean.size
    try:
        c = np.linalg.cholesky(la.hermitize(cov))
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError("covariance is not positive definite") from exc
    diag = np.real(np.diag(c))
    if np.min(diag) <= np.sqrt(EPS_PD_REL * np.abs(np.trace(cov)) / n):
        raise SingularCovarianceError("covariance is numerically singular")
    w = np.linalg.solve(c, mean)
    return -np.real(np.vdot(w, w)) - n * np.log(np.pi) - 2.0 * np.sum(np.log(diag))


def gaussian_density_at_zero(mean, cov, uninformative_limit=False):
    """Evaluate the complex normal density N(0; mean, cov).

    With ``uninformative_limit=True`` a singular or non-finite covariance is
    treated as the infinite-variance limit and contributes the constant 1.
    """
    if uninformative_limit:
        cov_arr = np.asarray(cov, dtype=complex)
        if not np.all(np.isfinite(cov_arr)):
            return 1.0
        try:
            return float(np.exp(log_gaussian_density_at_zero(mean, cov)))
        except SingularCovarianceError:
            return 1.0
    return float(np.exp(log_gaussian_density_at_zero(mean, cov)))


def mixture_moment_match(components):
    """Mean and covariance of a Gaussian mixture (KL projection onto a Gaussian)."""
    if not components:
        raise ValueError("cannot moment-match an empty mixture")
    w = np.array([c.weight for c in components], dtype=float)
    means = np.stack([c.mean for c in components])
    covs = np.stack([c.cov for c in components])
    mean = np.einsum("i,ij->j", w, means)
    d = means - mean
    cov = np.einsum("i,ijk->jk", w, covs) + np.einsum("i,ij,ik->jk", w, d, d.conj())
    return mean, la.hermitize(cov)


# -- Categorical operations -------------------------------------------------

def normalize_log_weights(logw, floor=EPS_CAT):
    """Normalize log-weights along the last axis and apply the weight floor.

    Rows with no finite entry become uniform.  Returns ``(pmf, n_underflow)``.
    """
    logw = np.asarray(logw, dtype=float)
    top = np.max(logw, axis=-1, keepdims=True)
    bad = ~np.isfinite(top[..., 0])
    top = np.where(np.isfinite(top), top, 0.0)
    w = np.exp(logw - top)
    w = np.where(bad[..., None], 1.0, w)
    w = w / np.sum(w, axis=-1, keepdims=True)
    if floor:
        w = np.maximum(w, floor)
        w = w / np.sum(w, axis=-1, keepdims=True)
    return w, int(np.sum(bad))


def _same_support(msgs):
    s0 = msgs[0].support
    for m in msgs[1:]:
        if m.support.shape != s0.shape or not np.array_equal(m.support, s0):
            raise ValueError("categorical messages have different supports")
    return s0


def cat_multiply(msgs, diagnostics=None):
    """Normalized elementwise product of categorical messages."""
    if not msgs:
        raise ValueError("need at least one message")
    support = _same_support(msgs)
    with np.errstate(divide="ignore"):
        logw = np.sum([np.log(m.weights) for m in msgs], axis=0)
    w, bad = normalize_log_weights(logw)
    if diagnostics is not None:
        diagnostics.categorical_underflow += bad
    return CategoricalMessage(support, w)


def cat_divide(num, den, diagnostics=None):
    """Normalized quotient, denominator floored at ``EPS_CAT``."""
    support = _same_support([num, den])
    with np.errstate(divide="ignore"):
        logw = np.log(num.weights) - np.log(np.maximum(den.weights, EPS_CAT))
    w, bad = normalize_log_weights(logw)
    if diagnostics is not None:
        diagnostics.categorical_underflow += bad
    return CategoricalMessage(support, w)
