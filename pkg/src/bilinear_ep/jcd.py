"""Bilinear EP for joint channel estimation and data detection.

Factor graph per AP ``l``, UE ``k`` and channel use ``t``::

    Psi0_lt  : y_lt = sum_k z_lkt + noise            (Gaussian likelihood)
    Psi1_lkt : z_lkt = x_kt h_lk                     (bilinear delta factor)
    Psi2_lk  : pilot MMSE prior on h_lk              (constant)
    Psi3_kt  : uniform prior on x_kt                 (constant)

Message arrays carry the indices as trailing axes ``(L, K, T)`` after any
leading batch axes, so one state can hold many independent transmissions.
Gaussian messages live in precision form and are updated in four phases per
iteration: Psi1->z, Psi0->z, Psi1->h, Psi1->x.  Within a phase every update
reads the snapshot committed by earlier phases.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as kn
from . import _linalg as la
from .gaussian import (EPS_CAT, EPS_PD_REL, CategoricalMessage, Diagnostics,
                       GaussianMessage, normalize_log_weights)

# trailing core dims after the L axis, per state array
_CORE = {
    "z1_prec": 4, "z1_shift": 3, "z0_prec": 4, "z0_shift": 3,
    "h1_prec": 4, "h1_shift": 3, "x1": 3,
    "prior_prec": 3, "prior_shift": 2, "y": 2,
}


@dataclass
class FactorGraphState:
    """All messages of the bilinear factor graph.

    Shapes, with ``...`` any batch axes:

    ``z1_*`` / ``z0_*`` / ``h1_*``
        Psi1->z, Psi0->z and Psi1->h messages, ``(..., L, K, T, N, N)`` and
        ``(..., L, K, T, N)``.
    ``x1``
        Psi1->x categorical messages, ``(..., L, K, T, S)``.
    ``prior_*``
        Constant Psi2->h messages, ``(..., L, K, N, N)`` / ``(..., L, K, N)``.
    ``x_prior``
        Constant Psi3->x messages, ``(K, T, S)``.
    ``y``
        Data observations, ``(..., L, T, N)``.
    """

    constellation: np.ndarray
    noise_var: float
    eta: float
    y: np.ndarray
    prior_prec: np.ndarray
    prior_shift: np.ndarray
    x_prior: np.ndarray
    z1_prec: np.ndarray
    z1_shift: np.ndarray
    z0_prec: np.ndarray
    z0_shift: np.ndarray
    h1_prec: np.ndarray
    h1_shift: np.ndarray
    x1: np.ndarray
    iteration: int = 0
    share_amplitudes: bool = True
    backend: str = "auto"
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def dims(self):
        """``(L, K, T, N)``."""
        L, K, T, N = self.z1_shift.shape[-4:]
        return L, K, T, N

    @property
    def batch_shape(self):
        return self.z1_shift.shape[:-4]

    def copy(self):
        arrays = {name: np.array(getattr(self, name)) for name in _CORE}
        return replace(self, x_prior=self.x_prior.copy(), **arrays,
                       diagnostics=replace(self.diagnostics))

    def gaussian(self, which, l, k, t=None):
        """One stored Gaussian message as a :class:`GaussianMessage`.

        ``which`` is ``"z1"``, ``"z0"``, ``"h1"`` or ``"prior"``.  Only for
        unbatched states.
        """
        prec, shift = getattr(self, which + "_prec"), getattr(self, which + "_shift")
        idx = (l, k) if t is None else (l, k, t)
        return GaussianMessage(prec[idx], shift[idx])

    def categorical(self, l, k, t):
        return CategoricalMessage(self.constellation, self.x1[l, k, t])

    def ap_view(self, l):
        """Copy of the state restricted to AP ``l`` (the L axis kept, size 1)."""
        sl = slice(l, l + 1)
        arrays = {name: np.array(_take_l(getattr(self, name), sl, _CORE[name]))
                  for name in _CORE}
        return replace(self, x_prior=self.x_prior.copy(), **arrays,
                       diagnostics=Diagnostics())


@dataclass
class JcdResult:
    pmf: np.ndarray        # (..., K, T, S) posterior symbol PMFs
    decisions: np.ndarray  # (..., K, T) constellation indices
    symbols: np.ndarray    # (..., K, T)
    h_mean: np.ndarray     # (..., L, K, N)
    h_cov: np.ndarray      # (..., L, K, N, N)


def _take_l(a, sl, core):
    a = np.asarray(a)
    if a.ndim < core + 1:
        return a
    idx = (Ellipsis, sl) + (slice(None),) * core
    return a[idx]


# -- construction -----------------------------------------------------------

def _uniform_pmf(shape):
    ones = np.ones(shape)
    return ones / ones.sum(axis=-1, keepdims=True)


def initial_state(constellation, noise_var, prior_mean, prior_cov, y, T=None,
                  eta=0.7, share_amplitudes=True, backend="auto"):
    """Build a state with uninformative mutable messages.

    Parameters
    ----------
    prior_mean : (..., L, K, N)
    prior_cov : (..., L, K, N, N), positive definite
    y : (..., L, N, T) data observations (the ``Y_l`` matrices)
    """
    constellation = np.asarray(constellation, complex)
    prior_mean = np.asarray(prior_mean, complex)
    prior_cov = np.asarray(prior_cov, complex)
    y = np.swapaxes(np.asarray(y, complex), -1, -2)
    L, K, N = prior_mean.shape[-3:]
    T = y.shape[-2] if T is None else T
    batch = np.broadcast_shapes(prior_mean.shape[:-3], y.shape[:-3],
                                prior_cov.shape[:-4])
    S = len(constellation)
    prior_prec = la.hermitize(la.inv(prior_cov))
    prior_shift = la.matvec(prior_prec, prior_mean)
    gshape = batch + (L, K, T, N)
    zeros_m = np.zeros(gshape + (N,), complex)
    zeros_v = np.zeros(gshape, complex)
    return FactorGraphState(
        constellation=constellation, noise_var=float(noise_var), eta=float(eta),
        y=np.broadcast_to(y, batch + (L, T, N)).copy(),
        prior_prec=prior_prec, prior_shift=prior_shift,
        x_prior=_uniform_pmf((K, T, S)),
        z1_prec=zeros_m, z1_shift=zeros_v,
        z0_prec=zeros_m.copy(), z0_shift=zeros_v.copy(),
        h1_prec=zeros_m.copy(), h1_shift=zeros_v.copy(),
        x1=_uniform_pmf(batch + (L, K, T, S)),
        share_amplitudes=share_amplitudes, backend=backend,
    )


def init_state(scenario, priors, Y, eta=0.7, share_amplitudes=True, backend="auto"):
    """State for a scenario, pilot priors and data observations ``(..., L, N, T)``.

    ``backend`` selects the phase kernels: ``"numpy"`` (any N), ``"numba"``
    (N = 1 only) or ``"auto"`` (numba whenever N = 1).
    """
    return initial_state(scenario.constellation, scenario.noise_var, priors.mean,
                         priors.cov, Y, T=scenario.T, eta=eta,
                         share_amplitudes=share_amplitudes, backend=backend)


def perfect_csi_prior(H, gains, eps_csi=1e-12):
    """Near-delta priors at the true channel.

    ``H`` is ``(..., L, N, K)``; ``gains`` the ``(L, K)`` mean channel powers.
    The prior covariance is ``eps_csi * beta_lk * I``.
    """
    from .pilot import ChannelPrior

    H = np.asarray(H, complex)
    N = H.shape[-2]
    mean = np.swapaxes(H, -1, -2)
    cov = (eps_csi * np.asarray(gains))[..., None, None] * np.eye(N) + 0j
    return ChannelPrior(mean, cov)


# -- variable-to-factor messages ---------------------------------------------

def h_cavity(state):
    """All ``m_{h->Psi1}``: prior times Psi1->h messages of the other channel uses."""
    prec = state.prior_prec[..., None, :, :] + la.sum_except(state.h1_prec, axis=-3)
    shift = state.prior_shift[..., None, :] + la.sum_except(state.h1_shift, axis=-2)
    return prec, shift


def aggregate_pmf(x1, axis=-4):
    """Normalized product of PMFs along the AP axis (no weight floor).

    Each output row depends only on its own inputs, so the result does not
    change with how the rows are batched.
    """

    x = np.moveaxis(np.asarray(x1, float), axis, -2)
    rows = np.require(x.reshape((-1,) + x.shape[-2:]), requirements=["C", "W"])
    return kn.aggregate_rows(rows).reshape(x.shape[:-2] + x.shape[-1:])


def extrinsic_pmf(total, own, x_prior):
    """``total / own`` times the symbol prior, renormalized and floored.

    Returns ``(pmf, n_underflow)``.
    """

    arrays = [np.asarray(a, float) for a in (total, own, x_prior)]
    shape = np.broadcast_shapes(*(a.shape for a in arrays))
    S = shape[-1]
    rows = [np.require(np.broadcast_to(a, shape).reshape(-1, S), requirements=["C", "W"])
            for a in arrays]
    pmf, bad = kn.extrinsic_rows(*rows, EPS_CAT)
    return pmf.reshape(shape), int(bad)


def x_cavity(state, total=None):
    """All ``m_{x->Psi1}`` as PMFs ``(..., L, K, T, S)``."""
    if total is None:
        total = aggregate_pmf(state.x1)
    pmf, bad = extrinsic_pmf(total[..., None, :, :, :], state.x1, state.x_prior)
    state.diagnostics.categorical_underflow += bad
    return pmf


def var_to_factor_h(state, l, k, t):
    prec, shift = h_cavity(state)
    return GaussianMessage(prec[l, k, t], shift[l, k, t])


def var_to_factor_z(state, l, k, t):
    return state.gaussian("z0", l, k, t)


def var_to_factor_x(state, l, k, t):
    return CategoricalMessage(state.constellation, x_cavity(state)[l, k, t])


# -- factor-to-variable kernels ---------------------------------------------

def _amplitude_groups(constellation, share):
    amps = np.abs(constellation) ** 2
    if not share:
        return amps, np.arange(len(amps))
    reps, index = [], np.empty(len(amps), dtype=int)
    for s, a in enumerate(amps):
        for j, r in enumerate(reps):
            if abs(a - r) <= 1e-12 * max(a, r):
                index[s] = j
                break
        else:
            index[s] = len(reps)
            reps.append(a)
    return np.array(reps), index


def symbol_mixture(z_prec, z_shift, h_prec, h_shift, constellation, log_mx=None,
                   share_amplitudes=True):
    """Per-symbol Gaussian components of the Psi1 factor, in channel coordinates.

    For each symbol ``x`` the product of the incoming h- and z-messages under
    ``z = x h`` is ``CN(h; mu(x), C(x))`` with precision
    ``Q(x) = Lambda_h + |x|^2 Lambda_z`` and ``mu(x) = Q(x)^-1 (gamma_h + x* gamma_z)``.
    The matching z-component is ``CN(z; x mu(x), |x|^2 C(x))``.  Works for an
    uninformative z-message (``Lambda_z = 0``) as long as ``Lambda_h`` is PD.

    Returns
    -------
    logw : (..., S) unnormalized log mixture weights (``log m_x`` included if given)
    mu : (..., S, N)
    cov : (..., A, N, N) one covariance per distinct amplitude
    group : (S,) amplitude index of every symbol
    """
    amps, group = _amplitude_groups(constellation, share_amplitudes)
    Q = h_prec[..., None, :, :] + amps[:, None, None] * z_prec[..., None, :, :]
    cov = la.hermitize(la.inv(Q))
    logdet = la.logdet_pd(Q)
    c = h_shift[..., None, :] + np.conj(constellation)[:, None] * z_shift[..., None, :]
    cov_s = cov[..., group, :, :]
    mu = la.matvec(cov_s, c)
    logw = np.real(la.vdot(c, mu)) - logdet[..., group]
    if log_mx is not None:
        logw = logw + log_mx
    return logw, mu, cov, group


def _project(weights, means, covs_by_group, group, scale=None):
    """Moment-match a mixture whose components share grouped covariances."""
    n_groups = covs_by_group.shape[-3]
    onehot = (group[:, None] == np.arange(n_groups)[None, :]).astype(float)
    wg = weights @ onehot  # (..., A)
    if scale is not None:
        wg = wg * scale
    mean = np.sum(weights[..., None] * means, axis=-2)
    d = means - mean[..., None, :]
    if means.shape[-1] == 1:
        cov = np.sum(wg[..., None, None] * covs_by_group, axis=-3)
        cov = cov + np.sum(weights * np.abs(d[..., 0]) ** 2, axis=-1)[..., None, None]
    else:
        cov = np.einsum("...a,...aij->...ij", wg, covs_by_group)
        cov = cov + np.einsum("...s,...si,...sj->...ij", weights, d, np.conj(d))
    return mean, la.hermitize(cov)


def _regularize(cov, diagnostics):
    n = cov.shape[-1]
    floor = EPS_PD_REL * la.trace(cov) / n
    cov, hit = la.floor_eigenvalues(cov, floor)
    diagnostics.degenerate_cov += int(np.sum(hit))
    return cov


def _divide_out(mean, cov, cav_prec, cav_shift, diagnostics):
    """Projected Gaussian divided by the cavity, with PSD repair."""
    cov = _regularize(cov, diagnostics)
    prec = la.hermitize(la.inv(cov))
    shift = la.matvec(prec, mean)
    prec, shift, clipped = la.clip_and_project(prec - cav_prec, shift - cav_shift)
    diagnostics.psd_clips += int(np.sum(clipped))
    return prec, shift


def soft_update(new, old, eta):
    """``eta * new + (1 - eta) * old`` applied to every parameter array."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    if isinstance(new, (tuple, list)):
        return type(new)(soft_update(n, o, eta) for n, o in zip(new, old))
    if eta == 1.0:
        return np.array(new, copy=True)
    if eta == 0.0:
        return np.array(old, copy=True)
    return eta * new + (1.0 - eta) * old


def soft_update_pmf(new, old, eta):
    w = soft_update(new, old, eta)
    return w / np.sum(w, axis=-1, keepdims=True)


def psi1_to_z(z_prec, z_shift, hc_prec, hc_shift, mx, constellation,
              diagnostics, share_amplitudes=True):
    """Undamped Psi1->z messages from the incoming z-, h- and x-messages."""
    with np.errstate(divide="ignore"):
        log_mx = np.log(mx)
    logw, mu_h, cov_h, group = symbol_mixture(
        z_prec, z_shift, hc_prec, hc_shift, constellation, log_mx, share_amplitudes)
    w, bad = normalize_log_weights(logw, floor=0.0)
    diagnostics.categorical_underflow += bad
    amps, _ = _amplitude_groups(constellation, share_amplitudes)
    mu_z = constellation[:, None] * mu_h
    mean, cov = _project(w, mu_z, cov_h, group, scale=amps)
    return _divide_out(mean, cov, z_prec, z_shift, diagnostics)


def psi1_to_h(z_prec, z_shift, hc_prec, hc_shift, mx, constellation,
              diagnostics, share_amplitudes=True):
    """Undamped Psi1->h messages."""
    with np.errstate(divide="ignore"):
        log_mx = np.log(mx)
    logw, mu_h, cov_h, group = symbol_mixture(
        z_prec, z_shift, hc_prec, hc_shift, constellation, log_mx, share_amplitudes)
    w, bad = normalize_log_weights(logw, floor=0.0)
    diagnostics.categorical_underflow += bad
    mean, cov = _project(w, mu_h, cov_h, group)
    return _divide_out(mean, cov, hc_prec, hc_shift, diagnostics)


def psi1_to_x(z_prec, z_shift, hc_prec, hc_shift, constellation, diagnostics,
              share_amplitudes=True):
    """Undamped Psi1->x PMFs, proportional to N(0; mu_z - x mu_h, C_z + |x|^2 C_h)."""
    logw, _, _, _ = symbol_mixture(z_prec, z_shift, hc_prec, hc_shift,
                                   constellation, None, share_amplitudes)
    pmf, bad = normalize_log_weights(logw)
    diagnostics.categorical_underflow += bad
    return pmf


def psi0_to_z(z1_prec, z1_shift, y, noise_var, diagnostics):
    """Undamped Psi0->z messages by interference cancellation.

    ``C = s2 I + sum_{j!=k} C_j``, ``mu = y - sum_{j!=k} mu_j`` over the
    Psi1->z messages of the other users; uninformative whenever one of those
    has a singular precision.
    """
    N = z1_prec.shape[-1]
    thr = EPS_PD_REL * np.abs(la.trace(z1_prec)) / N
    pd = (la.min_eig(z1_prec) > thr) & (thr > 0)
    safe = np.where(pd[..., None, None], z1_prec, la.eye_like(z1_prec))
    cov = np.where(pd[..., None, None], la.inv(safe), 0.0)
    mean = np.where(pd[..., None], la.matvec(cov, z1_shift), 0.0)
    unbounded = la.sum_except((~pd).astype(np.int64), axis=-2) > 0
    c0 = noise_var * np.eye(N) + la.sum_except(cov, axis=-4)
    m0 = y[..., :, None, :, :] - la.sum_except(mean, axis=-3)
    prec = la.hermitize(la.inv(c0))
    shift = la.matvec(prec, m0)
    diagnostics.unbounded_interference += int(np.sum(unbounded))
    prec = np.where(unbounded[..., None, None], 0.0, prec)
    shift = np.where(unbounded[..., None], 0.0, shift)
    return prec, shift


# -- single-message API ------------------------------------------------------

def update_psi1_to_z(state, l, k, t):
    """Damped Psi1->z message for one index (reads the current snapshot)."""
    prec, shift = _phase_z1(state, x_cavity(state))
    return GaussianMessage(prec[l, k, t], shift[l, k, t])


def update_psi0_to_z(state, l, t, k):
    prec, shift = _phase_z0(state)
    return GaussianMessage(prec[l, k, t], shift[l, k, t])


def update_psi1_to_h(state, l, k, t):
    prec, shift = _phase_h1(state, x_cavity(state))
    return GaussianMessage(prec[l, k, t], shift[l, k, t])


def update_psi1_to_x(state, l, k, t):
    return CategoricalMessage(state.constellation, _phase_x1(state)[l, k, t])


# -- phases -------------------------------------------------------------------

def _fast(s):
    N = s.dims[3]
    if s.backend == "numba" and N != 1:
        raise ValueError("the numba backend supports N = 1 only")
    return s.backend in ("auto", "numba") and N == 1


def _flat(a, batch, core, kind=None):
    # kind: "prec" takes the real 1x1 precision, "vec" drops the length-1 axis
    if kind == "prec":
        a = np.real(a[..., 0, 0])
    elif kind == "vec":
        a = a[..., 0]
    a = np.broadcast_to(a, batch + core).reshape((int(np.prod(batch)),) + core)
    return np.require(a, requirements=["C", "W"])


def _fast_inputs(s):
    L, K, T, _ = s.dims
    b = s.batch_shape
    return dict(
        zp=_flat(s.z0_prec, b, (L, K, T), kind="prec"),
        zs=_flat(s.z0_shift, b, (L, K, T), kind="vec"),
        prior_p=_flat(s.prior_prec, b, (L, K), kind="prec"),
        prior_s=_flat(s.prior_shift, b, (L, K), kind="vec"),
        h1p=_flat(s.h1_prec, b, (L, K, T), kind="prec"),
        h1s=_flat(s.h1_shift, b, (L, K, T), kind="vec"),
    )


def _unflat(p, sh, batch):
    shape = batch + p.shape[1:]
    return (p.reshape(shape)[..., None, None] + 0j), sh.reshape(shape)[..., None]


def _fast_psi1(s, mx, mode):
    L, K, T, _ = s.dims
    b = s.batch_shape
    S = len(s.constellation)
    old = ("z1" if mode == 0 else "h1")
    p, sh, clips, degen, under = kn.psi1_update(
        mode, **_fast_inputs(s), mx=_flat(mx, b, (L, K, T, S)), x=s.constellation,
        eta=s.eta,
        old_p=_flat(getattr(s, old + "_prec"), b, (L, K, T), kind="prec"),
        old_s=_flat(getattr(s, old + "_shift"), b, (L, K, T), kind="vec"))
    s.diagnostics.psd_clips += clips
    s.diagnostics.degenerate_cov += degen
    s.diagnostics.categorical_underflow += under
    return _unflat(p, sh, b)


def _phase_z1(s, mx):
    if _fast(s):
        return _fast_psi1(s, mx, 0)
    hp, hs = h_cavity(s)
    new = psi1_to_z(s.z0_prec, s.z0_shift, hp, hs, mx, s.constellation,
                    s.diagnostics, s.share_amplitudes)
    return soft_update(new, (s.z1_prec, s.z1_shift), s.eta)


def _phase_z0(s):
    if _fast(s):
        L, K, T, _ = s.dims
        b = s.batch_shape
        p, sh, unbounded = kn.psi0_to_z(
            _flat(s.z1_prec, b, (L, K, T), kind="prec"), _flat(s.z1_shift, b, (L, K, T), kind="vec"),
            _flat(s.y, b, (L, T), kind="vec"), s.noise_var, s.eta,
            _flat(s.z0_prec, b, (L, K, T), kind="prec"), _flat(s.z0_shift, b, (L, K, T), kind="vec"))
        s.diagnostics.unbounded_interference += unbounded
        return _unflat(p, sh, b)
    new = psi0_to_z(s.z1_prec, s.z1_shift, s.y, s.noise_var, s.diagnostics)
    return soft_update(new, (s.z0_prec, s.z0_shift), s.eta)


def _phase_h1(s, mx):
    if _fast(s):
        return _fast_psi1(s, mx, 1)
    hp, hs = h_cavity(s)
    new = psi1_to_h(s.z0_prec, s.z0_shift, hp, hs, mx, s.constellation,
                    s.diagnostics, s.share_amplitudes)
    return soft_update(new, (s.h1_prec, s.h1_shift), s.eta)


def _phase_x1(s):
    if _fast(s):
        L, K, T, _ = s.dims
        b = s.batch_shape
        S = len(s.constellation)
        out, under = kn.psi1_to_x(**_fast_inputs(s), x=s.constellation, eta=s.eta,
                                  old=_flat(s.x1, b, (L, K, T, S)))
        s.diagnostics.categorical_underflow += under
        return out.reshape(b + (L, K, T, S))
    hp, hs = h_cavity(s)
    new = psi1_to_x(s.z0_prec, s.z0_shift, hp, hs, s.constellation,
                    s.diagnostics, s.share_amplitudes)
    return soft_update_pmf(new, s.x1, s.eta)


def _split(state, n_chunks):
    L = state.dims[0]
    bounds = np.linspace(0, L, min(n_chunks, L) + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


def _chunk(state, sl):
    arrays = {name: _take_l(getattr(state, name), sl, _CORE[name]) for name in _CORE}
    return replace(state, **arrays, diagnostics=Diagnostics())


def _run_phase(state, fn, pool, chunks, mx=None):
    if pool is None:
        return fn(state) if mx is None else fn(state, mx)
    subs = [_chunk(state, sl) for sl in chunks]

    def job(i):
        sub = subs[i]
        if mx is None:
            return fn(sub)
        return fn(sub, _take_l(mx, chunks[i], 3))

    parts = list(pool.map(job, range(len(subs))))
    for sub in subs:
        state.diagnostics.merge(sub.diagnostics)
    if isinstance(parts[0], tuple):
        return (np.concatenate([p[0] for p in parts], axis=-5),
                np.concatenate([p[1] for p in parts], axis=-4))
    return np.concatenate(parts, axis=-4)


def iterate(state, mx, pool=None, chunks=None):
    """One in-place iteration of the four phases, given the x-cavity PMFs."""
    state.z1_prec, state.z1_shift = _run_phase(state, _phase_z1, pool, chunks, mx)
    state.z0_prec, state.z0_shift = _run_phase(state, _phase_z0, pool, chunks)
    state.h1_prec, state.h1_shift = _run_phase(state, _phase_h1, pool, chunks, mx)
    state.x1 = _run_phase(state, _phase_x1, pool, chunks)
    state.iteration += 1
    return state


def run_schedule(state, iterations, workers=1):
    """Run ``iterations`` EP iterations and return the updated copy of ``state``.

    With ``workers > 1`` every phase is split across APs and evaluated by a
    thread pool against the same snapshot; results are bit-identical to the
    sequential run.
    """
    state = state.copy()
    if iterations <= 0:
        return state
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    chunks = _split(state, workers) if pool else None
    try:
        for _ in range(iterations):
            iterate(state, x_cavity(state), pool, chunks)
    finally:
        if pool is not None:
            pool.shutdown()
    return state


# -- inference -------------------------------------------------------------------

def infer(state):
    """Posterior symbol PMFs, hard decisions and channel posteriors."""
    with np.errstate(divide="ignore"):
        logw = np.log(state.x_prior) + np.sum(np.log(state.x1), axis=-4)
    pmf, _ = normalize_log_weights(logw, floor=0.0)
    decisions = np.argmax(pmf, axis=-1)
    prec = state.prior_prec + np.sum(state.h1_prec, axis=-3)
    shift = state.prior_shift + np.sum(state.h1_shift, axis=-2)
    cov = la.hermitize(la.inv(prec))
    mean = la.matvec(cov, shift)
    return JcdResult(pmf=pmf, decisions=decisions,
                     symbols=state.constellation[decisions],
                     h_mean=mean, h_cov=cov)


def detect(scenario, priors, Y, iterations=10, eta=0.7):
    """Convenience wrapper: initialize, run the schedule and infer."""
    state = init_state(scenario, priors, Y, eta=eta)
    return infer(run_schedule(state, iterations))
