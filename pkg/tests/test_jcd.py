import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bilinear_ep import jcd
from bilinear_ep.gaussian import EPS_CAT, GaussianMessage, mean_cov, multiply
from bilinear_ep.pilot import estimate_channels
from bilinear_ep.scenario import (generate_transmission, make_scenario, place_aps_grid,
                                  qam4_constellation, sample_channel, sample_ue_positions)

from oracles import exact_posterior_marginals, random_pd, scalar_quad_moments

X4 = qam4_constellation(2.0)  # {+-1 +- j}
BACKENDS = ["numpy", "numba"]


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def make_state(rng, L=2, K=2, T=3, N=1, noise_var=0.1, eta=1.0, backend="numpy",
               constellation=X4):
    mean = crandn(rng, L, K, N)
    cov = np.stack([[random_pd(rng, N, scale=0.5, cond=2.0) for _ in range(K)] for _ in range(L)])
    y = crandn(rng, L, N, T)
    return jcd.initial_state(constellation, noise_var, mean, cov, y, eta=eta, backend=backend)


def set_msg(state, which, l, k, t, prec, shift):
    getattr(state, which + "_prec")[l, k, t] = np.atleast_2d(prec)
    getattr(state, which + "_shift")[l, k, t] = np.atleast_1d(shift)


def scenario_batch(seed, B, T=10, L=16, K=8, N=1):
    rng = np.random.default_rng(seed)
    sc = make_scenario(sample_ue_positions(rng, K, 400), place_aps_grid(400, int(np.sqrt(L))),
                       N=N, T=T)
    ch = sample_channel(rng, sc, B)
    tx = generate_transmission(rng, sc, ch)
    return sc, ch, tx, estimate_channels(sc, tx.Yp)


# -- initialization and variable-to-factor messages -----------------------------

def test_init_state():
    rng = np.random.default_rng(0)
    st_ = make_state(rng, N=2)
    for name in ("z1", "z0", "h1"):
        assert not np.any(getattr(st_, name + "_prec")) and not np.any(getattr(st_, name + "_shift"))
    assert np.allclose(st_.x_prior, 0.25) and np.allclose(st_.x1, 0.25)
    sc, ch, tx, pr = scenario_batch(1, 2, L=4, K=2)
    s = jcd.init_state(sc, pr, tx.Y)
    for l in range(4):
        for k in range(2):
            mu, C = mean_cov(GaussianMessage(s.prior_prec[l, k], s.prior_shift[0, l, k]))
            assert np.allclose(C, pr.cov[l, k], rtol=1e-12)
            assert np.allclose(mu, pr.mean[0, l, k], rtol=1e-10)


def test_var_to_factor_h():
    rng = np.random.default_rng(1)
    s = make_state(rng, L=1, K=1, T=3, N=2)
    prior = GaussianMessage(s.prior_prec[0, 0], s.prior_shift[0, 0])
    m = jcd.var_to_factor_h(s, 0, 0, 1)
    assert np.array_equal(m.precision, prior.precision) and np.array_equal(m.shift, prior.shift)
    s1 = make_state(rng, L=1, K=1, T=1, N=2)
    s1.h1_prec[...] = random_pd(rng, 2)
    m = jcd.var_to_factor_h(s1, 0, 0, 0)
    assert np.array_equal(m.precision, s1.prior_prec[0, 0])
    # covariance-form oracle for T = 3
    covs, means = [], []
    for t in range(3):
        C, mu = random_pd(rng, 2), crandn(rng, 2)
        covs.append(C)
        means.append(mu)
        P = np.linalg.inv(C)
        set_msg(s, "h1", 0, 0, t, P, P @ mu)
    mup, Cp = mean_cov(prior)
    for t in range(3):
        others = [j for j in range(3) if j != t]
        info = np.linalg.inv(Cp) + sum(np.linalg.inv(covs[j]) for j in others)
        C = np.linalg.inv(info)
        mu = C @ (np.linalg.inv(Cp) @ mup + sum(np.linalg.solve(covs[j], means[j]) for j in others))
        got_mu, got_C = mean_cov(jcd.var_to_factor_h(s, 0, 0, t))
        assert np.linalg.norm(got_C - C) / np.linalg.norm(C) < 1e-10
        assert np.linalg.norm(got_mu - mu) / np.linalg.norm(mu) < 1e-10


def test_var_to_factor_z():
    rng = np.random.default_rng(2)
    s = make_state(rng, N=2)
    assert jcd.var_to_factor_z(s, 1, 0, 2).is_uninformative()
    P = random_pd(rng, 2)
    set_msg(s, "z0", 1, 0, 2, P, np.ones(2))
    m = jcd.var_to_factor_z(s, 1, 0, 2)
    assert np.array_equal(m.precision, P)
    set_msg(s, "z0", 0, 1, 1, 2 * P, np.zeros(2))
    assert np.array_equal(jcd.var_to_factor_z(s, 1, 0, 2).precision, P)


def test_var_to_factor_x():
    rng = np.random.default_rng(3)
    s = make_state(rng, L=1)
    s.x1[0, 0, 0] = [0.7, 0.1, 0.1, 0.1]
    assert np.allclose(jcd.var_to_factor_x(s, 0, 0, 0).weights, 0.25)
    s = make_state(rng, L=3)
    assert np.allclose(jcd.var_to_factor_x(s, 0, 1, 1).weights, 0.25)
    pmfs = rng.dirichlet(np.ones(4), size=3)
    s.x1[:, 1, 2] = pmfs
    for l in range(3):
        direct = np.prod(np.delete(pmfs, l, axis=0), axis=0) * 0.25
        direct /= direct.sum()
        assert np.sum(np.abs(jcd.var_to_factor_x(s, l, 1, 2).weights - direct)) < 1e-12


def test_x_cavity_underflow():
    rng = np.random.default_rng(4)
    s = make_state(rng, L=3)
    s.x1[1, 0, 0] = [1.0, 0, 0, 0]
    s.x1[2, 0, 0] = [0, 1.0, 0, 0]
    before = s.diagnostics.categorical_underflow
    w = jcd.var_to_factor_x(s, 0, 0, 0).weights
    assert np.isfinite(w).all() and abs(w.sum() - 1) < 1e-12
    assert s.diagnostics.categorical_underflow >= before


# -- Psi1 -> z ---------------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_z_first_iteration(backend):
    rng = np.random.default_rng(5)
    N = 1 if backend == "numba" else 2
    s = make_state(rng, L=1, K=1, T=1, N=N, backend=backend)
    m = jcd.update_psi1_to_z(s, 0, 0, 0)
    mu_h, C_h = mean_cov(GaussianMessage(s.prior_prec[0, 0], s.prior_shift[0, 0]))
    Sigma = 2.0 * (np.outer(mu_h, mu_h.conj()) + C_h)
    assert np.allclose(m.precision, np.linalg.inv(Sigma), rtol=1e-10)
    assert np.allclose(m.shift, 0, atol=1e-12)


def psi1_setup(rng, backend, mx=None):
    """L=2, K=1, T=1 state; the x-cavity of AP 0 is set through AP 1's message."""
    s = make_state(rng, L=2, K=1, T=1, N=1, backend=backend)
    s.prior_prec[0, 0] = [[1.0 / 0.6]]
    s.prior_shift[0, 0] = [(0.4 - 0.2j) / 0.6]
    set_msg(s, "z0", 0, 0, 0, 1 / 0.5, (0.3 + 0.9j) / 0.5)
    if mx is not None:
        s.x1[1, 0, 0] = mx
    return s


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_z_quadrature(backend):
    rng = np.random.default_rng(6)
    mx = np.array([0.4, 0.3, 0.2, 0.1])
    s = psi1_setup(rng, backend, mx)
    out = jcd.update_psi1_to_z(s, 0, 0, 0)
    mh, vh = 0.4 - 0.2j, 0.6
    mz, vz = 0.3 + 0.9j, 0.5

    def log_f(z):
        terms = [np.log(w) - np.abs(z - x * mh) ** 2 / (2 * vh) - np.log(2 * vh)
                 for w, x in zip(mx, X4)]
        return np.logaddexp.reduce(terms, axis=0) - np.abs(z - mz) ** 2 / vz

    m_ref, v_ref = scalar_quad_moments(log_f, 0j, 6.0, n=1201)
    mu, C = mean_cov(multiply(out, GaussianMessage([[1 / vz]], [mz / vz])))
    assert abs(mu[0] - m_ref) < 1e-6 and abs(C[0, 0] - v_ref) < 1e-6


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_z_point_mass(backend):
    rng = np.random.default_rng(7)
    s = psi1_setup(rng, backend, np.array([0.0, 0.0, 1.0, 0.0]))
    out = jcd.update_psi1_to_z(s, 0, 0, 0)
    x0 = X4[2]
    q = 1 / 0.6 + 2.0 / 0.5
    mu_bar = ((0.4 - 0.2j) / 0.6 + np.conj(x0) * (0.3 + 0.9j) / 0.5) / q
    mu, _ = mean_cov(multiply(out, GaussianMessage([[2.0]], [(0.3 + 0.9j) * 2.0])))
    assert abs(mu[0] - x0 * mu_bar) < 1e-8


# -- Psi0 -> z ---------------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_psi0_single_user(backend):
    rng = np.random.default_rng(8)
    s = make_state(rng, L=2, K=1, T=2, N=1, noise_var=0.3, backend=backend)
    m = jcd.update_psi0_to_z(s, 1, 1, 0)
    assert np.isclose(m.precision[0, 0], 1 / 0.3)
    assert np.isclose(m.shift[0], s.y[1, 1, 0] / 0.3)


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi0_point_interferers(backend):
    rng = np.random.default_rng(9)
    s = make_state(rng, L=1, K=3, T=1, N=1, noise_var=0.3, backend=backend)
    pts = crandn(rng, 3)
    for k in range(3):
        set_msg(s, "z1", 0, k, 0, 1e12, 1e12 * pts[k])
    m = jcd.update_psi0_to_z(s, 0, 0, 1)
    mu, C = mean_cov(m)
    assert abs(mu[0] - (s.y[0, 0, 0] - pts[0] - pts[2])) < 1e-9
    assert abs(C[0, 0] - 0.3) < 1e-9


def test_psi0_direct_formula():
    rng = np.random.default_rng(10)
    s = make_state(rng, L=1, K=3, T=1, N=2, noise_var=0.4)
    covs, means = [], []
    for k in range(3):
        C, mu = random_pd(rng, 2), crandn(rng, 2)
        covs.append(C)
        means.append(mu)
        set_msg(s, "z1", 0, k, 0, np.linalg.inv(C), np.linalg.solve(C, mu))
    for k in range(3):
        others = [j for j in range(3) if j != k]
        C = 0.4 * np.eye(2) + sum(covs[j] for j in others)
        mu = s.y[0, 0] - sum(means[j] for j in others)
        got_mu, got_C = mean_cov(jcd.update_psi0_to_z(s, 0, 0, k))
        assert np.linalg.norm(got_C - C) / np.linalg.norm(C) < 1e-12
        assert np.linalg.norm(got_mu - mu) / np.linalg.norm(mu) < 1e-12


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi0_unbounded_interference(backend):
    rng = np.random.default_rng(11)
    s = make_state(rng, L=1, K=3, T=1, N=1, backend=backend)
    set_msg(s, "z1", 0, 0, 0, 1.0, 0.0)
    set_msg(s, "z1", 0, 1, 0, 2.0, 0.0)
    # user 2 keeps an uninformative message
    assert jcd.update_psi0_to_z(s, 0, 0, 0).is_uninformative()
    assert not jcd.update_psi0_to_z(s, 0, 0, 2).is_uninformative()
    assert s.diagnostics.unbounded_interference > 0


# -- Psi1 -> h ---------------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_h_point_mass(backend):
    rng = np.random.default_rng(12)
    s = psi1_setup(rng, backend, np.array([0.0, 1.0, 0.0, 0.0]))
    s.prior_prec[0, 0] = [[1e-9]]
    s.prior_shift[0, 0] = [0.0]
    out = jcd.update_psi1_to_h(s, 0, 0, 0)
    x0 = X4[1]
    assert np.isclose(out.precision[0, 0], 2.0 / 0.5, rtol=1e-8)
    assert np.isclose(out.shift[0], np.conj(x0) * (0.3 + 0.9j) / 0.5, rtol=1e-8)
    mu, _ = mean_cov(out)
    assert np.isclose(mu[0], (0.3 + 0.9j) / x0, rtol=1e-8)


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_h_noiseless(backend):
    rng = np.random.default_rng(13)
    h_true = 0.7 - 0.4j
    x0 = X4[3]
    s = psi1_setup(rng, backend, np.eye(4)[3])
    set_msg(s, "z0", 0, 0, 0, 1e10, 1e10 * x0 * h_true)
    mu, _ = mean_cov(jcd.update_psi1_to_h(s, 0, 0, 0))
    assert abs(mu[0] - h_true) < 1e-8


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_h_quadrature(backend):
    rng = np.random.default_rng(14)
    mx = np.array([0.1, 0.5, 0.15, 0.25])
    s = psi1_setup(rng, backend, mx)
    out = jcd.update_psi1_to_h(s, 0, 0, 0)
    mh, vh = 0.4 - 0.2j, 0.6
    mz, vz = 0.3 + 0.9j, 0.5

    def log_f(h):
        terms = [np.log(w) - np.abs(x * h - mz) ** 2 / vz for w, x in zip(mx, X4)]
        return np.logaddexp.reduce(terms, axis=0) - np.abs(h - mh) ** 2 / vh

    m_ref, v_ref = scalar_quad_moments(log_f, 0j, 6.0, n=1201)
    mu, C = mean_cov(multiply(out, GaussianMessage([[1 / vh]], [mh / vh])))
    assert abs(mu[0] - m_ref) < 1e-6 and abs(C[0, 0] - v_ref) < 1e-6


# -- Psi1 -> x ---------------------------------------------------------------------

@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_x_uninformative(backend):
    rng = np.random.default_rng(15)
    s = make_state(rng, L=1, K=1, T=1, backend=backend)
    assert np.allclose(jcd.update_psi1_to_x(s, 0, 0, 0).weights, 0.25, atol=1e-15)


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_x_concentrates(backend):
    rng = np.random.default_rng(16)
    s = make_state(rng, L=1, K=1, T=1, backend=backend)
    mu_h = 0.8 + 0.3j
    s.prior_prec[0, 0] = [[1e6]]
    s.prior_shift[0, 0] = [1e6 * mu_h]
    set_msg(s, "z0", 0, 0, 0, 1e6, 1e6 * X4[2] * mu_h)
    w = jcd.update_psi1_to_x(s, 0, 0, 0).weights
    assert w[2] > 0.99


@pytest.mark.parametrize("backend", BACKENDS)
def test_psi1_to_x_symmetry(backend):
    rng = np.random.default_rng(17)
    s = make_state(rng, L=1, K=1, T=1, backend=backend)
    s.prior_prec[0, 0] = [[2.0]]
    s.prior_shift[0, 0] = [2.0]  # mu_h = 1
    # mu_z = 1j is equidistant from x = 1+j and x = -1+j
    set_msg(s, "z0", 0, 0, 0, 3.0, 3.0j)
    w = jcd.update_psi1_to_x(s, 0, 0, 0).weights
    assert abs(w[0] - w[1]) < 1e-12 and abs(w[2] - w[3]) < 1e-12


def test_psi1_to_x_direct_formula():
    rng = np.random.default_rng(18)
    x = np.array([1.0, -1.0, 2.0j, -0.5 - 0.5j])  # several amplitudes
    s = make_state(rng, L=1, K=1, T=1, N=2, constellation=x)
    Cz, mz = random_pd(rng, 2), crandn(rng, 2)
    set_msg(s, "z0", 0, 0, 0, np.linalg.inv(Cz), np.linalg.solve(Cz, mz))
    mh, Ch = mean_cov(GaussianMessage(s.prior_prec[0, 0], s.prior_shift[0, 0]))
    ref = np.array([np.exp(-np.real((mz - xi * mh).conj() @ np.linalg.solve(Cz + abs(xi) ** 2 * Ch, mz - xi * mh)))
                    / np.real(np.linalg.det(Cz + abs(xi) ** 2 * Ch)) for xi in x])
    ref /= ref.sum()
    w = jcd.update_psi1_to_x(s, 0, 0, 0).weights
    assert np.allclose(w, np.maximum(ref, EPS_CAT) / np.maximum(ref, EPS_CAT).sum(), rtol=1e-10)


# -- damping -----------------------------------------------------------------------

def test_soft_update():
    new, old = np.array([10.0]), np.array([0.0])
    assert jcd.soft_update(new, old, 1.0)[0] == 10.0
    assert jcd.soft_update(new, old, 0.0)[0] == 0.0
    assert jcd.soft_update(new, old, 0.7)[0] == 7.0
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            jcd.soft_update(new, old, bad)
    w = jcd.soft_update_pmf(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 0.7)
    assert np.allclose(w, [0.65, 0.35]) and abs(w.sum() - 1) < 1e-15


# -- schedule ---------------------------------------------------------------------

def test_zero_iterations():
    sc, ch, tx, pr = scenario_batch(0, 2, L=4, K=2)
    s = jcd.init_state(sc, pr, tx.Y)
    out = jcd.run_schedule(s, 0)
    for name in jcd._CORE:
        assert np.array_equal(getattr(out, name), getattr(s, name))


@pytest.mark.parametrize("backend", BACKENDS)
def test_constants_untouched_and_parallel_identical(backend):
    sc, ch, tx, pr = scenario_batch(1, 3, L=9, K=4)
    s = jcd.init_state(sc, pr, tx.Y, backend=backend)
    pp, ps, xp = s.prior_prec.copy(), s.prior_shift.copy(), s.x_prior.copy()
    a = jcd.run_schedule(s, 5)
    b = jcd.run_schedule(s, 5, workers=3)
    for name in jcd._CORE:
        assert np.array_equal(getattr(a, name), getattr(b, name)), name
    for st_ in (s, a, b):
        assert np.array_equal(st_.prior_prec, pp) and np.array_equal(st_.prior_shift, ps)
        assert np.array_equal(st_.x_prior, xp)


def check_invariants(s):
    for name in ("z1", "z0", "h1"):
        P = getattr(s, name + "_prec")
        g = getattr(s, name + "_shift")
        norm = np.linalg.norm(P, axis=(-2, -1))
        assert np.all(np.linalg.norm(P - np.conj(np.swapaxes(P, -1, -2)), axis=(-2, -1))
                      <= 1e-10 * np.maximum(norm, 1e-300))
        w, v = np.linalg.eigh(P)
        assert np.all(w.min(-1) >= -1e-10 * norm)
        null = (w <= 1e-10 * np.maximum(np.abs(w).max(-1, keepdims=True), 1e-300))
        proj = np.einsum("...ji,...j->...i", np.conj(v), g) * null
        assert np.all(np.linalg.norm(proj, axis=-1)
                      <= 1e-8 * np.maximum(np.linalg.norm(g, axis=-1), 1.0))
    assert np.all(np.abs(s.x1.sum(-1) - 1) < 1e-12) and np.all(s.x1 >= 0)


@pytest.mark.parametrize("N,backend", [(1, "numba"), (1, "numpy"), (2, "numpy")])
def test_invariants_after_every_phase(N, backend):
    sc, ch, tx, pr = scenario_batch(2, 4, L=4, K=3, N=N)
    s = jcd.init_state(sc, pr, tx.Y, backend=backend)
    for _ in range(4):
        mx = jcd.x_cavity(s)
        s.z1_prec, s.z1_shift = jcd._phase_z1(s, mx)
        check_invariants(s)
        s.z0_prec, s.z0_shift = jcd._phase_z0(s)
        check_invariants(s)
        s.h1_prec, s.h1_shift = jcd._phase_h1(s, mx)
        check_invariants(s)
        s.x1 = jcd._phase_x1(s)
        check_invariants(s)


def test_numba_matches_numpy():
    sc, ch, tx, pr = scenario_batch(3, 6, T=12)
    a = jcd.run_schedule(jcd.init_state(sc, pr, tx.Y, backend="numba"), 10)
    b = jcd.run_schedule(jcd.init_state(sc, pr, tx.Y, backend="numpy"), 10)
    for name in ("z1_prec", "z1_shift", "z0_prec", "z0_shift", "h1_prec", "h1_shift", "x1"):
        x, y = getattr(a, name), getattr(b, name)
        scale = np.max(np.abs(y), axis=tuple(range(y.ndim - 3, y.ndim)), keepdims=True)
        assert np.all(np.abs(x - y) <= 1e-10 * np.maximum(scale, 1e-300)), name
    assert a.diagnostics == b.diagnostics


def test_numba_backend_rejects_multi_antenna():
    rng = np.random.default_rng(0)
    s = make_state(rng, N=2, backend="numba")
    with pytest.raises(ValueError):
        jcd.run_schedule(s, 1)


def test_constant_modulus_shortcut():
    sc, ch, tx, pr = scenario_batch(4, 2, L=4, K=3, N=2)
    a = jcd.run_schedule(jcd.init_state(sc, pr, tx.Y, share_amplitudes=True), 4)
    b = jcd.run_schedule(jcd.init_state(sc, pr, tx.Y, share_amplitudes=False), 4)
    for name in ("z1_prec", "z1_shift", "h1_prec", "h1_shift", "x1"):
        x, y = getattr(a, name), getattr(b, name)
        assert np.max(np.abs(x - y)) <= 1e-12 * max(np.max(np.abs(y)), 1.0) * 1e2, name
    amps, group = jcd._amplitude_groups(sc.constellation, True)
    assert len(amps) == 1 and np.all(group == 0)


# -- inference ---------------------------------------------------------------------

def test_infer_point_mass_and_ties():
    rng = np.random.default_rng(19)
    s = make_state(rng, L=1, K=1, T=2)
    s.x1[0, 0, 0] = np.eye(4)[2] * (1 - 3e-30) + 1e-30
    r = jcd.infer(s)
    assert r.decisions[0, 0] == 2 and r.symbols[0, 0] == X4[2]
    assert r.decisions[0, 1] == 0  # uniform: lowest index wins
    assert np.allclose(r.pmf.sum(-1), 1, atol=1e-12)


def test_infer_without_data():
    rng = np.random.default_rng(20)
    mean = crandn(rng, 2, 2, 1)
    cov = np.full((2, 2, 1, 1), 0.3 + 0j)
    s = jcd.initial_state(X4, 0.1, mean, cov, np.zeros((2, 1, 0), complex))
    r = jcd.infer(jcd.run_schedule(s, 3))
    assert np.allclose(r.h_mean, mean) and np.allclose(r.h_cov, cov)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=10, deadline=None)
def test_tree_exactness(seed):
    rng = np.random.default_rng(seed)
    mh, vh, s2 = crandn(rng, 1)[0], rng.uniform(0.2, 2.0), rng.uniform(0.05, 1.0)
    y = crandn(rng, 1)[0] * 2
    s = jcd.initial_state(X4, s2, np.array([[[mh]]]), np.array([[[[vh]]]]) + 0j,
                          np.array([[[y]]]), eta=1.0)
    r = jcd.infer(jcd.run_schedule(s, 3))
    ref = exact_posterior_marginals(np.array([[y]]), np.array([[mh]]), np.array([[vh]]), s2, X4)
    assert np.sum(np.abs(r.pmf[0, 0] - ref[0, 0])) <= 1e-6


@pytest.mark.parametrize("K", [1, 2, 3, 4])
def test_perfect_csi_noiseless(K):
    # K <= L*N with L = 4 single-antenna APs; noise 90 dB below the weakest link
    rng = np.random.default_rng(21)
    sc = make_scenario(sample_ue_positions(rng, K, 400), place_aps_grid(400, 2), T=5)
    sc.noise_var = 1e-9 * float(np.min(sc.gains)) * sc.tx_power
    ch = sample_channel(rng, sc, 1000)
    tx = generate_transmission(rng, sc, ch)
    pr = jcd.perfect_csi_prior(ch.H, sc.gains)
    r = jcd.infer(jcd.run_schedule(jcd.init_state(sc, pr, tx.Y), 10))
    assert np.mean(r.decisions != tx.symbol_idx) == 0.0
