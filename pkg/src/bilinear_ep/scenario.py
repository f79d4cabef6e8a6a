"""Cell-free uplink deployments, channels, noise and transmissions.

All powers are linear mW.  Channel matrices follow the ``H_l`` layout of
``N x K`` per access point, stacked as ``(..., L, N, K)``.
"""
import json
from dataclasses import dataclass

import numpy as np


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(np.asarray(mw, dtype=float))


def qam4_constellation(p):
    """4-QAM with average symbol energy ``p``: {+-a +- ja}, a = sqrt(p/2)."""
    if p <= 0:
        raise ValueError("symbol energy must be positive")
    a = np.sqrt(p / 2.0)
    return np.array([a + 1j * a, -a + 1j * a, -a - 1j * a, a - 1j * a])


def amplitude_set(constellation):
    """Distinct squared magnitudes |x|^2 of a constellation."""
    return np.unique(np.round(np.abs(constellation) ** 2, 12))


def place_aps_grid(side_m, grid):
    """APs on a ``grid x grid`` lattice spanning ``[0, side]^2``."""
    if grid < 1:
        raise ValueError("grid must be >= 1")
    if grid == 1:
        return np.zeros((1, 2))
    coords = np.arange(grid) * (side_m / (grid - 1))
    ii, jj = np.meshgrid(coords, coords, indexing="ij")
    return np.column_stack([ii.ravel(), jj.ravel()])


def sample_ue_positions(rng, K, side_m):
    return rng.uniform(0.0, side_m, size=(K, 2))


def pathloss_db(d_m):
    """Large-scale gain in dB at distance ``d_m`` metres."""
    d_m = np.asarray(d_m, dtype=float)
    if np.any(d_m <= 0):
        raise ValueError("distance must be positive")
    return -30.5 - 36.7 * np.log10(d_m)


def distances(ap_positions, ue_positions):
    """``(L, K)`` AP-UE distances in metres."""
    diff = ap_positions[:, None, :] - ue_positions[None, :, :]
    return np.sqrt(np.sum(diff ** 2, axis=-1))


@dataclass
class Scenario:
    """One deployment: geometry, powers, pilots and channel statistics.

    ``channel_cov`` holds the ``K`` diagonal blocks of every ``Xi_l`` as an
    ``(L, K, N, N)`` array; :meth:`xi` assembles the full block-diagonal
    ``NK x NK`` matrix of one AP.
    """

    L: int
    K: int
    N: int
    P: int
    T: int
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    tx_power: float
    noise_var: float
    pilot_matrix: np.ndarray
    constellation: np.ndarray
    channel_cov: np.ndarray

    @property
    def gains(self):
        """``(L, K)`` mean per-antenna channel power ``beta_kl``."""
        return np.real(np.trace(self.channel_cov, axis1=-2, axis2=-1)) / self.N

    def xi(self, l):
        out = np.zeros((self.N * self.K, self.N * self.K), complex)
        for k in range(self.K):
            s = slice(k * self.N, (k + 1) * self.N)
            out[s, s] = self.channel_cov[l, k]
        return out

    def to_dict(self):
        def cplx(a):
            a = np.asarray(a)
            return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}

        return {
            "L": self.L, "K": self.K, "N": self.N, "P": self.P, "T": self.T,
            "ap_positions": np.asarray(self.ap_positions).tolist(),
            "ue_positions": np.asarray(self.ue_positions).tolist(),
            "tx_power": self.tx_power, "noise_var": self.noise_var,
            "pilot_matrix": cplx(self.pilot_matrix),
            "constellation": cplx(self.constellation),
            "channel_cov": cplx(self.channel_cov),
        }

    @classmethod
    def from_dict(cls, d):
        """Inverse of :meth:`to_dict`.

        Positions may be omitted: APs then go on a square grid over
        ``side_m`` and UEs are redrawn from ``seed``.  A missing
        ``channel_cov`` is rebuilt from the positions.
        """
        def cplx(v):
            return np.asarray(v["re"], float) + 1j * np.asarray(v["im"], float)

        L, K, N = int(d["L"]), int(d["K"]), int(d["N"])
        if "ap_positions" in d:
            aps = np.asarray(d["ap_positions"], float).reshape(-1, 2)
        else:
            aps = place_aps_grid(float(d["side_m"]), int(round(np.sqrt(L))))
        if "ue_positions" in d:
            ues = np.asarray(d["ue_positions"], float).reshape(-1, 2)
        else:
            if "seed" not in d:
                raise ValueError("ue_positions absent and no seed to regenerate them")
            ues = sample_ue_positions(np.random.default_rng(int(d["seed"])), K,
                                      float(d["side_m"]))
        if len(aps) != L or len(ues) != K:
            raise ValueError("position counts do not match L and K")
        cov = cplx(d["channel_cov"]) if "channel_cov" in d else build_covariance(aps, ues, N)
        return cls(
            L=L, K=K, N=N, P=int(d["P"]), T=int(d["T"]),
            ap_positions=aps, ue_positions=ues,
            tx_power=float(d["tx_power"]), noise_var=float(d["noise_var"]),
            pilot_matrix=cplx(d["pilot_matrix"]),
            constellation=cplx(d["constellation"]),
            channel_cov=cov,
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def build_covariance(ap_positions, ue_positions, N):
    """Diagonal ``Xi_l`` blocks from distance-based pathloss, ``(L, K, N, N)``."""
    beta = 10.0 ** (pathloss_db(distances(ap_positions, ue_positions)) / 10.0)
    return beta[:, :, None, None] * np.eye(N)


def default_pilots(K, p, unit_energy=False):
    """Orthogonal pilots ``X_p = sqrt(p) I_K`` (or ``I_K`` if ``unit_energy``)."""
    scale = 1.0 if unit_energy else np.sqrt(p)
    return scale * np.eye(K, dtype=complex)


def make_scenario(ue_positions, ap_positions, N=1, T=10, tx_power=None,
                  noise_var=None, pilot_matrix=None, pilot_unit_energy=False,
                  constellation=None):
    """Assemble a :class:`Scenario` from positions and link parameters.

    Defaults are 14 dBm transmit power, -96 dBm noise, ``P = K`` orthogonal
    pilots and 4-QAM.
    """
    ap_positions = np.asarray(ap_positions, float).reshape(-1, 2)
    ue_positions = np.asarray(ue_positions, float).reshape(-1, 2)
    L, K = len(ap_positions), len(ue_positions)
    p = float(dbm_to_mw(14.0)) if tx_power is None else float(tx_power)
    s2 = float(dbm_to_mw(-96.0)) if noise_var is None else float(noise_var)
    if pilot_matrix is None:
        pilot_matrix = default_pilots(K, p, pilot_unit_energy)
    pilot_matrix = np.asarray(pilot_matrix, complex).reshape(K, -1)
    if constellation is None:
        constellation = qam4_constellation(p)
    return Scenario(
        L=L, K=K, N=N, P=pilot_matrix.shape[1], T=T,
        ap_positions=ap_positions, ue_positions=ue_positions,
        tx_power=p, noise_var=s2, pilot_matrix=pilot_matrix,
        constellation=np.asarray(constellation, complex),
        channel_cov=build_covariance(ap_positions, ue_positions, N),
    )


def _shape(size):
    return tuple(int(s) for s in np.atleast_1d(size)) if np.size(size) else ()


def crandn(rng, size):
    """Unit-variance circularly-symmetric complex normal draws."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


@dataclass
class ChannelRealization:
    H: np.ndarray  # (..., L, N, K)


@dataclass
class TransmissionBatch:
    symbol_idx: np.ndarray  # (..., K, T) indices into the constellation
    X: np.ndarray           # (..., K, T)
    Yp: np.ndarray          # (..., L, N, P)
    Y: np.ndarray           # (..., L, N, T)


def sample_channel(rng, scenario, size=()):
    """Draw ``vec(H_l) ~ CN(0, Xi_l)`` independently for every AP."""
    size = _shape(size)
    w = crandn(rng, size + (scenario.L, scenario.K, scenario.N))
    cov = scenario.channel_cov
    diag = np.diagonal(cov, axis1=-2, axis2=-1)
    if np.count_nonzero(cov - diag[..., None] * np.eye(scenario.N)):
        root = np.linalg.cholesky(cov)
        h = np.einsum("lkij,...lkj->...lki", root, w)
    else:
        h = np.sqrt(np.real(diag)) * w
    return ChannelRealization(np.swapaxes(h, -1, -2))


def sample_noise(rng, scenario, size=()):
    """Noise for pilot and data phases, ``(..., L, N, P + T)``."""
    shape = _shape(size) + (scenario.L, scenario.N, scenario.P + scenario.T)
    if scenario.noise_var == 0:
        return np.zeros(shape, complex)
    return np.sqrt(scenario.noise_var) * crandn(rng, shape)


def generate_transmission(rng, scenario, channel, noise=None):
    """Draw i.i.d. uniform data symbols and form the received signals.

    ``Ybar_l = H_l [X_p, X] + N_l``.  Noise is drawn from ``rng`` unless given.
    """
    batch = channel.H.shape[:-3]
    idx = rng.integers(0, len(scenario.constellation), size=batch + (scenario.K, scenario.T))
    X = scenario.constellation[idx]
    if noise is None:
        noise = sample_noise(rng, scenario, batch)
    Xp = np.broadcast_to(scenario.pilot_matrix, batch + scenario.pilot_matrix.shape)
    Xbar = np.concatenate([Xp, X], axis=-1)
    Ybar = np.einsum("...lnk,...kt->...lnt", channel.H, Xbar) + noise
    return TransmissionBatch(idx, X, Ybar[..., :scenario.P], Ybar[..., scenario.P:])
