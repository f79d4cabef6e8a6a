"""Distributed execution of the EP engine over an emulated fronthaul.

Every access point keeps its own slice of the factor graph and runs the four
message phases locally.  Only categorical symbol messages cross the
fronthaul: after phase 4 each AP sends its ``K*T`` Psi1->x messages to the
CPU, the CPU multiplies them into ``m_tot`` and sends ``m_tot`` back, and
each AP divides out its own contribution.

Wire format of one message (little endian)::

    uint32 l | uint32 k | uint32 t | float64 w[0] ... float64 w[S-1]

Weights follow the fixed constellation order.  Exchanges go through real
``bytes`` objects so the byte count is exact.
"""
from dataclasses import dataclass, field

import numpy as np

from . import jcd
from .gaussian import CategoricalMessage, Diagnostics
from .scenario import crandn, qam4_constellation

HEADER_BYTES = 12
WEIGHT_BYTES = 8


def message_dtype(S):
    return np.dtype([("l", "<u4"), ("k", "<u4"), ("t", "<u4"), ("w", "<f8", (S,))])


def message_bytes(S):
    return HEADER_BYTES + WEIGHT_BYTES * S


def serialize(l, k, t, msg):
    """Encode one categorical message for AP ``l``, UE ``k``, channel use ``t``."""
    rec = np.zeros(1, message_dtype(len(msg.weights)))
    rec["l"], rec["k"], rec["t"] = l, k, t
    rec["w"][0] = msg.weights
    return rec.tobytes()


def deserialize(payload, support):
    """Inverse of :func:`serialize`; returns ``(l, k, t, CategoricalMessage)``."""
    support = np.asarray(support, complex)
    if len(payload) != message_bytes(len(support)):
        raise ValueError(f"expected {message_bytes(len(support))} bytes, got {len(payload)}")
    rec = np.frombuffer(payload, message_dtype(len(support)))[0]
    return int(rec["l"]), int(rec["k"]), int(rec["t"]), CategoricalMessage(support, rec["w"])


def pack_block(l, pmf):
    """Serialize all ``(k, t)`` messages of AP ``l``; ``pmf`` is ``(K, T, S)``."""
    K, T, S = pmf.shape
    rec = np.zeros(K * T, message_dtype(S))
    kk, tt = np.meshgrid(np.arange(K), np.arange(T), indexing="ij")
    rec["l"] = l
    rec["k"] = kk.ravel()
    rec["t"] = tt.ravel()
    rec["w"] = pmf.reshape(K * T, S)
    return rec.tobytes()


def unpack_block(payload, K, T, S):
    """Decode a block from :func:`pack_block` into ``(l, pmf)``.

    Messages may arrive in any order; they are placed by their header.
    """
    rec = np.frombuffer(payload, message_dtype(S))
    if len(rec) != K * T:
        raise ValueError(f"expected {K * T} messages, got {len(rec)}")
    ls = np.unique(rec["l"])
    if len(ls) != 1:
        raise ValueError("a block must carry messages of a single AP")
    pmf = np.empty((K, T, S))
    pmf[rec["k"], rec["t"]] = rec["w"]
    return int(ls[0]), pmf


@dataclass
class FronthaulLedger:
    """Message and byte counts, one entry per iteration."""

    uplink_count: list = field(default_factory=list)
    downlink_count: list = field(default_factory=list)
    uplink_bytes: list = field(default_factory=list)
    downlink_bytes: list = field(default_factory=list)
    gaussian_messages: int = 0

    def open_iteration(self):
        for lst in (self.uplink_count, self.downlink_count,
                    self.uplink_bytes, self.downlink_bytes):
            lst.append(0)

    def record(self, direction, payload, S):
        n = len(payload) // message_bytes(S)
        if direction == "up":
            self.uplink_count[-1] += n
            self.uplink_bytes[-1] += len(payload)
        else:
            self.downlink_count[-1] += n
            self.downlink_bytes[-1] += len(payload)

    @property
    def iterations(self):
        return len(self.uplink_count)

    @property
    def total_uplink(self):
        return sum(self.uplink_count)

    @property
    def total_downlink(self):
        return sum(self.downlink_count)

    def bytes_estimate(self, L, K, T, S):
        """Nominal bytes per iteration and direction: ``L*K*T`` messages."""
        return L * K * T * message_bytes(S)


# -- message-level CPU and AP operations -----------------------------------------

def cpu_aggregate(messages, diagnostics=None):
    """Normalized product of the ``L`` messages of one ``(k, t)`` pair.

    Rows whose product underflows to all zeros become uniform and are
    counted in ``diagnostics``.
    """
    if not messages:
        raise ValueError("need at least one message")
    support = messages[0].support
    for m in messages[1:]:
        if m.support.shape != support.shape or not np.array_equal(m.support, support):
            raise ValueError("categorical messages have different supports")
    w = np.stack([m.weights for m in messages])
    with np.errstate(divide="ignore"):
        dead = not np.any(np.isfinite(np.sum(np.log(w), axis=0)))
    if dead and diagnostics is not None:
        diagnostics.categorical_underflow += 1
    return CategoricalMessage(support, jcd.aggregate_pmf(w, axis=0))


def ap_extract(m_tot, own, x_prior=None, diagnostics=None):
    """Remove an AP's own message from ``m_tot`` (floored, renormalized)."""
    if m_tot.support.shape != own.support.shape or not np.array_equal(m_tot.support, own.support):
        raise ValueError("categorical messages have different supports")
    prior = np.ones(len(own.weights)) if x_prior is None else x_prior
    pmf, bad = jcd.extrinsic_pmf(m_tot.weights, own.weights, prior)
    if diagnostics is not None:
        diagnostics.categorical_underflow += bad
    return CategoricalMessage(own.support, pmf)


# -- emulated nodes ---------------------------------------------------------------

class AccessPoint:
    """One AP holding its slice of the factor graph (L axis of size 1)."""

    def __init__(self, l, state):
        self.l = l
        self.state = state
        K, T = state.dims[1:3]
        self.K, self.T, self.S = K, T, len(state.constellation)

    def step(self, downlink):
        """Consume ``m_tot`` blocks, run the four phases, return the uplink."""
        tot = np.empty(self.state.batch_shape + (1, self.K, self.T, self.S))
        for idx, payload in zip(np.ndindex(*self.state.batch_shape), downlink):
            l, pmf = unpack_block(payload, self.K, self.T, self.S)
            if l != self.l:
                raise ValueError(f"AP {self.l} received a block for AP {l}")
            tot[idx + (0,)] = pmf
        mx, bad = jcd.extrinsic_pmf(tot, self.state.x1, self.state.x_prior)
        self.state.diagnostics.categorical_underflow += bad
        jcd.iterate(self.state, mx)
        return [pack_block(self.l, self.state.x1[idx + (0,)])
                for idx in np.ndindex(*self.state.batch_shape)]


class CentralUnit:
    """Aggregates the uplink of all APs and broadcasts ``m_tot``."""

    def __init__(self, L, K, T, S, batch_shape, m_tot):
        self.L, self.K, self.T, self.S = L, K, T, S
        self.batch_shape = batch_shape
        self.m_tot = m_tot  # (..., K, T, S)

    def downlink(self, l):
        return [pack_block(l, self.m_tot[idx]) for idx in np.ndindex(*self.batch_shape)]

    def collect(self, uplinks):
        """``uplinks[l]`` is the list of blocks from AP ``l``, one per batch index."""
        x1 = np.empty(self.batch_shape + (self.L, self.K, self.T, self.S))
        for blocks in uplinks:
            for idx, payload in zip(np.ndindex(*self.batch_shape), blocks):
                l, pmf = unpack_block(payload, self.K, self.T, self.S)
                x1[idx + (l,)] = pmf
        self.m_tot = jcd.aggregate_pmf(x1)


def run_distributed(state, iterations, ledger=None):
    """Run the schedule as ``L`` APs and one CPU exchanging serialized messages.

    The CPU starts from the product of the Psi1->x messages already in
    ``state`` (uniform for a fresh state), which both sides know without an
    exchange.  Returns ``(state, ledger)`` with the reassembled state.
    """
    state = state.copy()
    L, K, T, _ = state.dims
    S = len(state.constellation)
    batch = state.batch_shape
    ledger = FronthaulLedger() if ledger is None else ledger
    aps = [AccessPoint(l, state.ap_view(l)) for l in range(L)]
    cpu = CentralUnit(L, K, T, S, batch, jcd.aggregate_pmf(state.x1))
    for _ in range(iterations):
        ledger.open_iteration()
        uplinks = []
        for ap in aps:
            down = cpu.downlink(ap.l)
            for payload in down:
                ledger.record("down", payload, S)
            up = ap.step(down)
            for payload in up:
                ledger.record("up", payload, S)
            uplinks.append(up)
        cpu.collect(uplinks)
    return _reassemble(state, aps), ledger


def _reassemble(state, aps):
    arrays = {}
    for name, core in jcd._CORE.items():
        full = getattr(state, name)
        if np.ndim(full) < core + 1:
            continue
        arrays[name] = np.concatenate([getattr(ap.state, name) for ap in aps],
                                      axis=-(core + 1))
    for name, value in arrays.items():
        setattr(state, name, value)
    diag = Diagnostics()
    for ap in aps:
        diag.merge(ap.state.diagnostics)
    state.diagnostics.merge(diag)
    state.iteration = aps[0].state.iteration
    return state


def ledger_check(L, K, T, iterations, seed=0):
    """Ledger of a unit-power 4-QAM problem of the given size run over the fronthaul."""
    rng = np.random.default_rng(seed)
    prior_mean = np.zeros((L, K, 1), complex)
    prior_cov = np.ones((L, K, 1, 1), complex)
    y = crandn(rng, (L, 1, T))
    st = jcd.initial_state(qam4_constellation(1.0), 1.0, prior_mean, prior_cov, y)
    _, ledger = run_distributed(st, iterations)
    return ledger
