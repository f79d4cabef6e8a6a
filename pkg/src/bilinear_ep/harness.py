"""Monte Carlo experiment driver: positions, fadings, metrics and export.

Every position is one task with its own random stream derived from the
master seed and the position index, so results do not depend on how tasks
are scheduled.  UE positions are drawn once per task; channels, noise and
data are redrawn for every transmission and shared by all algorithms.
"""
import csv
import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import jcd
from .baselines import (centralized_lmmse_detect,
                        stack_channels, stack_observations)
from .metrics import (empirical_cdf, link_error_power, nmse, ser,  # noqa: F401
                      weak_link_filter, weak_link_mask)
from .pilot import estimate_channels
from .scenario import (dbm_to_mw, generate_transmission, make_scenario,
                       place_aps_grid, sample_channel, sample_ue_positions)

ALGORITHMS = ("bilinear-ep", "lmmse", "ep-perfect-csi", "pilot-only")
# which metrics each algorithm reports
_REPORTS = {
    "bilinear-ep": ("ser", "nmse"),
    "ep-perfect-csi": ("ser",),
    "lmmse": ("ser",),
    "pilot-only": ("nmse",),
}


@dataclass
class ExperimentConfig:
    """All constants of one experiment; powers in dBm, lengths in metres."""

    L: int = 16
    K: int = 8
    N: int = 1
    side_m: float = 400.0
    tx_power_dbm: float = 14.0
    noise_dbm: float = -96.0
    P: int = None
    T: int = 10
    algos: tuple = ("bilinear-ep", "lmmse", "ep-perfect-csi", "pilot-only")
    iterations: int = 10
    eta: float = 0.7
    positions: int = 20
    fadings: int = 500
    batch: int = 50
    seed: int = 0
    workers: int = 1
    out: str = None
    # every fading of a position feeds both its SER and its NMSE samples;
    # NMSE is summed error power over summed channel power per link
    nmse_fadings: str = "all"

    def __post_init__(self):
        self.algos = tuple(self.algos)
        if self.P is None:
            self.P = self.K
        self.validate()

    def validate(self):
        for name in ("L", "K", "N", "T", "positions", "fadings", "batch", "workers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.P != self.K:
            raise ValueError("only P = K orthogonal pilots are configurable here")
        bad = [a for a in self.algos if a not in ALGORITHMS]
        if bad or not self.algos:
            raise ValueError(f"unknown algorithm(s) {bad}; choose from {ALGORITHMS}")
        grid = int(round(np.sqrt(self.L)))
        if grid * grid != self.L:
            raise ValueError("L must be a perfect square (APs on a square grid)")

    @classmethod
    def paper(cls, **kw):
        """Full-scale protocol: 300 positions with 10^4 transmissions each."""
        return cls(**{"positions": 300, "fadings": 10_000, **kw})

    @classmethod
    def desk(cls, **kw):
        """Reduced protocol: 20 positions with 500 transmissions each."""
        return cls(**{"positions": 20, "fadings": 500, **kw})

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["algos"] = list(self.algos)
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class MetricsRecord:
    """One CDF sample: SER per (position, UE) or NMSE per (position, AP, UE)."""

    algo: str
    position_id: int
    ue_id: int
    ap_id: int = None
    ser: float = None
    nmse: float = None
    excluded: bool = False


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: dict = field(default_factory=dict)

    def samples(self, algo, metric):
        vals = [getattr(r, metric) for r in self.records
                if r.algo == algo and getattr(r, metric) is not None and not r.excluded]
        return np.array(vals, float)


def scenario_for(config, ue_positions):
    return make_scenario(
        ue_positions, place_aps_grid(config.side_m, int(round(np.sqrt(config.L)))),
        N=config.N, T=config.T, tx_power=float(dbm_to_mw(config.tx_power_dbm)),
        noise_var=float(dbm_to_mw(config.noise_dbm)))


def position_rng(seed, position_id):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(position_id,)))


def _run_ep(scenario, priors, Y, config):
    state = jcd.init_state(scenario, priors, Y, eta=config.eta)
    return jcd.infer(jcd.run_schedule(state, config.iterations))


def run_position(config, position_id):
    """Simulate one position; returns its records in a fixed order."""
    rng = position_rng(config.seed, position_id)
    sc = scenario_for(config, sample_ue_positions(rng, config.K, config.side_m))
    L, K = sc.L, sc.K
    errors = {a: np.zeros(K) for a in config.algos}
    err_sum = {a: np.zeros((L, K)) for a in config.algos}
    pow_sum = np.zeros((L, K))
    done = 0
    while done < config.fadings:
        B = min(config.batch, config.fadings - done)
        ch = sample_channel(rng, sc, B)
        tx = generate_transmission(rng, sc, ch)
        priors = estimate_channels(sc, tx.Yp)
        h_true = np.swapaxes(ch.H, -1, -2)  # (B, L, K, N)
        pow_sum += np.sum(np.abs(h_true) ** 2, axis=(0, -1))
        for algo in config.algos:
            if algo == "bilinear-ep":
                res = _run_ep(sc, priors, tx.Y, config)
                dec = res.decisions
                err_sum[algo] += link_error_power(res.h_mean, h_true)[0]
            elif algo == "ep-perfect-csi":
                res = _run_ep(sc, jcd.perfect_csi_prior(ch.H, sc.gains), tx.Y, config)
                dec = res.decisions
            elif algo == "lmmse":
                dec = centralized_lmmse_detect(
                    stack_observations(tx.Y), stack_channels(priors.mean),
                    sc.noise_var, sc.tx_power, sc.constellation)
            else:
                err_sum[algo] += link_error_power(priors.mean, h_true)[0]
                continue
            errors[algo] += np.sum(dec != tx.symbol_idx, axis=(0, 2))
        done += B
    excluded = weak_link_mask(sc)
    records = []
    for algo in config.algos:
        if "ser" in _REPORTS[algo]:
            rates = errors[algo] / (config.fadings * config.T)
            records += [MetricsRecord(algo, position_id, k, ser=float(rates[k]))
                        for k in range(K)]
        if "nmse" in _REPORTS[algo]:
            means = err_sum[algo] / pow_sum
            for l in range(L):
                for k in range(K):
                    ex = bool(excluded[l, k])
                    records.append(MetricsRecord(
                        algo, position_id, k, ap_id=l,
                        nmse=None if ex else float(means[l, k]), excluded=ex))
    return records


def _summary_stats(x):
    if x.size == 0:
        return {"count": 0}
    q = np.percentile(x, [10, 25, 50, 75, 90])
    return {"count": int(x.size), "mean": float(np.mean(x)),
            "p10": float(q[0]), "p25": float(q[1]), "median": float(q[2]),
            "p75": float(q[3]), "p90": float(q[4])}


def summarize(result):
    summary = {"config": result.config.to_dict(), "algorithms": {}}
    for algo in result.config.algos:
        entry = {}
        for metric in _REPORTS[algo]:
            entry[metric] = _summary_stats(result.samples(algo, metric))
        if "nmse" in _REPORTS[algo]:
            entry["excluded_links"] = sum(1 for r in result.records
                                          if r.algo == algo and r.excluded)
        summary["algorithms"][algo] = entry
    return summary


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    return repr(v)


def write_outputs(result, out):
    """Write ``samples.csv``, ``summary.json`` and one CDF file per curve."""
    try:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "samples.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["algo", "position_id", "ue_id", "ap_id", "ser", "nmse", "excluded"])
            for r in result.records:
                w.writerow([r.algo, r.position_id, r.ue_id, _fmt(r.ap_id),
                            _fmt(r.ser), _fmt(r.nmse), _fmt(r.excluded)])
        with open(os.path.join(out, "summary.json"), "w") as fh:
            json.dump(result.summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for algo in result.config.algos:
            for metric in _REPORTS[algo]:
                x = result.samples(algo, metric)
                if x.size == 0:
                    continue
                values, frac = empirical_cdf(x)
                with open(os.path.join(out, f"cdf_{metric}_{algo}.csv"), "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["value", "fraction"])
                    w.writerows(zip(map(repr, values.tolist()), map(repr, frac.tolist())))
    except OSError as exc:
        raise OSError(f"could not write results to {out!r}: {exc}") from exc


def run_experiment(config, progress=None):
    """Run every position and return an :class:`ExperimentResult`.

    Records are ordered by position, then algorithm, so the output is the
    same for any number of workers.  Files are written if ``config.out`` is set.
    """
    ids = range(config.positions)
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            parts = list(pool.map(run_position, [config] * config.positions, ids))
    else:
        parts = []
        for p in ids:
            parts.append(run_position(config, p))
            if progress is not None:
                progress(p + 1, config.positions)
    result = ExperimentResult(config, [r for part in parts for r in part])
    result.summary = summarize(result)
    if config.out:
        write_outputs(result, config.out)
    return result
