"""Monte Carlo BER engine with counter-based seeding and early stopping.

A scenario is any callable ``scenario(snr_db, rng) -> (errors, bits)`` where
``errors`` and ``bits`` are per-user integer sequences for one trial. Trial
``t`` at grid index ``i`` always draws from
``SeedSequence(master_seed, spawn_key=(i, t))``, so results do not depend on
how trials are spread over workers.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfc

log = logging.getLogger(__name__)

Z95 = 1.959963984540054

Scenario = Callable[[float, np.random.Generator], tuple[Sequence[int], Sequence[int]]]


@dataclass(frozen=True)
class SimConfig:
    snr_grid_db: tuple[float, ...]
    max_trials: int = 10_000_000
    target_errors: int = 100
    master_seed: int = 0
    batch: int = 16
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.max_trials < 1 or self.target_errors < 1 or self.batch < 1:
            raise ValueError("max_trials, target_errors and batch must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    errors: tuple[int, ...]
    bits: tuple[int, ...]
    trials: int

    @property
    def ber(self) -> tuple[float, ...]:
        return tuple(e / b if b else 0.0 for e, b in zip(self.errors, self.bits))

    @property
    def ci95_halfwidth(self) -> tuple[float, ...]:
        return tuple(Z95 * math.sqrt(p * (1.0 - p) / b) if b else 0.0
                     for p, b in zip(self.ber, self.bits))


@dataclass(frozen=True)
class BerCurve:
    points: tuple[BerPoint, ...] = field(default=())

    def ber(self, user: int = 0) -> np.ndarray:
        return np.array([p.ber[user] for p in self.points])

    def rows(self):
        for p in self.points:
            for u, (ber, e, ci) in enumerate(zip(p.ber, p.errors, p.ci95_halfwidth)):
                yield p.snr_db, u, ber, e, p.trials, ci

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snr_db", "user", "ber", "errors", "trials", "ci95"])
            for snr, u, ber, e, t, ci in self.rows():
                w.writerow([repr(snr), u, repr(ber), e, t, repr(ci)])


def trial_rng(master_seed: int, snr_index: int, trial_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(snr_index, trial_index))
    return np.random.Generator(np.random.PCG64(ss))


def _run_trial(scenario, snr_db, seed, i, t):
    errors, bits = scenario(snr_db, trial_rng(seed, i, t))
    return np.asarray(errors, dtype=np.int64), np.asarray(bits, dtype=np.int64)


def run_ber(scenario: Scenario, cfg: SimConfig) -> BerCurve:
    """Estimate per-user BER at every grid point.

    A point stops at the first trial after which every measured user (one
    with a nonzero bit count) has at least ``target_errors`` errors, or after
    ``max_trials`` trials. Trials run in
    batches (optionally on a thread pool) but are accumulated in index order,
    so the stopping trial is the same for any worker count.
    """
    points = []
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for i, snr in enumerate(cfg.snr_grid_db):
            errors = bits = None
            t = 0
            done = False
            while not done and t < cfg.max_trials:
                idx = range(t, min(t + cfg.batch, cfg.max_trials))
                if pool is None:
                    results = [_run_trial(scenario, snr, cfg.master_seed, i, j) for j in idx]
                else:
                    results = list(pool.map(lambda j: _run_trial(scenario, snr, cfg.master_seed, i, j), idx))
                for e, b in results:
                    errors = e if errors is None else errors + e
                    bits = b if bits is None else bits + b
                    t += 1
                    measured = bits > 0
                    if measured.any() and errors[measured].min() >= cfg.target_errors:
                        done = True
                        break
            point = BerPoint(snr, tuple(int(x) for x in errors), tuple(int(x) for x in bits), t)
            log.debug("snr=%s ber=%s trials=%d", snr, point.ber, t)
            points.append(point)
    finally:
        if pool is not None:
            pool.shutdown()
    return BerCurve(tuple(points))


def qpsk_awgn_reference(ebn0_db: float) -> float:
    """Gray-mapped QPSK bit error probability ``½ erfc(√(Eb/N0))``."""
    return float(0.5 * erfc(math.sqrt(10.0 ** (ebn0_db / 10.0))))
