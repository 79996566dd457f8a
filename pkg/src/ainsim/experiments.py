"""Power sweeps shared by the command line and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import DEFAULT_BOUNDS, ChannelRealization, sample_channel
from .metrics import dof_slope, residual_interference_ratio, sum_rate
from .transceiver import AlignedLink, TdmaLink

DEFAULT_P_GRID_DB = (30.0, 40.0, 50.0, 60.0)


def db_to_linear(p_db) -> np.ndarray:
    return 10.0 ** (np.asarray(p_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class SweepResult:
    """Per-power outcome of one link family on one channel."""

    powers_db: np.ndarray
    sinrs: np.ndarray        # (powers, streams)
    rates: np.ndarray        # (powers,)
    leakage: np.ndarray      # (powers,)
    field: str


def aligned_sweep(channel: ChannelRealization, powers_db: Sequence[float], n: int = 100_000,
                  seed=0, noise_var: float = 1.0, dest_noise_var=None) -> SweepResult:
    """Monte-Carlo sweep of the aligned scheme over hops 0 and 1 of ``channel``."""
    sinrs, rates, leak = [], [], []
    for p in db_to_linear(powers_db):
        link = AlignedLink.from_channel(channel, p, noise_var, dest_noise_var=dest_noise_var)
        res = link.simulate(n, seed)
        sinrs.append(res.sinrs)
        rates.append(sum_rate(res.sinrs, link.m, link.field))
        leak.append(residual_interference_ratio(link))
    return SweepResult(np.asarray(powers_db, float), np.array(sinrs), np.array(rates), np.array(leak),
                       "complex")


def rotation_sweep(F, G, powers_db: Sequence[float], n: int = 100_000, seed=0,
                   noise_var: float = 1.0, tolerance: float = 1e-9) -> SweepResult:
    """Three real streams over one constant complex use, per real dimension."""
    sinrs, rates, leak = [], [], []
    for p in db_to_linear(powers_db):
        link = AlignedLink.rotation(F, G, p, noise_var, tolerance)
        res = link.simulate(n, seed)
        sinrs.append(res.sinrs)
        rates.append(sum_rate(res.sinrs, link.m, "real"))
        leak.append(residual_interference_ratio(link))
    return SweepResult(np.asarray(powers_db, float), np.array(sinrs), np.array(rates), np.array(leak),
                       "real")


def tdma_sweep(channel: ChannelRealization, powers_db: Sequence[float], n: int = 100_000,
               seed=0, noise_var: float = 1.0) -> SweepResult:
    sinrs, rates = [], []
    for p in db_to_linear(powers_db):
        s = TdmaLink.from_channel(channel, p, noise_var).simulate(n, seed)
        sinrs.append(s)
        rates.append(sum_rate(s, s.size, "complex"))
    k = len(rates)
    return SweepResult(np.asarray(powers_db, float), np.array(sinrs), np.array(rates), np.zeros(k),
                       "complex")


def seed_sweep(kind: str, m: int, seed: int, index: int, powers_db: Sequence[float], n: int,
               bounds=DEFAULT_BOUNDS, noise_var: float = 1.0) -> SweepResult:
    """One seed of a multi-seed experiment; random streams keyed by (seed, index)."""
    ch = sample_channel(seed, 2, max(m, 2) if kind == "tdma" else m, "time_varying", bounds)
    stream = [int(seed), int(index)]
    if kind == "aligned":
        return aligned_sweep(ch, powers_db, n, stream, noise_var)
    if kind == "tdma":
        return tdma_sweep(ch, powers_db, n, stream, noise_var)
    raise ValueError(f"unknown scheme {kind!r}")


def slope_of(results: Sequence[SweepResult]) -> tuple[np.ndarray, float]:
    """Average the rate curves over channels, then regress."""
    rates = np.mean([r.rates for r in results], axis=0)
    return rates, dof_slope(rates, results[0].powers_db, results[0].field)


def dof_experiment(m: int, seeds: Sequence[int], powers_db=DEFAULT_P_GRID_DB, n: int = 100_000,
                   kind: str = "aligned", bounds=DEFAULT_BOUNDS, noise_var: float = 1.0,
                   executor=None):
    """Mean-rate DoF slope over channel seeds."""
    args = [(kind, m, s, i, powers_db, n, bounds, noise_var) for i, s in enumerate(seeds)]
    if executor is None:
        results = [seed_sweep(*a) for a in args]
    else:
        results = list(executor.map(_star, args))
    rates, slope = slope_of(results)
    return results, rates, slope


def _star(a):
    return seed_sweep(*a)
