"""Rates, DoF slopes and end-to-end neutralization measurements."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError

MIN_POINTS = 3
MIN_SPAN_DB = 20.0


def sum_rate(sinrs: Sequence[float], m: int, field: str = "complex") -> float:
    """Bits per channel use (complex) or per real dimension (real), averaged over M slots."""
    s = np.asarray(sinrs, dtype=float)
    if s.size == 0:
        return 0.0
    if np.any(s < 0):
        raise ParameterError("SINR values must be nonnegative")
    bits = np.sum(np.log2(1.0 + s))
    if field == "real":
        bits *= 0.5
    elif field != "complex":
        raise ParameterError(f"unknown field {field!r}")
    return float(bits / m)


def dof_slope(rates: Sequence[float], powers_db: Sequence[float], field: str = "complex") -> float:
    """OLS slope of rate against log2 P (or 0.5 log2 P for the real field)."""
    r = np.asarray(rates, dtype=float)
    p = np.asarray(powers_db, dtype=float)
    if r.shape != p.shape:
        raise ParameterError("rates and powers must have equal length")
    if p.size < MIN_POINTS or np.ptp(p) < MIN_SPAN_DB:
        raise ParameterError(f"slope needs >= {MIN_POINTS} points spanning >= {MIN_SPAN_DB} dB")
    x = p / 10.0 * math.log2(10.0)
    if field == "real":
        x = 0.5 * x
    xc = x - x.mean()
    return float(np.dot(xc, r - r.mean()) / np.dot(xc, xc))


@dataclass
class LinkMetrics:
    per_stream_sinr: np.ndarray
    sum_rate: np.ndarray
    dof_slope: Optional[float]
    residual_interference_ratio: float
    p_grid: list = field(default_factory=list)


@dataclass(frozen=True)
class EndToEnd:
    """Desired chain blocks (amplitude-normalized) and cross-user leakage."""

    d1_desired: np.ndarray
    d2_desired: np.ndarray
    leakage: tuple[float, float]
    d1_raw: np.ndarray
    d2_raw: np.ndarray

    @property
    def max_leakage(self) -> float:
        return max(self.leakage)


def chain_template(k: int) -> np.ndarray:
    """Lower bidiagonal map: 1 on the diagonal, -1 just below it."""
    return np.eye(k) - np.eye(k, k=-1)


def template_error(block: np.ndarray) -> float:
    """Largest deviation from the chain template relative to the block scale."""
    k = block.shape[0]
    if k == 0:
        return 0.0
    scale = max(np.max(np.abs(block)), np.finfo(float).tiny)
    return float(np.max(np.abs(block - chain_template(k))) / scale)


def _row_leak(desired: np.ndarray, cross: np.ndarray) -> float:
    if desired.shape[0] == 0:
        return 0.0
    pd = np.sum(np.abs(desired) ** 2, axis=1)
    pc = np.sum(np.abs(cross) ** 2, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(pd > 0, pc / pd, np.where(pc > 0, np.inf, 0.0))
    return float(np.max(r))


def end_to_end_matrix(link) -> EndToEnd:
    """Probe a noiseless link with unit symbols on every input stream.

    The desired blocks are divided by the relay scale and the source
    amplitudes, so that an ideal scheme yields exactly the chain template.
    Leakage is the worst per-dimension ratio of cross-user to desired power.
    """
    m = link.m
    t1, t2 = link.transfer()
    beta = link.relay_scale
    d1 = t1[:, :m] / beta / link.a1[None, :]
    d2 = t2[:, m:] / beta / link.a2[None, :] if m > 1 else np.zeros((0, 0))
    leak = (_row_leak(t1[:, :m], t1[:, m:]), _row_leak(t2[:, m:], t2[:, :m]))
    return EndToEnd(d1, d2, leak, t1, t2)


def residual_interference_ratio(link) -> float:
    """Cross-user received power over desired power, worst destination dimension."""
    return end_to_end_matrix(link).max_leakage
