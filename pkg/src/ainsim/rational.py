"""Integer signaling over constant real channels with rationally
independent monomial directions.

Each source packs its streams into a single real symbol per channel use,
X1 = A * sum_k v1_k x1_k, with integer x drawn from [-q, q].  Relays detect
the integer sums aligned on each direction and re-encode them so that the
second hop cancels interference over the air.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization
from .errors import ConfigurationError, DegenerateInputError, ParameterError
from .relay import ENUMERATION_CAP, constellation_min_distance, decide_integers

DISTINCT_RTOL = 1e-12


@dataclass(frozen=True)
class MonomialDirections:
    v1: np.ndarray
    v2: np.ndarray
    vr1: np.ndarray
    vr2: np.ndarray
    degenerate: bool = False

    @property
    def m(self) -> int:
        return self.v1.size


def _monomials(b: np.ndarray, m: int, sign: float):
    b11, b12, b21, b22 = float(b[0, 0]), float(b[0, 1]), float(b[1, 0]), float(b[1, 1])
    first = np.array([(b12 * b21) ** i * (b11 * b22) ** (m - 1 - i) for i in range(m)])
    second = np.array(
        [sign * b11 ** (m - i) * b12 ** (i - 1) * b21 ** i * b22 ** (m - 1 - i) for i in range(1, m)]
    )
    return first, second


def _has_ties(v: np.ndarray) -> bool:
    a = np.abs(v)
    for i in range(v.size):
        for j in range(i + 1, v.size):
            if abs(a[i] - a[j]) <= DISTINCT_RTOL * max(a[i], a[j]):
                return True
    return False


def monomial_directions(F, G, m: int) -> MonomialDirections:
    """Closed-form direction coefficients for extension count ``m``.

    ``degenerate`` is set when two source or relay directions coincide in
    magnitude, in which case they are rationally dependent and the integer
    sums cannot be separated.
    """
    F = np.asarray(F, dtype=float).reshape(2, 2)
    G = np.asarray(G, dtype=float).reshape(2, 2)
    if m < 1:
        raise ParameterError("extension count must be at least 1")
    if np.any(F == 0) or np.any(G == 0):
        raise DegenerateInputError("rational scheme needs nonzero real coefficients")
    v1, v2 = _monomials(F, m, 1.0)
    vr1, vr2 = _monomials(G, m, -1.0)
    return MonomialDirections(v1, v2, vr1, vr2, _has_ties(v1) or _has_ties(vr1))


def constellation_bound(m: int, gamma: float, epsilon: float, power: float) -> int:
    return int(math.floor(gamma * power ** ((1 - epsilon) / (2 * (m + epsilon)))))


@dataclass(frozen=True)
class RationalConfig:
    m: int
    gamma: float
    epsilon: float
    p: float
    q_max: int
    a_norm: float
    b_norm: float
    directions: MonomialDirections

    @property
    def constellation_size(self) -> int:
        return 2 * self.q_max + 1


def build_config(m: int, gamma: float, epsilon: float, power: float,
                 directions: MonomialDirections) -> RationalConfig:
    """Constellation bound and power normalizations.

    The source normalization uses the energy sum sum_k v_k^2 (average power
    with independent symbols); the relay one uses (sum_k |v_k|)^2 so that the
    relay peak power never exceeds the budget.
    """
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0, 1)")
    if not gamma > 0 or not power > 0:
        raise ParameterError("gamma and power must be positive")
    if directions.m != m:
        raise ParameterError("directions were built for a different extension count")
    q = constellation_bound(m, gamma, epsilon, power)
    if q < 1:
        raise ConfigurationError(f"constellation is degenerate at P={power:g} (q_max={q})")
    expo = (m - 1 + 2 * epsilon) / (2 * (m + epsilon))
    xi1 = math.sqrt(float(np.sum(directions.v1 ** 2)))
    xi2 = math.sqrt(float(np.sum(directions.v2 ** 2))) if m > 1 else 0.0
    xi = min(1 / xi1, 1 / xi2) if xi2 > 0 else 1 / xi1
    xr1 = float(np.sum(np.abs(directions.vr1)))
    xr2 = float(np.sum(np.abs(directions.vr2))) if m > 1 else 0.0
    xr = min(1 / xr1, 1 / xr2) if xr2 > 0 else 1 / xr1
    a = xi / gamma * power ** expo
    b = xr / (2 * gamma) * power ** expo
    return RationalConfig(m, gamma, epsilon, power, q, a, b, directions)


def rate_lower_bound(symbol_error_rate: float, q_max: int) -> float:
    """Fano-style achievable rate per stream in bits per real symbol."""
    if not 0 <= symbol_error_rate <= 1:
        raise ParameterError("symbol error rate must lie in [0, 1]")
    return max(0.0, (1 - symbol_error_rate) * math.log2(2 * q_max + 1) - 1)


@dataclass(frozen=True)
class TrialOutcome:
    """Error counts for a batch of channel uses.

    ``relay_errors`` counts wrongly detected forwarded coordinates (M at
    relay 1, M - 1 at relay 2); ``dest_symbol_errors`` counts wrong symbol
    estimates of source 1 and source 2.  ``min_distance`` holds the
    constellation minimum distance at R1, R2, D1, D2.
    """

    trials: int
    m: int
    relay_errors: tuple[int, int]
    dest_symbol_errors: tuple[int, int]
    min_distance: tuple[float, float, float, float]
    source_power: tuple[float, float]
    relay_peak_power: tuple[float, float]

    @property
    def per_hop_min_distance(self) -> tuple[float, float]:
        return min(self.min_distance[:2]), min(self.min_distance[2:])

    def _rate(self, count: int, per_trial: int) -> float:
        total = self.trials * per_trial
        return count / total if total else math.nan

    @property
    def relay_ser(self) -> tuple[float, float]:
        return self._rate(self.relay_errors[0], self.m), self._rate(self.relay_errors[1], self.m - 1)

    @property
    def dest_ser(self) -> tuple[float, float]:
        return (self._rate(self.dest_symbol_errors[0], self.m),
                self._rate(self.dest_symbol_errors[1], self.m - 1))


def run_rational_batch(F, G, config: RationalConfig, trials: int, rng: np.random.Generator,
                       noise_var: float = 1.0, genie_relays: bool = False,
                       cap: int = ENUMERATION_CAP) -> TrialOutcome:
    """Simulate ``trials`` independent channel uses end to end."""
    F = np.asarray(F, dtype=float).reshape(2, 2)
    G = np.asarray(G, dtype=float).reshape(2, 2)
    d, m, q = config.directions, config.m, config.q_max
    A, B = config.a_norm, config.b_norm
    sd = math.sqrt(noise_var)
    n = int(trials)
    x1 = rng.integers(-q, q + 1, size=(m, n))
    x2 = rng.integers(-q, q + 1, size=(m - 1, n))
    tx1 = A * (d.v1 @ x1)
    tx2 = A * (d.v2 @ x2)

    # relay 1 sees (x1_1, x1_{i+1} + x2_i) along F11 v1_k
    true_r1 = x1.copy()
    true_r1[1:] += x2
    # relay 2 sees (x1_i + x2_i, x1_M) along F21 v1_k and forwards the first M-1
    true_r2 = x1.copy()
    true_r2[:-1] += x2
    dir_r1 = A * F[0, 0] * d.v1
    dir_r2 = A * F[1, 0] * d.v1
    yr1 = F[0, 0] * tx1 + F[0, 1] * tx2 + sd * rng.standard_normal(n)
    yr2 = F[1, 0] * tx1 + F[1, 1] * tx2 + sd * rng.standard_normal(n)
    if genie_relays:
        hat_r1, hat_r2 = true_r1, true_r2
    else:
        hat_r1 = decide_integers(yr1, dir_r1, 2 * q, cap).T
        hat_r2 = decide_integers(yr2, dir_r2, 2 * q, cap).T
    fwd2 = hat_r2[: m - 1]
    xr1 = B * (d.vr1 @ hat_r1)
    xr2 = B * (d.vr2 @ fwd2)
    relay_err = (int(np.sum(hat_r1 != true_r1)), int(np.sum(fwd2 != true_r2[: m - 1])))

    # D1: directions B G11 vR1_k carry (x1_1, x1_{k+1} - x1_k)
    y1 = G[0, 0] * xr1 + G[0, 1] * xr2 + sd * rng.standard_normal(n)
    dir_d1 = B * G[0, 0] * d.vr1
    hat_d1 = decide_integers(y1, dir_d1, 4 * q, cap).T
    est1 = np.cumsum(hat_d1, axis=0)
    err1 = int(np.sum(est1 != x1))

    # D2: directions B G22 vR2_i carry x2_i - x2_{i-1}; B G21 vR1_M is dropped
    y2 = G[1, 0] * xr1 + G[1, 1] * xr2 + sd * rng.standard_normal(n)
    err2 = 0
    dir_d2 = np.zeros(0)
    if m > 1:
        dir_d2 = B * np.concatenate([G[1, 1] * d.vr2, [G[1, 0] * d.vr1[-1]]])
        hat_d2 = decide_integers(y2, dir_d2, 4 * q, cap).T[: m - 1]
        est2 = np.cumsum(hat_d2, axis=0)
        err2 = int(np.sum(est2 != x2))

    mind = (
        constellation_min_distance(dir_r1, 2 * q, cap),
        constellation_min_distance(dir_r2[: m - 1], 2 * q, cap) if m > 1 else math.inf,
        constellation_min_distance(dir_d1, 4 * q, cap),
        constellation_min_distance(dir_d2, 4 * q, cap) if m > 1 else math.inf,
    )
    return TrialOutcome(
        n, m, relay_err, (err1, err2), mind,
        (float(np.mean(tx1 ** 2)), float(np.mean(tx2 ** 2))),
        (float(np.max(xr1 ** 2)), float(np.max(xr2 ** 2)) if m > 1 else 0.0),
    )


def _real_hops(channel: ChannelRealization):
    if channel.model != "constant_real":
        raise ParameterError("the rational scheme runs on constant_real channels")
    return channel.scalar_hop(0).real, channel.scalar_hop(1).real


def run_rational_trial(channel: ChannelRealization, config: RationalConfig, seed, trials: int = 1,
                       noise_var: float = 1.0, genie_relays: bool = False) -> TrialOutcome:
    """Run ``trials`` channel uses on a constant real channel with a fixed seed."""
    F, G = _real_hops(channel)
    return run_rational_batch(F, G, config, trials, np.random.default_rng(seed), noise_var, genie_relays)


@dataclass(frozen=True)
class RationalPoint:
    p: float
    config: RationalConfig
    outcome: TrialOutcome

    @property
    def rate_lb(self) -> tuple[float, float]:
        s1, s2 = self.outcome.dest_ser
        r2 = rate_lower_bound(s2, self.config.q_max) if not math.isnan(s2) else 0.0
        return rate_lower_bound(s1, self.config.q_max), r2

    def row(self) -> dict:
        r1, r2 = self.outcome.relay_ser
        d1, d2 = self.outcome.dest_ser
        lb1, lb2 = self.rate_lb
        return {"P": self.p, "M": self.config.m, "gamma": self.config.gamma,
                "epsilon": self.config.epsilon, "relay1_ser": r1, "relay2_ser": r2,
                "d1_ser": d1, "d2_ser": d2, "rate_lb_1": lb1, "rate_lb_2": lb2}


def rational_sweep(channel: ChannelRealization, m: int, powers: Sequence[float], trials: int,
                   gamma: float = 1.0, epsilon: float = 0.2, seed=0, noise_var: float = 1.0,
                   genie_relays: bool = False) -> list[RationalPoint]:
    """One batch per power, each with its own (seed, index) random stream."""
    F, G = _real_hops(channel)
    dirs = monomial_directions(F, G, m)
    out = []
    for i, p in enumerate(powers):
        cfg = build_config(m, gamma, epsilon, p, dirs)
        rng = np.random.default_rng([int(seed), i])
        out.append(RationalPoint(p, cfg, run_rational_batch(F, G, cfg, trials, rng, noise_var, genie_relays)))
    return out
