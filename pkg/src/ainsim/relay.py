"""Relay processing: linear isolate-and-forward and integer hard decisions."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import mpmath
import numpy as np

from .errors import CapacityError, ConditioningError, DegenerateInputError, ParameterError

COND_CAP = 1e12
ENUMERATION_CAP = 100_000
# Vandermonde-structured effective matrices lose cond(A) digits in a float64
# inverse; small ones are inverted at extended precision and rounded once.
EXACT_INVERSE_MAX = 16
EXACT_INVERSE_DPS = 40


def _columns(effective_columns) -> np.ndarray:
    if isinstance(effective_columns, np.ndarray) and effective_columns.ndim == 2:
        return effective_columns
    return np.stack([np.asarray(c) for c in effective_columns], axis=1)


def zero_forcer(effective_columns, cond_cap: float = COND_CAP) -> np.ndarray:
    """Inverse of the stacked effective matrix, refusing ill-conditioned ones."""
    mat = _columns(effective_columns)
    if mat.shape[0] != mat.shape[1]:
        raise ParameterError(f"effective matrix must be square, got {mat.shape}")
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(mat))
    if not math.isfinite(cond) or cond >= cond_cap:
        raise ConditioningError(f"effective matrix condition number {cond:.3e} exceeds cap", cond)
    if mat.shape[0] > EXACT_INVERSE_MAX:
        return np.linalg.inv(mat)
    with mpmath.workdps(EXACT_INVERSE_DPS):
        inv = mpmath.matrix(mat.astype(complex).tolist()) ** -1
        out = np.array(inv.tolist(), dtype=complex)
    return out.real if np.isrealobj(mat) else out


def isolate(received, effective_columns, cond_cap: float = COND_CAP):
    """Zero-force ``received`` onto the effective directions.

    ``received`` may be a length-M vector or an (M, n) batch.  Returns the
    isolated values and the per-dimension noise gain (row norms of the
    inverse), so white input noise of variance s2 becomes noise of variance
    ``s2 * noise_gain**2`` on each isolated value.
    """
    inv = zero_forcer(effective_columns, cond_cap)
    y = np.asarray(received)
    if y.shape[0] != inv.shape[1]:
        raise ParameterError("received length does not match effective matrix")
    return inv @ y, np.linalg.norm(inv, axis=1)


def relay_power(vectors, cov) -> float:
    """Expected per-slot power of sum_k v_k s_k when E[s s^H] = cov."""
    v = np.asarray(vectors)
    m = v.shape[0]
    if v.shape[1] == 0:
        return 0.0
    return float(np.real(np.trace(v @ np.asarray(cov) @ v.conj().T))) / m


def forward_linear(isolated, relay_vectors, power: float, cov=None):
    """Re-beamform isolated values and scale to expected per-slot power ``power``.

    ``cov`` is the covariance of the isolated values (symbols plus carried
    noise); unit-power uncorrelated values are assumed when omitted.
    Returns ``(forwarded, power_scale)``.
    """
    v = _columns(relay_vectors)
    x = np.asarray(isolated)
    if v.shape[1] != x.shape[0]:
        raise ParameterError("one isolated value is needed per relay vector")
    if cov is None:
        cov = np.eye(v.shape[1])
    p = relay_power(v, cov)
    if not p > 0:
        raise DegenerateInputError("forwarded signal has zero power")
    scale = math.sqrt(power / p)
    return scale * (v @ x), scale


@dataclass(frozen=True)
class RelayReport:
    """What one relay did to one batch of received samples."""

    isolated: np.ndarray
    forwarded: np.ndarray
    noise_gain: np.ndarray
    power_scale: float


def decide_integers(received, directions, bound: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Vectorized exhaustive nearest-point detection.

    Finds the integer vector c in [-bound, bound]^K minimizing
    |y - sum_k d_k c_k| for every y in ``received``.  The first K-1
    coordinates are enumerated; for each candidate prefix the optimal last
    coordinate is the clipped rounding of the remainder, which makes the
    search exact while visiting (2*bound+1)^(K-1) prefixes.  Returns an
    integer array of shape (len(received), K).
    """
    d = np.asarray(directions, dtype=float)
    y = np.atleast_1d(np.asarray(received, dtype=float))
    k = d.size
    bound = int(bound)
    if k < 1:
        raise ParameterError("need at least one direction")
    if bound < 0:
        raise ParameterError("symbol bound must be nonnegative")
    if d[-1] == 0:
        raise DegenerateInputError("zero direction coefficient")
    count = (2 * bound + 1) ** (k - 1)
    if count > cap:
        raise CapacityError(f"candidate enumeration of {count} prefixes exceeds cap {cap}")
    if k == 1:
        last = np.clip(np.rint(y / d[0]), -bound, bound)
        return last.astype(np.int64)[:, None]
    axis = np.arange(-bound, bound + 1)
    prefixes = np.array(list(itertools.product(axis, repeat=k - 1)), dtype=np.int64)
    partial = prefixes @ d[:-1]
    out = np.empty((y.size, k), dtype=np.int64)
    chunk = max(1, 4_000_000 // max(1, prefixes.shape[0]))
    for s in range(0, y.size, chunk):
        ys = y[s : s + chunk]
        rem = ys[:, None] - partial[None, :]
        last = np.clip(np.rint(rem / d[-1]), -bound, bound)
        err = np.abs(rem - last * d[-1])
        best = np.argmin(err, axis=1)
        rows = np.arange(ys.size)
        out[s : s + chunk, :-1] = prefixes[best]
        out[s : s + chunk, -1] = last[rows, best].astype(np.int64)
    return out


def hard_decide(received: float, directions: Sequence[float], bound: int, cap: int = ENUMERATION_CAP) -> tuple:
    """Minimum-distance integer tuple for one real observation."""
    return tuple(int(c) for c in decide_integers([received], directions, bound, cap)[0])


def constellation_min_distance(directions, bound: int, cap: int = ENUMERATION_CAP) -> float:
    """Smallest gap between distinct points sum_k d_k c_k, c in [-bound, bound]^K.

    Equivalent to the minimum of |sum_k d_k e_k| over nonzero integer e in
    [-2 bound, 2 bound]^K, searched with the same prefix trick as the
    detector.
    """
    d = np.asarray(directions, dtype=float)
    k = d.size
    b2 = 2 * int(bound)
    if b2 == 0:
        return math.inf
    if k == 1:
        return abs(float(d[0]))
    count = (2 * b2 + 1) ** (k - 1)
    if count > cap:
        raise CapacityError(f"min-distance search of {count} prefixes exceeds cap {cap}")
    axis = np.arange(-b2, b2 + 1)
    prefixes = np.array(list(itertools.product(axis, repeat=k - 1)), dtype=np.int64)
    partial = prefixes @ d[:-1]
    last = np.clip(np.rint(-partial / d[-1]), -b2, b2)
    zero_prefix = ~prefixes.any(axis=1)
    last[zero_prefix] = 1
    return float(np.min(np.abs(partial + last * d[-1])))
