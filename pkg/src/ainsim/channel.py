"""Channel realizations for layered 2x2 relay networks.

A realization stores every coefficient of every hop for M extension slots
as an array of shape ``(hops, 2, 2, M)`` indexed ``[hop, rx, tx, slot]``.
Hop 0 is the source-to-relay hop (F), hop 1 the relay-to-destination hop
(G), and further hops follow for deeper cascades.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .rng import Xoshiro256

MODELS = ("time_varying", "constant_complex", "constant_real")

# +-6 dB per link.  Wider spreads are available through ``bounds`` but push
# the finite-SNR operating point of long extensions far from the DoF regime.
DEFAULT_BOUNDS = (0.5, 2.0)


def _check_bounds(bounds) -> tuple[float, float]:
    try:
        lo, hi = float(bounds[0]), float(bounds[1])
    except (TypeError, IndexError, ValueError) as exc:
        raise ParameterError(f"bounds must be a pair of reals, got {bounds!r}") from exc
    if not (lo > 0 and lo <= hi and math.isfinite(hi)):
        raise ParameterError(f"invalid magnitude bounds ({lo}, {hi})")
    return lo, hi


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelRealization:
    """Immutable set of hop coefficients for one network instance."""

    coefficients: np.ndarray
    model: str = "time_varying"
    bounds: Optional[tuple[float, float]] = None
    seed: Optional[int] = None

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if self.model not in MODELS:
            raise ParameterError(f"unknown channel model {self.model!r}")
        if c.ndim != 4 or c.shape[1:3] != (2, 2) or c.shape[0] < 2 or c.shape[3] < 1:
            raise ParameterError(f"coefficients must have shape (hops>=2, 2, 2, M>=1), got {c.shape}")
        dtype = float if self.model == "constant_real" else complex
        if self.model == "constant_real" and np.iscomplexobj(c) and np.any(c.imag != 0):
            raise ParameterError("constant_real channels must have real coefficients")
        c = np.real(c) if self.model == "constant_real" else c
        object.__setattr__(self, "coefficients", _readonly(np.asarray(c, dtype=dtype)))
        if self.bounds is not None:
            object.__setattr__(self, "bounds", _check_bounds(self.bounds))

    @property
    def n_hops(self) -> int:
        return self.coefficients.shape[0]

    @property
    def slots(self) -> int:
        return self.coefficients.shape[3]

    @property
    def is_constant(self) -> bool:
        return self.model != "time_varying"

    def hop(self, index: int) -> np.ndarray:
        """The (2, 2, M) coefficient block of one hop."""
        if not 0 <= index < self.n_hops:
            raise ParameterError(f"hop index {index} out of range")
        return self.coefficients[index]

    def scalar_hop(self, index: int) -> np.ndarray:
        """2x2 matrix of slot-0 coefficients (the whole hop for constant models)."""
        return np.array(self.hop(index)[:, :, 0])

    def with_coefficients(self, coefficients: np.ndarray) -> "ChannelRealization":
        return ChannelRealization(coefficients, self.model, self.bounds, self.seed)

    def to_dict(self) -> dict:
        hops = []
        for h in range(self.n_hops):
            coefs = []
            for rx in range(2):
                for tx in range(2):
                    seq = np.asarray(self.coefficients[h, rx, tx], dtype=complex)
                    coefs.append([[float(z.real), float(z.imag)] for z in seq])
            hops.append(coefs)
        return {
            "model": self.model,
            "hops": hops,
            "seed": self.seed,
            "bounds": list(self.bounds) if self.bounds is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelRealization":
        try:
            model = data.get("model", "time_varying")
            hops = data["hops"]
            arr = []
            for coefs in hops:
                if len(coefs) != 4:
                    raise ParameterError("each hop needs exactly 4 coefficient sequences")
                seqs = [[complex(float(e[0]), float(e[1])) for e in seq] for seq in coefs]
                if len({len(s) for s in seqs}) != 1:
                    raise ParameterError("coefficient sequences must share one length")
                arr.append(np.array(seqs, dtype=complex).reshape(2, 2, -1))
            coefficients = np.array(arr)
        except ParameterError:
            raise
        except (KeyError, TypeError, ValueError, IndexError, AttributeError) as exc:
            raise ParameterError(f"malformed channel description: {exc}") from exc
        bounds = data.get("bounds")
        return cls(coefficients, model, tuple(bounds) if bounds else None, data.get("seed"))

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"channel file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError("channel JSON must be an object")
        return cls.from_dict(data)


def sample_channel(
    seed: int,
    hops: int = 2,
    slots: int = 1,
    model: str = "time_varying",
    bounds: tuple[float, float] = DEFAULT_BOUNDS,
) -> ChannelRealization:
    """Draw a reproducible channel realization.

    Complex models use log-uniform magnitudes and uniform phases; the real
    model uses uniform magnitudes with a random sign.  Draws are taken in
    hop, rx, tx, slot order, magnitude before phase (or sign).  Constant
    models draw once per coefficient and replicate across slots.
    """
    if model not in MODELS:
        raise ParameterError(f"unknown channel model {model!r}")
    if int(hops) < 2:
        raise ParameterError("a network needs at least 2 hops")
    if int(slots) < 1:
        raise ParameterError("extension length must be at least 1")
    lo, hi = _check_bounds(bounds)
    gen = Xoshiro256(seed)
    n_draw = slots if model == "time_varying" else 1
    dtype = float if model == "constant_real" else complex
    out = np.empty((hops, 2, 2, slots), dtype=dtype)
    llo, lhi = math.log(lo), math.log(hi)
    for h in range(hops):
        for rx in range(2):
            for tx in range(2):
                seq = []
                for _ in range(n_draw):
                    u = gen.random()
                    if model == "constant_real":
                        mag = lo + u * (hi - lo)
                        sign = -1.0 if gen.random() < 0.5 else 1.0
                        seq.append(sign * mag)
                    else:
                        mag = math.exp(llo + u * (lhi - llo))
                        phase = 2.0 * math.pi * gen.random()
                        seq.append(mag * complex(math.cos(phase), math.sin(phase)))
                out[h, rx, tx] = seq if n_draw == slots else seq * slots
    return ChannelRealization(out, model, (lo, hi), int(seed))


def sample_mimo(seed: int, antennas: int, bounds: tuple[float, float] = DEFAULT_BOUNDS) -> np.ndarray:
    """Full (non-diagonal) first-hop MIMO matrices, shape (2, 2, N, N).

    Entries are drawn like time-varying coefficients, in rx, tx, row, column
    order.
    """
    if antennas < 1:
        raise ParameterError("antenna count must be positive")
    lo, hi = _check_bounds(bounds)
    gen = Xoshiro256(seed)
    llo, lhi = math.log(lo), math.log(hi)
    out = np.empty((2, 2, antennas, antennas), dtype=complex)
    for rx in range(2):
        for tx in range(2):
            for r in range(antennas):
                for c in range(antennas):
                    mag = math.exp(llo + gen.random() * (lhi - llo))
                    phase = 2.0 * math.pi * gen.random()
                    out[rx, tx, r, c] = mag * complex(math.cos(phase), math.sin(phase))
    return out


@dataclass(frozen=True)
class DiagonalExtension:
    """Diagonal M x M channel matrix over an M-slot symbol extension."""

    entries: np.ndarray = field()

    def __post_init__(self):
        e = np.atleast_1d(np.asarray(self.entries))
        if e.ndim != 1 or e.size < 1:
            raise ParameterError("a diagonal extension needs at least one entry")
        object.__setattr__(self, "entries", _readonly(e))

    @property
    def m(self) -> int:
        return self.entries.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.entries)


def extend(channel: ChannelRealization, hop: int, rx: int, tx: int) -> DiagonalExtension:
    """Diagonal extension view of one coefficient sequence (0-based indices)."""
    for name, idx, size in (("hop", hop, channel.n_hops), ("rx", rx, 2), ("tx", tx, 2)):
        if not isinstance(idx, (int, np.integer)) or not 0 <= idx < size:
            raise ParameterError(f"{name} index {idx!r} out of range [0, {size})")
    return DiagonalExtension(channel.coefficients[hop, rx, tx])


@dataclass(frozen=True)
class RealRotation:
    """Scaled 2x2 rotation: the real form of multiplication by a complex number."""

    magnitude: float
    phase: float

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.phase), math.sin(self.phase)
        return self.magnitude * np.array([[c, -s], [s, c]])

    def apply(self, x) -> np.ndarray:
        """Apply to real pairs stacked along the first axis (shape (2, ...))."""
        return np.tensordot(self.matrix(), np.asarray(x, dtype=float), axes=1)


def to_real_rotation(coefficient: complex) -> RealRotation:
    c = complex(coefficient)
    if c == 0:
        raise DegenerateInputError("zero coefficient has no rotation form")
    return RealRotation(abs(c), math.atan2(c.imag, c.real))


def real_embedding(z) -> np.ndarray:
    """Stack (Re z, Im z) along a new leading axis."""
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag])
