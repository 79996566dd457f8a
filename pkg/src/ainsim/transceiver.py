"""Source encoding, the full relay pipeline, and destination chain decoding.

Symbols travel as arrays of shape (streams, n): each column is one use of
the M-slot extension.  Source 1 sends M streams, source 2 sends M - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import relay
from .beamforming import BeamformerSet, _apply, phase_condition
from .channel import ChannelRealization, to_real_rotation
from .errors import DegenerateInputError, ParameterError

FIELDS = ("complex", "real")


def _draw(rng: np.random.Generator, shape, var: float, fld: str) -> np.ndarray:
    if fld == "real":
        return rng.standard_normal(shape) * math.sqrt(var)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(var / 2)


@dataclass(frozen=True)
class StreamFrame:
    """Unit-variance symbols for both sources plus per-stream powers."""

    x1: np.ndarray
    x2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        x1, x2 = np.atleast_2d(self.x1), np.asarray(self.x2)
        m = x1.shape[0]
        if x2.size == 0:
            x2 = np.zeros((0, x1.shape[1]), dtype=x1.dtype)
        x2 = np.atleast_2d(x2)
        if x2.shape[0] != m - 1 or x2.shape[1] != x1.shape[1]:
            raise ParameterError(f"source 2 needs {m - 1} streams of {x1.shape[1]} symbols")
        p1 = np.broadcast_to(np.asarray(self.p1, dtype=float), (m,))
        p2 = np.broadcast_to(np.asarray(self.p2, dtype=float), (m - 1,))
        if np.any(p1 < 0) or np.any(p2 < 0):
            raise ParameterError("stream powers must be nonnegative")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "p1", np.array(p1))
        object.__setattr__(self, "p2", np.array(p2))

    @property
    def m(self) -> int:
        return self.x1.shape[0]

    @property
    def n(self) -> int:
        return self.x1.shape[1]

    @staticmethod
    def equal_split(m: int, power: float) -> tuple[np.ndarray, np.ndarray]:
        p1 = np.full(m, power / m)
        p2 = np.full(m - 1, power / (m - 1)) if m > 1 else np.zeros(0)
        return p1, p2

    @classmethod
    def gaussian(cls, m: int, n: int, power: float, rng: np.random.Generator, field: str = "complex"):
        p1, p2 = cls.equal_split(m, power)
        x1 = _draw(rng, (m, n), 1.0, field)
        x2 = _draw(rng, (m - 1, n), 1.0, field)
        return cls(x1, x2, p1, p2)


def source_amplitudes(beams: BeamformerSet, p1, p2) -> tuple[np.ndarray, np.ndarray]:
    """Per-stream scalings so stream k contributes p_k to the per-slot power."""
    m = beams.m
    a1 = np.sqrt(m * np.asarray(p1, dtype=float)) / np.linalg.norm(beams.v1, axis=0)
    if m > 1:
        a2 = np.sqrt(m * np.asarray(p2, dtype=float)) / np.linalg.norm(beams.v2, axis=0)
    else:
        a2 = np.zeros(0)
    return a1, a2


def encode(frame: StreamFrame, beams: BeamformerSet, power: Optional[float] = None):
    """Transmit vectors (X1, X2), each of shape (M, n)."""
    if frame.m != beams.m:
        raise ParameterError(f"frame has M={frame.m}, beamformers have M={beams.m}")
    if power is not None:
        tol = 1e-12 * max(1.0, power)
        if frame.p1.sum() > power + tol or frame.p2.sum() > power + tol:
            raise ParameterError("per-stream powers exceed the source budget")
    a1, a2 = source_amplitudes(beams, frame.p1, frame.p2)
    x1 = beams.v1 @ (a1[:, None] * frame.x1)
    x2 = beams.v2 @ (a2[:, None] * frame.x2)
    return x1, x2


@dataclass(frozen=True)
class ScaleInfo:
    """Everything a destination must know to undo transmit-side scalings."""

    relay_scale: float
    a1: np.ndarray
    a2: np.ndarray


@dataclass(frozen=True)
class DecodeResult:
    estimates: np.ndarray
    projected: np.ndarray
    stream_sinr: Optional[np.ndarray] = None
    residual_interference_ratio: Optional[float] = None
    decode_order: tuple = ()


def _leak_ratio(inv: np.ndarray, y: np.ndarray, interference) -> Optional[float]:
    if interference is None or inv.shape[0] == 0:
        return None
    pi = np.mean(np.abs(inv @ interference) ** 2, axis=-1)
    pd = np.mean(np.abs(inv @ (y - interference)) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pd > 0, pi / pd, np.where(pi > 0, np.inf, 0.0))
    return float(np.max(ratio))


def _sinr(est: np.ndarray, reference) -> Optional[np.ndarray]:
    if reference is None:
        return None
    ref = np.atleast_2d(reference)
    err = np.mean(np.abs(est - ref) ** 2, axis=-1)
    sig = np.mean(np.abs(ref) ** 2, axis=-1)
    with np.errstate(divide="ignore"):
        return np.where(err > 0, sig / err, np.inf)


def _chain(projected: np.ndarray, scale: float, amps: np.ndarray) -> np.ndarray:
    # dimension k carries a_k x_k - a_{k-1} x_{k-1}; partial sums undo it
    return np.cumsum(projected / scale, axis=0) / amps[:, None]


def decode_d1(y1, g11, vr1, scale: ScaleInfo, reference=None, interference=None,
              cond_cap: float = relay.COND_CAP) -> DecodeResult:
    """Zero-force onto G11 vR1,k and chain-add to recover all M streams of source 1."""
    y1 = np.asarray(y1)
    if y1.ndim == 1:
        y1 = y1[:, None]
    inv = relay.zero_forcer(_apply(np.asarray(g11), vr1), cond_cap)
    proj = inv @ y1
    est = _chain(proj, scale.relay_scale, scale.a1)
    return DecodeResult(est, proj, _sinr(est, reference), _leak_ratio(inv, y1, interference),
                        tuple(range(est.shape[0])))


def decode_d2(y2, g21, g22, vr1, vr2, scale: ScaleInfo, reference=None, interference=None,
              cond_cap: float = relay.COND_CAP) -> DecodeResult:
    """Zero-force onto [G22 vR2,i | G21 vR1,M], drop the last dimension, chain-add."""
    y2 = np.asarray(y2)
    if y2.ndim == 1:
        y2 = y2[:, None]
    m = vr1.shape[1]
    if m == 1:
        empty = np.zeros((0, y2.shape[1]), dtype=y2.dtype)
        return DecodeResult(empty, empty, np.zeros(0) if reference is not None else None, None, ())
    cols = np.hstack([_apply(np.asarray(g22), vr2), _apply(np.asarray(g21), vr1[:, -1:])])
    inv = relay.zero_forcer(cols, cond_cap)[: m - 1]
    proj = inv @ y2
    est = _chain(proj, scale.relay_scale, scale.a2)
    return DecodeResult(est, proj, _sinr(est, reference), _leak_ratio(inv, y2, interference),
                        tuple(range(m - 1)))


@dataclass(frozen=True)
class LinkTrace:
    x1: np.ndarray
    x2: np.ndarray
    relay1: relay.RelayReport
    relay2: relay.RelayReport
    y1: np.ndarray
    y2: np.ndarray
    d1: DecodeResult
    d2: DecodeResult


@dataclass(frozen=True)
class LinkResult:
    """Monte-Carlo outcome of one link at one power."""

    sinr1: np.ndarray
    sinr2: np.ndarray
    field: str
    m: int

    @property
    def sinrs(self) -> np.ndarray:
        return np.concatenate([self.sinr1, self.sinr2])


def _as_blocks(hop) -> list[list[np.ndarray]]:
    return [[np.asarray(hop[r][t]) for t in range(2)] for r in range(2)]


class AlignedLink:
    """Aligned interference neutralization over one two-hop channel.

    ``first_hop`` and ``second_hop`` are indexed [rx][tx] and hold either
    length-M diagonal coefficient vectors or M x M matrices.  ``power`` is
    the per-dimension budget of every transmitter and ``noise_var`` the
    per-dimension relay noise.  ``dest_noise_var`` optionally gives a
    per-dimension destination noise variance of shape (2, M).
    """

    def __init__(self, first_hop, second_hop, power: float, noise_var: float = 1.0,
                 field: str = "complex", beams: Optional[BeamformerSet] = None,
                 cond_cap: float = relay.COND_CAP, dest_noise_var=None):
        if field not in FIELDS:
            raise ParameterError(f"field must be one of {FIELDS}")
        if not power > 0:
            raise ParameterError("power must be positive")
        if noise_var < 0:
            raise ParameterError("noise variance must be nonnegative")
        self.F = _as_blocks(first_hop)
        self.G = _as_blocks(second_hop)
        self.power = float(power)
        self.noise_var = float(noise_var)
        self.field = field
        self.cond_cap = cond_cap
        self.beams = beams if beams is not None else BeamformerSet.build(self.F, self.G)
        m = self.m = self.beams.m
        if dest_noise_var is None:
            dest_noise_var = np.full((2, m), self.noise_var)
        self.dest_noise_var = np.broadcast_to(np.asarray(dest_noise_var, dtype=float), (2, m)).copy()
        self._setup()

    @classmethod
    def from_channel(cls, channel: ChannelRealization, power: float, noise_var: float = 1.0,
                     **kwargs) -> "AlignedLink":
        """Link over hops 0 and 1 of a realization, diagonal extension view."""
        first = channel.hop(0)
        second = channel.hop(1)
        fld = "real" if channel.model == "constant_real" else "complex"
        kwargs.setdefault("field", fld)
        return cls(first, second, power, noise_var, **kwargs)

    @classmethod
    def rotation(cls, F, G, power: float, noise_var: float = 1.0, tolerance: float = 1e-9,
                 **kwargs) -> "AlignedLink":
        """Three real streams over one constant complex channel use.

        Each coefficient becomes a 2x2 scaled rotation acting on (Re, Im);
        both budget and noise are split evenly over the two real dimensions.
        Refuses channels whose cross phase sums sit on a multiple of pi.
        """
        F = np.asarray(F, dtype=complex).reshape(2, 2)
        G = np.asarray(G, dtype=complex).reshape(2, 2)
        report = phase_condition(F, G, tolerance)
        if not (report.first_hop_ok and report.second_hop_ok):
            err = DegenerateInputError(
                f"phase condition violated (margins {report.margins[0]:.3e}, {report.margins[1]:.3e})"
            )
            err.flag = "phase_degenerate"
            err.report = report
            raise err
        rf = [[to_real_rotation(F[r, t]).matrix() for t in range(2)] for r in range(2)]
        rg = [[to_real_rotation(G[r, t]).matrix() for t in range(2)] for r in range(2)]
        return cls(rf, rg, power / 2.0, noise_var / 2.0, field="real", **kwargs)

    # -- static design -------------------------------------------------
    def _setup(self):
        b, m, F, G = self.beams, self.m, self.F, self.G
        p1, p2 = StreamFrame.equal_split(m, self.power)
        self.a1, self.a2 = source_amplitudes(b, p1, p2)
        self.p1, self.p2 = p1, p2
        t1 = b.v1 * self.a1
        t2 = b.v2 * self.a2
        # relay zero-forcers; relay 2 keeps the first M-1 isolated values
        self.w1 = relay.zero_forcer(_apply(F[0][0], b.v1), self.cond_cap)
        self.w2 = relay.zero_forcer(_apply(F[1][0], b.v1), self.cond_cap)[: m - 1]
        s1 = self.w1 @ np.hstack([_apply(F[0][0], t1), _apply(F[0][1], t2)])
        s2 = self.w2 @ np.hstack([_apply(F[1][0], t1), _apply(F[1][1], t2)])
        c1 = s1 @ s1.conj().T + self.noise_var * self.w1 @ self.w1.conj().T
        c2 = s2 @ s2.conj().T + self.noise_var * self.w2 @ self.w2.conj().T
        self.relay_cov = (c1, c2)
        pw1 = relay.relay_power(b.vr1, c1)
        pw2 = relay.relay_power(b.vr2, c2)
        if not max(pw1, pw2) > 0:
            raise DegenerateInputError("relays would forward nothing")
        # the neutralization pairing ties both relays to one scale
        self.relay_scale = math.sqrt(self.power / max(pw1, pw2))
        self.relay_powers = (self.relay_scale ** 2 * pw1, self.relay_scale ** 2 * pw2)
        self.scale = ScaleInfo(self.relay_scale, self.a1, self.a2)

    # -- stage-by-stage pipeline ----------------------------------------
    def _noise(self, rng, n):
        m = self.m
        if rng is None:
            z = np.zeros((m, n))
            return z, z, z, z
        zr1 = _draw(rng, (m, n), self.noise_var, self.field)
        zr2 = _draw(rng, (m, n), self.noise_var, self.field)
        z1 = _draw(rng, (m, n), 1.0, self.field) * np.sqrt(self.dest_noise_var[0])[:, None]
        z2 = _draw(rng, (m, n), 1.0, self.field) * np.sqrt(self.dest_noise_var[1])[:, None]
        return zr1, zr2, z1, z2

    def _propagate(self, frame: StreamFrame, noise):
        b, F, G, m = self.beams, self.F, self.G, self.m
        x1, x2 = encode(frame, b)
        zr1, zr2, z1, z2 = noise
        yr1 = _apply(F[0][0], x1) + _apply(F[0][1], x2) + zr1
        yr2 = _apply(F[1][0], x1) + _apply(F[1][1], x2) + zr2
        iso1, gain1 = relay.isolate(yr1, _apply(F[0][0], b.v1), self.cond_cap)
        iso2, gain2 = relay.isolate(yr2, _apply(F[1][0], b.v1), self.cond_cap)
        iso2, gain2 = iso2[: m - 1], gain2[: m - 1]
        xr1 = self.relay_scale * (b.vr1 @ iso1)
        xr2 = self.relay_scale * (b.vr2 @ iso2)
        y1 = _apply(G[0][0], xr1) + _apply(G[0][1], xr2) + z1
        y2 = _apply(G[1][0], xr1) + _apply(G[1][1], xr2) + z2
        r1 = relay.RelayReport(iso1, xr1, gain1, self.relay_scale)
        r2 = relay.RelayReport(iso2, xr2, gain2, self.relay_scale)
        return x1, x2, r1, r2, y1, y2

    def run(self, frame: StreamFrame, rng: Optional[np.random.Generator] = None,
            measure_leakage: bool = False) -> LinkTrace:
        """Push one frame through every stage; ``rng=None`` runs noiselessly."""
        if frame.m != self.m:
            raise ParameterError("frame extension length does not match the link")
        noise = self._noise(rng, frame.n)
        x1, x2, r1, r2, y1, y2 = self._propagate(frame, noise)
        int1 = int2 = None
        if measure_leakage:
            zero = tuple(np.zeros_like(z) for z in self._noise(None, frame.n))
            only2 = StreamFrame(np.zeros_like(frame.x1), frame.x2, frame.p1, frame.p2)
            only1 = StreamFrame(frame.x1, np.zeros_like(frame.x2), frame.p1, frame.p2)
            int1 = self._propagate(only2, zero)[4]
            int2 = self._propagate(only1, zero)[5]
        G, b = self.G, self.beams
        d1 = decode_d1(y1, G[0][0], b.vr1, self.scale, frame.x1, int1, self.cond_cap)
        d2 = decode_d2(y2, G[1][0], G[1][1], b.vr1, b.vr2, self.scale, frame.x2, int2, self.cond_cap)
        return LinkTrace(x1, x2, r1, r2, y1, y2, d1, d2)

    def frame(self, n: int, rng: np.random.Generator) -> StreamFrame:
        return StreamFrame.gaussian(self.m, n, self.power, rng, self.field)

    def simulate(self, n: int = 100_000, seed=0) -> LinkResult:
        """Monte-Carlo per-stream SINR over ``n`` extension uses.

        The same seed reproduces the same symbols and noise at any power,
        which keeps slope estimates over a power grid smooth.
        """
        rng = np.random.default_rng(seed)
        fr = self.frame(n, rng)
        trace = self.run(fr, rng)
        return LinkResult(trace.d1.stream_sinr, trace.d2.stream_sinr, self.field, self.m)

    def transfer(self) -> tuple[np.ndarray, np.ndarray]:
        """Noise-free maps from the 2M-1 unit input symbols to the projected
        destination dimensions (before chain decoding).  Columns are ordered
        (x1,1..x1,M, x2,1..x2,M-1)."""
        m = self.m
        eye = np.eye(2 * m - 1)
        fr = StreamFrame(eye[:m], eye[m:], self.p1, self.p2)
        trace = self.run(fr)
        return trace.d1.projected, trace.d2.projected

    def analytic_sinr(self) -> LinkResult:
        """Per-stream SINR from the link's second-order statistics."""
        b, G, m, beta = self.beams, self.G, self.m, self.relay_scale
        inv1 = relay.zero_forcer(_apply(G[0][0], b.vr1), self.cond_cap)
        t1, t2 = self.transfer()
        out = []
        blocks = [(inv1, G[0][0], G[0][1], t1, self.a1, 0, self.dest_noise_var[0])]
        if m > 1:
            cols = np.hstack([_apply(G[1][1], b.vr2), _apply(G[1][0], b.vr1[:, -1:])])
            inv2 = relay.zero_forcer(cols, self.cond_cap)[: m - 1]
            blocks.append((inv2, G[1][0], G[1][1], t2, self.a2, m, self.dest_noise_var[1]))
        for inv, ga, gb, t, amps, off, dvar in blocks:
            k = inv.shape[0]
            low = np.tril(np.ones((k, k)))
            sig_map = low @ t / beta
            nr1 = low @ inv @ _apply(ga, b.vr1) @ self.w1
            nr2 = low @ inv @ _apply(gb, b.vr2) @ self.w2
            nd = low @ inv / beta
            s = []
            for i in range(k):
                own = abs(sig_map[i, off + i]) ** 2
                intf = np.sum(np.abs(sig_map[i]) ** 2) - own
                noise = self.noise_var * (np.sum(np.abs(nr1[i]) ** 2) + np.sum(np.abs(nr2[i]) ** 2))
                noise += np.sum(np.abs(nd[i]) ** 2 * dvar)
                s.append(own / (intf + noise))
            out.append(np.array(s))
        if m == 1:
            out.append(np.zeros(0))
        return LinkResult(out[0], out[1], self.field, m)


class TdmaLink:
    """Orthogonalized baseline: one source per slot, both relays amplify
    coherently toward the active destination."""

    def __init__(self, first_hop, second_hop, power: float, noise_var: float = 1.0):
        self.F = np.asarray(first_hop, dtype=complex)
        self.G = np.asarray(second_hop, dtype=complex)
        if self.F.ndim == 2:
            self.F = self.F[..., None]
            self.G = self.G[..., None]
        self.power = float(power)
        self.noise_var = float(noise_var)
        self.slots = max(2, self.F.shape[2])

    @classmethod
    def from_channel(cls, channel: ChannelRealization, power: float, noise_var: float = 1.0):
        return cls(channel.hop(0), channel.hop(1), power, noise_var)

    def _gains(self, t: int):
        k = t % 2
        s = t % self.F.shape[2]
        f = self.F[:, k, s]
        g = self.G[k, :, s]
        mag = np.sqrt(self.power / (np.abs(f) ** 2 * self.power + self.noise_var))
        alpha = mag * np.exp(-1j * np.angle(f * g))
        return k, f, g, alpha

    def simulate(self, n: int = 100_000, seed=0) -> np.ndarray:
        """Per-slot Monte-Carlo SINR of the active stream."""
        rng = np.random.default_rng(seed)
        out = []
        for t in range(self.slots):
            k, f, g, alpha = self._gains(t)
            x = _draw(rng, (n,), 1.0, "complex")
            zr = _draw(rng, (2, n), self.noise_var, "complex")
            zd = _draw(rng, (n,), self.noise_var, "complex")
            rx = f[:, None] * math.sqrt(self.power) * x + zr
            y = (g * alpha) @ rx + zd
            h = np.sum(g * alpha * f) * math.sqrt(self.power)
            err = np.mean(np.abs(y / h - x) ** 2)
            out.append(np.mean(np.abs(x) ** 2) / err)
        return np.array(out)

    def analytic_sinr(self) -> np.ndarray:
        out = []
        for t in range(self.slots):
            _, f, g, alpha = self._gains(t)
            sig = abs(np.sum(g * alpha * f)) ** 2 * self.power
            noise = self.noise_var * (np.sum(np.abs(g * alpha) ** 2) + 1.0)
            out.append(sig / noise)
        return np.array(out)
