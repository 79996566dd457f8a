"""Amplify-and-forward gain analysis for layered 2x2 cascades."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelRealization
from .errors import DegenerateInputError, ParameterError

DIAG_MIN = 1e-6


@dataclass(frozen=True)
class GainAssignment:
    """Relay gains per layer, shape (layers, 2); layer l sits after hop l."""

    layers: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.layers, dtype=complex))
        if g.ndim != 2 or g.shape[1] != 2:
            raise ParameterError("gains must have shape (layers, 2)")
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "layers", g)

    @property
    def n_layers(self) -> int:
        return self.layers.shape[0]

    @classmethod
    def from_free(cls, free: np.ndarray) -> "GainAssignment":
        """Layers (1, g_l) from the free second gains."""
        free = np.asarray(free, dtype=complex)
        return cls(np.stack([np.ones_like(free), free], axis=1))

    @property
    def free(self) -> np.ndarray:
        return self.layers[:, 1] / self.layers[:, 0]

    def to_list(self) -> list:
        return [[float(z.real), float(z.imag)] for z in self.layers.ravel()]


@dataclass(frozen=True)
class NeutralizationResidual:
    off_diag: tuple[complex, complex]
    diag_min: float

    @property
    def norm(self) -> float:
        return math.hypot(abs(self.off_diag[0]), abs(self.off_diag[1]))

    def valid(self, tol: float, diag_tol: float = DIAG_MIN) -> bool:
        return self.norm < tol and self.diag_min > diag_tol


def _hops(channel, slot: int = 0) -> list[np.ndarray]:
    if isinstance(channel, ChannelRealization):
        if not 0 <= slot < channel.slots:
            raise ParameterError("slot out of range")
        return [np.asarray(channel.coefficients[h, :, :, slot], dtype=complex) for h in range(channel.n_hops)]
    return [np.asarray(h, dtype=complex) for h in channel]


def effective_matrix(channel, gains: GainAssignment, slot: int = 0) -> np.ndarray:
    """hop_H diag(layer_{H-1}) ... diag(layer_1) hop_1 for one slot."""
    hops = _hops(channel, slot)
    if gains.n_layers != len(hops) - 1:
        raise ParameterError(f"{len(hops)} hops need {len(hops) - 1} gain layers, got {gains.n_layers}")
    out = hops[0]
    for layer, hop in zip(gains.layers, hops[1:]):
        out = hop @ (layer[:, None] * out)
    return out


def residual(channel, gains: GainAssignment, slot: int = 0) -> NeutralizationResidual:
    e = effective_matrix(channel, gains, slot)
    return NeutralizationResidual((complex(e[1, 0]), complex(e[0, 1])), float(min(abs(e[0, 0]), abs(e[1, 1]))))


def two_hop_infeasibility(channel, slot: int = 0) -> float:
    """Relative gap between the two gain ratios that scalar AF relays would
    need to null both cross links; zero only on a measure-zero set."""
    hops = _hops(channel, slot)
    if len(hops) != 2:
        raise ParameterError("infeasibility check applies to 2-hop channels")
    F, G = hops
    d1 = F[0, 0] * G[1, 0]
    d2 = F[0, 1] * G[0, 0]
    if d1 == 0 or d2 == 0:
        raise DegenerateInputError("zero coefficient in gain-ratio denominator")
    r1 = -F[1, 0] * G[1, 1] / d1
    r2 = -F[1, 1] * G[0, 1] / d2
    return float(abs(r1 - r2) / (abs(r1) + abs(r2)))


@dataclass
class SolveResult:
    gains: GainAssignment
    converged: bool
    residual: float
    diag_min: float
    iterations: int
    restarts: int
    history: list = field(default_factory=list)

    def report(self, hops: int) -> dict:
        return {"hops": hops, "converged": self.converged, "residual": self.residual,
                "diag_min": self.diag_min, "iters": self.iterations, "gains": self.gains.to_list()}


def _jacobian(hops: list[np.ndarray], free: np.ndarray):
    """Off-diagonal residual and its derivative in each free gain."""
    n = len(free)
    diag = [np.array([1.0, g]) for g in free]
    # prefix[l] = diag_l hop_l ... hop_0 (signal just after layer l)
    right = [hops[0]]
    for l in range(n):
        right.append(hops[l + 1] @ (diag[l][:, None] * right[-1]))
    eff = right[-1]
    # left[l] = hop_H diag ... hop_{l+1} (everything after layer l)
    left = [None] * n
    acc = np.eye(2, dtype=complex)
    for l in range(n - 1, -1, -1):
        acc = acc @ hops[l + 1]
        left[l] = acc
        acc = acc * diag[l][None, :]
    r = np.array([eff[1, 0], eff[0, 1]])
    jac = np.empty((2, n), dtype=complex)
    for l in range(n):
        d = np.outer(left[l][:, 1], right[l][1, :])
        jac[:, l] = [d[1, 0], d[0, 1]]
    return r, jac, eff


def solve_gains(channel, init: Optional[GainAssignment] = None, max_iters: int = 100,
                tol: float = 1e-13, restarts: int = 10, seed=0, slot: int = 0,
                diag_tol: float = DIAG_MIN) -> SolveResult:
    """Damped Newton on the two cross-link equations in the free gains.

    The first gain of every layer is fixed to 1.  Steps are the minimum-norm
    least-squares solution of the linearized system, halved until the
    residual decreases.  A singular Jacobian, stagnation or a degenerate
    solution (a desired link near zero) triggers a restart from a jittered
    copy of the initial point.
    """
    hops = _hops(channel, slot)
    if len(hops) < 3:
        raise ParameterError("scalar AF neutralization is infeasible on 2 hops; need H >= 3")
    n = len(hops) - 1
    if init is None:
        init = GainAssignment.from_free(np.ones(n))
    if init.n_layers != n:
        raise ParameterError(f"init must have {n} layers")
    if np.any(init.layers == 0):
        raise ParameterError("initial gains must be nonzero")
    base = init.free
    rng = np.random.default_rng(seed)
    best: Optional[SolveResult] = None
    total = 0
    for attempt in range(restarts + 1):
        if attempt == 0:
            free = base.copy()
        else:
            jitter = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            free = base * (1 + 0.5 * attempt ** 0.5 * jitter)
        history = []
        r, jac, eff = _jacobian(hops, free)
        rn = float(np.linalg.norm(r))
        history.append(rn)
        it = 0
        for it in range(1, max_iters + 1):
            if rn < tol:
                break
            sv = np.linalg.svd(jac, compute_uv=False)
            if sv[-1] <= 1e-14 * max(1.0, sv[0]):
                break
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
            t = 1.0
            while t > 1e-10:
                cand = free + t * step
                r2, jac2, eff2 = _jacobian(hops, cand)
                if np.linalg.norm(r2) < rn:
                    break
                t *= 0.5
            else:
                break
            free, r, jac, eff = cand, r2, jac2, eff2
            rn = float(np.linalg.norm(r))
            history.append(rn)
        total += it
        dmin = float(min(abs(eff[0, 0]), abs(eff[1, 1])))
        ok = rn < tol and dmin > diag_tol and bool(np.all(free != 0))
        res = SolveResult(GainAssignment.from_free(free), ok, rn, dmin, total, attempt, history)
        if ok:
            return res
        if best is None or (rn, -dmin) < (best.residual, -best.diag_min):
            best = res
    best.converged = False
    best.iterations = total
    return best


def reduce_to_two_hops(channel: ChannelRealization, gains: GainAssignment, noise_var: float = 1.0):
    """Fold hops 2..H and relay layers 2..H-1 into one effective second hop.

    ``gains`` covers layers 2..H-1 (H-2 layers).  Returns the reduced
    2-hop realization and, per destination and slot, the extra noise
    variance contributed by the folded amplify-and-forward relays.
    """
    H = channel.n_hops
    if H < 3:
        raise ParameterError("reduction needs at least 3 hops")
    if gains.n_layers != H - 2:
        raise ParameterError(f"{H} hops need {H - 2} folded gain layers, got {gains.n_layers}")
    if np.any(gains.layers == 0):
        raise ParameterError("folded gains must be nonzero")
    m = channel.slots
    eff = np.empty((2, 2, m), dtype=complex)
    extra = np.zeros((2, m))
    for t in range(m):
        hops = [np.asarray(channel.coefficients[h, :, :, t], dtype=complex) for h in range(H)]
        acc = hops[1]
        for layer, hop in zip(gains.layers, hops[2:]):
            acc = hop @ (layer[:, None] * acc)
        eff[:, :, t] = acc
        # noise injected at layer l travels through diag(layer) and the hops after it
        for l, layer in enumerate(gains.layers):
            path = np.diag(layer)
            for hop_l in range(l + 2, H):
                path = hops[hop_l] @ path
                if hop_l + 1 < H:
                    path = np.diag(gains.layers[hop_l - 1]) @ path
            extra[:, t] += noise_var * np.sum(np.abs(path) ** 2, axis=1)
    coeffs = np.stack([channel.coefficients[0], eff])
    model = "time_varying" if channel.model == "time_varying" else "constant_complex"
    reduced = ChannelRealization(coeffs.astype(complex), model, None, channel.seed)
    return reduced, extra
