"""Beamformer construction and independence checks.

Channel blocks may be given as diagonal extensions (1-D arrays of slot
coefficients or :class:`DiagonalExtension`) or as full square matrices,
which covers the real-rotation embedding and MIMO nodes.  Beamformer sets
are returned as matrices whose columns are the individual vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import mpmath
import numpy as np

from .channel import DiagonalExtension
from .errors import DegenerateInputError, ParameterError, SingularChannelError

DET_TOLERANCE = 1e-9
COND_CAP = 1e12
PHASE_TOLERANCE = 1e-9


def _block(x) -> np.ndarray:
    if isinstance(x, DiagonalExtension):
        return np.asarray(x.entries)
    return np.asarray(x)


def _blocks(*xs) -> tuple[list[np.ndarray], bool]:
    arrs = [_block(x) for x in xs]
    ndims = {a.ndim for a in arrs}
    if ndims == {1}:
        if len({a.size for a in arrs}) != 1:
            raise ParameterError("diagonal blocks must share one length")
        if any(np.any(a == 0) for a in arrs):
            raise SingularChannelError("zero diagonal channel entry")
        return arrs, True
    if ndims == {2}:
        shapes = {a.shape for a in arrs}
        if len(shapes) != 1 or arrs[0].shape[0] != arrs[0].shape[1]:
            raise ParameterError("matrix blocks must be square and share one shape")
        for a in arrs:
            if np.linalg.cond(a) > 1.0 / np.finfo(float).eps:
                raise SingularChannelError("channel matrix is singular")
        return arrs, False
    raise ParameterError("channel blocks must be all diagonal or all full matrices")


def cross_ratio(b11, b12, b21, b22) -> np.ndarray:
    """The alignment generator B11^-1 B12 B22^-1 B21 (diagonal entries or matrix)."""
    (b11, b12, b21, b22), diag = _blocks(b11, b12, b21, b22)
    if diag:
        return b12 * b21 / (b11 * b22)
    return np.linalg.solve(b11, b12) @ np.linalg.solve(b22, b21)


def _chain(b11, b12, b21, b22, m: Optional[int], sign: float):
    (b11, b12, b21, b22), diag = _blocks(b11, b12, b21, b22)
    n = b11.shape[0]
    if m is not None and m != n:
        raise ParameterError(f"extension length {m} does not match channel size {n}")
    if diag:
        gen = b12 * b21 / (b11 * b22)
        v_first = np.vander(gen, n, increasing=True)
        v_second = sign * (b21 / b22)[:, None] * v_first[:, : n - 1]
        return v_first, v_second
    gen = np.linalg.solve(b11, b12) @ np.linalg.solve(b22, b21)
    cols = [np.ones(n, dtype=gen.dtype)]
    for _ in range(n - 1):
        cols.append(gen @ cols[-1])
    v_first = np.stack(cols, axis=1)
    v_second = sign * np.linalg.solve(b22, b21) @ v_first[:, : n - 1]
    return v_first, v_second


def first_hop_beamformers(F11, F12, F21, F22, m: Optional[int] = None):
    """Source beamformers ``(V1, V2)`` with shapes (M, M) and (M, M-1).

    Column i of V1 is A^i applied to the all-ones vector, where
    A = F11^-1 F12 F22^-1 F21, and V2[:, i] = F22^-1 F21 V1[:, i].  This makes
    F11 V1[:, i+1] = F12 V2[:, i] and F21 V1[:, i] = F22 V2[:, i].
    """
    return _chain(F11, F12, F21, F22, m, 1.0)


def second_hop_beamformers(G11, G12, G21, G22, m: Optional[int] = None):
    """Relay beamformers ``(VR1, VR2)``, the neutralizing mirror of the source set."""
    return _chain(G11, G12, G21, G22, m, -1.0)


@dataclass(frozen=True)
class BeamformerSet:
    """Columns of v1 / vr1 (M of them) and v2 / vr2 (M - 1 of them)."""

    v1: np.ndarray
    v2: np.ndarray
    vr1: np.ndarray
    vr2: np.ndarray

    @property
    def m(self) -> int:
        return self.v1.shape[1]

    @classmethod
    def build(cls, first_hop, second_hop) -> "BeamformerSet":
        """From (2, 2, ...) blocks indexed [rx, tx]."""
        v1, v2 = first_hop_beamformers(first_hop[0][0], first_hop[0][1], first_hop[1][0], first_hop[1][1])
        vr1, vr2 = second_hop_beamformers(
            second_hop[0][0], second_hop[0][1], second_hop[1][0], second_hop[1][1]
        )
        return cls(v1, v2, vr1, vr2)


def _apply(block: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    return block[:, None] * vecs if block.ndim == 1 else block @ vecs


def _rel(lhs: np.ndarray, rhs: np.ndarray) -> float:
    if lhs.size == 0:
        return 0.0
    num = np.linalg.norm(lhs - rhs, axis=0)
    den = np.maximum(np.linalg.norm(lhs, axis=0), np.finfo(float).tiny)
    return float(np.max(num / den))


def alignment_residuals(first_hop, second_hop, beams: BeamformerSet) -> dict[str, float]:
    """Worst relative residual of each of the four alignment identities."""
    f = [[_block(first_hop[r][t]) for t in range(2)] for r in range(2)]
    g = [[_block(second_hop[r][t]) for t in range(2)] for r in range(2)]
    m = beams.m
    return {
        "relay1": _rel(_apply(f[0][0], beams.v1[:, 1:]), _apply(f[0][1], beams.v2)),
        "relay2": _rel(_apply(f[1][0], beams.v1[:, : m - 1]), _apply(f[1][1], beams.v2)),
        "dest1": _rel(_apply(g[0][0], beams.vr1[:, 1:]), -_apply(g[0][1], beams.vr2)),
        "dest2": _rel(-_apply(g[1][0], beams.vr1[:, : m - 1]), _apply(g[1][1], beams.vr2)),
    }


@dataclass(frozen=True)
class IndependenceReport:
    determinant_magnitude: float
    condition_number: float
    independent: bool
    hadamard_ratio: float
    vandermonde_det: Optional[float] = None
    cross_check_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def accurate_det(matrix: np.ndarray, dps: int = 60) -> complex:
    """Determinant of a float matrix evaluated in extended precision.

    Vandermonde-type matrices lose most of their determinant digits to
    cancellation in LAPACK's LU, so the factorization is redone in mpmath.
    """
    a = np.asarray(matrix, dtype=complex)
    with mpmath.workdps(dps):
        mat = mpmath.matrix([[mpmath.mpc(z.real, z.imag) for z in row] for row in a])
        d = mpmath.det(mat)
        return complex(d)


def vandermonde_det(generators) -> float:
    """|prod_{i<j} (g_j - g_i)|."""
    g = np.asarray(generators, dtype=complex)
    out = 1.0
    for j in range(g.size):
        for i in range(j):
            out *= abs(g[j] - g[i])
    return out


def independence_report(
    vectors,
    generators=None,
    tolerance: float = DET_TOLERANCE,
    cond_cap: float = COND_CAP,
) -> IndependenceReport:
    """Determinant and conditioning of stacked vectors (columns of ``vectors``).

    Independence requires |det| above ``tolerance`` times the product of row
    norms and a condition number below ``cond_cap``.  When the Vandermonde
    ``generators`` are supplied, |det| is cross-checked against the product
    formula.
    """
    mat = np.asarray(vectors)
    if mat.ndim == 1:
        mat = mat[:, None]
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ParameterError(f"need M vectors of length M, got shape {mat.shape}")
    det = abs(accurate_det(mat))
    row_norms = float(np.prod(np.linalg.norm(mat, axis=1)))
    ratio = det / row_norms if row_norms > 0 else 0.0
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(mat))
    if not math.isfinite(cond):
        cond = math.inf
    independent = bool(ratio > tolerance and cond < cond_cap)
    vdet = err = None
    if generators is not None:
        vdet = vandermonde_det(generators)
        scale = max(vdet, det)
        err = abs(det - vdet) / scale if scale > 0 else 0.0
    return IndependenceReport(det, cond, independent, ratio, vdet, err)


class PhaseReport(NamedTuple):
    first_hop_ok: bool
    second_hop_ok: bool
    margins: tuple[float, float]


def _phase_margin(b: np.ndarray) -> float:
    if np.any(b == 0):
        raise DegenerateInputError("phase condition needs nonzero coefficients")
    angle = float(np.angle(b[0, 1] * b[1, 0] / (b[0, 0] * b[1, 1])))
    d = abs(angle) % math.pi
    return min(d, math.pi - d)


def phase_condition(F, G, tolerance: float = PHASE_TOLERANCE) -> PhaseReport:
    """Check that the cross phase sums of each hop avoid multiples of pi."""
    F = np.asarray(F, dtype=complex).reshape(2, 2)
    G = np.asarray(G, dtype=complex).reshape(2, 2)
    mf, mg = _phase_margin(F), _phase_margin(G)
    return PhaseReport(mf > tolerance, mg > tolerance, (mf, mg))


def mimo_eigen_distinct(F11, F12, F21, F22, tolerance: float = 1e-9) -> tuple[bool, float]:
    """Whether F11^-1 F12 F22^-1 F21 has pairwise distinct eigenvalues."""
    mats = [np.atleast_2d(np.asarray(x, dtype=complex)) for x in (F11, F12, F21, F22)]
    if mats[0].ndim == 2 and mats[0].shape[0] != mats[0].shape[1]:
        raise ParameterError("MIMO blocks must be square")
    if any(m.shape != mats[0].shape for m in mats):
        raise ParameterError("MIMO blocks must share one shape")
    for m in mats:
        if np.linalg.cond(m) > 1e14:
            raise SingularChannelError("MIMO channel matrix is singular")
    prod = np.linalg.solve(mats[0], mats[1]) @ np.linalg.solve(mats[3], mats[2])
    eig = np.linalg.eigvals(prod)
    n = eig.size
    if n < 2:
        return True, math.inf
    gaps = np.abs(eig[:, None] - eig[None, :])[np.triu_indices(n, 1)]
    gap = float(gaps.min())
    return bool(gap > tolerance), gap
