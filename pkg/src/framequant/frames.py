"""Finite unit-norm tight frames for R^d: construction, checks, orderings.

A frame here is a set of N unit vectors in R^d (N >= d) stored as the rows
of an (N, d) matrix.  The frame operator S x = sum_i <x, e_i> e_i of a
unit-norm tight frame equals (N/d) I, which gives the exact expansion
x = (d/N) sum_i <x, e_i> e_i used throughout the quantization pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import VariationBoundError

HARMONIC = "harmonic"
EXPLICIT = "explicit"

IDENTITY = "identity"
SERPENTINE = "serpentine"
EXPLICIT_ORDER = "explicit"


@dataclass(frozen=True)
class Frame:
    """N unit-norm vectors in R^d, one per row of ``vectors``.

    ``kind`` is "harmonic" for the trigonometric construction below (only
    (d, N) need to be stored on disk) and "explicit" for anything else.
    Unit norms are enforced on construction; tightness is a property of the
    vector set and is checked by :func:`verify_funtf`.
    """

    d: int
    N: int
    vectors: np.ndarray
    kind: str = EXPLICIT

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float64))
        if v.ndim != 2 or v.shape != (self.N, self.d):
            raise ValueError(f"expected a ({self.N}, {self.d}) matrix, got {v.shape}")
        if self.d < 2:
            raise ValueError(f"dimension must be >= 2, got {self.d}")
        if self.N < self.d:
            raise ValueError(f"need at least d={self.d} vectors, got N={self.N}")
        if self.kind not in (HARMONIC, EXPLICIT):
            raise ValueError(f"unknown frame kind {self.kind!r}")
        norms = np.linalg.norm(v, axis=1)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > 1e-12:
            raise ValueError(f"rows must have unit norm (worst deviation {worst:.3g})")
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    def __eq__(self, other):
        return (
            isinstance(other, Frame)
            and self.kind == other.kind
            and self.d == other.d
            and self.N == other.N
            and np.array_equal(self.vectors, other.vectors)
        )


@dataclass(frozen=True)
class Permutation:
    """A visiting order of the N frame elements (0-based indices)."""

    order: np.ndarray
    provenance: str = EXPLICIT_ORDER

    def __post_init__(self):
        o = np.asarray(self.order, dtype=np.int64)
        if o.ndim != 1:
            raise ValueError("order must be a flat index sequence")
        n = o.size
        if not np.array_equal(np.sort(o), np.arange(n)):
            raise ValueError("order must be a bijection on 0..N-1")
        o.flags.writeable = False
        object.__setattr__(self, "order", o)
        if self.provenance not in (IDENTITY, SERPENTINE, EXPLICIT_ORDER):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n), provenance=IDENTITY)

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.order, np.arange(self.order.size)))

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.order, other.order)


@dataclass(frozen=True)
class FrameCheck:
    """Result of :func:`verify_funtf`."""

    unit_norm_ok: bool
    tight_ok: bool
    frame_bound_A: float | None
    max_norm_deviation: float = 0.0
    max_tightness_deviation: float = 0.0

    @property
    def ok(self) -> bool:
        return self.unit_norm_ok and self.tight_ok


def harmonic_vectors(d: int, N: int) -> np.ndarray:
    """Rows of the real harmonic frame H^d_N as an (N, d) float64 matrix.

    Row k stacks cos/sin pairs at frequencies 1..floor(d/2) evaluated at
    angle 2*pi*k/N, scaled to unit norm; odd d prepends the constant
    coordinate 1/sqrt(d).  For even d = N the frequency-d/2 sine column
    would vanish identically, so that case instead takes the full real
    Fourier basis (constant, cos/sin pairs, alternating-sign column),
    which is the orthonormal-basis member of the same family.
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    if N < d:
        raise ValueError(f"need N >= d, got d={d}, N={N}")
    k = np.arange(N)[:, None]
    if d % 2 == 0 and d == N:
        h = d // 2
        j = np.arange(1, h)[None, :]
        ang = 2.0 * np.pi * k * j / N
        out = np.empty((N, d))
        out[:, 0] = 1.0 / math.sqrt(N)
        out[:, 1 : 2 * h - 1 : 2] = math.sqrt(2.0 / N) * np.cos(ang)
        out[:, 2 : 2 * h : 2] = math.sqrt(2.0 / N) * np.sin(ang)
        out[:, -1] = np.where(np.arange(N) % 2 == 0, 1.0, -1.0) / math.sqrt(N)
        return out
    h = d // 2
    j = np.arange(1, h + 1)[None, :]
    ang = 2.0 * np.pi * k * j / N
    out = np.empty((N, d))
    off = d % 2
    if off:
        out[:, 0] = 1.0 / math.sqrt(d)
    out[:, off::2] = math.sqrt(2.0 / d) * np.cos(ang)
    out[:, off + 1 :: 2] = math.sqrt(2.0 / d) * np.sin(ang)
    return out


def harmonic_frame(d: int, N: int) -> Frame:
    """Construct H^d_N and verify it really is a unit-norm tight frame."""
    frame = Frame(d=d, N=N, vectors=harmonic_vectors(d, N), kind=HARMONIC)
    check = verify_funtf(frame, tol=1e-9)
    if not check.ok:
        raise ArithmeticError(
            f"harmonic construction for d={d}, N={N} failed tightness check: {check}"
        )
    return frame


def frame_operator(frame: Frame | np.ndarray) -> np.ndarray:
    """The d x d matrix of x -> sum_i <x, e_i> e_i, i.e. E^T E."""
    v = frame.vectors if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    return v.T @ v


def analysis(frame: Frame, x: np.ndarray) -> np.ndarray:
    """Coefficients <x, e_i> of ``x`` against every frame element."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != frame.d:
        raise ValueError(f"expected a length-{frame.d} vector, got shape {x.shape}")
    return x @ frame.vectors.T


def synthesis_dual(frame: Frame, coeffs: np.ndarray, perm: Permutation | None = None) -> np.ndarray:
    """Reconstruct sum_i c_i S^{-1} e_{p(i)} via a solve against S.

    Exact (to rounding) for any frame; for a unit-norm tight frame the
    solve coincides with the scalar dual (d/N) I.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    if c.shape[-1] != frame.N:
        raise ValueError(f"expected {frame.N} coefficients, got shape {c.shape}")
    rows = frame.vectors if perm is None else frame.vectors[perm.order]
    rhs = c @ rows
    return np.linalg.solve(frame_operator(frame), rhs.T).T


def frame_variation(frame: Frame | np.ndarray, perm: Permutation | None = None) -> float:
    """Total path length sum_i ||e_{p(i)} - e_{p(i+1)}|| of the visiting order."""
    v = frame.vectors if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    if perm is not None:
        v = v[perm.order]
    if len(v) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1)))


def serpentine_variation_limit(d: int, N: int) -> float:
    """Guaranteed path-length limit 4*sqrt(d+3)*(N^(1-1/d) - 1) for d >= 3."""
    return 4.0 * math.sqrt(d + 3) * (N ** (1.0 - 1.0 / d) - 1.0)


def serpentine_order(points: np.ndarray) -> np.ndarray:
    """Boustrophedon ordering of N points by recursive coordinate bucketing.

    Sort by the first coordinate, split into ceil(M^(1/r)) near-equal
    buckets (M points, r coordinates left), order each bucket recursively
    on the remaining coordinates, and reverse every other bucket so
    consecutive buckets join near their shared boundary.
    """
    pts = np.asarray(points, dtype=np.float64)
    n, d = pts.shape

    def rec(idx: np.ndarray, axis: int) -> np.ndarray:
        remaining = d - axis
        if remaining <= 1 or idx.size <= 2:
            return idx[np.argsort(pts[idx, axis], kind="stable")]
        buckets = math.ceil(idx.size ** (1.0 / remaining))
        ordered = idx[np.argsort(pts[idx, axis], kind="stable")]
        parts = []
        for i, chunk in enumerate(np.array_split(ordered, buckets)):
            sub = rec(chunk, axis + 1)
            parts.append(sub[::-1] if i % 2 else sub)
        return np.concatenate(parts)

    return rec(np.arange(n), 0)


def find_permutation(frame: Frame) -> Permutation:
    """Pick a visiting order with provably small frame variation.

    Harmonic frames keep the identity order (their variation is already
    uniformly bounded).  Anything else gets the serpentine ordering, whose
    variation is checked against :func:`serpentine_variation_limit`; for
    d >= 3 a violation raises, since downstream error guarantees assume it.
    """
    if frame.kind == HARMONIC or frame.N == 1:
        return Permutation.identity(frame.N)
    order = serpentine_order(frame.vectors)
    perm = Permutation(order, provenance=SERPENTINE)
    if frame.d >= 3:
        achieved = frame_variation(frame, perm)
        limit = serpentine_variation_limit(frame.d, frame.N)
        if achieved > limit:
            raise VariationBoundError(achieved, limit)
    return perm


def verify_funtf(frame: Frame | np.ndarray, tol: float = 1e-9) -> FrameCheck:
    """Check unit norms and tightness (S close to (N/d) I) of a vector set.

    Accepts a raw (N, d) matrix so that candidate sets can be screened
    before a :class:`Frame` is built from them.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = frame.vectors if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    n, d = v.shape
    norm_dev = float(np.max(np.abs(np.linalg.norm(v, axis=1) - 1.0)))
    s = frame_operator(v)
    tight_dev = float(np.max(np.abs(s - (n / d) * np.eye(d))))
    unit_ok = norm_dev <= tol
    tight_ok = tight_dev <= tol
    return FrameCheck(
        unit_norm_ok=unit_ok,
        tight_ok=tight_ok,
        frame_bound_A=n / d if tight_ok else None,
        max_norm_deviation=norm_dev,
        max_tightness_deviation=tight_dev,
    )
