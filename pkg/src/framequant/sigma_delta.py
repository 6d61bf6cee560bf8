"""First-order sigma-delta quantization against a midrise alphabet.

The scalar quantizer maps onto the 2K symmetric levels
{(-K+1/2)*delta, ..., -delta/2, delta/2, ..., (K-1/2)*delta} (zero is never
a level).  The first-order recursion feeds back the running quantization
error:

    q[n] = nearest level to (u[n-1] + x[n]),   u[n] = u[n-1] + x[n] - q[n]

with u[0] = 0.  While every input stays within the representable range
(K - 1/2)*delta, the state never leaves [-delta/2, delta/2].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation
from .frames import Frame, Permutation, verify_funtf

# Relative slack for range checks; keeps minimal-step-size configurations
# from tripping on the last float64 ulp.
RANGE_RTOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """Midrise alphabet with 2K levels at step ``delta``."""

    K: int
    delta: float

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        if not (self.delta > 0):
            raise ValueError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "delta", float(self.delta))

    def values(self) -> np.ndarray:
        """All 2K levels in ascending order."""
        return alphabet_values(self.K, self.delta)

    @property
    def max_amplitude(self) -> float:
        """Largest representable magnitude (K - 1/2) * delta."""
        return (self.K - 0.5) * self.delta

    def level_to_value(self, level: np.ndarray | int) -> np.ndarray | float:
        """Value (-K + level + 1/2) * delta of a level index in 0..2K-1."""
        return (np.asarray(level, dtype=np.float64) - self.K + 0.5) * self.delta

    def quantize_to_level(self, v: np.ndarray | float) -> np.ndarray:
        """Index of the nearest level, ties toward the larger value,
        saturating beyond the extreme levels."""
        t = np.floor(np.asarray(v, dtype=np.float64) / self.delta + self.K)
        return np.clip(t, 0, 2 * self.K - 1).astype(np.int64)


def alphabet_values(K: int, delta: float) -> np.ndarray:
    """The 2K midrise levels for (K, delta), ascending."""
    a = Alphabet(K, delta)
    return (np.arange(2 * a.K) - a.K + 0.5) * a.delta


def scalar_quantize(v: float, alphabet: Alphabet) -> float:
    """Nearest alphabet level to ``v`` (ties -> larger, saturating)."""
    return float(alphabet.level_to_value(alphabet.quantize_to_level(v)))


@dataclass(frozen=True)
class SigmaDeltaTrace:
    """One run of the recursion: levels/values q[1..N] and states u[0..N].

    ``stable`` is False when some input exceeded the representable range,
    in which case the state bound |u| <= delta/2 is no longer guaranteed.
    """

    levels: np.ndarray
    q: np.ndarray
    u: np.ndarray
    alphabet: Alphabet
    stable: bool


def sd_quantize_sequence(x: np.ndarray, alphabet: Alphabet) -> SigmaDeltaTrace:
    """Run the first-order recursion over one input sequence."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.ndim != 1 or x.size < 1:
        raise ValueError("input must be a nonempty 1-D sequence")
    levels, u_final, u_max, u_trace = _sd_core(x[None, :], alphabet, keep_states=True)
    q = alphabet.level_to_value(levels[0])
    stable = bool(np.max(np.abs(x)) <= alphabet.max_amplitude * (1.0 + RANGE_RTOL))
    return SigmaDeltaTrace(levels=levels[0], q=q, u=u_trace[0], alphabet=alphabet, stable=stable)


def sd_quantize_batch(
    x: np.ndarray, alphabet: Alphabet, return_state_peak: bool = False
) -> np.ndarray | tuple[np.ndarray, float]:
    """Level indices for a (batch, N) array of independent sequences.

    With ``return_state_peak`` also returns max_n |u[n]| over the whole batch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected a (batch, N) array")
    levels, _, u_max, _ = _sd_core(x, alphabet, keep_states=False)
    return (levels, u_max) if return_state_peak else levels


def _sd_core(x: np.ndarray, alphabet: Alphabet, keep_states: bool):
    """Sequential-in-n recursion, vectorized across the batch axis."""
    b, n = x.shape
    k, delta = alphabet.K, alphabet.delta
    levels = np.empty((b, n), dtype=np.int64)
    u = np.zeros(b)
    u_max = 0.0
    states = np.zeros((b, n + 1)) if keep_states else None
    for i in range(n):
        v = u + x[:, i]
        j = np.clip(np.floor(v / delta + k), 0, 2 * k - 1).astype(np.int64)
        levels[:, i] = j
        u = v - (j - k + 0.5) * delta
        if keep_states:
            states[:, i + 1] = u
        u_max = max(u_max, float(np.max(np.abs(u))))
    return levels, u, u_max, states


@dataclass(frozen=True)
class VectorQuantization:
    """Sigma-delta codes of one vector against a frame, plus its rebuild."""

    levels: np.ndarray
    codes: np.ndarray
    reconstruction: np.ndarray
    trace: SigmaDeltaTrace


def quantize_vector(
    x: np.ndarray,
    frame: Frame,
    perm: Permutation,
    alphabet: Alphabet,
) -> VectorQuantization:
    """Quantize the frame expansion of ``x`` and rebuild it from the codes.

    Requires a unit-norm tight frame and every coefficient <x, e_i> within
    the representable amplitude (K - 1/2) * delta -- guaranteed whenever
    ||x|| fits, and exactly what keeps the recursion state in
    [-delta/2, delta/2].  The rebuild is (d/N) * sum_n q[n] e_{p(n)} and its
    error obeys the path-length bound delta*d/(2N) * (variation + 1).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (frame.d,):
        raise ValueError(f"expected a length-{frame.d} vector, got shape {x.shape}")
    check = verify_funtf(frame, tol=1e-9)
    if not check.ok:
        raise ConstraintViolation(
            f"frame is not unit-norm tight (norm dev {check.max_norm_deviation:.3g}, "
            f"tightness dev {check.max_tightness_deviation:.3g})"
        )
    rows = frame.vectors[perm.order]
    coeffs = rows @ x
    peak = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    if peak > alphabet.max_amplitude * (1.0 + RANGE_RTOL):
        raise ConstraintViolation(
            f"coefficient magnitude {peak:.6g} (vector norm {np.linalg.norm(x):.6g}) "
            f"exceeds representable amplitude (K - 1/2)*delta = {alphabet.max_amplitude:.6g}"
        )
    trace = sd_quantize_sequence(coeffs, alphabet)
    recon = (frame.d / frame.N) * (trace.q @ rows)
    return VectorQuantization(
        levels=trace.levels, codes=trace.q, reconstruction=recon, trace=trace
    )
