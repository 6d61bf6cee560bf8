"""Matrix quantization: sigma-delta codes per column (or row) of a weight matrix.

A weight matrix W (rows x cols) is quantized one column at a time against a
unit-norm tight frame on R^rows ("column" mode; "row" mode transposes first).
Each column's frame coefficients run through the first-order recursion and
the resulting level indices are kept as a (vectors x N) code matrix, from
which the quantized matrix is rebuilt as (d/N) * sum_k value[j,k] e_{p(k)}.

Level indices, not float values, are the storage representation: a code
costs ceil(log2(2K)) bits, so K = 1 really is one bit per code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation
from .frames import Frame, Permutation, verify_funtf
from .sigma_delta import RANGE_RTOL, Alphabet, sd_quantize_batch

COLUMN = "column"
ROW = "row"

MAX_K = 1 << 15  # codes are stored as uint16


@dataclass(frozen=True)
class QuantizedMatrix:
    """Sigma-delta codes of one weight matrix plus everything needed to rebuild it.

    ``codes[j, k]`` is the level index (0..2K-1) of step k in the recursion
    for quantized vector j; vectors are columns of the original matrix in
    column mode and rows in row mode.  ``rows``/``cols`` keep the original
    (possibly bias-augmented) shape.
    """

    codes: np.ndarray
    K: int
    delta: float
    frame: Frame
    permutation: Permutation
    mode: str
    rows: int
    cols: int
    bias_folded: bool = False

    def __post_init__(self):
        if self.mode not in (COLUMN, ROW):
            raise ValueError(f"unknown mode {self.mode!r}")
        c = np.asarray(self.codes)
        n_vectors = self.cols if self.mode == COLUMN else self.rows
        if c.shape != (n_vectors, self.frame.N):
            raise ValueError(
                f"codes shape {c.shape} does not match "
                f"({n_vectors} vectors, N={self.frame.N})"
            )
        if c.size and (c.min() < 0 or c.max() >= 2 * self.K):
            raise ValueError("code indices must lie in 0..2K-1")
        expected_d = self.rows if self.mode == COLUMN else self.cols
        if self.frame.d != expected_d:
            raise ValueError(
                f"frame dimension {self.frame.d} does not match quantized-vector "
                f"length {expected_d} in {self.mode} mode"
            )
        if self.permutation.order.size != self.frame.N:
            raise ValueError("permutation length does not match frame size")
        c = np.ascontiguousarray(c, dtype=np.uint16)
        c.flags.writeable = False
        object.__setattr__(self, "codes", c)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.K, self.delta)

    @property
    def n_vectors(self) -> int:
        return self.codes.shape[0]

    @property
    def bits_per_code(self) -> int:
        return bits_per_code(self.K)

    def code_values(self) -> np.ndarray:
        """Codes as alphabet values, shape (vectors, N)."""
        return (self.codes.astype(np.float64) - self.K + 0.5) * self.delta

    def reconstruct(self) -> np.ndarray:
        return reconstruct(self)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return matvec_codes(self, x)


def bits_per_code(K: int) -> int:
    """Bits needed per stored code: ceil(log2(2K))."""
    return max(1, int(2 * K - 1).bit_length())


def vector_norms(W: np.ndarray, mode: str = COLUMN) -> np.ndarray:
    """Norms of the vectors being quantized: columns or rows of W."""
    W = np.asarray(W, dtype=np.float64)
    axis = 0 if mode == COLUMN else 1
    return np.linalg.norm(W, axis=axis)


def select_K_delta(
    W: np.ndarray,
    mode: str = COLUMN,
    bits: int | None = None,
    delta: float | None = None,
    K: int | None = None,
    headroom: float = 1.0,
) -> tuple[int, float]:
    """Choose (K, delta) so every quantized vector fits: max||w_j|| <= (K-1/2)delta.

    Exactly one policy applies: a bit budget (K = 2^(bits-1), delta scaled to
    the largest vector norm), a fixed delta (minimal K), or an explicit
    (K, delta) pair which is validated only.
    """
    if headroom < 1.0:
        raise ValueError("headroom must be >= 1")
    policies = sum([bits is not None, K is not None, delta is not None and K is None])
    if policies != 1:
        raise ValueError("specify exactly one of: bits, delta, (K, delta)")
    norms = vector_norms(W, mode)
    mx = float(norms.max()) if norms.size else 0.0

    if bits is not None:
        if bits < 1:
            raise ValueError("bit budget must be >= 1")
        if mx == 0.0:
            raise ValueError("all-zero matrix: bit-budget policy cannot set a step size")
        k = 1 << (bits - 1)
        return k, headroom * mx / (k - 0.5)

    if K is None:
        if not (delta > 0):
            raise ValueError("delta must be positive")
        k = max(1, math.ceil(mx / delta + 0.5))
        return k, float(delta)

    if delta is None or not (delta > 0) or K < 1:
        raise ValueError("explicit policy needs K >= 1 and delta > 0")
    limit = (K - 0.5) * delta * (1.0 + RANGE_RTOL)
    if mx > limit:
        j = int(np.argmax(norms))
        raise ConstraintViolation(
            f"vector {j} has norm {mx:.6g} > (K - 1/2)*delta = {(K - 0.5) * delta:.6g}"
        )
    return int(K), float(delta)


def quantize_matrix(
    W: np.ndarray,
    frame: Frame,
    perm: Permutation,
    K: int,
    delta: float,
    mode: str = COLUMN,
    bias_folded: bool = False,
) -> QuantizedMatrix:
    """Quantize every column (or row) of W against ``frame`` in visiting order ``perm``."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError("W must be a matrix")
    if mode not in (COLUMN, ROW):
        raise ValueError(f"unknown mode {mode!r}")
    rows, cols = W.shape
    if K > MAX_K:
        raise ValueError(f"K = {K} exceeds the supported maximum {MAX_K}")
    target = W if mode == COLUMN else W.T
    d, n_vectors = target.shape
    if frame.d != d:
        raise ValueError(
            f"frame dimension {frame.d} does not match quantized-vector length {d} "
            f"({mode} mode on a {rows}x{cols} matrix)"
        )
    check = verify_funtf(frame, tol=1e-9)
    if not check.ok:
        raise ConstraintViolation(
            f"frame is not unit-norm tight (norm dev {check.max_norm_deviation:.3g}, "
            f"tightness dev {check.max_tightness_deviation:.3g})"
        )
    alphabet = Alphabet(K, delta)
    norms = np.linalg.norm(target, axis=0)
    if norms.size and norms.max() > alphabet.max_amplitude * (1.0 + RANGE_RTOL):
        j = int(np.argmax(norms))
        raise ConstraintViolation(
            f"vector {j} has norm {norms.max():.6g} > (K - 1/2)*delta = "
            f"{alphabet.max_amplitude:.6g}; pick a larger K or delta"
        )
    coeffs = (frame.vectors[perm.order] @ target).T  # (vectors, N) sequences
    levels = sd_quantize_batch(coeffs, alphabet)
    return QuantizedMatrix(
        codes=levels,
        K=alphabet.K,
        delta=alphabet.delta,
        frame=frame,
        permutation=perm,
        mode=mode,
        rows=rows,
        cols=cols,
        bias_folded=bias_folded,
    )


def reconstruct(qm: QuantizedMatrix) -> np.ndarray:
    """Materialize the quantized matrix (d/N) * sum_k value[j,k] e_{p(k)}."""
    rows = qm.frame.vectors[qm.permutation.order]
    rebuilt = (qm.frame.d / qm.frame.N) * (qm.code_values() @ rows)  # (vectors, d)
    return rebuilt.T if qm.mode == COLUMN else rebuilt


def matvec_codes(qm: QuantizedMatrix, x: np.ndarray) -> np.ndarray:
    """Apply the quantized matrix to ``x`` straight from the code domain."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != qm.cols:
        raise ValueError(f"expected a length-{qm.cols} vector, got shape {x.shape}")
    rows = qm.frame.vectors[qm.permutation.order]
    scale = qm.frame.d / qm.frame.N
    values = qm.code_values()
    if qm.mode == COLUMN:
        return scale * ((x @ values) @ rows)
    return scale * (values @ (x @ rows.T).T).T if x.ndim > 1 else scale * (values @ (rows @ x))


@dataclass(frozen=True)
class StorageReport:
    """Bit accounting for one or more quantized matrices."""

    code_bits: int
    dense_bits_32: int
    saved_bits: int
    frame_overhead_bits: int

    def __add__(self, other: "StorageReport") -> "StorageReport":
        return StorageReport(
            self.code_bits + other.code_bits,
            self.dense_bits_32 + other.dense_bits_32,
            self.saved_bits + other.saved_bits,
            self.frame_overhead_bits + other.frame_overhead_bits,
        )


def storage_bits(qm: QuantizedMatrix) -> StorageReport:
    """Exact integer bit accounting for one quantized matrix.

    Codes cost vectors * N * ceil(log2(2K)) bits; the dense baseline is
    32-bit floats for the original shape; harmonic frames cost two 32-bit
    integers of metadata while explicit frames cost their full float64 payload.
    """
    code = qm.n_vectors * qm.frame.N * qm.bits_per_code
    dense = 32 * qm.rows * qm.cols
    overhead = 64 if qm.frame.kind == "harmonic" else 64 * qm.frame.N * qm.frame.d
    return StorageReport(
        code_bits=code,
        dense_bits_32=dense,
        saved_bits=dense - code,
        frame_overhead_bits=overhead,
    )


def pack_codes(qm: QuantizedMatrix) -> bytes:
    """Pack code indices at ceil(log2(2K)) bits each, little-endian within
    bytes, vector-major (j outer, frame step k inner), zero-padded to a byte."""
    bits = qm.bits_per_code
    flat = qm.codes.reshape(-1).astype(np.uint16)
    as_bits = (flat[:, None] >> np.arange(bits, dtype=np.uint16)) & 1
    return np.packbits(as_bits.reshape(-1).astype(np.uint8), bitorder="little").tobytes()


def packed_size(n_vectors: int, N: int, K: int) -> int:
    """Bytes occupied by a packed code section."""
    return (n_vectors * N * bits_per_code(K) + 7) // 8


def unpack_codes(buf: bytes, n_vectors: int, N: int, K: int) -> np.ndarray:
    """Inverse of :func:`pack_codes`; validates the buffer length."""
    bits = bits_per_code(K)
    need = packed_size(n_vectors, N, K)
    if len(buf) < need:
        raise ValueError(f"code section holds {len(buf)} bytes, expected {need}")
    raw = np.unpackbits(np.frombuffer(buf[:need], dtype=np.uint8), bitorder="little")
    raw = raw[: n_vectors * N * bits].reshape(n_vectors * N, bits).astype(np.uint16)
    codes = (raw << np.arange(bits, dtype=np.uint16)).sum(axis=1, dtype=np.uint16)
    if codes.size and codes.max() >= 2 * K:
        raise ValueError("packed payload contains out-of-range code indices")
    return codes.reshape(n_vectors, N)
