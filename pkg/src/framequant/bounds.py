"""Closed-form error estimates for quantized vectors, matrices, and networks.

Every estimate here mirrors one guarantee of the sigma-delta pipeline:

* ``vector_bound``          - rebuild error of one vector: delta*d/(2N) * (variation + 1).
* ``vector_bound_generic``  - same, with variation at the serpentine path-length limit.
* ``matrix_bound``          - operator-norm error of a quantized matrix,
                              2*sqrt(2)*delta*m*sqrt(m*m')*N^(-1/m); the harmonic
                              variant (delta*m*sqrt(m')/2N)*(2*pi*(m+1)/sqrt(3)+1)
                              uses the uniformly bounded variation of harmonic
                              frames under the identity order.
* ``quantized_norm_bound``  - ||Q|| <= matrix error + ||W||.
* ``fnn_bound``             - end-to-end feed-forward error, four variants.
* ``residual_bound``        - end-to-end error of a chain of residual blocks.

The matrix-level forms assume quantized vectors of length >= 3 and a visiting
order within the serpentine limit (harmonic frames: identity order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolation
from .frames import frame_variation
from .network import (
    Model,
    QuantizedAffine,
    QuantizedModel,
    QuantizedResidualBlock,
    forward,
    forward_quantized,
)
from .quantizer import QuantizedMatrix

GENERAL = "general"
HARMONIC = "harmonic"
SAME_WIDTH = "same_width"
SIMPLIFIED = "simplified"

_HARMONIC_FNN_COEFF = (8.0 * math.pi + math.sqrt(3.0)) / (6.0 * math.sqrt(3.0))


def operator_norm(W: np.ndarray, tol: float = 1e-10, max_iters: int = 10_000) -> float:
    """Largest singular value by power iteration on W^T W.

    Deterministic (fixed internal start vector); stops once the Rayleigh
    estimate changes by less than ``tol`` relatively on two consecutive
    iterations.  Zero matrices return 0.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError("operator_norm expects a matrix")
    if not np.any(W):
        return 0.0
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(W.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    quiet = 0
    for _ in range(max_iters):
        y = W @ v
        z = W.T @ y
        nz = np.linalg.norm(z)
        if nz == 0.0:
            # start vector landed in the kernel; restart off a fresh direction
            v = rng.standard_normal(W.shape[1])
            v /= np.linalg.norm(v)
            continue
        new_est = float(np.linalg.norm(y))
        v = z / nz
        if abs(new_est - est) <= tol * max(new_est, np.finfo(float).tiny):
            quiet += 1
            if quiet >= 2:
                return new_est
        else:
            quiet = 0
        est = new_est
    return est


@dataclass(frozen=True)
class LayerStats:
    """Per-matrix quantities entering the network estimates.

    ``m_out`` is the length of the vectors that were quantized (the frame
    dimension) and ``m_in`` how many of them there were; for a matrix
    quantized through its transpose these are swapped relative to its shape,
    which keeps the estimates valid since operator norms ignore transposition.
    """

    m_in: int
    m_out: int
    sigma: float
    delta: float
    K: int
    N: int
    variation: float
    harmonic: bool = False

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.N < self.m_out:
            raise ValueError(f"frame size N={self.N} below vector length {self.m_out}")


def layer_stats(W: np.ndarray, qm: QuantizedMatrix, sigma: float | None = None) -> LayerStats:
    """Collect the stats of one quantized matrix (measuring ||W|| if needed)."""
    return LayerStats(
        m_in=qm.n_vectors,
        m_out=qm.frame.d,
        sigma=operator_norm(W) if sigma is None else sigma,
        delta=qm.delta,
        K=qm.K,
        N=qm.frame.N,
        variation=frame_variation(qm.frame, qm.permutation),
        harmonic=qm.frame.kind == "harmonic" and qm.permutation.is_identity,
    )


def vector_bound(delta: float, d: int, N: int, variation: float) -> float:
    """Rebuild-error guarantee for one vector: delta*d/(2N) * (variation + 1)."""
    if d < 2 or N < d:
        raise ValueError(f"need N >= d >= 2, got d={d}, N={N}")
    return (delta * d / (2.0 * N)) * (variation + 1.0)


def vector_bound_generic(delta: float, d: int, N: int) -> float:
    """Vector bound with the serpentine path-length limit substituted in."""
    if d < 3:
        raise ValueError("the generic path-length limit requires d >= 3")
    if N < d:
        raise ValueError(f"need N >= d, got d={d}, N={N}")
    variation = 4.0 * math.sqrt(d + 3) * (N ** (1.0 - 1.0 / d) - 1.0)
    return (delta * d / (2.0 * N)) * (variation + 1.0)


def matrix_bound(delta: float, m_out: int, m_in: int, N: int, harmonic: bool = False) -> float:
    """Operator-norm error guarantee for one quantized matrix."""
    if m_out < 3:
        raise ConstraintViolation(
            f"matrix estimates assume quantized vectors of length >= 3, got {m_out}"
        )
    if N < m_out:
        raise ValueError(f"need N >= {m_out}, got {N}")
    if harmonic:
        return (delta * m_out * math.sqrt(m_in) / (2.0 * N)) * (
            2.0 * math.pi * (m_out + 1) / math.sqrt(3.0) + 1.0
        )
    return 2.0 * math.sqrt(2.0) * delta * m_out * math.sqrt(m_in * m_out) * N ** (-1.0 / m_out)


def quantized_norm_bound(stats: LayerStats) -> float:
    """Norm guarantee for the quantized matrix itself: matrix error + ||W||."""
    return matrix_bound(stats.delta, stats.m_out, stats.m_in, stats.N) + stats.sigma


def _layer_error_terms(stats: list[LayerStats], variant: str) -> list[float]:
    if variant == HARMONIC:
        return [
            _HARMONIC_FNN_COEFF * s.delta * s.m_out * math.sqrt(s.m_out * s.m_in) / s.N
            for s in stats
        ]
    return [matrix_bound(s.delta, s.m_out, s.m_in, s.N) for s in stats]


def fnn_bound(
    stats: list[LayerStats],
    lipschitz: float,
    input_norm: float,
    variant: str = GENERAL,
) -> float:
    """End-to-end feed-forward error guarantee.

    The layer-j contribution multiplies layer j's matrix error by the float
    norms of the layers after it and the quantized-norm guarantees of the
    layers before it:

        L^(n-1) ||X|| sum_j err_j * prod_{i>j} sigma_i * prod_{l<j} (err_l + sigma_l)

    Variants: "general" uses the per-layer closed form; "harmonic" its
    N^(-1) sharpening for harmonic frames under the identity order;
    "same_width" requires one shared (frame, delta) and equal quantized
    dimensions and replaces every error term by 2*sqrt(2)*delta*M^2*N^(-1/m)
    with M the largest dimension; "simplified" additionally requires
    N >= (2*sqrt(2)*delta*M^2 / min_i sigma_i)^m and collapses the sum to
    sqrt(2)*delta*M^2*N^(-1/m)*L^(n-1)*||X||*prod_i sigma_i*sum_j 2^j/sigma_j.
    """
    stats = list(stats)
    if not stats:
        raise ValueError("need at least one layer")
    n = len(stats)
    if variant in (GENERAL, HARMONIC):
        if variant == HARMONIC and not all(s.harmonic for s in stats):
            raise ConstraintViolation(
                "harmonic variant requires harmonic frames with the identity order on every layer"
            )
        errs = _layer_error_terms(stats, variant)
        total = 0.0
        for j in range(n):
            term = errs[j]
            for i in range(j + 1, n):
                term *= stats[i].sigma
            for l in range(j):
                term *= errs[l] + stats[l].sigma
            total += term
        return lipschitz ** (n - 1) * input_norm * total

    m = stats[0].m_out
    N = stats[0].N
    delta = stats[0].delta
    if any(s.m_out != m or s.N != N or s.delta != delta for s in stats):
        raise ConstraintViolation(
            "same-width variants require one shared frame dimension, N, and delta"
        )
    M = max(max(s.m_in, s.m_out) for s in stats)
    err = 2.0 * math.sqrt(2.0) * delta * M * M * N ** (-1.0 / m)
    if m < 3:
        raise ConstraintViolation("matrix estimates assume quantized vectors of length >= 3")

    if variant == SAME_WIDTH:
        total = 0.0
        for j in range(n):
            term = 1.0
            for i in range(j + 1, n):
                term *= stats[i].sigma
            for l in range(j):
                term *= err + stats[l].sigma
            total += term
        return err * lipschitz ** (n - 1) * input_norm * total

    if variant == SIMPLIFIED:
        sigma_min = min(s.sigma for s in stats)
        if sigma_min <= 0.0:
            raise ConstraintViolation(
                "simplified variant is inapplicable: a layer has zero operator norm"
            )
        # threshold is (2*sqrt(2)*delta*M^2/sigma_min)^m; compare in log space,
        # the power overflows float64 for realistic M and m
        log_threshold = m * math.log(2.0 * math.sqrt(2.0) * delta * M * M / sigma_min)
        if math.log(N) < log_threshold:
            shown = math.exp(log_threshold) if log_threshold < 700 else math.inf
            raise ConstraintViolation(
                f"simplified variant needs N >= {shown:.6g}, got N = {N}"
            )
        prod_sigma = 1.0
        for s in stats:
            prod_sigma *= s.sigma
        tail = sum(2.0 ** (j + 1) / stats[j].sigma for j in range(n))
        return (
            math.sqrt(2.0) * delta * M * M * N ** (-1.0 / m)
            * lipschitz ** (n - 1) * input_norm * prod_sigma * tail
        )

    raise ValueError(f"unknown variant {variant!r}")


def residual_bound(
    lam: float,
    delta: float,
    k: int,
    N: int,
    n_blocks: int,
    input_norm: float,
) -> float:
    """End-to-end error guarantee for ``n_blocks`` chained residual blocks.

    ``lam`` is the largest operator norm among all block matrices.  With
    c = delta*k*sqrt(k*(k+3)):

        A = 4c(c + lam)N^(-1/k),  B = (2c N^(-1/k) + lam)^2 + 1,
        error <= A * ||X|| * sum_{j=0}^{n-1} (lam^2+1)^j B^(n-1-j).
    """
    if k < 3:
        raise ConstraintViolation(f"residual estimate assumes width >= 3, got {k}")
    if N < k:
        raise ValueError(f"need N >= {k}, got {N}")
    if n_blocks < 1:
        raise ValueError("need at least one block")
    c = delta * k * math.sqrt(k * (k + 3.0))
    nroot = N ** (-1.0 / k)
    a = 4.0 * c * (c + lam) * nroot
    b = (2.0 * c * nroot + lam) ** 2 + 1.0
    series = sum((lam * lam + 1.0) ** j * b ** (n_blocks - 1 - j) for j in range(n_blocks))
    return a * input_norm * series


@dataclass(frozen=True)
class BoundReport:
    """One evaluated estimate next to the matching measurement."""

    bound_kind: str
    theoretical: float
    empirical: float
    input_norm: float
    params: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.empirical <= self.theoretical + 1e-9

    def as_dict(self) -> dict:
        out = {
            "bound_kind": self.bound_kind,
            "theoretical": self.theoretical,
            "empirical": self.empirical,
            "input_norm": self.input_norm,
        }
        out.update(self.params)
        return out


@dataclass(frozen=True)
class EmpiricalError:
    """Worst/mean rebuild error over a dataset plus the scale diagnostic.

    ``tightness`` is log(mean(error * N / delta)); it stays roughly flat
    across (N, delta) when the N^(-1) error scaling is tight.  It is -inf
    when every error vanishes (serialized as "NA" in CSV output).
    """

    worst: float
    mean: float
    tightness: float


def empirical_error(
    model: Model, qmodel: QuantizedModel, inputs: np.ndarray
) -> EmpiricalError:
    """Measure ||f(X) - f_Q(X)|| over dataset rows."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[0] == 0:
        raise ValueError("empty dataset")
    diffs = forward(model, inputs) - forward_quantized(qmodel, inputs)
    errors = np.linalg.norm(diffs, axis=1)
    scales = sorted(
        {(qm.frame.N, qm.delta) for qm in _qmatrices(qmodel)}
    )
    if len(scales) == 1:
        n, delta = scales[0]
        mean_scaled = float(np.mean(errors) * n / delta)
        tightness = math.log(mean_scaled) if mean_scaled > 0 else -math.inf
    else:
        tightness = math.nan  # undefined without a single shared (N, delta)
    return EmpiricalError(
        worst=float(np.max(errors)), mean=float(np.mean(errors)), tightness=tightness
    )


def _qmatrices(qmodel: QuantizedModel):
    for layer in qmodel.layers:
        if isinstance(layer, QuantizedAffine):
            yield layer.qmatrix
        else:
            yield layer.q1
            yield layer.q2


def _stats_for(model: Model, qmodel: QuantizedModel) -> list[LayerStats]:
    from .network import AffineLayer, ResidualBlock  # layer classes only

    stats = []
    for layer, qlayer in zip(model.layers, qmodel.layers):
        if isinstance(layer, AffineLayer):
            stats.append(layer_stats(layer.W, qlayer.qmatrix))
        else:
            stats.append(layer_stats(layer.W1, qlayer.q1))
            stats.append(layer_stats(layer.W2, qlayer.q2))
    return stats


def network_bound_reports(
    model: Model, qmodel: QuantizedModel, inputs: np.ndarray
) -> list[BoundReport]:
    """Evaluate every applicable end-to-end estimate against measurements.

    Pure affine stacks get the feed-forward variants (harmonic / same-width /
    simplified ones only where their hypotheses hold); pure residual stacks
    get the residual-chain estimate.  Mixed architectures get per-segment
    reports: each maximal run of residual blocks is measured against the
    residual estimate with the float activations entering that run.
    """
    from .network import AffineLayer

    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[0] == 0:
        raise ValueError("empty dataset")
    if inputs.shape[1] != model.in_dim:
        raise ValueError(
            f"dataset features {inputs.shape[1]} do not match model input {model.in_dim}"
        )
    input_norms = np.linalg.norm(inputs, axis=1)
    max_norm = float(np.max(input_norms))
    reports: list[BoundReport] = []

    if all(isinstance(l, AffineLayer) for l in model.layers):
        err = empirical_error(model, qmodel, inputs)
        stats = _stats_for(model, qmodel)
        L = model.activation.lipschitz
        params = {
            "n_layers": len(stats),
            "N": stats[0].N,
            "delta": stats[0].delta,
        }
        reports.append(
            BoundReport(
                "fnn_general",
                fnn_bound(stats, L, max_norm, GENERAL),
                err.worst,
                max_norm,
                params,
            )
        )
        for variant, kind in ((HARMONIC, "fnn_harmonic"), (SAME_WIDTH, "fnn_same_width"),
                              (SIMPLIFIED, "fnn_simplified")):
            try:
                value = fnn_bound(stats, L, max_norm, variant)
            except ConstraintViolation:
                continue
            reports.append(BoundReport(kind, value, err.worst, max_norm, params))
        return reports

    if all(isinstance(l, QuantizedResidualBlock) for l in qmodel.layers):
        err = empirical_error(model, qmodel, inputs)
        reports.append(_residual_report(model, qmodel, inputs, err.worst))
        return reports

    # mixed: measure each maximal residual run against its own inputs
    from .network import ResidualBlock

    x_float = inputs
    i = 0
    layers = model.layers
    while i < len(layers):
        if isinstance(layers[i], ResidualBlock):
            j = i
            while j < len(layers) and isinstance(layers[j], ResidualBlock):
                j += 1
            seg = Model(layers[i:j], model.activation)
            qseg = QuantizedModel(qmodel.layers[i:j], qmodel.activation)
            seg_err = empirical_error(seg, qseg, x_float)
            reports.append(_residual_report(seg, qseg, x_float, seg_err.worst))
            # advance the float activations through the segment
            x_float = forward(seg, x_float)
            if j < len(layers):
                x_float = model.activation(x_float)
            i = j
        else:
            x_float = layers[i](x_float)
            if i + 1 < len(layers):
                x_float = model.activation(x_float)
            i += 1
    if not reports:
        raise ValueError("no residual segment found in a mixed architecture")
    return reports


def _residual_report(
    model: Model, qmodel: QuantizedModel, inputs: np.ndarray, worst: float
) -> BoundReport:
    stats = _stats_for(model, qmodel)
    lam = max(s.sigma for s in stats)
    k = stats[0].m_out
    N = stats[0].N
    delta = stats[0].delta
    if any(s.m_out != k or s.N != N or s.delta != delta for s in stats):
        raise ConstraintViolation(
            "residual estimate requires one shared width, frame size, and delta"
        )
    max_norm = float(np.max(np.linalg.norm(np.atleast_2d(inputs), axis=1)))
    value = residual_bound(lam, delta, k, N, len(model.layers), max_norm)
    return BoundReport(
        "residual",
        value,
        worst,
        max_norm,
        {"n_blocks": len(model.layers), "k": k, "N": N, "delta": delta, "lambda": lam},
    )
