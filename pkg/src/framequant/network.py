"""Feed-forward and residual-block models, float and quantized inference.

A model is an ordered list of layers with one elementwise activation applied
between consecutive layers (never after the last).  Affine layers compute
W x + b; residual blocks compute W2 relu(W1 x + b) + x and require the model
activation to be ReLU.  The quantized counterpart swaps every weight matrix
for a :class:`~framequant.quantizer.QuantizedMatrix`; biases ride along
either folded into an extra matrix column (and quantized with it) or kept
as float vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation
from .frames import Frame, find_permutation, harmonic_frame
from .quantizer import (
    COLUMN,
    ROW,
    QuantizedMatrix,
    StorageReport,
    matvec_codes,
    quantize_matrix,
    reconstruct,
    select_K_delta,
    storage_bits,
    vector_norms,
)

RELU = "relu"
LEAKY_RELU = "leaky_relu"
IDENTITY = "identity"


@dataclass(frozen=True)
class ActivationSpec:
    """Elementwise activation; every supported kind fixes 0 and is Lipschitz."""

    kind: str = RELU
    alpha: float = 0.01

    def __post_init__(self):
        if self.kind not in (RELU, LEAKY_RELU, IDENTITY):
            raise ValueError(f"unsupported activation {self.kind!r}")

    @property
    def lipschitz(self) -> float:
        if self.kind == LEAKY_RELU:
            return max(1.0, abs(self.alpha))
        return 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == RELU:
            return np.maximum(x, 0.0)
        if self.kind == LEAKY_RELU:
            return np.where(x >= 0, x, self.alpha * x)
        return x


def _as_matrix(a, name):
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class AffineLayer:
    """x -> W x + b with W of shape (out, in)."""

    W: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "W", _as_matrix(self.W, "W"))
        if self.b is not None:
            bb = np.asarray(self.b, dtype=np.float64)
            if bb.shape != (self.W.shape[0],):
                raise ValueError(f"bias shape {bb.shape} does not match {self.W.shape[0]} outputs")
            object.__setattr__(self, "b", bb)

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = x @ self.W.T
        return y if self.b is None else y + self.b


@dataclass(frozen=True)
class ResidualBlock:
    """x -> W2 relu(W1 x + b) + x with square k x k weight matrices."""

    W1: np.ndarray
    W2: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        w1 = _as_matrix(self.W1, "W1")
        w2 = _as_matrix(self.W2, "W2")
        k = w1.shape[0]
        if w1.shape != (k, k) or w2.shape != (k, k):
            raise ValueError(f"residual blocks need square matrices, got {w1.shape}, {w2.shape}")
        object.__setattr__(self, "W1", w1)
        object.__setattr__(self, "W2", w2)
        if self.b is not None:
            bb = np.asarray(self.b, dtype=np.float64)
            if bb.shape != (k,):
                raise ValueError(f"bias shape {bb.shape} does not match width {k}")
            object.__setattr__(self, "b", bb)

    @property
    def in_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        inner = x @ self.W1.T
        if self.b is not None:
            inner = inner + self.b
        return np.maximum(inner, 0.0) @ self.W2.T + x


Layer = AffineLayer | ResidualBlock


@dataclass(frozen=True)
class Model:
    """Layer stack with a shared between-layer activation."""

    layers: tuple
    activation: ActivationSpec = ActivationSpec(RELU)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a model needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ValueError(
                    f"layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        if any(isinstance(l, ResidualBlock) for l in layers) and self.activation.kind != RELU:
            raise ValueError("residual blocks require the ReLU activation")
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def n_layers(self) -> int:
        return len(self.layers)


def forward(model: Model, x: np.ndarray) -> np.ndarray:
    """Evaluate the model on one vector or a (samples, features) batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.in_dim:
        raise ValueError(f"expected {model.in_dim} input features, got shape {x.shape}")
    for i, layer in enumerate(model.layers):
        x = layer(x)
        if i + 1 < len(model.layers):
            x = model.activation(x)
    return x


def classify(model_or_output, x: np.ndarray | None = None) -> np.ndarray | int:
    """Class index = argmax of the network output (ties -> smallest index)."""
    if x is None:
        out = np.asarray(model_or_output, dtype=np.float64)
    else:
        m = model_or_output
        out = forward_quantized(m, x) if isinstance(m, QuantizedModel) else forward(m, x)
    idx = np.argmax(out, axis=-1)
    return int(idx) if np.isscalar(idx) or idx.ndim == 0 else idx


@dataclass(frozen=True)
class QuantizedAffine:
    """Quantized affine layer; ``bias`` is a float bias kept outside the codes
    (None when there is no bias or it was folded into the matrix)."""

    qmatrix: QuantizedMatrix
    bias: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.qmatrix.cols - 1 if self.qmatrix.bias_folded else self.qmatrix.cols

    @property
    def out_dim(self) -> int:
        return self.qmatrix.rows


@dataclass(frozen=True)
class QuantizedResidualBlock:
    q1: QuantizedMatrix
    q2: QuantizedMatrix
    bias: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.q1.cols - 1 if self.q1.bias_folded else self.q1.cols

    @property
    def out_dim(self) -> int:
        return self.q2.rows


QuantizedLayer = QuantizedAffine | QuantizedResidualBlock


@dataclass(frozen=True)
class QuantizedModel:
    """Same topology as a :class:`Model` with code matrices for weights."""

    layers: tuple
    activation: ActivationSpec = ActivationSpec(RELU)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a model needs at least one layer")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def to_model(self) -> Model:
        """Materialize the float model the codes describe."""
        out = []
        for layer in self.layers:
            if isinstance(layer, QuantizedAffine):
                W = reconstruct(layer.qmatrix)
                if layer.qmatrix.bias_folded:
                    out.append(AffineLayer(W[:, :-1], W[:, -1]))
                else:
                    out.append(AffineLayer(W, layer.bias))
            else:
                W1 = reconstruct(layer.q1)
                if layer.q1.bias_folded:
                    out.append(ResidualBlock(W1[:, :-1], reconstruct(layer.q2), W1[:, -1]))
                else:
                    out.append(ResidualBlock(W1, reconstruct(layer.q2), layer.bias))
        return Model(tuple(out), self.activation)

    def storage(self) -> StorageReport:
        """Total bit accounting over every code matrix."""
        total = None
        for report in (storage_bits(qm) for qm in iter_qmatrices(self)):
            total = report if total is None else total + report
        return total


def iter_qmatrices(qmodel: QuantizedModel):
    for layer in qmodel.layers:
        if isinstance(layer, QuantizedAffine):
            yield layer.qmatrix
        else:
            yield layer.q1
            yield layer.q2


def _augmented(x: np.ndarray) -> np.ndarray:
    ones = np.ones(x.shape[:-1] + (1,))
    return np.concatenate([x, ones], axis=-1)


def forward_quantized(qmodel: QuantizedModel, x: np.ndarray, use_codes: bool = False) -> np.ndarray:
    """Evaluate the quantized network.

    The default path materializes each quantized matrix once; with
    ``use_codes`` the matrix-vector products are taken directly in the code
    domain.  Both paths agree to float64 rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != qmodel.in_dim:
        raise ValueError(f"expected {qmodel.in_dim} input features, got shape {x.shape}")
    if not use_codes:
        return forward(qmodel.to_model(), x)
    act = qmodel.activation
    for i, layer in enumerate(qmodel.layers):
        if isinstance(layer, QuantizedAffine):
            xin = _augmented(x) if layer.qmatrix.bias_folded else x
            x = matvec_codes(layer.qmatrix, xin)
            if layer.bias is not None:
                x = x + layer.bias
        else:
            xin = _augmented(x) if layer.q1.bias_folded else x
            inner = matvec_codes(layer.q1, xin)
            if layer.bias is not None and not layer.q1.bias_folded:
                inner = inner + layer.bias
            x = matvec_codes(layer.q2, np.maximum(inner, 0.0)) + x
        if i + 1 < len(qmodel.layers):
            x = act(x)
    return x


@dataclass(frozen=True)
class LayerQuantConfig:
    """How to quantize one model layer (both matrices of a residual block).

    ``frame`` may be given directly; otherwise a harmonic frame with
    ``frame_N`` elements on the appropriate dimension is built.  Exactly one
    of ``bits`` / ``delta`` / (``K`` and ``delta``) selects the alphabet.
    """

    frame: Frame | None = None
    frame_N: int | None = None
    mode: str = COLUMN
    bits: int | None = None
    delta: float | None = None
    K: int | None = None
    headroom: float = 1.0
    fold_bias: bool = True


@dataclass(frozen=True)
class QuantizationConfig:
    """Per-layer configs, one entry per model layer."""

    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))


def uniform_config(
    model: Model,
    frame_N: int,
    delta: float | None = None,
    bits: int | None = None,
    K: int | None = None,
    headroom: float = 1.0,
    last_layer_row: bool = True,
    fold_bias: bool = True,
    base_mode: str = COLUMN,
) -> QuantizationConfig:
    """One shared policy across layers: harmonic frames with ``frame_N``
    elements, ``base_mode`` everywhere except (optionally) the final affine
    layer, which is quantized through its transpose."""
    cfgs = []
    for i, layer in enumerate(model.layers):
        mode = base_mode
        if last_layer_row and i == len(model.layers) - 1 and isinstance(layer, AffineLayer):
            mode = ROW
        cfgs.append(
            LayerQuantConfig(
                frame_N=frame_N,
                mode=mode,
                bits=bits,
                delta=delta,
                K=K,
                headroom=headroom,
                fold_bias=fold_bias,
            )
        )
    return QuantizationConfig(tuple(cfgs))


def _layer_matrices(layer: Layer, cfg: LayerQuantConfig):
    """The matrices to quantize for one layer, with bias folding applied."""
    fold = cfg.fold_bias and layer.b is not None
    if isinstance(layer, AffineLayer):
        W = np.hstack([layer.W, layer.b[:, None]]) if fold else layer.W
        return [(W, fold)], (None if fold else layer.b)
    W1 = np.hstack([layer.W1, layer.b[:, None]]) if fold else layer.W1
    return [(W1, fold), (layer.W2, False)], (None if fold else layer.b)


def _frame_dim(W: np.ndarray, mode: str) -> int:
    return W.shape[0] if mode == COLUMN else W.shape[1]


def resolve_layer_frame(layer: Layer, cfg: LayerQuantConfig) -> Frame:
    """The frame a config implies for a layer (built or passed through)."""
    if cfg.frame is not None:
        return cfg.frame
    if cfg.frame_N is None:
        raise ValueError("config needs either an explicit frame or frame_N")
    mats, _ = _layer_matrices(layer, cfg)
    d = _frame_dim(mats[0][0], cfg.mode)
    for W, _ in mats[1:]:
        if _frame_dim(W, cfg.mode) != d:
            raise ValueError("residual-block matrices disagree on frame dimension")
    return harmonic_frame(d, cfg.frame_N)


def max_vector_norm(model: Model, config: QuantizationConfig) -> float:
    """Largest norm among every vector the config would quantize."""
    mx = 0.0
    for layer, cfg in zip(model.layers, config.layers):
        mats, _ = _layer_matrices(layer, cfg)
        for W, _ in mats:
            norms = vector_norms(W, cfg.mode)
            if norms.size:
                mx = max(mx, float(norms.max()))
    return mx


def shared_K_for_delta(model: Model, config: QuantizationConfig, delta: float) -> int:
    """Smallest K that makes one (K, delta) pair valid for every matrix."""
    k = 1
    for layer, cfg in zip(model.layers, config.layers):
        mats, _ = _layer_matrices(layer, cfg)
        for W, _ in mats:
            k = max(k, select_K_delta(W, mode=cfg.mode, delta=delta)[0])
    return k


def quantize_network(model: Model, config: QuantizationConfig) -> QuantizedModel:
    """Apply the matrix quantizer layer by layer, preserving the architecture."""
    if len(config.layers) != len(model.layers):
        raise ValueError(
            f"config has {len(config.layers)} layer entries, model has {len(model.layers)}"
        )
    qlayers = []
    for i, (layer, cfg) in enumerate(zip(model.layers, config.layers)):
        try:
            frame = resolve_layer_frame(layer, cfg)
            perm = find_permutation(frame)
            mats, float_bias = _layer_matrices(layer, cfg)
            qms = []
            for W, folded in mats:
                K, delta = select_K_delta(
                    W, mode=cfg.mode, bits=cfg.bits, delta=cfg.delta, K=cfg.K,
                    headroom=cfg.headroom,
                )
                qms.append(
                    quantize_matrix(W, frame, perm, K, delta, mode=cfg.mode, bias_folded=folded)
                )
        except ConstraintViolation as exc:
            raise ConstraintViolation(f"layer {i}: {exc}") from exc
        except (ValueError, ArithmeticError) as exc:
            raise type(exc)(f"layer {i}: {exc}") from exc
        if isinstance(layer, AffineLayer):
            qlayers.append(QuantizedAffine(qms[0], float_bias))
        else:
            qlayers.append(QuantizedResidualBlock(qms[0], qms[1], float_bias))
    return QuantizedModel(tuple(qlayers), model.activation)
