"""Post-training neural-network quantization over finite unit-norm tight frames.

Weight matrices are expanded against a redundant frame, the coefficients run
through a first-order sigma-delta recursion, and only the resulting low-bit
level indices are stored.  Every piece of the pipeline ships with a matching
closed-form error guarantee, evaluated in :mod:`framequant.bounds`.
"""

from .bounds import (
    BoundReport,
    EmpiricalError,
    LayerStats,
    empirical_error,
    fnn_bound,
    layer_stats,
    matrix_bound,
    network_bound_reports,
    operator_norm,
    quantized_norm_bound,
    residual_bound,
    vector_bound,
    vector_bound_generic,
)
from .errors import ConstraintViolation, FileFormatError, VariationBoundError
from .fileio import (
    DatasetHandle,
    load_frame,
    load_mnist,
    load_model,
    load_quantized,
    read_idx_images,
    read_idx_labels,
    save_frame,
    save_model,
    save_quantized,
    write_idx_images,
    write_idx_labels,
)
from .frames import (
    Frame,
    FrameCheck,
    Permutation,
    analysis,
    find_permutation,
    frame_operator,
    frame_variation,
    harmonic_frame,
    serpentine_order,
    serpentine_variation_limit,
    synthesis_dual,
    verify_funtf,
)
from .network import (
    ActivationSpec,
    AffineLayer,
    LayerQuantConfig,
    Model,
    QuantizationConfig,
    QuantizedAffine,
    QuantizedModel,
    QuantizedResidualBlock,
    ResidualBlock,
    classify,
    forward,
    forward_quantized,
    iter_qmatrices,
    max_vector_norm,
    quantize_network,
    shared_K_for_delta,
    uniform_config,
)
from .quantizer import (
    QuantizedMatrix,
    StorageReport,
    bits_per_code,
    matvec_codes,
    pack_codes,
    quantize_matrix,
    reconstruct,
    select_K_delta,
    storage_bits,
    unpack_codes,
)
from .sigma_delta import (
    Alphabet,
    SigmaDeltaTrace,
    VectorQuantization,
    alphabet_values,
    quantize_vector,
    scalar_quantize,
    sd_quantize_batch,
    sd_quantize_sequence,
)

__version__ = "0.1.0"
