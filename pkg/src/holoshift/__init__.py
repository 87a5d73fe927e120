"""Shift-based holographic image compression.

Encode a grayscale image into K distinct compressed packets such that any
m of them reconstruct the image at a quality that depends (approximately)
only on m. Packets are produced either by compressing shifted copies of
the input directly, or by an iterative rate-distortion optimization that
maximizes the quality of m-packet reconstructions.
"""

from .codec import (
    CODEC_EXTERNAL,
    CODEC_INTERNAL,
    ENV_EXT_DECODE,
    ENV_EXT_ENCODE,
    CodecParams,
    Packet,
    compress,
    compress_to_ratio,
    decompress,
    external_codec_roundtrip,
)
from .errors import (
    ContainerError,
    DecodeError,
    ExternalCodecError,
    HoloError,
    InvalidConfig,
    InvalidInput,
    InvalidShift,
    InvalidSubset,
    ParseError,
    RateError,
    UnsupportedFormat,
)
from .evaluation import (
    EvaluationReport,
    SubsetStats,
    curves_to_csv,
    enumerate_subsets,
    evaluate,
    psnr,
    psnr_order_curves,
    report_to_csv,
    report_to_json,
    subset_mse,
)
from .holographic import (
    MODE_BASELINE,
    MODE_DUPLICATE,
    PacketSet,
    back_shifted_packets,
    encode_baseline,
    encode_duplicate,
    load_packet_set,
    mean_images,
    mode_label,
    reconstruct,
    save_packet_set,
)
from .imaging import load_pgm, read_pgm, save_pgm, write_pgm
from .optimizer import (
    AdmmState,
    CostTrace,
    OptimizerParams,
    TraceRow,
    default_params,
    m_subset_residual,
    optimize,
    z_update,
)
from .shifts import ShiftMode, ShiftSpec, apply_inverse_shift, apply_shift, standard_shift_grid

__version__ = "0.1.0"
