"""Motion-compensated single-pixel imaging (MCSPI) toolkit.

Builds time-multiplexed modulation sequences mixing Hadamard imaging
patterns with geometric-moment localization patterns, simulates
bucket-detector acquisition of a moving object, recovers per-set object
positions from three scalar detections, and reconstructs an
anti-motion-blur image by counter-shifting patterns during correlation.
"""

from ._version import __version__
from .acquisition import BucketRecord, NoiseModel, measure, run_acquisition
from .config import ExperimentConfig
from .errors import (
    CapacityError,
    ConfigError,
    EmptyAccumulatorError,
    McspiError,
    NoObjectError,
    ProtocolError,
)
from .metrics import minmax_normalize, mse, normalized_metrics, pearson, psnr
from .patterns import (
    BinaryPattern,
    BipolarPattern,
    MomentMatrices,
    PatternBank,
    PatternKind,
    SequencePlan,
    build_sequence,
    cake_cut_order,
    cake_cut_sort,
    count_blocks,
    floyd_steinberg,
    hadamard_basis,
    imaging_efficiency,
    moment_binary_patterns,
    moment_matrices,
    positioning_frequency,
    split_complementary,
    sylvester_hadamard,
)
from .presets import builtin_object, preset_config, run_experiment, run_preset
from .reconstruction import (
    ReconAccumulator,
    accumulate,
    finalize,
    mcspi_run,
    merge,
    new_accumulator,
    shift_pattern,
)
from .scene import (
    Displacement,
    ObjectImage,
    SceneState,
    Trajectory,
    displacement_at,
    displacement_sequence,
    motion_bounds,
    render_frame,
)
from .tracking import (
    ReferencePoint,
    TrackFix,
    centroid_from_intensities,
    field_center,
    fix_from_set,
    total_from_pair,
    track_run,
)

__all__ = [name for name in dir() if not name.startswith("_")]
