"""Partially linear kernel multiuser detection.

An online learner in the sum of a linear and a Gaussian reproducing kernel
Hilbert space, trained with the adaptive projected subgradient method (APSM),
plus a cache-blocked data-parallel batch detector, a synthetic NOMA uplink
simulator for BER experiments, and a benchmark harness for the detector's
optimization ladder.
"""

from .apsm import (
    ApsmConfig,
    ApsmTrainer,
    DegenerateSampleError,
    DictionaryCapacityError,
    TrainingSample,
    apsm_step,
    beta,
    complex_to_real_pair,
    detect_symbol,
    realify_batch,
    train,
    uniform_weights,
    window_indices,
)
from .bench import BenchReport, BenchRow, bench_detection, report_to_csv, report_to_json
from .config import BenchPlan, ConfigError, RunConfig, load_config
from .engine import STAGES, EngineConfig, batch_detect, batch_evaluate
from .kernels import (
    FilterState,
    KernelParams,
    evaluate,
    from_expansion,
    inner_product,
    kernel_gaussian,
    kernel_linear,
    kernel_sum,
    norm_sq,
    self_kernel,
    zero_filter,
)
from .modelio import (
    IQ_MAGIC,
    MODEL_MAGIC,
    FileFormatError,
    load_iq,
    load_model,
    load_symbols,
    save_iq,
    save_model,
    save_symbols,
)
from .noma import (
    SCHEMES,
    ChannelModel,
    Constellation,
    FrameSpec,
    TrialReport,
    ber,
    demodulate_hard,
    draw_channel,
    get_constellation,
    modulate,
    noise_var_for_snr,
    run_trial,
    synthesize_received,
)

__version__ = "0.1.0"
