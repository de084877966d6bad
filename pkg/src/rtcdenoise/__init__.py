"""Receiver-side real-time video denoising with sender feedback.

A decoded video stream is inspected at keyframes, forked past the denoisers
when clean, and otherwise run through a keyframe image cascade plus a
five-frame temporal cascade. An analyzer scores the result and feeds
bitrate/resolution/framerate recommendations back to a simulated sender.
"""

from .analyzer import (
    DEFAULT_BUDGET_MS,
    DEFAULT_FEEDBACK_WINDOW,
    DEFAULT_WEIGHTS,
    AnalyzerReport,
    FeedbackMessage,
    FeedbackPolicy,
    Recommendation,
    build_report,
    build_report_noref,
    feedback_to_json,
    make_feedback,
    performance_score,
    report_to_json,
)
from .channel import (
    MAX_FRAMERATE_DIVISOR,
    SCALE_LADDER,
    LossKind,
    LossModel,
    SenderConfig,
    add_gaussian_noise,
    add_salt_pepper,
    add_speckle,
    encode_decode,
    sender_step,
    transmit,
)
from .config import (
    EXECUTION_MODES,
    ConfigError,
    PipelineConfig,
    dump_config,
    fresh_loss_model,
    parse_config,
    parse_config_text,
)
from .detector import (
    DEFAULT_FORK_THRESHOLD,
    ForkDecision,
    NoiseCategory,
    NoiseEstimate,
    Route,
    analyze_frame,
    blockiness_ratio,
    classify_noise,
    estimate_sigma,
    fork_decision,
    impulse_fraction,
    luma_histogram,
    mean_var_correlation,
    median_filter_3x3,
)
from .frame import (
    BIT_DEPTH,
    PIXEL_MAX,
    FormatError,
    Frame,
    VideoSequence,
    clamp_index,
    quantize_plane,
)
from .frameio import (
    read_pgm,
    read_pgm_file,
    read_y4m,
    read_y4m_file,
    write_pgm,
    write_pgm_file,
    write_y4m,
    write_y4m_file,
)
from .image_denoiser import (
    PASSTHROUGH_SIGMA,
    CascadeParams,
    denoise_keyframe,
    gaussian_kernel,
    stage_detail,
    stage_fuse,
    stage_smooth,
)
from .metrics import INFINITE, MS_SSIM_WEIGHTS, detail_retention, ms_ssim, psnr, ssim, vifp
from .pipeline import (
    QUEUE_CAPACITY,
    PipelineStats,
    SenderTraceEntry,
    SimulationResult,
    run_denoise,
    run_simulate,
)
from .rng import NoiseRng
from .synthetic import make_frame, make_sequence
from .video_denoiser import (
    DEFAULT_CADENCE,
    BlockMode,
    BlockParams,
    ConvWeightSet,
    FrameRole,
    WindowPlan,
    denoise_block,
    denoise_stream,
    denoise_window,
    random_weights,
    read_weights,
    read_weights_file,
    schedule_windows,
    write_weights,
    write_weights_file,
    zero_weights,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyzerReport",
    "BIT_DEPTH",
    "BlockMode",
    "BlockParams",
    "CascadeParams",
    "ConfigError",
    "ConvWeightSet",
    "DEFAULT_BUDGET_MS",
    "DEFAULT_CADENCE",
    "DEFAULT_FEEDBACK_WINDOW",
    "DEFAULT_FORK_THRESHOLD",
    "DEFAULT_WEIGHTS",
    "EXECUTION_MODES",
    "FeedbackMessage",
    "FeedbackPolicy",
    "ForkDecision",
    "FormatError",
    "Frame",
    "FrameRole",
    "INFINITE",
    "LossKind",
    "LossModel",
    "MAX_FRAMERATE_DIVISOR",
    "MS_SSIM_WEIGHTS",
    "NoiseCategory",
    "NoiseEstimate",
    "NoiseRng",
    "PASSTHROUGH_SIGMA",
    "PIXEL_MAX",
    "PipelineConfig",
    "PipelineStats",
    "QUEUE_CAPACITY",
    "Recommendation",
    "Route",
    "SCALE_LADDER",
    "SenderConfig",
    "SenderTraceEntry",
    "SimulationResult",
    "VideoSequence",
    "WindowPlan",
    "add_gaussian_noise",
    "add_salt_pepper",
    "add_speckle",
    "analyze_frame",
    "blockiness_ratio",
    "build_report",
    "build_report_noref",
    "clamp_index",
    "classify_noise",
    "denoise_block",
    "denoise_keyframe",
    "denoise_stream",
    "denoise_window",
    "detail_retention",
    "dump_config",
    "encode_decode",
    "estimate_sigma",
    "feedback_to_json",
    "fork_decision",
    "fresh_loss_model",
    "gaussian_kernel",
    "impulse_fraction",
    "luma_histogram",
    "make_feedback",
    "make_frame",
    "make_sequence",
    "mean_var_correlation",
    "median_filter_3x3",
    "ms_ssim",
    "parse_config",
    "parse_config_text",
    "performance_score",
    "psnr",
    "quantize_plane",
    "random_weights",
    "read_pgm",
    "read_pgm_file",
    "read_weights",
    "read_weights_file",
    "read_y4m",
    "read_y4m_file",
    "report_to_json",
    "run_denoise",
    "run_simulate",
    "schedule_windows",
    "sender_step",
    "ssim",
    "stage_detail",
    "stage_fuse",
    "stage_smooth",
    "transmit",
    "vifp",
    "write_pgm",
    "write_pgm_file",
    "write_weights",
    "write_weights_file",
    "write_y4m",
    "write_y4m_file",
    "zero_weights",
]
