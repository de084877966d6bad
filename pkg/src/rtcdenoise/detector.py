"""Per-frame noise estimation, categorization, and the bypass/denoise fork.

Sigma comes from Immerkaer's fast method: a 3x3 second-difference kernel that
annihilates constant and planar image content, leaving (mostly) noise. The
categorizer uses three cheap statistics: the fraction of saturated pixels for
impulse noise, the excess of horizontal differences at 8-pixel column
boundaries for block/pixelation artifacts, and the correlation between local
mean and local variance for signal-dependent noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.ndimage import median_filter

from .frame import Frame

DEFAULT_FORK_THRESHOLD = 20.0

_IMPULSE_FRACTION_LIMIT = 0.005
_BLOCKINESS_LIMIT = 1.5
_MEAN_VAR_CORR_LIMIT = 0.5
_GAUSSIAN_SIGMA_LIMIT = 2.0
_TILE = 8


class NoiseCategory(Enum):
    GAUSSIAN = "gaussian"
    SALT_PEPPER = "salt-pepper"
    SPECKLE_SIGNAL_DEPENDENT = "speckle-signal-dependent"
    PIXELATION_PROCESSED = "pixelation-processed"
    CLEAN = "clean"


class Route(Enum):
    BYPASS = "bypass"
    DENOISE = "denoise"


@dataclass(frozen=True)
class NoiseEstimate:
    sigma: float
    category: NoiseCategory
    impulse_fraction: float
    blockiness_ratio: float
    mean_var_correlation: float
    histogram: np.ndarray

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        self.histogram.setflags(write=False)


@dataclass(frozen=True)
class ForkDecision:
    route: Route
    estimate: NoiseEstimate
    threshold_used: float


def estimate_sigma(frame: Frame) -> float:
    """Immerkaer noise estimate on the 0-255 scale.

    sigma = sqrt(pi/2) / (6 (W-2)(H-2)) * sum |L*y| with the Laplacian-
    difference kernel [[1,-2,1],[-2,4,-2],[1,-2,1]] over interior pixels.
    """
    if frame.width < 3 or frame.height < 3:
        raise ValueError("estimate_sigma needs a frame of at least 3x3")
    y = frame.luma_f64()
    resp = (
        y[:-2, :-2] - 2 * y[:-2, 1:-1] + y[:-2, 2:]
        - 2 * y[1:-1, :-2] + 4 * y[1:-1, 1:-1] - 2 * y[1:-1, 2:]
        + y[2:, :-2] - 2 * y[2:, 1:-1] + y[2:, 2:]
    )
    norm = 6.0 * (frame.width - 2) * (frame.height - 2)
    return math.sqrt(math.pi / 2.0) * float(np.abs(resp).sum()) / norm


def impulse_fraction(frame: Frame) -> float:
    y = frame.y
    saturated = np.count_nonzero(y == 0) + np.count_nonzero(y == 255)
    return saturated / y.size


def blockiness_ratio(frame: Frame) -> float:
    """Mean |horizontal diff| at columns divisible by 8 over the mean elsewhere.

    Returns 0 when the frame is too narrow to contain an interior 8-boundary.
    """
    y = frame.luma_f64()
    if frame.width < 2:
        return 0.0
    # diffs[:, j-1] sits between columns j-1 and j; label it with the right column j
    diffs = np.abs(y[:, 1:] - y[:, :-1])
    cols = np.arange(1, frame.width)
    at_boundary = cols % _TILE == 0
    if not at_boundary.any() or at_boundary.all():
        return 0.0
    boundary_mean = float(diffs[:, at_boundary].mean())
    other_mean = float(diffs[:, ~at_boundary].mean())
    return boundary_mean / max(other_mean, 1e-6)


def mean_var_correlation(frame: Frame) -> float:
    """Pearson correlation of (mean, variance) over non-overlapping 8x8 tiles."""
    th, tw = frame.height // _TILE, frame.width // _TILE
    if th * tw < 2:
        return 0.0
    y = frame.luma_f64()[: th * _TILE, : tw * _TILE]
    tiles = y.reshape(th, _TILE, tw, _TILE).swapaxes(1, 2).reshape(th * tw, _TILE * _TILE)
    means = tiles.mean(axis=1)
    variances = tiles.var(axis=1)
    if means.std() == 0 or variances.std() == 0:
        return 0.0
    return float(np.corrcoef(means, variances)[0, 1])


def luma_histogram(frame: Frame) -> np.ndarray:
    """256-bin luma histogram; bins sum to width * height."""
    return np.bincount(frame.y.ravel(), minlength=256).astype(np.int64)


def classify_noise(frame: Frame, sigma: float) -> NoiseCategory:
    """First-match categorization; thresholds are module constants."""
    if impulse_fraction(frame) > _IMPULSE_FRACTION_LIMIT:
        return NoiseCategory.SALT_PEPPER
    if blockiness_ratio(frame) > _BLOCKINESS_LIMIT:
        return NoiseCategory.PIXELATION_PROCESSED
    if mean_var_correlation(frame) > _MEAN_VAR_CORR_LIMIT:
        return NoiseCategory.SPECKLE_SIGNAL_DEPENDENT
    if sigma >= _GAUSSIAN_SIGMA_LIMIT:
        return NoiseCategory.GAUSSIAN
    return NoiseCategory.CLEAN


def analyze_frame(frame: Frame) -> NoiseEstimate:
    sigma = estimate_sigma(frame)
    return NoiseEstimate(
        sigma=sigma,
        category=classify_noise(frame, sigma),
        impulse_fraction=impulse_fraction(frame),
        blockiness_ratio=blockiness_ratio(frame),
        mean_var_correlation=mean_var_correlation(frame),
        histogram=luma_histogram(frame),
    )


def fork_decision(estimate: NoiseEstimate, threshold: float = DEFAULT_FORK_THRESHOLD) -> ForkDecision:
    """Route DENOISE when sigma >= threshold (ties denoise), else BYPASS."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    route = Route.DENOISE if estimate.sigma >= threshold else Route.BYPASS
    return ForkDecision(route=route, estimate=estimate, threshold_used=threshold)


def median_filter_3x3(frame: Frame) -> Frame:
    """3x3 median prefilter for impulse noise (edges replicate)."""
    return frame.with_luma(median_filter(frame.y, size=3, mode="nearest"))
