"""Shared assertions and helpers for the test suite."""

from __future__ import annotations

import numpy as np

from rtcdenoise import Frame, VideoSequence


def planes_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


def frames_equal(a: Frame, b: Frame) -> bool:
    return (
        planes_equal(a.y, b.y)
        and planes_equal(a.u, b.u)
        and planes_equal(a.v, b.v)
    )


def sequences_equal(a: VideoSequence, b: VideoSequence) -> bool:
    return len(a) == len(b) and all(frames_equal(x, y) for x, y in zip(a, b))


def luma_f64(frame: Frame) -> np.ndarray:
    return frame.y.astype(np.float64)


def mean_abs_frame_diff(seq: VideoSequence) -> float:
    """Average per-pixel temporal variation: a simple flicker measure."""
    diffs = [
        np.mean(np.abs(luma_f64(seq[t]) - luma_f64(seq[t - 1])))
        for t in range(1, len(seq))
    ]
    return float(np.mean(diffs))
