from fractions import Fraction

import numpy as np
import pytest

from rtcdenoise import make_frame, make_sequence

from util import frames_equal, sequences_equal


def test_sequences_are_deterministic():
    a = make_sequence(4, 48, 32, seed=7, style="detail", motion=(1.0, 0.5))
    b = make_sequence(4, 48, 32, seed=7, style="detail", motion=(1.0, 0.5))
    assert sequences_equal(a, b)


def test_make_frame_is_first_sequence_frame():
    frame = make_frame(40, 30, seed=3, style="gradient")
    assert frames_equal(frame, make_sequence(1, 40, 30, seed=3, style="gradient")[0])


def test_seeds_and_styles_differ():
    base = make_frame(64, 48, seed=1)
    assert not frames_equal(base, make_frame(64, 48, seed=2))
    assert not frames_equal(base, make_frame(64, 48, seed=1, style="gradient"))
    assert not frames_equal(base, make_frame(64, 48, seed=1, style="detail"))


def test_static_motion_repeats_frames():
    seq = make_sequence(5, 48, 32, seed=4)
    for t in range(1, 5):
        assert frames_equal(seq[t], seq[0])


def test_motion_accumulates_per_frame():
    # two steps of (1, 0) land on the same field as one step of (2, 0)
    slow = make_sequence(3, 64, 48, seed=5, motion=(1.0, 0.0))
    fast = make_sequence(2, 64, 48, seed=5, motion=(2.0, 0.0))
    assert frames_equal(slow[2], fast[1])
    assert not frames_equal(slow[1], slow[0])


def test_grain_is_static_on_static_content():
    seq = make_sequence(4, 48, 32, seed=6, style="grain", grain_sigma=20.0)
    for t in range(1, 4):
        assert frames_equal(seq[t], seq[0])


def test_grain_tracks_integer_motion():
    seq = make_sequence(3, 48, 32, seed=6, style="grain", motion=(1.0, 0.0))
    assert not frames_equal(seq[1], seq[0])
    # the grain field moves with the content: interior columns shift left
    np.testing.assert_array_equal(seq[1].y[:, :-1], seq[0].y[:, 1:])


def test_grain_rejects_fractional_motion():
    with pytest.raises(ValueError):
        make_sequence(3, 48, 32, seed=6, style="grain", motion=(0.5, 0.0))


def test_grain_sigma_scales_texture():
    calm = make_frame(64, 48, seed=8, style="grain", grain_sigma=5.0)
    rough = make_frame(64, 48, seed=8, style="grain", grain_sigma=25.0)
    assert rough.luma_f64().std() > calm.luma_f64().std()


def test_chroma_planes_shape_and_stability():
    seq = make_sequence(3, 37, 23, seed=9, with_chroma=True)
    for frame in seq:
        assert frame.has_chroma
        assert frame.u.shape == ((23 + 1) // 2, (37 + 1) // 2)
        assert frame.v.shape == frame.u.shape
    assert seq[1].u is seq[0].u  # chroma is constant across the sequence


def test_without_chroma_planes_absent():
    assert make_frame(16, 16, seed=1).u is None


def test_frame_rate_propagates():
    seq = make_sequence(2, 16, 16, seed=1, frame_rate=Fraction(30000, 1001))
    assert seq.frame_rate == Fraction(30000, 1001)


def test_validation_errors():
    with pytest.raises(ValueError):
        make_sequence(0, 16, 16)
    with pytest.raises(ValueError):
        make_frame(16, 16, style="fractal")


def test_luma_is_uint8_full_frame():
    frame = make_frame(33, 21, seed=10, style="detail")
    assert frame.y.dtype == np.uint8
    assert frame.y.shape == (21, 33)
    assert frame.y.min() >= 0 and frame.y.max() <= 255
