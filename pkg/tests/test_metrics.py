import math

import numpy as np
import pytest

from rtcdenoise import (
    INFINITE,
    MS_SSIM_WEIGHTS,
    Frame,
    add_gaussian_noise,
    detail_retention,
    make_frame,
    ms_ssim,
    psnr,
    ssim,
    stage_smooth,
    vifp,
)

import oracles


def _const(value, h=32, w=32):
    return Frame(y=np.full((h, w), value, dtype=np.uint8))


def _crop(frame, h, w):
    return Frame(y=frame.y[:h, :w].copy())


@pytest.fixture(scope="module")
def metric_pairs(natural_frames):
    """Mixed clean/degraded pairs at sizes that exercise every scale."""
    pairs = []
    for i, frame in enumerate(natural_frames):
        ref = _crop(frame, 128, 128)
        pairs.append((ref, add_gaussian_noise(ref, 10.0 + 5 * i, seed=i)))
        pairs.append((ref, stage_smooth(ref, 30.0)))
    ref = _crop(natural_frames[0], 96, 160)
    pairs.append((ref, add_gaussian_noise(ref, 25.0, seed=9)))
    return pairs


# --- psnr ---------------------------------------------------------------------

def test_psnr_identical_is_infinite():
    frame = make_frame(32, 32, seed=1)
    assert psnr(frame, frame) is INFINITE


def test_psnr_full_range_error_is_zero_db():
    assert psnr(_const(0), _const(255)) == pytest.approx(0.0, abs=1e-12)


def test_psnr_uniform_offset_closed_form():
    # mse = 16^2 = 256 everywhere
    value = psnr(_const(0), _const(16))
    assert abs(value - 10.0 * math.log10(255.0 ** 2 / 256.0)) <= 1e-4


def test_psnr_symmetry_and_noise_monotonicity(natural_frames):
    ref = natural_frames[0]
    lo = add_gaussian_noise(ref, 5.0, seed=1)
    hi = add_gaussian_noise(ref, 25.0, seed=1)
    assert psnr(ref, lo) == psnr(lo, ref)
    assert psnr(ref, lo) > psnr(ref, hi)


def test_psnr_matches_oracle(metric_pairs):
    for ref, test in metric_pairs:
        assert psnr(ref, test) == pytest.approx(
            oracles.psnr(ref.luma_f64(), test.luma_f64()), abs=1e-12
        )


# --- ssim ---------------------------------------------------------------------

def test_ssim_identical_is_one():
    frame = make_frame(48, 48, seed=2)
    assert abs(ssim(frame, frame) - 1.0) <= 1e-9


def test_ssim_constant_pair_closed_form():
    # flat frames: c1-stabilized luminance term only
    mu_x, mu_y = 100.0, 110.0
    c1 = (0.01 * 255.0) ** 2
    expected = (2 * mu_x * mu_y + c1) / (mu_x ** 2 + mu_y ** 2 + c1)
    assert abs(ssim(_const(100), _const(110)) - expected) <= 1e-5


def test_ssim_symmetry_is_exact(natural_frames):
    ref = _crop(natural_frames[1], 64, 64)
    noisy = add_gaussian_noise(ref, 15.0, seed=3)
    assert ssim(ref, noisy) == ssim(noisy, ref)


def test_ssim_degrades_with_noise(natural_frames):
    ref = natural_frames[2]
    lo = ssim(ref, add_gaussian_noise(ref, 5.0, seed=4))
    hi = ssim(ref, add_gaussian_noise(ref, 30.0, seed=4))
    assert 0.0 < hi < lo < 1.0


def test_ssim_matches_oracle(metric_pairs):
    for ref, test in metric_pairs:
        assert ssim(ref, test) == pytest.approx(
            oracles.ssim(ref.luma_f64(), test.luma_f64()), abs=1e-9
        )


def test_ssim_rejects_small_frames():
    with pytest.raises(ValueError):
        ssim(_const(0, 10, 64), _const(0, 10, 64))


# --- ms-ssim ------------------------------------------------------------------

def test_ms_ssim_identical_is_one():
    frame = make_frame(64, 64, seed=5)
    assert abs(ms_ssim(frame, frame) - 1.0) <= 1e-9


def test_ms_ssim_weights_are_published_set():
    assert MS_SSIM_WEIGHTS == (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def test_ms_ssim_single_level_equals_ssim():
    # a 16-pixel side halves below the window once, so only one scale runs
    ref = make_frame(16, 16, seed=6)
    noisy = add_gaussian_noise(ref, 12.0, seed=6)
    assert ms_ssim(ref, noisy) == pytest.approx(ssim(ref, noisy), abs=1e-12)


def test_ms_ssim_matches_oracle(metric_pairs):
    for ref, test in metric_pairs:
        assert ms_ssim(ref, test) == pytest.approx(
            oracles.ms_ssim(ref.luma_f64(), test.luma_f64()), abs=1e-9
        )


def test_ms_ssim_rejects_small_frames():
    with pytest.raises(ValueError):
        ms_ssim(_const(0, 10, 10), _const(0, 10, 10))


def test_ms_ssim_symmetry_is_exact(natural_frames):
    ref = _crop(natural_frames[0], 96, 96)
    noisy = add_gaussian_noise(ref, 20.0, seed=7)
    assert ms_ssim(ref, noisy) == ms_ssim(noisy, ref)


# --- vifp ---------------------------------------------------------------------

def test_vifp_identical_is_one(natural_frames):
    ref = _crop(natural_frames[1], 64, 64)
    assert abs(vifp(ref, ref) - 1.0) <= 1e-6


def test_vifp_blur_loses_information(natural_frames):
    ref = _crop(natural_frames[2], 128, 128)
    blurred = stage_smooth(ref, 40.0)
    assert vifp(ref, blurred) < 1.0
    assert vifp(ref, add_gaussian_noise(ref, 20.0, seed=8)) < 1.0


def test_vifp_matches_oracle(metric_pairs):
    for ref, test in metric_pairs:
        assert vifp(ref, test) == pytest.approx(
            oracles.vifp(ref.luma_f64(), test.luma_f64()), abs=1e-9
        )


def test_vifp_rejects_small_frames():
    with pytest.raises(ValueError):
        vifp(_const(0, 16, 64), _const(0, 16, 64))


# --- detail retention -----------------------------------------------------------

def test_detail_retention_identical_is_one(natural_frames):
    assert detail_retention(natural_frames[0], natural_frames[0]) == pytest.approx(1.0)


def test_detail_retention_blur_and_flattening(natural_frames):
    ref = natural_frames[2]
    assert detail_retention(ref, stage_smooth(ref, 40.0)) < 1.0
    # flattening a strongly textured frame destroys nearly all gradient energy
    textured = add_gaussian_noise(ref, 30.0, seed=10)
    assert detail_retention(textured, _const(128, ref.height, ref.width)) < 0.5


# --- shared input validation -----------------------------------------------------

@pytest.mark.parametrize("metric", [psnr, ssim, ms_ssim, vifp, detail_retention])
def test_metrics_reject_dimension_mismatch(metric):
    with pytest.raises(ValueError):
        metric(_const(0, 64, 64), _const(0, 64, 60))
