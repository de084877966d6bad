import pytest

from rtcdenoise import make_frame

# three distinct natural-content fixtures at the evaluation resolution
FIXTURES = (("gradient", 11), ("blobs", 22), ("detail", 33))


@pytest.fixture(scope="session")
def natural_frames():
    return tuple(make_frame(480, 360, seed=seed, style=style) for style, seed in FIXTURES)
