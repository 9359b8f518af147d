from pathlib import Path

import numpy as np
import pytest

from qvrf.transform import read_image

DATA = Path(__file__).parent / "data"
IMAGE_NAMES = ("rocket_768x512", "camera_512", "coffee_600x400")


@pytest.fixture(scope="session")
def images():
    return {name: read_image(DATA / f"{name}.pgm") for name in IMAGE_NAMES}


@pytest.fixture(scope="session")
def rocket(images):
    return images["rocket_768x512"]


@pytest.fixture
def small_image():
    rng = np.random.default_rng(7)
    yy, xx = np.mgrid[0:45, 0:61]
    img = 128 + 60 * np.sin(xx / 7.0) * np.cos(yy / 5.0) + rng.normal(0, 6, xx.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)
