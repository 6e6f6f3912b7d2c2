import numpy as np
import pytest
from PIL import Image

from extractor import load_backbone

TEST_BACKBONE = "resnet50-random:11"


@pytest.fixture(scope="session")
def backbone():
    return load_backbone(TEST_BACKBONE)


def noise_image(seed: int, width: int, height: int) -> Image.Image:
    rng = np.random.default_rng(seed)
    return Image.fromarray(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))
