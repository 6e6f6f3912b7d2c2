from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from collate.features import FeatureMap, FeaturePyramid, ManuscriptFeatures


def random_feature_map(rng: np.random.Generator, height: int, width: int, channels: int) -> FeatureMap:
    return FeatureMap(rng.standard_normal((height, width, channels)).astype(np.float32))


def random_pyramid(
    rng: np.random.Generator,
    illustration_id: str,
    scale_tags=(3, 4, 5),
    channels: int = 6,
    fixed_size: int = 3,
) -> FeaturePyramid:
    fixed = random_feature_map(rng, fixed_size, fixed_size, channels)
    maps = tuple((t, random_feature_map(rng, t, t, channels)) for t in scale_tags)
    return FeaturePyramid(illustration_id, fixed, maps)


def manuscript_from_pyramids(manuscript_id: str, pyramids) -> ManuscriptFeatures:
    ms = ManuscriptFeatures(manuscript_id, tuple(pyramids))
    ms.validate()
    return ms


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
