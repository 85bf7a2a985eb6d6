"""Shared fixtures: seeded photographs and patched fixture sets.

The expensive sets are session-scoped so module tests and the acceptance
suite share one copy. All content is deterministic under the seeds below.
"""

import numpy as np
import pytest

from pad import make_fixture_set, synthetic_photo

PHOTO_W, PHOTO_H = 640, 480


@pytest.fixture(scope="session")
def clean_photos():
    """20 clean photograph-like images, never JPEG-compressed."""
    return [synthetic_photo(PHOTO_W, PHOTO_H, seed=41000 + i) for i in range(20)]


@pytest.fixture(scope="session")
def fixture_bases():
    """10 base photographs for patched fixture sets."""
    return [synthetic_photo(PHOTO_W, PHOTO_H, seed=62000 + i) for i in range(10)]


@pytest.fixture(scope="session")
def noise_fixtures(fixture_bases):
    """50 seeded noise-patch fixtures (10-20% area)."""
    fixtures, _ = make_fixture_set(fixture_bases, 50, seed=71001, kinds=("noise",))
    return fixtures


@pytest.fixture(scope="session")
def quality_fixtures(fixture_bases):
    """50 seeded quality-mismatch fixtures: base at q=80, patch at q=30."""
    fixtures, _ = make_fixture_set(
        fixture_bases, 50, seed=71002, kinds=("quality",),
        base_quality=80, patch_quality=30,
    )
    return fixtures


@pytest.fixture()
def rng():
    return np.random.default_rng(8675309)
