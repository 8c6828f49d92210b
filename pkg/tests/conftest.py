import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

BOX = (-10.0, -10.0, 10.0, 10.0)


@pytest.fixture(scope="session")
def mesh_cache():
    """Session-wide mesh cache so studies and unit tests share meshes."""
    from polyvem.studies import family_mesh

    def get(family, level, box=BOX, seed=0, split_at=None):
        return family_mesh(family, level, box, seed=seed, split_at=split_at)

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_regular_polygon(rng, n_min=4, n_max=8, scale=1.0):
    """A random shape-regular star polygon (angles well separated)."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        if gaps.min() < 0.35 or gaps.max() > 2.2:
            continue
        r = rng.uniform(0.7, 1.25, n)
        verts = np.column_stack([r * np.cos(ang), r * np.sin(ang)]) * scale
        return verts + rng.uniform(-3, 3, 2) * scale


@pytest.fixture
def polygon_sampler(rng):
    return lambda **kw: random_regular_polygon(rng, **kw)
