import numpy as np
import pytest

from cograsp import RigidTransform
from cograsp.candidates import SamplerConfig
from cograsp.pipeline import demo_scene, run_pipeline

from oracles import random_rotation


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cube_corners():
    return np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])


@pytest.fixture
def random_transform(rng):
    def make():
        return RigidTransform(random_rotation(rng), rng.uniform(-1, 1, size=3))

    return make


@pytest.fixture(scope="session")
def demo_run():
    """Seeded mug scene, 64 robot candidates x 4 hands."""
    return run_pipeline(demo_scene(rng_seed=7), sampler_cfg=SamplerConfig(max_candidates=64, rng_seed=7))
