import numpy as np
import pytest

from archreg.phantom import PhantomConfig, generate_phantom
from archreg.transforms import TransformParams


@pytest.fixture(scope="session")
def phantom_identity():
    """Default clean phantom, ground truth = identity."""
    cfg = PhantomConfig(seed=5)
    vol, mesh, truth = generate_phantom(cfg)
    return cfg, vol, mesh, truth


@pytest.fixture(scope="session")
def phantom_moved():
    """Clean phantom displaced by a known pose."""
    cfg = PhantomConfig(seed=3, gt_params=TransformParams(0.12, -0.2, 0.15, 5.0, -7.0, 4.0))
    vol, mesh, truth = generate_phantom(cfg)
    return cfg, vol, mesh, truth


@pytest.fixture(scope="session")
def phantom_artifact():
    """Artifact phantom (30% of teeth carry metal + streaks)."""
    cfg = PhantomConfig(seed=9, artifact_tooth_fraction=0.3,
                        gt_params=TransformParams(-0.1, 0.08, -0.12, -4.0, 6.0, -5.0))
    vol, mesh, truth = generate_phantom(cfg)
    return cfg, vol, mesh, truth


def random_params(rng, rot=0.3, trans=10.0):
    return TransformParams(*rng.uniform(-rot, rot, 3), *rng.uniform(-trans, trans, 3))
