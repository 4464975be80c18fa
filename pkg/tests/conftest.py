import numpy as np
import pytest

from rdvopt import TargetOrbit

# the four eccentricities exercised throughout: circular, near-circular
# station orbit, moderate, and the highly elliptic benchmark
ECCENTRICITIES = (0.0, 0.0052, 0.5, 0.7988)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_orbit(rng, e_max=0.95):
    return TargetOrbit(
        a=float(rng.uniform(0.5, 3.0)),
        e=float(rng.uniform(0.0, e_max)),
        theta0=float(rng.uniform(-np.pi, np.pi)),
        mu=float(rng.uniform(0.5, 2.0)),
    )
