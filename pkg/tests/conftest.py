import sys
from pathlib import Path

import numpy as np
import pytest

from stablechaos.noise import BoxDomain, NoiseField, StableParams

sys.path.insert(0, str(Path(__file__).parent))


def random_field(rng, n_atoms, params=None, d=1, low=0.3, high=3.0):
    params = params or StableParams(0.5)
    dom = BoxDomain.unit(d)
    locs = rng.uniform(0.05, 0.95, size=(n_atoms, d))
    return NoiseField.from_arrays(params, dom, locs, rng.uniform(low, high, n_atoms))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
