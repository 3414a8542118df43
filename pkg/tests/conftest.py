import numpy as np
import pytest

from qcuts3d import PhantomSpec, binarize_ground_truth, generate


@pytest.fixture(scope="session")
def dense_pack_48():
    """48^3 two-phase sphere pack with ~60% solid, shared across tests."""
    spec = PhantomSpec(size=48, grain_count=180, radius_range=(4, 7),
                       phase_intensities={"pore": 0.10, "solid": 0.90},
                       rng_seed=4)
    vol, labels = generate(spec)
    return spec, vol, labels, binarize_ground_truth(labels, spec.solid_code)


@pytest.fixture(scope="session")
def four_phase_phantom_32():
    spec = PhantomSpec(size=32, grain_count=40, radius_range=(4, 6), rng_seed=9)
    vol, labels = generate(spec)
    return spec, vol, labels


def make_volume(arr):
    from qcuts3d import Volume
    return Volume(np.asarray(arr, dtype=np.float64))
