import numpy as np
import pytest

from storelab import Instance, StorageSpec

# Reference instance used across the experiment-facing tests:
# 24 unit-demand slots, a 5-unit store starting empty, prices N(10, 2^2).
REF_MU = 10.0
REF_SIGMA = 2.0


@pytest.fixture(scope="session")
def reference_instance() -> Instance:
    return Instance.constant(24, 1.0, StorageSpec(capacity=5.0, initial_level=0.0))


@pytest.fixture()
def tmp_csv(tmp_path):
    def _path(name="series.csv"):
        return tmp_path / name

    return _path


def random_aligned_instance(rng: np.random.Generator, step: float = 0.25):
    """Tiny instance whose demands, capacity, and s0 are lattice-aligned.

    Sized to stay within the brute-force guard: max demand plus capacity
    never exceeds 12 lattice steps.
    """
    T = int(rng.integers(1, 5))
    B = step * int(rng.integers(2, 7))
    s0 = step * int(rng.integers(0, round(B / step) + 1))
    demand = step * rng.integers(0, 7, size=T).astype(float)
    return Instance(T, demand, StorageSpec(capacity=B, initial_level=s0))
