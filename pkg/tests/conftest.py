import math
from collections.abc import Callable, Iterator

import numpy as np
import pytest

from src.beam_profiles import GaussianProfile
from src.forward_model import MeasurementSet
from src.kspace_geometry import WaveContext
from src.parallel import set_threads
from src.phantoms import ComplexImage, ObjectGrid, disk_phantom


@pytest.fixture()
def ctx() -> WaveContext:
    """Unit wavelength, default clamp."""
    return WaveContext(k0=2 * math.pi)


@pytest.fixture()
def gaussian10() -> GaussianProfile:
    return GaussianProfile(a=10.0)


@pytest.fixture()
def gaussian80() -> GaussianProfile:
    return GaussianProfile(a=80.0)


@pytest.fixture()
def small_grid() -> ObjectGrid:
    return ObjectGrid(m=32, r_s=4.0)


@pytest.fixture()
def small_disk(small_grid: ObjectGrid) -> ComplexImage:
    return disk_phantom(small_grid, 2.0, 1.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture()
def make_measurements(ctx: WaveContext) -> Callable[[np.ndarray, int], MeasurementSet]:
    """Build a MeasurementSet around a (M_k, D) value array for an even k-grid size."""

    def _make(values: np.ndarray, m: int) -> MeasurementSet:
        return MeasurementSet(m=m, d=values.shape[1], k0=ctx.k0, r_m=5.0, eps_k=ctx.eps_k, values=values)

    return _make


@pytest.fixture(autouse=True)
def _reset_threads() -> Iterator[None]:
    """Every test starts and ends with the worker cap taken from the environment."""
    set_threads(None)
    yield
    set_threads(None)
