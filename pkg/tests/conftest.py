import numpy as np
import pytest

import softmpm as sm


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid():
    return sm.Grid(resolution=(16, 16, 16), extent=(1.0, 1.0, 1.0))


def random_state(grid, n, rng, young=5.0e3, spread=0.2):
    """Random-but-valid simulation state for transfer/property tests."""
    materials = [sm.Material(young, 0.3, 1000.0)]
    lo, hi = grid.margin_bounds()
    x = rng.uniform(lo + spread * 0.1, hi - spread * 0.1, (n, 3))
    state = sm.SimState(
        grid=grid, x=x, v=rng.normal(0.0, 0.5, (n, 3)),
        F=np.tile(np.eye(3), (n, 1, 1)) + rng.normal(0.0, 0.05, (n, 3, 3)),
        C=rng.normal(0.0, 2.0, (n, 3, 3)),
        mass=rng.uniform(1.0e-4, 2.0e-3, n),
        vol0=rng.uniform(1.0e-7, 1.0e-6, n),
        material_id=np.zeros(n, dtype=np.int32),
    )
    return state, materials


def random_f(rng, det_lo=0.5, det_hi=2.0):
    """Random deformation gradient with determinant inside [det_lo, det_hi]."""
    while True:
        f = np.eye(3) + rng.normal(0.0, 0.3, (3, 3))
        d = np.linalg.det(f)
        if det_lo <= d <= det_hi:
            return f
