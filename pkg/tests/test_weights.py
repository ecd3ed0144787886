import numpy as np
import pytest

import softmpm as sm


def node_weights(base, w):
    """Expand per-axis weights into the 27 stencil node weights/offsets."""
    out = []
    for i in range(3):
        for j in range(3):
            for k in range(3):
                out.append((base + (i, j, k), w[0, i] * w[1, j] * w[2, k]))
    return out


def test_weights_at_node_center(small_grid):
    dx = small_grid.dx
    base, w = sm.bspline_weights(np.array([5 * dx, 7 * dx, 6 * dx]), small_grid)
    assert tuple(base) == (4, 6, 5)
    for axis in range(3):
        assert w[axis] == pytest.approx([0.125, 0.75, 0.125], abs=1e-12)


def test_partition_of_unity(small_grid, rng):
    lo, hi = small_grid.margin_bounds()
    for _ in range(1000):
        xp = rng.uniform(lo, hi)
        _, w = sm.bspline_weights(xp, small_grid)
        total = sum(wt for _, wt in node_weights(np.zeros(3, dtype=int), w))
        assert abs(total - 1.0) < 1e-12
        assert (w >= 0.0).all()


def test_first_moment_vanishes(small_grid, rng):
    dx = small_grid.dx
    lo, hi = small_grid.margin_bounds()
    for _ in range(1000):
        xp = rng.uniform(lo, hi)
        base, w = sm.bspline_weights(xp, small_grid)
        moment = np.zeros(3)
        for idx, wt in node_weights(base, w):
            moment += wt * (np.asarray(idx) * dx - xp)
        assert np.abs(moment).max() < 1e-12 * dx


def test_stencil_margin_errors(small_grid):
    dx = small_grid.dx
    with pytest.raises(sm.StencilError):
        sm.bspline_weights(np.array([0.2 * dx, 0.5, 0.5]), small_grid)
    with pytest.raises(sm.StencilError):
        sm.bspline_weights(np.array([0.5, 0.5, 1.0 - 0.2 * dx]), small_grid)
