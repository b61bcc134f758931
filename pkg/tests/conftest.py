import numpy as np
import pytest

from isoembed.config import RunConfig
from isoembed.fields import Grid2D
from isoembed.initial import make_initial
from isoembed.ivp import solve_f, solve_g
from isoembed.metric import make_metric
from isoembed.pipeline import run_pipeline
from isoembed.reparam import build_param_change


@pytest.fixture(scope="session")
def flat_run():
    """Full default pipeline run (flat metric, ramps, 201x201)."""
    return run_pipeline(RunConfig())


@pytest.fixture(scope="session")
def cos2_run():
    """Pipeline run for the curved metric on the narrow box."""
    return run_pipeline(RunConfig(metric="cos2", v_half=0.03))


@pytest.fixture(scope="session")
def cos2_solved_full():
    """Solver-level artifacts for the curved metric on the full default box."""
    grid = Grid2D.centered(0.1, 0.1, 201, 201)
    metric = make_metric("cos2")
    init = make_initial("linear_ramp", 0.1, 0.1)
    fr = solve_f(metric, init, grid)
    gr = solve_g(metric, fr, init, grid)
    pc = build_param_change(fr, gr)
    return metric, init, grid, fr, gr, pc


@pytest.fixture
def small_grid():
    return Grid2D.centered(0.1, 0.1, 41, 41)


def interior_of(mask, grid, depth=2):
    """Erode a mask by `depth` nodes per row interval and v-edges."""
    out = mask.copy()
    out[:, :depth] = False
    out[:, -depth:] = False
    for j in range(grid.nv):
        cols = np.flatnonzero(mask[:, j])
        if cols.size:
            out[cols[:depth], j] = False
            out[cols[-depth:], j] = False
    return out
