"""Adaptive embedded Runge-Kutta driver with dense output on a fixed grid.

Thin layer over scipy's Dormand-Prince steppers. Internal step sizes are
chosen by the error controller alone; grid values come from each step's
interpolant, so the output grid never influences the solution.
"""

import numpy as np
from scipy.integrate import DOP853, RK45

from .errors import IntegrationFailure, InvalidArgument

_METHODS = {"RK45": RK45, "DOP853": DOP853}


def check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidArgument("time grid must be a non-empty 1-D sequence")
    if grid[0] != 0.0:
        raise InvalidArgument(f"time grid must start at 0, got {grid[0]}")
    if np.any(np.diff(grid) <= 0):
        raise InvalidArgument("time grid must be strictly increasing")
    return grid


def dense_solve(fun, y0, grid, rtol, atol, method="RK45", on_step=None):
    """Yield ``(t, y(t))`` for every ``t`` in ``grid``.

    ``on_step(t_old, y_old, t_new, y_new)`` is called after every accepted
    step and may raise to abort.
    """
    grid = check_grid(grid)
    y0 = np.array(y0)
    yield grid[0], y0.copy()
    if grid.size == 1:
        return
    solver = _METHODS[method](fun, 0.0, y0, grid[-1], rtol=rtol, atol=atol)
    k = 1
    while k < grid.size:
        t_old, y_old = solver.t, solver.y.copy()
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationFailure(f"integrator failed at tau={solver.t:.6g}: {msg}", tau=solver.t)
        if on_step is not None:
            on_step(t_old, y_old, solver.t, solver.y)
        interp = None
        while k < grid.size and grid[k] <= solver.t:
            if grid[k] == solver.t:
                yield grid[k], solver.y.copy()
            else:
                if interp is None:
                    interp = solver.dense_output()
                yield grid[k], interp(grid[k])
            k += 1
        if solver.status == "finished" and k < grid.size:
            raise IntegrationFailure("integrator stopped before the end of the grid", tau=solver.t)
