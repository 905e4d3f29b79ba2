"""Trajectories in scaled time, steady states and charging times.

Both solvers report on a uniform tau grid, tau = n_charger * gamma_down * t
(gamma_up * t without dissipation), so superradiant dynamics happen on
tau = O(1) whatever the charger size.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import exact_solver
from .errors import CapacityError, IntegrationFailure, InvalidArgument, NotConverged, NotReached
from .integrate import dense_solve
from .moment_engine import MomentState, generate_moment_system, initial_moments
from .scenario import ScenarioConfig
from .spin_algebra import initial_state

log = logging.getLogger(__name__)

__all__ = [
    "MomentState",
    "ScenarioConfig",
    "TrajectoryResult",
    "integrate",
    "integrate_meanfield",
    "integrate_exact",
    "steady_state_value",
    "charging_time",
    "run_to_steady",
]

CLAMP_TOL = 1e-6
ENERGY_TOL = 1e-6
METHODS = ("exact", "meanfield")


@dataclass
class TrajectoryResult:
    tau: np.ndarray
    energies: np.ndarray  # shape (len(tau), n_ensembles)
    labels: tuple
    method: str
    scenario: ScenarioConfig
    snapshots: list = None
    extras: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def index(self, ensemble):
        if isinstance(ensemble, str):
            try:
                return self.labels.index(ensemble)
            except ValueError:
                raise InvalidArgument(f"unknown ensemble {ensemble!r}; have {self.labels}") from None
        if not 0 <= ensemble < len(self.labels):
            raise InvalidArgument(f"ensemble index {ensemble} out of range")
        return ensemble

    def series(self, ensemble):
        return self.energies[:, self.index(ensemble)]

    def final(self):
        return dict(zip(self.labels, self.energies[-1]))


def _grid(scenario, tau_grid):
    return scenario.tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)


def integrate_meanfield(scenario, tau_grid=None, strict=True, method="RK45"):
    """Integrate the closed moment equations of ``scenario``.

    Values that leave their physical range by at most 1e-6 (in energy
    density units) are clamped. Larger excursions mean the closure broke
    down: with ``strict`` they raise :class:`IntegrationFailure`, otherwise
    they are kept and listed in ``notes``.
    """
    grid = _grid(scenario, tau_grid)
    system = generate_moment_system(scenario)
    state0 = initial_moments(scenario)
    n = len(scenario.n_spins)
    nz, ns = state0.scales()
    npair = len(ns)
    scale = scenario.time_scale

    def rhs(tau, y):
        z = y[:n] * nz
        s = (y[n : n + npair] + 1j * y[n + npair :]) * ns
        dz, ds = system.rhs(z, s)
        ds = ds / ns
        return np.concatenate([dz / nz, ds.real, ds.imag]) / scale

    diag = [p for p, (a, b) in enumerate(state0.pairs) if a == b]
    taus, states, energies, notes = [], [], [], []
    for tau, y in dense_solve(rhs, state0.to_vector(), grid, scenario.rtol, scenario.atol, method=method):
        x = y[:n]
        breach = max(
            np.max(np.abs(x) - 0.5, initial=0.0),
            np.max(-y[n:][diag], initial=0.0),
            np.max(np.abs(y[n + npair :][diag]), initial=0.0),
        )
        if breach > CLAMP_TOL:
            msg = (
                f"moment invariants violated by {breach:.3g} at tau={tau:.6g} "
                "(closure breakdown; try larger ensembles or the exact solver)"
            )
            if strict:
                raise IntegrationFailure(msg, tau=tau)
            if not notes:
                log.warning(msg)
            notes.append(msg)
        elif breach > 0:
            y = y.copy()
            y[:n] = np.clip(x, -0.5, 0.5)
            y[n:][diag] = np.maximum(y[n:][diag], 0.0)
            y[n + npair :][diag] = 0.0
        taus.append(tau)
        states.append(MomentState.from_vector(y, scenario.n_spins))
        energies.append(y[:n] + 0.5)
    return TrajectoryResult(
        tau=np.array(taus),
        energies=np.array(energies),
        labels=scenario.labels,
        method="meanfield",
        scenario=scenario,
        snapshots=states,
        notes=notes,
    )


def exact_dimension(scenario):
    return math.prod(scenario.dims)


def integrate_exact(scenario, tau_grid=None, negativity=None, keep_states=False, backend="auto"):
    """Integrate the full master equation.

    ``negativity`` optionally lists ensembles (labels or indices); the logarithmic
    negativity across that cut is then recorded in ``extras["log_negativity"]``.
    """
    dim = exact_dimension(scenario)
    if dim > exact_solver.MAX_EXACT_DIM:
        raise CapacityError(
            f"exact solver limited to {exact_solver.MAX_EXACT_DIM} joint states, "
            f"scenario needs {dim}; use method=meanfield"
        )
    if negativity is not None:
        negativity = [scenario.labels.index(e) if isinstance(e, str) else e for e in negativity]
    grid = _grid(scenario, tau_grid)
    rho0 = initial_state(scenario.initial_levels, scenario.n_spins)
    channels = exact_solver.build_channels(scenario)
    taus, energies, negs, states = [], [], [], []
    for tau, rho in exact_solver.iter_exact(
        rho0, channels, grid, scenario.time_scale, scenario.rtol, scenario.atol, backend=backend
    ):
        taus.append(tau)
        energies.append(exact_solver.energy_densities(rho))
        if negativity is not None:
            negs.append(exact_solver.logarithmic_negativity(rho, negativity))
        if keep_states:
            states.append(rho)
    energies = np.array(energies)
    if energies.min() < -ENERGY_TOL or energies.max() > 1 + ENERGY_TOL:
        raise IntegrationFailure("energy density left [0, 1]; tighten tolerances", tau=taus[-1])
    extras = {"log_negativity": np.array(negs)} if negativity is not None else {}
    return TrajectoryResult(
        tau=np.array(taus),
        energies=np.clip(energies, 0.0, 1.0),
        labels=scenario.labels,
        method="exact",
        scenario=scenario,
        snapshots=states or None,
        extras=extras,
    )


def integrate(scenario, method="meanfield", tau_grid=None, **kwargs):
    if method == "meanfield":
        return integrate_meanfield(scenario, tau_grid, **kwargs)
    if method == "exact":
        return integrate_exact(scenario, tau_grid, **kwargs)
    raise InvalidArgument(f"method must be one of {METHODS}, got {method!r}")


def steady_state_value(traj, ensemble, window=0.2, tol=1e-3):
    """Mean energy over the last ``window`` fraction of the trajectory.

    Raises :class:`NotConverged` when that tail still varies by ``tol`` or more.
    """
    if not 0 < window <= 1:
        raise InvalidArgument("window must be in (0, 1]")
    e = traj.series(ensemble)
    tau = traj.tau
    start = tau[-1] - window * (tau[-1] - tau[0])
    tail = e[tau >= start]
    spread = tail.max() - tail.min()
    if spread >= tol:
        raise NotConverged(
            f"{traj.labels[traj.index(ensemble)]} still varies by {spread:.3g} over the last "
            f"{window:.0%} of tau <= {tau[-1]:g}; increase tau_max"
        )
    return float(tail.mean())


def charging_time(traj, ensemble, threshold=0.9, steady=None):
    """First tau where E reaches ``threshold`` times its steady value."""
    if not 0 < threshold < 1:
        raise InvalidArgument("threshold must lie in (0, 1)")
    if steady is None:
        steady = steady_state_value(traj, ensemble)
    e = traj.series(ensemble)
    level = threshold * steady
    hit = np.flatnonzero(e >= level)
    if hit.size == 0 or level <= 0:
        raise NotReached(f"energy never reaches {level:.4g}")
    k = hit[0]
    if k == 0:
        return float(traj.tau[0])
    t0, t1 = traj.tau[k - 1], traj.tau[k]
    e0, e1 = e[k - 1], e[k]
    return float(t0 + (level - e0) * (t1 - t0) / (e1 - e0))


def run_to_steady(scenario, method="meanfield", extensions=4, window=0.2, tol=1e-3, **kwargs):
    """Integrate, doubling tau_max up to ``extensions`` times until every
    ensemble passes :func:`steady_state_value`.

    Returns ``(trajectory, steady_values)``; raises :class:`NotConverged`
    if the last horizon still fails.
    """
    current = scenario
    for attempt in range(extensions + 1):
        traj = integrate(current, method, **kwargs)
        try:
            steady = [steady_state_value(traj, i, window, tol) for i in range(len(traj.labels))]
            return traj, steady
        except NotConverged:
            if attempt == extensions:
                raise
            log.info("no steady state by tau=%g, doubling horizon", current.tau_max)
            current = current.replace(tau_max=2 * current.tau_max)
