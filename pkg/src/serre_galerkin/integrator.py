"""Classical four-stage Runge-Kutta time stepping of the semidiscrete system."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, SolverBreakdown
from .semidiscrete import SerreOperator, SerreState

log = logging.getLogger(__name__)

BLOWUP_THRESHOLD = 1e6


@dataclass(frozen=True)
class TimeGrid:
    """``M`` uniform steps of length ``k = T / M`` on a mesh of width ``h``."""

    T: float
    M: int
    h: float

    @classmethod
    def from_courant(cls, T, courant, h):
        """Smallest step count with ``k / h <= courant``, to rounding."""
        M = max(1, math.ceil(T / (courant * h) - 1e-9))
        return cls(float(T), int(M), float(h))

    @classmethod
    def from_step(cls, T, k, h):
        M = max(1, round(T / k))
        if abs(M * k - T) > 1e-9 * max(1.0, T):
            raise ValueError(f"T={T} is not a whole number of steps k={k}")
        return cls(float(T), int(M), float(h))

    @property
    def k(self):
        return self.T / self.M if self.M else 0.0

    @property
    def courant(self):
        return self.k / self.h

    def time(self, n):
        return self.T * n / self.M


def rk4_step(state, k, operator=None):
    """Advance ``state`` by one classical RK4 step of length ``k``.

    Raises
    ------
    BlowUpError
        On non-finite coefficients or any coefficient above the blow-up threshold.
    SolverBreakdown
        If a stage loses depth positivity.
    """
    op = operator if operator is not None else SerreOperator(state.space)
    eta, u, t = state.eta.c, state.u.c, state.t
    k1e, k1u = op(eta, u, t)
    k2e, k2u = op(eta + 0.5 * k * k1e, u + 0.5 * k * k1u, t + 0.5 * k)
    k3e, k3u = op(eta + 0.5 * k * k2e, u + 0.5 * k * k2u, t + 0.5 * k)
    k4e, k4u = op(eta + k * k3e, u + k * k3u, t + k)
    new_eta = eta + (k / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    new_u = u + (k / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    big = max(np.max(np.abs(new_eta)), np.max(np.abs(new_u)))
    if not big <= BLOWUP_THRESHOLD:
        raise BlowUpError(f"coefficients blew up (max |c| = {big:.3g}) at t = {t + k:.6g}", t=t + k, max_coef=big)
    space = state.space
    return SerreState(space.field(new_eta), space.field(new_u), t + k)


@dataclass
class EvolutionRecord:
    """Snapshots and invariant time series of one run."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    invariant_times: list = field(default_factory=list)
    invariants: list = field(default_factory=list)
    grid: TimeGrid = None
    steps_done: int = 0
    failure: str = None

    def invariant_array(self):
        return np.array(self.invariants, dtype=float).reshape(-1, 3)

    def relative_drift(self):
        """Relative change of (mass, momentum, energy) from first to last record.

        NaN for an invariant whose initial value is zero.
        """
        inv = self.invariant_array()
        d, base = np.abs(inv[-1] - inv[0]), np.abs(inv[0])
        return np.divide(d, base, out=np.full(3, np.nan), where=base != 0)


class Observer:
    """Called with ``(step, state)`` every ``stride`` steps (and at step 0)."""

    stride = 1

    def __call__(self, step, state):
        raise NotImplementedError


def evolve(state0, grid, observers=(), operator=None, snapshot_stride=None, invariant_stride=1, forcing=None):
    """Integrate ``state0`` over ``grid`` with RK4.

    Invariants are logged every ``invariant_stride`` steps (0 disables),
    snapshots every ``snapshot_stride`` steps (default ``max(1, M // 200)``).
    The final step is always recorded. On instability the exception is
    re-raised with the partial record attached as ``exc.record``.
    """
    from .diagnostics import invariants

    op = operator if operator is not None else SerreOperator(state0.space, forcing=forcing)
    if snapshot_stride is None:
        snapshot_stride = max(1, grid.M // 200)
    rec = EvolutionRecord(grid=grid)
    state = state0

    def observe(n, st):
        last = n == grid.M
        if snapshot_stride and (n % snapshot_stride == 0 or last):
            rec.times.append(st.t)
            rec.states.append(st)
        if invariant_stride and (n % invariant_stride == 0 or last):
            inv = invariants(st)
            rec.invariant_times.append(st.t)
            rec.invariants.append((inv.mass, inv.momentum, inv.energy))
        for obs in observers:
            if n % obs.stride == 0 or last:
                obs(n, st)

    observe(0, state)
    k = grid.k
    for n in range(1, grid.M + 1):
        try:
            state = rk4_step(state, k, op)
        except (BlowUpError, SolverBreakdown) as exc:
            rec.failure = str(exc)
            exc.step = n
            exc.record = rec
            log.warning("run aborted at step %d: %s", n, exc)
            raise
        # pin the clock to the grid to avoid accumulated rounding
        state.t = grid.time(n)
        rec.steps_done = n
        observe(n, state)
    return rec


STABLE, DEGRADED, UNSTABLE = "stable", "degraded", "unstable"


def stability_probe(problem, courant_list, space, T, baseline_courant=0.1, factor=3.0):
    """Classify the fully discrete scheme at each Courant number ``k / h``.

    ``problem`` provides ``eta(x, t)``, ``u(x, t)`` (and derivatives) of an
    exact solution. A run is *stable* if its final L2 error in ``eta`` is
    within ``factor`` of the ``baseline_courant`` run, *degraded* if finite
    but larger, *unstable* on blow-up or loss of depth positivity.

    Returns a dict ``courant -> {"verdict", "error", "steps"}``.
    """
    from .diagnostics import error_norms
    from .semidiscrete import initial_state

    def run(courant):
        grid = TimeGrid.from_courant(T, courant, space.h)
        st0 = initial_state(space, problem.eta, problem.u)
        try:
            rec = evolve(st0, grid, snapshot_stride=grid.M, invariant_stride=0)
        except (BlowUpError, SolverBreakdown) as exc:
            return {"verdict": UNSTABLE, "error": math.inf, "steps": grid.M, "message": str(exc)}
        err = error_norms(rec.states[-1], problem, norms=("L2",))["eta"]["L2"]
        if not math.isfinite(err):
            return {"verdict": UNSTABLE, "error": math.inf, "steps": grid.M}
        return {"verdict": None, "error": err, "steps": grid.M}

    base = run(baseline_courant)
    if base["verdict"] == UNSTABLE:
        raise RuntimeError("baseline Courant number is itself unstable")
    out = {}
    for cn in courant_list:
        res = base if cn == baseline_courant else run(cn)
        if res["verdict"] != UNSTABLE:
            res = dict(res, verdict=STABLE if res["error"] <= factor * base["error"] else DEGRADED)
        res["baseline_error"] = base["error"]
        out[cn] = res
    return out
