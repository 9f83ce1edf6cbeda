"""Experiment drivers behind the command-line interface.

Each ``run_*`` function takes a resolved :class:`ExperimentConfig` and an
output directory, writes CSV tables and a JSON report there, and returns
the report dict. Numerical failures propagate as :class:`BlowUpError` or
:class:`SolverBreakdown` after the partial report has been written.
"""

import csv
import json
import logging
import math
import os

import numpy as np

from . import __version__
from .diagnostics import (
    NORMS,
    PeakTracker,
    classify_collision,
    convergence_study,
    error_norms,
    invariants,
    relative_l2,
    solitary_wave_census,
    tail_amplitude,
)
from .errors import BlowUpError, CollisionAnalysisError, SolverBreakdown
from .integrator import TimeGrid, evolve, stability_probe
from .semidiscrete import initial_state
from .solutions import (
    GaussianProfile,
    SolitaryWave,
    WaveSum,
    amplitude_ordering_report,
    gaussian_initial_state,
)
from .spline_space import make_space

log = logging.getLogger(__name__)

NA = "NA"
SCHEMA_ID = "serre-galerkin/report/1"

# units of the nondimensional variables: lengths in undisturbed depths h0,
# times in sqrt(h0/g), velocities in sqrt(g h0)
_UNITS = {"x": "h0", "t": "sqrt(h0/g)", "h": "h0", "k": "sqrt(h0/g)", "u": "sqrt(g*h0)", "c": "sqrt(g*h0)"}


def fmt(v):
    """Full-precision text for a number; ``NA`` for a missing value."""
    if v is None:
        return NA
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return NA
        return format(v, ".17g")
    return str(v)


def write_csv(path, header, rows):
    """Write an RFC 4180 CSV with a header row naming columns and units."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_report(out, report):
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report(cfg, status="ok", **results):
    return {
        "schema": SCHEMA_ID,
        "version": __version__,
        "kind": cfg.kind,
        "status": status,
        "config": cfg.as_dict(),
        "results": results,
    }


def _col(name, unit=None):
    return f"{name} [{unit}]" if unit else f"{name} [1]"


def _time_grid(cfg, h):
    if cfg.k is not None:
        return TimeGrid.from_step(cfg.tfinal, cfg.k, h)
    return TimeGrid.from_courant(cfg.tfinal, cfg.courant, h)


# ---------------------------------------------------------------------------


def run_converge(cfg, out):
    """Error table, rates and invariant drifts of the solitary-wave test."""
    wave = SolitaryWave(cfg.c, cfg.x0, 2.0 * cfg.L)
    rep = convergence_study(wave, cfg.n_list, cfg.order, cfg.courant, cfg.L, cfg.tfinal, velocity_projection=cfg.projection)
    cols = [f"{f}_{n}" for f in ("eta", "u") for n in NORMS]
    rows = []
    for row in rep.rows:
        errs = [None] * len(cols) if row.errors is None else [row.errors[f][n] for f in ("eta", "u") for n in NORMS]
        rows.append([row.N, row.h, row.k, row.steps, *errs, row.relative_l2_eta, "failed" if row.failure else "ok"])
    write_csv(
        os.path.join(out, "errors.csv"),
        ["N [1]", _col("h", "h0"), _col("k", "sqrt(h0/g)"), "steps [1]", *[_col(c) for c in cols], "eta_L2_relative [1]", "status"],
        rows,
    )
    ok = rep.ok_rows
    rate_rows = []
    table = rep.rate_table()
    for i in range(max(0, len(ok) - 1)):
        rate_rows.append([ok[i].N, ok[i + 1].N, *[table[(f, n)][i] for f in ("eta", "u") for n in NORMS]])
    write_csv(os.path.join(out, "rates.csv"), ["N_coarse [1]", "N_fine [1]", *[_col(c + "_rate") for c in cols]], rate_rows)
    write_csv(
        os.path.join(out, "drift.csv"),
        ["N [1]", "mass_rel_drift [1]", "momentum_rel_drift [1]", "energy_rel_drift [1]"],
        [[row.N, *(row.drift or (None, None, None))] for row in rep.rows],
    )
    failed = [row.N for row in rep.rows if row.failure]
    report = _report(
        cfg,
        status="failed" if failed else "ok",
        rows=[
            {
                "N": row.N,
                "h": row.h,
                "k": row.k,
                "steps": row.steps,
                "errors": row.errors,
                "eta_L2_relative": row.relative_l2_eta,
                "drift": None if row.drift is None else dict(zip(("mass", "momentum", "energy"), row.drift)),
                "failure": row.failure,
            }
            for row in rep.rows
        ],
        rates={f"{f}_{n}": list(table[(f, n)]) for f, n in table} if table else {},
        failed_resolutions=failed,
    )
    write_report(out, report)
    if failed:
        raise BlowUpError(f"resolution(s) N={failed} failed")
    return report


def run_evolve(cfg, out):
    """Single run with snapshots and the invariant history."""
    sp = make_space(cfg.L, cfg.n, cfg.order)
    grid = _time_grid(cfg, sp.h)
    if cfg.problem == "solitary":
        exact = SolitaryWave(cfg.c, cfg.x0, 2.0 * cfg.L)
        du0 = (lambda x: exact.u(x, 0.0, 1)) if cfg.projection == "elliptic" else None
        st0 = initial_state(sp, exact.eta, exact.u, velocity_projection=cfg.projection, du0=du0)
    else:
        exact = None
        st0 = gaussian_initial_state(sp, GaussianProfile(cfg.a, cfg.b))
    stride = cfg.snapshot_stride or max(1, grid.M // 200)
    status, failure = "ok", None
    try:
        rec = evolve(st0, grid, snapshot_stride=stride)
    except (BlowUpError, SolverBreakdown) as exc:
        rec, status, failure = exc.record, "failed", exc
    _write_snapshots(out, sp, rec.times, rec.states)
    inv = rec.invariant_array()
    write_csv(
        os.path.join(out, "invariants.csv"),
        [_col("t", "sqrt(h0/g)"), "mass [h0^2]", "momentum [h0^2*sqrt(g*h0)]", "energy [g*h0^3]"],
        [[t, *row] for t, row in zip(rec.invariant_times, inv)],
    )
    results = {
        "N": sp.N,
        "h": sp.h,
        "k": grid.k,
        "steps": grid.M,
        "steps_done": rec.steps_done,
        "snapshots": len(rec.times),
        "drift": dict(zip(("mass", "momentum", "energy"), rec.relative_drift())) if len(inv) else None,
        "failure": None if failure is None else str(failure),
    }
    if exact is not None and status == "ok":
        final = rec.states[-1]
        results["errors"] = error_norms(final, exact)
        results["eta_L2_relative"] = relative_l2(final, exact)
    write_report(out, _report(cfg, status=status, **results))
    if failure is not None:
        raise failure
    return results


def _write_snapshots(out, space, times, states, prefix="snapshot"):
    x = space.mesh.nodes
    for t, st in zip(times, states):
        write_csv(
            os.path.join(out, f"{prefix}_t{t:011.4f}.csv"),
            [_col("x", "h0"), "eta [h0]", _col("u", "sqrt(g*h0)")],
            zip(x, st.eta(x), st.u(x)),
        )


def run_resolve(cfg, out):
    """Gaussian hump at rest resolving into two solitary-wave trains."""
    sp = make_space(cfg.L, cfg.n, cfg.order)
    grid = _time_grid(cfg, sp.h)
    g = GaussianProfile(cfg.a, cfg.b)
    st0 = gaussian_initial_state(sp, g)
    times = sorted(set(cfg.snapshot_times or [cfg.tfinal]))
    wanted = {min(grid.M, round(t / grid.k)) for t in times} | {grid.M}

    class Snap:
        stride = 1

        def __init__(self):
            self.states = []

        def __call__(self, n, st):
            if n in wanted:
                self.states.append(st)

    snap = Snap()
    try:
        rec = evolve(st0, grid, observers=[snap], snapshot_stride=0, invariant_stride=max(1, grid.M // 200))
    except (BlowUpError, SolverBreakdown) as exc:
        _write_snapshots(out, sp, [s.t for s in snap.states], snap.states)
        write_report(out, _report(cfg, status="failed", failure=str(exc), steps_done=exc.record.steps_done))
        raise
    _write_snapshots(out, sp, [s.t for s in snap.states], snap.states)
    final = snap.states[-1]
    right = solitary_wave_census(final, x_range=(0.0, sp.mesh.L))
    mirrored = _mirror(final)
    left = solitary_wave_census(mirrored, x_range=(0.0, sp.mesh.L))
    results = {
        "t": final.t,
        "N": sp.N,
        "h": sp.h,
        "k": grid.k,
        "count_right": right.count,
        "count_left": left.count,
        "peaks_right": [{"x": p.x, "zeta": p.height} for p in right.peaks],
        "peaks_left": [{"x": -p.x, "zeta": p.height} for p in left.peaks],
        "threshold": right.threshold,
        "tail_amplitude": right.tail,
        "tail_onset": right.onset,
        "sqrt_a_over_b": math.sqrt(abs(cfg.a) / cfg.b),
        "drift": dict(zip(("mass", "momentum", "energy"), rec.relative_drift())),
    }
    write_csv(
        os.path.join(out, "peaks.csv"),
        ["direction", _col("x", "h0"), "zeta [h0]"],
        [["right", p.x, p.height] for p in right.peaks] + [["left", -p.x, p.height] for p in left.peaks],
    )
    write_report(out, _report(cfg, **results))
    return results


def _mirror(state):
    """State reflected about ``x = 0`` (velocity sign flipped).

    Reflection maps the basis function starting at node ``j`` onto the one
    starting at node ``-j - r``, so this is exact on the coefficients.
    """
    from .semidiscrete import SerreState

    sp = state.space
    idx = (-np.arange(sp.N) - sp.r) % sp.N
    return SerreState(sp.field(state.eta.c[idx]), sp.field(-state.u.c[idx]), state.t)


def collision_waves(a1, ratio, x1, x2, period):
    """The larger and the smaller solitary wave of an overtaking setup."""
    return (
        SolitaryWave.from_amplitude(a1, x1, period),
        SolitaryWave.from_amplitude(a1 / ratio, x2, period),
    )


def run_collide(cfg, out):
    """Overtaking collision with per-step peak tracking and Lax classification."""
    sp = make_space(cfg.L, cfg.n, cfg.order)
    grid = _time_grid(cfg, sp.h)
    large, small = collision_waves(cfg.a1, cfg.ratio, cfg.x1, cfg.x2, 2.0 * cfg.L)
    pair = WaveSum([large, small])
    st0 = initial_state(sp, pair.eta, pair.u)
    min_height = cfg.min_height if cfg.min_height is not None else 0.25 * small.amplitude
    scan = max(1, round(sp.h / cfg.scan_spacing)) if cfg.scan_spacing else 1
    tracker = PeakTracker(min_height, stride=cfg.track_stride, scan_factor=scan)
    try:
        rec = evolve(st0, grid, observers=[tracker], snapshot_stride=grid.M, invariant_stride=max(1, grid.M // 1000))
    except (BlowUpError, SolverBreakdown) as exc:
        _write_trace(out, tracker.trace)
        write_report(out, _report(cfg, status="failed", failure=str(exc), steps_done=exc.record.steps_done))
        raise
    trace = tracker.trace
    _write_trace(out, trace)
    report_time = cfg.report_time if cfg.report_time is not None else default_report_time(cfg.ratio)
    try:
        cr = classify_collision(trace, large, small, window=cfg.window, report_time=report_time)
    except CollisionAnalysisError as exc:
        write_report(out, _report(cfg, status="failed", failure=str(exc), steps_done=rec.steps_done))
        raise
    final = rec.states[-1]
    residual = collision_residual(final, [large, small], trace)
    _write_snapshots(out, sp, [final.t], [final], prefix="final")
    results = {
        "N": sp.N,
        "h": sp.h,
        "k": grid.k,
        "a1": large.amplitude,
        "a2": small.amplitude,
        "ratio": cfg.ratio,
        "min_height": min_height,
        "scan_spacing": sp.h / scan,
        **cr.to_dict(),
        "residual": residual,
        "drift": dict(zip(("mass", "momentum", "energy"), rec.relative_drift())),
    }
    write_report(out, _report(cfg, **results))
    return results


def default_report_time(ratio):
    """Phase-shift measurement time of the reference tables (270 for ratio 2.5, else 230)."""
    return 270.0 if ratio <= 2.75 else 230.0


def collision_residual(state, waves, trace):
    """Amplitudes of the dispersive tail and of the leftward wavelet after a collision.

    The two final crests are removed by excluding ``6/K`` around each; the
    tail is the largest ``|zeta|`` within 150 length units behind the
    slower crest, the wavelet the largest ``|zeta|`` elsewhere.
    """
    sp = state.space
    per = 2.0 * sp.mesh.L
    final = trace.peaks[-1]
    x = sp.mesh.nodes
    z = state.eta(x) - 1.0
    mask = np.ones_like(x, dtype=bool)
    rows = final[np.argsort(final[:, 1])[-2:]] if len(final) else np.zeros((0, 2))
    for (xc, zc) in rows:
        w = 6.0 / SolitaryWave.from_amplitude(zc).K
        d = np.abs((x - xc + 0.5 * per) % per - 0.5 * per)
        mask &= d > w
    if len(rows) == 2:
        slow = rows[np.argmin(rows[:, 1])][0]
        behind = (slow - x) % per
        tail_sel = mask & (behind < 150.0)
        tail = float(np.abs(z[tail_sel]).max()) if tail_sel.any() else 0.0
        rest = mask & ~tail_sel
        wavelet = float(np.abs(z[rest]).max()) if rest.any() else 0.0
    else:
        tail = float(np.abs(z[mask]).max()) if mask.any() else 0.0
        wavelet = None
    return {"tail_amplitude": tail, "wavelet_amplitude": wavelet}


def _write_trace(out, trace):
    rows = []
    if trace is not None:
        for t, pk in zip(trace.times, trace.peaks):
            order = np.argsort(pk[:, 1])[::-1] if len(pk) else []
            first = pk[order[0]] if len(pk) > 0 else (None, None)
            second = pk[order[1]] if len(pk) > 1 else (None, None)
            rows.append([t, first[0], first[1], second[0], second[1], len(pk)])
    write_csv(
        os.path.join(out, "trace.csv"),
        [_col("t", "sqrt(h0/g)"), _col("x1", "h0"), "zeta1 [h0]", _col("x2", "h0"), "zeta2 [h0]", "peaks [1]"],
        rows,
    )


def run_analytics(cfg, out):
    """Serre, CB and Euler-series amplitudes plus profile samples."""
    rows, entries = [], []
    for c in cfg.speeds:
        rep = amplitude_ordering_report(c)
        rows.append([c, rep["A_S"], rep["A_CB"], rep["A_Euler"]])
        entries.append(rep)
    write_csv(os.path.join(out, "amplitudes.csv"), [_col("c", "sqrt(g*h0)"), "A_S [h0]", "A_CB [h0]", "A_Euler_series [h0]"], rows)
    xs = np.linspace(-cfg.profile_halfwidth, cfg.profile_halfwidth, cfg.profile_points)
    prof = []
    for c in cfg.speeds:
        w = SolitaryWave(c)
        for x, e, u in zip(xs, w.eta(xs), w.u(xs)):
            prof.append([c, x, e, u])
    write_csv(os.path.join(out, "profiles.csv"), [_col("c", "sqrt(g*h0)"), _col("x", "h0"), "eta [h0]", _col("u", "sqrt(g*h0)")], prof)
    report = _report(cfg, amplitudes=entries)
    write_report(out, report)
    return report


def run_stability(cfg, out):
    """Courant-number sweep on the solitary-wave test."""
    sp = make_space(cfg.L, cfg.n, cfg.order)
    wave = SolitaryWave(cfg.c, cfg.x0, 2.0 * cfg.L)
    res = stability_probe(wave, cfg.courant_list, sp, cfg.tfinal)
    rows = [[cn, r["verdict"], r["error"] if math.isfinite(r["error"]) else None, r["baseline_error"], r["steps"]] for cn, r in res.items()]
    write_csv(os.path.join(out, "stability.csv"), ["courant [1]", "verdict", "eta_L2_error [h0^1.5]", "baseline_error [h0^1.5]", "steps [1]"], rows)
    report = _report(cfg, N=sp.N, h=sp.h, probes=[{"courant": cn, **r} for cn, r in res.items()])
    write_report(out, report)
    return report


RUNNERS = {
    "converge": run_converge,
    "evolve": run_evolve,
    "resolve": run_resolve,
    "collide": run_collide,
    "analytics": run_analytics,
    "stability": run_stability,
}


def run(cfg, out):
    """Resolve ``cfg``, write its canonical form to ``out`` and dispatch."""
    cfg = cfg.resolved()
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    log.info("running %s into %s", cfg.kind, out)
    return RUNNERS[cfg.kind](cfg, out)
