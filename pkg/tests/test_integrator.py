import numpy as np
import pytest

from serre_galerkin import BlowUpError, SolverBreakdown
from serre_galerkin.diagnostics import fit_rates
from serre_galerkin.integrator import TimeGrid, evolve, rk4_step
from serre_galerkin.semidiscrete import SerreOperator, SerreState, initial_state
from serre_galerkin.solutions import SolitaryWave
from serre_galerkin.spline_space import assemble_load, make_space


def test_time_grid():
    g = TimeGrid.from_courant(100.0, 0.1, 0.5)
    assert g.M == 2000 and g.k == pytest.approx(0.05) and g.courant == pytest.approx(0.1)
    assert g.time(g.M) == 100.0
    assert TimeGrid.from_step(450.0, 0.01, 0.1).M == 45000
    with pytest.raises(ValueError):
        TimeGrid.from_step(1.0, 0.3, 0.1)


def test_flat_state_unchanged():
    sp = make_space(10.0, 40, 4)
    s = rk4_step(SerreState(sp.constant(1.0), sp.constant(0.0)), 0.1)
    assert np.abs(s.eta.c - 1.0).max() <= 1e-15 and np.abs(s.u.c).max() <= 1e-15
    assert s.t == pytest.approx(0.1)


def test_mass_preserved_by_one_step():
    sp = make_space(20.0, 80, 4)
    w = SolitaryWave(1.3, 0.0, 40.0)
    s0 = initial_state(sp, w.eta, w.u)
    ones = assemble_load(sp, 1.0)
    m0 = ones @ s0.eta.c
    s1 = rk4_step(s0, 0.05)
    assert abs(ones @ s1.eta.c - m0) <= 1e-14 * abs(m0)


def test_mass_drift_over_many_steps():
    sp = make_space(20.0, 64, 4)
    w = SolitaryWave(1.2, -5.0, 40.0)
    s0 = initial_state(sp, w.eta, w.u)
    rec = evolve(s0, TimeGrid.from_courant(625.0, 0.1, sp.h), snapshot_stride=10_000, invariant_stride=10_000)
    assert rec.steps_done == 10_000
    assert rec.relative_drift()[0] <= 1e-13


def test_zero_steps_records_initial_state():
    sp = make_space(10.0, 40, 4)
    s0 = SerreState(sp.constant(1.0), sp.constant(0.0))
    rec = evolve(s0, TimeGrid(0.0, 0, sp.h))
    assert rec.times == [0.0] and rec.states == [s0] and rec.steps_done == 0


def test_snapshot_times_increase_and_include_end():
    sp = make_space(10.0, 40, 4)
    w = SolitaryWave(1.1, 0.0, 20.0)
    rec = evolve(initial_state(sp, w.eta, w.u), TimeGrid.from_courant(2.0, 0.5, sp.h), snapshot_stride=3)
    assert np.all(np.diff(rec.times) > 0) and rec.times[-1] == 2.0
    assert len(rec.invariants) == rec.steps_done + 1


def test_deterministic():
    sp = make_space(30.0, 120, 4)
    w = SolitaryWave(1.2, -10.0, 60.0)
    runs = [evolve(initial_state(sp, w.eta, w.u), TimeGrid.from_courant(5.0, 0.1, sp.h)) for _ in range(2)]
    assert np.array_equal(runs[0].states[-1].eta.c, runs[1].states[-1].eta.c)
    assert np.array_equal(runs[0].states[-1].u.c, runs[1].states[-1].u.c)


def mirror(sp, c):
    return c[(-np.arange(sp.N) - sp.r) % sp.N]


def test_reflection_symmetry_preserved_over_100_steps():
    # two equal waves moving towards each other: eta even, u odd
    sp = make_space(40.0, 200, 4)
    left, right = SolitaryWave(1.2, -15.0, 80.0), SolitaryWave(1.2, 15.0, 80.0)
    eta = lambda x: left.eta(x) + right.eta(-x) - 1.0  # noqa: E731
    u = lambda x: left.u(x) - right.u(-x)  # noqa: E731
    s = initial_state(sp, eta, u)
    s.eta.c[:] = 0.5 * (s.eta.c + mirror(sp, s.eta.c))
    s.u.c[:] = 0.5 * (s.u.c - mirror(sp, s.u.c))
    rec = evolve(s, TimeGrid.from_courant(10.0, 0.25, sp.h), snapshot_stride=100)
    assert rec.steps_done == 100
    end = rec.states[-1]
    assert np.abs(end.eta.c - mirror(sp, end.eta.c)).max() <= 1e-12
    assert np.abs(end.u.c + mirror(sp, end.u.c)).max() <= 1e-12


def test_temporal_order():
    # self-convergence in k on a fixed mesh isolates the time error
    sp = make_space(60.0, 240, 4)
    w = SolitaryWave(1.2, -20.0, 120.0)
    s0 = initial_state(sp, w.eta, w.u)
    op = SerreOperator(sp)

    def final(M):
        return evolve(s0, TimeGrid(10.0, M, sp.h), operator=op, snapshot_stride=M, invariant_stride=0).states[-1]

    ref = final(800)
    Ms = [25, 50, 100]
    errs = []
    for M in Ms:
        d = final(M).eta.c - ref.eta.c
        errs.append(np.sqrt(sp.integrate(sp.quad_values(d) ** 2)))
    rates = fit_rates(Ms, errs)
    assert np.all(np.abs(rates - 4.0) <= 0.3), rates


def test_blow_up_threshold():
    sp = make_space(10.0, 40, 4)
    big = SerreState(sp.constant(1.0), sp.constant(2e6))
    with pytest.raises(BlowUpError) as info:
        rk4_step(big, 0.1)
    assert info.value.max_coef == pytest.approx(2e6) and info.value.t == pytest.approx(0.1)


def test_unstable_run_aborts_with_record():
    sp = make_space(150.0, 600, 4)
    w = SolitaryWave(1.2, -100.0, 300.0)
    with pytest.raises((BlowUpError, SolverBreakdown)) as info:
        evolve(initial_state(sp, w.eta, w.u), TimeGrid.from_courant(60.0, 3.0, sp.h), invariant_stride=0)
    exc = info.value
    assert exc.step > 1 and exc.record.steps_done == exc.step - 1 and exc.record.failure
