import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serre_galerkin.diagnostics import (
    LAX_CASES,
    PeakTrace,
    PeakTracker,
    Peak,
    classify_collision,
    count_solitary_waves,
    dispersive_tail_onset,
    error_norms,
    find_peaks,
    fit_rates,
    invariants,
    manufactured_solution_check,
    solitary_wave_census,
    track_peaks,
)
from serre_galerkin.integrator import TimeGrid, evolve
from serre_galerkin.semidiscrete import SerreState, initial_state
from serre_galerkin.solutions import ManufacturedSolution, SolitaryWave, WaveSum
from serre_galerkin.spline_space import interpolate, make_space

# -- invariants and norms ----------------------------------------------------


def test_flat_state_invariants_exact():
    sp = make_space(150.0, 600, 4)
    inv = invariants(SerreState(sp.constant(1.0), sp.constant(0.0)))
    assert inv.mass == pytest.approx(300.0, abs=1e-11)
    assert inv.momentum == 0.0 and inv.energy <= 1e-28


def test_solitary_wave_excess_mass():
    w = SolitaryWave(1.2, -100.0, 300.0)
    sp = make_space(150.0, 3000, 4)
    inv = invariants(initial_state(sp, w.eta, w.u))
    # closed form: int A sech^2(K x) dx = 2 A / K
    assert 2 * w.amplitude / w.K == pytest.approx(1.83826, abs=1e-5)
    assert inv.mass - 300.0 == pytest.approx(2 * w.amplitude / w.K, abs=1e-10)


def test_error_norms_of_exact_field_vanish():
    sp = make_space(5.0, 40, 4)
    rng = np.random.default_rng(0)
    s = SerreState(sp.field(1 + 0.1 * rng.normal(size=40)), sp.field(0.1 * rng.normal(size=40)))

    class Same:
        def eta(self, x, t=0.0, deriv=0):
            return s.eta(x, deriv)

        def u(self, x, t=0.0, deriv=0):
            return s.u(x, deriv)

    errs = error_norms(s, Same())
    for name in ("eta", "u"):
        for norm, val in errs[name].items():
            assert val <= 1e-13, (name, norm)


def test_error_norms_known_difference():
    # error of the constant 1 against 1 + eps sin(pi x / L): L2 = eps sqrt(L)
    sp = make_space(2.0, 32, 4)
    eps = 1e-3

    class Bump:
        def eta(self, x, t=0.0, deriv=0):
            k = np.pi / 2
            return (1.0 if deriv == 0 else 0.0) + eps * k**deriv * np.sin(k * np.asarray(x) + deriv * np.pi / 2)

        def u(self, x, t=0.0, deriv=0):
            return np.zeros_like(np.asarray(x, dtype=float))

    e = error_norms(SerreState(sp.constant(1.0), sp.constant(0.0)), Bump())["eta"]
    k = np.pi / 2
    assert e["L2"] == pytest.approx(eps * np.sqrt(2.0), rel=1e-10)
    assert e["H1"] == pytest.approx(eps * np.sqrt(2.0 * (1 + k**2)), rel=1e-10)
    assert e["H2"] == pytest.approx(eps * np.sqrt(2.0 * (1 + k**2 + k**4)), rel=1e-10)
    assert e["Linf"] == pytest.approx(eps, rel=1e-10)


@given(p=st.floats(0.5, 6.0), C=st.floats(1e-3, 1e3))
@settings(max_examples=50)
def test_fit_rates_exact_for_power_laws(p, C):
    ns = np.array([600, 1200, 2400, 4800])
    rates = fit_rates(ns, C * ns ** (-p))
    np.testing.assert_allclose(rates, p, atol=1e-12)


def test_fit_rates_example():
    np.testing.assert_allclose(fit_rates([10, 20], [1.0, 1.0 / 16]), [4.0], atol=1e-15)
    assert fit_rates([10], [1.0]).size == 0


# -- manufactured solutions ----------------------------------------------------


def test_manufactured_rest_state_has_zero_error():
    rep = manufactured_solution_check(3.0, [16], 4, T=0.5, solution=ManufacturedSolution(3.0, a=0.0, b=0.0))
    row = rep.rows[0]
    for name in ("eta", "u"):
        for val in row.errors[name].values():
            assert val <= 1e-13


def test_manufactured_cubic_rate():
    rep = manufactured_solution_check(3.0, [64, 128, 256], 4, courant=0.1, T=1.0)
    for name in ("eta", "u"):
        rates = rep.rates(name, "L2")
        assert np.all(np.abs(rates - 4.0) <= 0.3), (name, rates)


def test_manufactured_mass_source():
    sol = ManufacturedSolution(3.0, mass_source=0.01)
    rep = manufactured_solution_check(3.0, [32], 4, courant=0.2, T=1.0, solution=sol)
    assert rep.mass_expected == pytest.approx(0.06)
    # oracle: d/dt int eta = int f_eta, and only the constant source has nonzero mean
    assert rep.rows[0].change[0] == pytest.approx(rep.mass_expected, abs=1e-10)


# -- peaks -------------------------------------------------------------------


def test_single_crest_located_exactly():
    w = SolitaryWave(1.2, -100.0, 300.0)
    sp = make_space(150.0, 3000, 4)
    eta = interpolate(sp, w.eta)
    peaks = find_peaks(eta)
    assert len(peaks) == 1
    assert peaks[0].x == pytest.approx(-100.0, abs=1e-8)
    assert peaks[0].height == pytest.approx(0.44, abs=1e-9)
    assert peaks[0].converged


def test_peak_newton_conditions():
    sp = make_space(100.0, 1000, 4)
    waves = WaveSum([SolitaryWave(1.3, -30.0, 200.0), SolitaryWave(1.1, 30.0, 200.0)])
    eta = interpolate(sp, waves.eta)
    peaks = find_peaks(eta)
    assert len(peaks) == 2 and peaks[0].x < peaks[1].x
    for p in peaks:
        assert abs(eta(p.x, 1)) <= 1e-12 and eta(p.x, 2) < 0
    np.testing.assert_allclose([p.x for p in peaks], [-30.0, 30.0], atol=1e-6)
    assert len(find_peaks(eta, min_height=0.3)) == 1


def test_flat_state_has_no_peaks():
    sp = make_space(10.0, 50, 4)
    assert find_peaks(sp.constant(1.0)) == []


def test_crest_across_periodic_boundary():
    sp = make_space(20.0, 1000, 4)
    w = SolitaryWave(1.2, 19.97, 40.0)
    peaks = find_peaks(interpolate(sp, w.eta))
    assert len(peaks) == 1
    assert peaks[0].x == pytest.approx(19.97, abs=1e-6)


def test_close_maxima_are_merged():
    sp = make_space(20.0, 40, 4)
    f = interpolate(sp, lambda x: 1 + np.exp(-(((x - 0.75) / 0.6) ** 2)) + np.exp(-(((x + 0.75) / 0.6) ** 2)))
    # oracle: dense sampling shows two crests 1.9 apart, closer than 2h = 2
    x = np.linspace(-3, 3, 60001)
    z = f(x) - 1
    dense = x[1:-1][(z[1:-1] > z[:-2]) & (z[1:-1] > z[2:]) & (z[1:-1] > 0.1)]
    assert len(dense) == 2 and dense[1] - dense[0] < 2 * sp.h
    peaks = find_peaks(f, min_height=0.1, scan_factor=10)
    assert len(peaks) == 1 and abs(abs(peaks[0].x) - dense[1]) < 1e-3


def test_finer_scan_finds_same_crest():
    w = SolitaryWave(1.2, 0.3, 100.0)
    sp = make_space(50.0, 250, 4)
    eta = interpolate(sp, w.eta)
    a, b = find_peaks(eta), find_peaks(eta, scan_factor=4)
    assert len(a) == len(b) == 1 and a[0].x == pytest.approx(b[0].x, abs=1e-12)


def test_tracked_crest_moves_with_wave_speed():
    w = SolitaryWave(1.2, -20.0, 100.0)
    sp = make_space(50.0, 1000, 4)
    tracker = PeakTracker(0.1, stride=20)
    evolve(initial_state(sp, w.eta, w.u), TimeGrid.from_courant(20.0, 0.1, sp.h), observers=[tracker], invariant_stride=0)
    trace = tracker.trace
    assert np.all(trace.counts() == 1)
    (track,) = trace.tracks()
    t, x, _ = np.array(track).T
    slope = np.polyfit(t, x, 1)[0]
    assert slope == pytest.approx(1.2, abs=1e-4)


def test_track_peaks_from_record():
    sp = make_space(10.0, 50, 4)
    rec = evolve(SerreState(sp.constant(1.0), sp.constant(0.0)), TimeGrid.from_courant(1.0, 0.5, sp.h), snapshot_stride=1)
    trace = track_peaks(rec, 0.0)
    assert len(trace.times) == len(rec.times) and all(len(p) == 0 for p in trace.peaks)


def test_tracks_follow_wrap():
    trace = PeakTrace(period=10.0)
    for t, x in [(0, 4.0), (1, 4.8), (2, -4.4)]:
        trace.append(t, [Peak(x, 1.0)])
    (track,) = trace.tracks()
    np.testing.assert_allclose([p[1] for p in track], [4.0, 4.8, 5.6])


# -- collision classification -------------------------------------------------

LARGE = SolitaryWave.from_amplitude(1.0, -30.0, 800.0)
SMALL = SolitaryWave.from_amplitude(0.4, 30.0, 800.0)
T_MEET = 60.0 / (LARGE.c - SMALL.c)


def synthetic_trace(one_peak, exchange):
    """Two crests straddling the unperturbed midpoint; ``one_peak`` lists single-crest intervals."""
    trace = PeakTrace(period=800.0)
    for t in np.arange(0.0, 500.0, 0.5):
        mid = LARGE.crest(t) + 0.5 * (SMALL.crest(t) - LARGE.crest(t))
        if any(a <= t <= b for a, b in one_peak):
            trace.append(t, [Peak(mid, 0.9)])
            continue
        front_big = t >= exchange
        rear, front = (0.4, 1.0) if front_big else (1.0, 0.4)
        shift = 2.0 if t > 400 else 0.0
        trace.append(t, [Peak(mid - 5.0 - shift, rear), Peak(mid + 5.0 + shift, front)])
    return trace


@pytest.mark.parametrize(
    "one_peak,exchange,case",
    [
        ([], T_MEET, "a"),
        ([(T_MEET - 3, T_MEET + 3)], T_MEET + 1, "c"),
        ([(T_MEET - 6, T_MEET - 4), (T_MEET + 4, T_MEET + 6)], T_MEET, "b"),
        ([(T_MEET - 6, T_MEET - 4)], T_MEET, "ab"),
        ([(T_MEET + 4, T_MEET + 6)], T_MEET, "ab"),
    ],
)
def test_classification_of_synthetic_traces(one_peak, exchange, case):
    trace = synthetic_trace(one_peak, exchange)
    rep = classify_collision(trace, LARGE, SMALL)
    assert rep.lax_case == case and case in LAX_CASES
    assert len(rep.one_peak_intervals) == len(one_peak)
    for (a, b), (ga, gb) in zip(one_peak, rep.one_peak_intervals):
        assert abs(ga - a) <= 0.5 and abs(gb - b) <= 0.5
    # deterministic
    assert classify_collision(trace, LARGE, SMALL) == rep


def test_amplitudes_and_phase_shifts_of_synthetic_trace():
    trace = synthetic_trace([], T_MEET)
    rep = classify_collision(trace, LARGE, SMALL, report_time=450.0)
    assert rep.amplitudes_after == (1.0, 0.4)
    mid = LARGE.crest(450.0) + 0.5 * (SMALL.crest(450.0) - LARGE.crest(450.0))
    # after the exchange the large crest is in front
    assert rep.phase_shifts[1] == pytest.approx(mid + 7.0 - LARGE.crest(450.0))
    assert rep.phase_shifts[0] == pytest.approx(mid - 7.0 - SMALL.crest(450.0))
    d = rep.to_dict()
    assert d["phase_shifts"]["large_abs"] == abs(rep.phase_shifts[1]) and d["lax_case"] == "a"


def test_classification_rejects_single_crest_trace():
    trace = PeakTrace(period=800.0)
    for t in range(10):
        trace.append(t, [Peak(0.0, 1.0)])
    with pytest.raises(ValueError):
        classify_collision(trace, LARGE, SMALL)


# -- counting solitary waves ---------------------------------------------------


def test_census_of_synthetic_wave_train():
    sp = make_space(300.0, 6000, 4)
    train = WaveSum([SolitaryWave.from_amplitude(a, x0) for a, x0 in [(0.6, 200.0), (0.25, 150.0), (0.05, 110.0)]])
    ripple = lambda x: 2e-4 * np.sin(x) * (x > 0) * (x < 80)  # noqa: E731
    eta = interpolate(sp, lambda x: train.eta(x) + ripple(x))
    census = solitary_wave_census(SerreState(eta, sp.constant(0.0)))
    assert census.count == 3
    assert census.tail == pytest.approx(2e-4, rel=1e-2)
    assert census.threshold == pytest.approx(0.006, rel=1e-2)
    # a crest below ten times the tail is not counted; it then belongs to
    # the tail of the wave ahead of it, which still clears the threshold
    train2 = WaveSum([SolitaryWave.from_amplitude(a, x0) for a, x0 in [(0.6, 200.0), (0.25, 150.0), (0.015, 110.0)]])
    eta2 = interpolate(sp, lambda x: train2.eta(x) + 10 * ripple(x))
    census2 = solitary_wave_census(SerreState(eta2, sp.constant(0.0)))
    assert census2.count == 2
    assert census2.tail == pytest.approx(0.015, rel=1e-2)
    assert count_solitary_waves(SerreState(eta2, sp.constant(0.0))) == 2


def test_census_stops_at_the_dispersive_tail():
    # tail oscillations far above a tenth of the smallest wave do not
    # suppress it, and tail crests above the floor are not counted
    sp = make_space(300.0, 6000, 4)
    train = WaveSum([SolitaryWave.from_amplitude(a, x0) for a, x0 in [(2.0, 250.0), (0.8, 190.0), (0.25, 150.0)]])
    tail = lambda x: 0.1 * np.sin(0.8 * (x - 120.0)) * (x < 120.0) * (x > 20.0)  # noqa: E731
    eta = interpolate(sp, lambda x: train.eta(x) + tail(x))
    census = solitary_wave_census(SerreState(eta, sp.constant(0.0)))
    assert census.count == 3
    assert [round(p.x) for p in census.peaks] == [150, 190, 250]
    assert census.onset == pytest.approx(120.0, abs=sp.h)
    assert census.tail < 0.01
    assert census.threshold == pytest.approx(max(10 * census.tail, 0.02), rel=1e-12)
    assert dispersive_tail_onset(SerreState(eta, sp.constant(0.0)), (0.0, 300.0), 0.02) == census.onset


def test_tail_onset_without_depression():
    sp = make_space(100.0, 1000, 4)
    eta = interpolate(sp, SolitaryWave.from_amplitude(0.5, 50.0).eta)
    assert dispersive_tail_onset(SerreState(eta, sp.constant(0.0)), (0.0, 100.0), 0.005) == 0.0
    assert dispersive_tail_onset(SerreState(sp.constant(1.0), sp.constant(0.0)), (0.0, 100.0), 0.005) == 0.0


def test_census_of_flat_state():
    sp = make_space(30.0, 300, 4)
    assert count_solitary_waves(SerreState(sp.constant(1.0), sp.constant(0.0))) == 0
