import math

import numpy as np
import pytest

from maxinv.domain import build_grid, classify_boundary
from maxinv.errors import CflViolation
from maxinv.experiments import first_arrival
from maxinv.fields import CoefficientField, Inclusion, phantom
from maxinv.forward import (LeapfrogStepper, SourcePulse, TimeLoopSpec, pulse, solve_forward,
                            step_forward)
from maxinv.operators import cfl_max_step


def test_pulse_values():
    p = SourcePulse(21.0)
    assert pulse(0.0, p) == 0.0
    assert pulse(math.pi / 42, p) == pytest.approx(1.0, abs=1e-15)
    assert pulse(0.35, p) == 0.0
    assert p.t_end == pytest.approx(0.2992, abs=1e-4)
    assert pulse(math.pi / 42, SourcePulse(21.0, amplitude=10.5)) == pytest.approx(10.5)


def test_pulse_rejects_bad_input():
    with pytest.raises(ValueError):
        SourcePulse(0.0)
    with pytest.raises(ValueError):
        SourcePulse(1.0, component=3)


def test_time_loop_levels():
    assert TimeLoopSpec(0.003, 1.2).N == 400
    with pytest.raises(ValueError):
        TimeLoopSpec(0.007, 1.2).N


def test_zero_in_zero_out(cube):
    z = np.zeros((3,) + cube.shape)
    out = step_forward(z, z, CoefficientField.uniform(cube), classify_boundary(cube), 0.01,
                       TimeLoopSpec(0.01, 0.1))
    assert np.all(out == 0)


def test_cfl_guard(cube):
    c = CoefficientField.uniform(cube)
    with pytest.raises(CflViolation):
        LeapfrogStepper(c, classify_boundary(cube), 2 * cfl_max_step(cube, c))


def test_deterministic(small):
    g, m, bm = small
    c = phantom(g, m, [Inclusion(((-0.2, 0.0), (-0.1, 0.1), (-0.1, 0.0)), 5.0, 1.5)])
    a = solve_forward(c, SourcePulse(20.0), TimeLoopSpec(0.01, 0.3), bm, record="full")
    b = solve_forward(c, SourcePulse(20.0), TimeLoopSpec(0.01, 0.3), bm, record="full")
    assert np.array_equal(a.frames, b.frames)


def test_trace_matches_history(small):
    g, m, bm = small
    c = CoefficientField.uniform(g)
    spec = TimeLoopSpec(0.01, 0.3)
    hist = solve_forward(c, SourcePulse(20.0), spec, bm, record="full")
    tr = solve_forward(c, SourcePulse(20.0), spec, bm, record="trace")
    assert tr.data.shape == (31, bm.observation.size, 3)
    assert np.array_equal(hist.observe(bm).data, tr.data)


def _column(h, omega, eps=1.0, T=1.2):
    g = build_grid(((0, 2 * h), (0, 2 * h), (-0.4, 0.4)), h)
    bm = classify_boundary(g)
    tau = 0.25 * h
    hist = solve_forward(CoefficientField.uniform(g, eps=eps), SourcePulse(omega, amplitude=omega / 2),
                         TimeLoopSpec(tau, round(T / tau) * tau), bm, record="full")
    return g, hist.times, hist.frames[:, 1, 1, 1, :]


def _speed(g, t, col, k_near, k_far):
    z = g.axis_coords(2)
    ta = [first_arrival(t, col[:, k], 0.5 * np.abs(col[:, k]).max()) for k in (k_near, k_far)]
    return (z[k_near] - z[k_far]) / (ta[1] - ta[0])


def test_unit_peak_plane_wave():
    # amplitude omega/2 launches (1 - cos)/2, peak 1, and the absorbing face passes it
    g, t, col = _column(0.02, 10.0, T=2.2)
    assert np.abs(col[:, -2]).max() == pytest.approx(1.0, abs=2e-3)
    assert np.abs(col[:, 1]).max() == pytest.approx(1.0, abs=2e-3)
    assert np.abs(col[-1]).max() < 1e-2


@pytest.mark.parametrize("eps", [1.0, 4.0])
def test_front_speed_resolved(eps):
    g, t, col = _column(0.02, 10.0, eps=eps, T=2.4)
    k0 = g.shape[2] // 2
    # interior depths only: the absorbing faces assume the unit background speed
    assert _speed(g, t, col, k0 + 10, k0 - 5) == pytest.approx(1 / np.sqrt(eps), rel=0.02)


def test_stability_at_ninety_percent_cfl(small):
    g, m, bm = small
    c = phantom(g, m, [Inclusion(((-0.2, 0.0), (-0.1, 0.1), (-0.1, 0.0)), 12.0, 2.0)])
    tau = 0.9 * cfl_max_step(g, c)
    N = int(1.2 / tau)
    hist = solve_forward(c, SourcePulse(30.0, amplitude=15.0), TimeLoopSpec(tau, N * tau), bm,
                         record="full")
    assert np.isfinite(hist.frames).all()
    assert np.abs(hist.frames).max() < 10 * 15.0


def test_scattered_signal_appears():
    g = build_grid(((-0.6, 0.6), (-0.4, 0.4), (-0.4, 0.4)), 0.05)
    from maxinv.domain import build_decomposition
    m = build_decomposition(g, ((-0.4, 0.4), (-0.2, 0.2), (-0.2, 0.2)))
    bm = classify_boundary(g)
    spec = TimeLoopSpec(0.01, 1.2)
    base = solve_forward(CoefficientField.uniform(g), SourcePulse(10.0), spec, bm, record="trace")
    c = phantom(g, m, [Inclusion(((-0.2, 0.2), (-0.1, 0.1), (-0.1, 0.1)), 12.0, 2.0)])
    scat = solve_forward(c, SourcePulse(10.0), spec, bm, record="trace")
    diff = np.abs(scat.data - base.data).max(axis=(1, 2))
    # the inclusion top is 0.3 below the face; before the front even reaches it
    # only lattice precursors can differ
    assert diff[spec.times <= 0.3].max() < 1e-3 * diff.max()
    assert diff.max() > 1e-2


def test_backscatter_weaker_than_transmission():
    g = build_grid(((-1.0, 1.0), (-0.5, 0.5), (-0.4, 0.4)), 0.1)
    from maxinv.domain import build_decomposition
    m = build_decomposition(g, ((-0.8, 0.8), (-0.3, 0.3), (-0.3, 0.3)))
    bm = classify_boundary(g)
    c = phantom(g, m, [Inclusion(((-0.6, -0.4), (-0.2, 0.2), (-0.1, 0.1)), 12.0, 2.0),
                       Inclusion(((0.4, 0.6), (-0.2, 0.2), (-0.1, 0.1)), 12.0, 2.0)])
    spec = TimeLoopSpec(0.003, 1.2)
    src = SourcePulse(30.0, amplitude=15.0)
    ph = solve_forward(c, src, spec, bm, record="full")
    hom = solve_forward(CoefficientField.uniform(g), src, spec, bm, record="full")
    after = int(src.t_end / 0.003) + 1
    back = np.abs(ph.frames[after:, :, :, :, -1] - hom.frames[after:, :, :, :, -1]).max()
    through = np.abs(ph.frames[:, :, :, :, 0]).max()
    assert back < through
