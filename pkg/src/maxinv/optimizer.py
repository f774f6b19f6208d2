"""Projected Fletcher-Reeves conjugate gradient reconstruction of eps and mu."""
import csv
import enum
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGradient, NonDecreasingObjective


class Decision(enum.Enum):
    CONTINUE = "continue"
    STOP_EPS = "stop_eps"
    STOP_MU = "stop_mu"
    STOP_ALL = "stop_all"


@dataclass(frozen=True)
class StoppingSpec:
    """Per-parameter stopping rules.

    A parameter stops once its gradient norm drops to ``theta``, once its
    coefficient norm has moved by less than ``rho`` (relative) over the
    last ``window`` iterations, or at ``max_iter``.
    """

    theta: float = 1e-6
    window: int = 5
    rho: float = 1e-4
    max_iter: int = 60

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.window < 2:
            raise ValueError("stabilization window must be at least 2")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class LineSearchSpec:
    """Backtracking Armijo search along the two scaled directions.

    The trial update is ``(t a_eps d_eps, t a_mu d_mu)`` with ``t`` halved
    from 1 until the projected step satisfies the sufficient-decrease test.
    ``normalize`` fixes the units of ``a_eps`` and ``a_mu``:

    ``"none"``   raw gradient units
    ``"first"``  divided by the largest entry of the first steepest-descent
                 direction, so the first trial changes no node by more
                 than ``a_eps`` (``a_mu``); the scale then stays fixed
    ``"each"``   divided by the largest entry of the current direction

    ``armijo=False`` takes the full step unconditionally.
    """

    alpha_eps: float = 0.5
    alpha_mu: float = 0.05
    c_armijo: float = 1e-4
    max_trials: int = 20
    armijo: bool = True
    normalize: str = "first"

    def __post_init__(self):
        if self.normalize not in ("none", "first", "each"):
            raise ValueError(f"unknown normalization {self.normalize!r}")


@dataclass
class CgState:
    m: int
    coef: object
    g_eps: np.ndarray = None
    g_mu: np.ndarray = None
    d_eps: np.ndarray = None
    d_mu: np.ndarray = None
    beta_eps: float = 0.0
    beta_mu: float = 0.0
    alpha_eps: float = 0.0
    alpha_mu: float = 0.0
    F: list = field(default_factory=list)
    gnorm_eps: list = field(default_factory=list)
    gnorm_mu: list = field(default_factory=list)
    norm_eps: list = field(default_factory=list)
    norm_mu: list = field(default_factory=list)
    stopped_eps: bool = False
    stopped_mu: bool = False


def _inner_dot(a, b, mask):
    if mask is None:
        return float(np.vdot(a, b))
    return float(np.vdot(a[mask.inner], b[mask.inner]))


def cg_direction(g_m, g_prev, d_prev, mask=None):
    """Fletcher-Reeves direction ``-g_m + beta d_prev``.

    Returns ``(d_m, beta)`` with ``beta = |g_m|^2 / |g_prev|^2`` taken over
    INNER nodes when ``mask`` is given.
    """
    den = _inner_dot(g_prev, g_prev, mask)
    if den == 0.0:
        raise DegenerateGradient("previous gradient is zero; restart with d = -g")
    beta = _inner_dot(g_m, g_m, mask) / den
    return -g_m + beta * d_prev, beta


def update_coefficients(c, d_eps, d_mu, alpha_eps, alpha_mu, mask):
    """Step and project onto the admissible box; OUTER nodes stay at 1."""
    new = c.copy()
    new.eps = c.eps + alpha_eps * d_eps
    new.mu = c.mu + alpha_mu * d_mu
    return new.clamped(mask)


def _stabilized(norms, spec):
    if len(norms) < spec.window + 1:
        return False
    ref = norms[-spec.window - 1]
    recent = np.asarray(norms[-spec.window - 1:])
    return float(np.max(np.abs(recent - ref))) < spec.rho * max(abs(ref), 1e-300)


def stopping_check(state, spec):
    """Decide which parameters keep moving after the latest iteration."""
    stop_eps = state.stopped_eps or (
        state.gnorm_eps[-1] <= spec.theta or _stabilized(state.norm_eps, spec)
        or state.m >= spec.max_iter)
    stop_mu = state.stopped_mu or (
        state.gnorm_mu[-1] <= spec.theta or _stabilized(state.norm_mu, spec)
        or state.m >= spec.max_iter)
    if stop_eps and stop_mu:
        return Decision.STOP_ALL
    if stop_eps:
        return Decision.STOP_EPS
    if stop_mu:
        return Decision.STOP_MU
    return Decision.CONTINUE


@dataclass(frozen=True)
class ReconstructionResult:
    coef: object
    n: int
    l: int
    F: tuple
    gnorm_eps: tuple
    gnorm_mu: tuple
    log: str
    iterations: int
    reason: str


LOG_FIELDS = ("m", "F", "misfit", "gnorm_eps", "gnorm_mu", "alpha_eps", "alpha_mu",
              "trials", "max_eps", "max_mu")


def _fmt(x):
    return x if isinstance(x, (int, str)) else f"{x:.10e}"


def reconstruct(problem, start, stopping=StoppingSpec(), search=LineSearchSpec(),
                restart_every=20, callback=None):
    """Run the projected CG loop from ``start`` and return the final iterate.

    Parameters
    ----------
    problem : InverseProblem
    start : CoefficientField
        Initial guess; validated against the problem's region mask.
    stopping : StoppingSpec
    search : LineSearchSpec
    restart_every : int
        Reset both directions to steepest descent every this many iterations.
    callback : callable, optional
        ``callback(state)`` after every iteration.

    Returns
    -------
    ReconstructionResult
        ``n`` and ``l`` are the last iterations that changed eps and mu.
    """
    mask, h = problem.mask, problem.grid.h
    coef = start.copy().validate(mask)
    state = CgState(m=0, coef=coef)
    rows = []
    n_last = l_last = 0
    reason = "max_iter"
    vol = h ** 3
    scales = None

    ev = problem.value_and_gradient(coef)
    while True:
        g1, g2 = ev.gradient.g_eps, ev.gradient.g_mu
        gn1, gn2 = ev.gradient.norms(mask, h)
        state.F.append(ev.value)
        state.gnorm_eps.append(gn1)
        state.gnorm_mu.append(gn2)
        state.norm_eps.append(float(np.linalg.norm(coef.eps[mask.inner])) * h ** 1.5)
        state.norm_mu.append(float(np.linalg.norm(coef.mu[mask.inner])) * h ** 1.5)

        if state.m > 0:
            decision = stopping_check(state, stopping)
            state.stopped_eps |= decision in (Decision.STOP_EPS, Decision.STOP_ALL)
            state.stopped_mu |= decision in (Decision.STOP_MU, Decision.STOP_ALL)
            if decision is Decision.STOP_ALL:
                reason = ("max_iter" if state.m >= stopping.max_iter else "converged")
                rows.append(_row(state.m, ev, gn1, gn2, 0.0, 0.0, 0, coef))
                break
        elif max(gn1, gn2) <= stopping.theta:
            reason = "stationary"
            rows.append(_row(state.m, ev, gn1, gn2, 0.0, 0.0, 0, coef))
            break

        restart = state.m % restart_every == 0
        d1 = _direction(g1, state.g_eps, state.d_eps, mask, restart)
        d2 = _direction(g2, state.g_mu, state.d_mu, mask, restart)
        if state.stopped_eps:
            d1 = np.zeros_like(d1)
        if state.stopped_mu:
            d2 = np.zeros_like(d2)

        if scales is None or search.normalize == "each":
            scales = [0.0, 0.0]
        # a "first" scale is fixed by the first nonzero direction
        if scales[0] == 0.0:
            scales[0] = _scale(d1, search.alpha_eps, search.normalize)
        if scales[1] == 0.0:
            scales[1] = _scale(d2, search.alpha_mu, search.normalize)
        a1 = scales[0] if np.any(d1) else 0.0
        a2 = scales[1] if np.any(d2) else 0.0
        accepted, trial_ev, t, trials = _line_search(problem, coef, ev, d1, d2, a1, a2, search,
                                                     mask, vol)
        if not accepted:
            warnings.warn(f"iteration {state.m}: no decrease along the CG direction",
                          NonDecreasingObjective, stacklevel=2)
            if not restart:
                # one retry along steepest descent
                d1 = np.zeros_like(g1) if state.stopped_eps else np.where(mask.inner, -g1, 0.0)
                d2 = np.zeros_like(g2) if state.stopped_mu else np.where(mask.inner, -g2, 0.0)
                accepted, trial_ev, t, more = _line_search(problem, coef, ev, d1, d2, a1, a2,
                                                           search, mask, vol)
                trials += more
        rows.append(_row(state.m, ev, gn1, gn2, t * a1 if accepted else 0.0,
                         t * a2 if accepted else 0.0, trials, coef))
        if not accepted:
            reason = "line_search"
            break

        new = update_coefficients(coef, d1, d2, t * a1, t * a2, mask)
        if not np.array_equal(new.eps, coef.eps):
            n_last = state.m + 1
        if not np.array_equal(new.mu, coef.mu):
            l_last = state.m + 1
        state.g_eps, state.g_mu, state.d_eps, state.d_mu = g1, g2, d1, d2
        state.alpha_eps, state.alpha_mu = t * a1, t * a2
        coef = new
        state.coef = coef
        state.m += 1
        if callback is not None:
            callback(state)
        ev = problem.value_and_gradient(coef)

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(LOG_FIELDS)
    wr.writerows(rows)
    return ReconstructionResult(coef=coef, n=n_last, l=l_last, F=tuple(state.F),
                                gnorm_eps=tuple(state.gnorm_eps), gnorm_mu=tuple(state.gnorm_mu),
                                log=buf.getvalue(), iterations=state.m, reason=reason)


def _row(m, ev, gn1, gn2, a1, a2, trials, coef):
    vals = (m, ev.value, ev.misfit, gn1, gn2, a1, a2, trials,
            float(coef.eps.max()), float(coef.mu.max()))
    return [_fmt(v) for v in vals]


def _direction(g, g_prev, d_prev, mask, restart):
    sd = np.where(mask.inner, -g, 0.0)
    if restart or g_prev is None:
        return sd
    try:
        d, _ = cg_direction(g, g_prev, d_prev, mask)
    except DegenerateGradient:
        return sd
    d = np.where(mask.inner, d, 0.0)
    if _inner_dot(g, d, mask) >= 0.0:
        return sd
    return d


def _scale(d, alpha, normalize):
    if normalize == "none":
        return alpha
    m = float(np.max(np.abs(d)))
    return alpha / m if m > 0 else 0.0


def _line_search(problem, coef, ev, d1, d2, a1, a2, search, mask, vol):
    """Backtracking on the projected step; returns (accepted, evaluation, t, trials)."""
    if a1 == 0.0 and a2 == 0.0:
        return False, None, 0.0, 0
    g1, g2 = ev.gradient.g_eps, ev.gradient.g_mu
    t = 1.0
    for trial in range(1, search.max_trials + 1):
        c = update_coefficients(coef, d1, d2, t * a1, t * a2, mask)
        step_eps, step_mu = c.eps - coef.eps, c.mu - coef.mu
        if not (np.any(step_eps) or np.any(step_mu)):
            return False, None, t, trial
        if not search.armijo:
            return True, None, t, trial
        slope = vol * (_inner_dot(g1, step_eps, mask) + _inner_dot(g2, step_mu, mask))
        trial_ev = problem.value(c)
        if slope < 0 and trial_ev.value <= ev.value + search.c_armijo * slope:
            return True, trial_ev, t, trial
        t *= 0.5
    return False, None, t, search.max_trials
