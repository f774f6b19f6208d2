"""Tikhonov functional and its gradients with respect to eps and mu."""
from dataclasses import dataclass, field

import numpy as np

from .adjoint import CutoffSpec, cutoff, residual_source, solve_adjoint, trapezoid_weights
from .errors import HistoryMismatch, TraceMismatch
from .forward import solve_forward
from .operators import curl, divergence, gradient_scalar

PENALTY_FORMS = ("divergence", "transpose")


@dataclass(frozen=True)
class TikhonovParams:
    """Regularization weights and priors.

    ``eps0`` and ``mu0`` may be scalars or nodal arrays.  ``cutoff`` is the
    time window applied to the misfit; ``None`` means the default width for
    the run's final time.
    """

    gamma_eps: float = 0.01
    gamma_mu: float = 0.9
    eps0: object = 1.0
    mu0: object = 1.0
    cutoff: CutoffSpec = None

    def __post_init__(self):
        if self.gamma_eps < 0 or self.gamma_mu < 0:
            raise ValueError("regularization weights must be non-negative")

    def window(self, T):
        return self.cutoff if self.cutoff is not None else CutoffSpec(T)


@dataclass
class GradientPair:
    g_eps: np.ndarray
    g_mu: np.ndarray

    def norms(self, mask, h):
        """Discrete L2 norms over INNER nodes."""
        w = h ** 1.5
        return (float(np.linalg.norm(self.g_eps[mask.inner]) * w),
                float(np.linalg.norm(self.g_mu[mask.inner]) * w))


def misfit(E_trace, obs, spec, h):
    """``1/2 sum (E - E_obs)^2 z h^2 tau`` with trapezoid weights in time."""
    if not E_trace.congruent(obs):
        raise TraceMismatch(f"traces {E_trace.data.shape} and {obs.data.shape} differ")
    z = cutoff(E_trace.tau * np.arange(E_trace.N + 1), spec)
    wk = trapezoid_weights(E_trace.N) * z
    r2 = np.sum((E_trace.data - obs.data) ** 2, axis=(1, 2))
    return 0.5 * float(np.dot(wk, r2)) * h * h * E_trace.tau


def regularization(c, p, h):
    return 0.5 * h ** 3 * (p.gamma_eps * float(np.sum((c.eps - p.eps0) ** 2))
                           + p.gamma_mu * float(np.sum((c.mu - p.mu0) ** 2)))


def tikhonov(E_trace, obs, c, p, h):
    """Misfit on the observation face plus the two quadratic penalties."""
    return misfit(E_trace, obs, p.window(E_trace.T), h) + regularization(c, p, h)


def _check_histories(E_hist, lam_hist):
    if E_hist.frames.shape != lam_hist.frames.shape or abs(E_hist.tau - lam_hist.tau) > 1e-15:
        raise HistoryMismatch(
            f"state {E_hist.frames.shape} and adjoint {lam_hist.frames.shape} differ")


def _time_weights(hist):
    return trapezoid_weights(hist.N) * hist.tau


def grad_epsilon(E_hist, lam_hist, c, p, mask, s=1.0, penalty_form="transpose"):
    """Gradient density with respect to eps, zero on OUTER nodes.

    ``-sum_k w_k tau (dlam/dt . dE/dt)`` plus the divergence-penalty term
    plus ``gamma_eps (eps - eps0)``.  Time derivatives are central
    differences, one-sided at the end levels.

    ``penalty_form`` selects the penalty term: ``"divergence"`` uses
    ``s (div E)(div lam)``, ``"transpose"`` the pointwise form
    ``-s E . grad(div lam)`` that comes from differentiating the discrete
    operator.  Both integrate to the same value over the domain.
    """
    _check_histories(E_hist, lam_hist)
    if penalty_form not in PENALTY_FORMS:
        raise ValueError(f"unknown penalty form {penalty_form!r}")
    wt = _time_weights(E_hist)
    E, L = E_hist.frames, lam_hist.frames
    h = mask.grid.h
    g = np.zeros(mask.grid.shape)
    if E_hist.N >= 1:
        dE = np.gradient(E, E_hist.tau, axis=0)
        dL = np.gradient(L, E_hist.tau, axis=0)
        g -= np.einsum("k,kcijl,kcijl->ijl", wt, dL, dE, optimize=True)
        del dE, dL
    if s:
        for k in np.flatnonzero(wt):
            if not np.any(L[k]):
                continue
            if penalty_form == "divergence":
                term = divergence(E[k], h, "backward") * divergence(L[k], h, "backward")
            else:
                gd = gradient_scalar(divergence(L[k], h, "forward_adj"), h, "backward_adj")
                term = -np.sum(E[k] * gd, axis=0)
            g += s * wt[k] * term
    g += p.gamma_eps * (c.eps - p.eps0)
    g[mask.outer] = 0.0
    return g


def grad_mu(E_hist, lam_hist, c, p, mask):
    """Gradient density with respect to mu, zero on OUTER nodes.

    ``-sum_k w_k tau mu^-2 (curl E . curl lam) + gamma_mu (mu - mu0)``.
    """
    _check_histories(E_hist, lam_hist)
    wt = _time_weights(E_hist)
    h = mask.grid.h
    acc = np.zeros(mask.grid.shape)
    for k in np.flatnonzero(wt):
        if not np.any(lam_hist.frames[k]):
            continue
        acc += wt[k] * np.sum(curl(E_hist.frames[k], h, "forward")
                              * curl(lam_hist.frames[k], h, "forward"), axis=0)
    g = -acc / c.mu ** 2 + p.gamma_mu * (c.mu - p.mu0)
    g[mask.outer] = 0.0
    return g


@dataclass
class Evaluation:
    value: float
    misfit: float
    gradient: GradientPair = None
    trace: object = None
    extras: dict = field(default_factory=dict)


@dataclass
class InverseProblem:
    """Everything needed to evaluate the functional and its gradient at a coefficient field.

    Attributes
    ----------
    grid, mask, bmap
        Geometry of the inversion grid.
    pulse : SourcePulse
    loop : TimeLoopSpec
    obs : ObservationTrace
        Measured data on the observation face.
    params : TikhonovParams
    s : float
        Divergence penalty factor.
    injection : str
        Illumination mode passed to the forward solver.
    penalty_form : str
        See `grad_epsilon`.
    """

    grid: object
    mask: object
    bmap: object
    pulse: object
    loop: object
    obs: object
    params: TikhonovParams = TikhonovParams()
    s: float = 1.0
    injection: str = "neumann"
    penalty_form: str = "transpose"

    @property
    def window(self):
        return self.params.window(self.loop.T)

    def simulate(self, c, record="trace"):
        return solve_forward(c, self.pulse, self.loop, self.bmap, record=record, s=self.s,
                             injection=self.injection)

    def value(self, c):
        tr = self.simulate(c)
        m = misfit(tr, self.obs, self.window, self.grid.h)
        return Evaluation(m + regularization(c, self.params, self.grid.h), m, trace=tr)

    def value_and_gradient(self, c):
        hist = self.simulate(c, record="full")
        tr = hist.observe(self.bmap)
        h = self.grid.h
        m = misfit(tr, self.obs, self.window, h)
        src = residual_source(tr, self.obs, self.window)
        lam = solve_adjoint(c, src, self.loop, self.bmap, self.pulse, self.s, self.injection)
        g = GradientPair(
            grad_epsilon(hist, lam, c, self.params, self.mask, self.s, self.penalty_form),
            grad_mu(hist, lam, c, self.params, self.mask))
        return Evaluation(m + regularization(c, self.params, h), m, gradient=g, trace=tr)
