"""Backward-in-time adjoint solve driven by the observation residual.

The backward march is the exact transpose of the forward step chain in
`forward`, boundary rules included.  Reading it back as a leapfrog scheme
gives the same stabilized operator with the permittivity outside the
divergence, the reversed absorbing condition ``d_n lam = +d_t lam`` on the
absorbing faces and a face load built from the residual on the observation
face.  Being an exact transpose, the adjoint identity holds to roundoff.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, TraceMismatch
from .fields import FieldHistory
from .forward import LeapfrogStepper
from .operators import adjoint_penalty

MUTATIONS = (None, "penalty_sign", "boundary_sign")


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth time window that switches the residual off before ``T``.

    ``delta`` defaults to ``0.1 * T``.
    """

    T: float
    delta: float = None

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", 0.1 * self.T)
        if not 0 < self.delta < self.T:
            raise ValueError(f"need 0 < delta < T, got delta={self.delta}, T={self.T}")


def _e(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def cutoff(t, spec):
    """C-infinity window: 1 up to ``T - delta``, 0 after ``T - delta/2``."""
    t = np.asarray(t, dtype=float)
    half = 0.5 * spec.delta
    sigma = np.clip((spec.T - half - t) / half, 0.0, 1.0)
    a, b = _e(sigma), _e(1.0 - sigma)
    out = a / (a + b)
    return out if out.ndim else float(out)


def trapezoid_weights(N):
    w = np.ones(N + 1)
    w[0] = w[-1] = 0.5
    return w


def residual_source(E_trace, obs, spec):
    """``-(E - E_obs) z(t)`` per observation node, level and component.

    Returns an array shaped like the trace data, ``(N+1, P, 3)``.
    """
    if not E_trace.congruent(obs):
        raise TraceMismatch(
            f"simulated trace {E_trace.data.shape} (tau={E_trace.tau}) vs "
            f"observed {obs.data.shape} (tau={obs.tau})")
    z = cutoff(E_trace.tau * np.arange(E_trace.N + 1), spec)
    return -(E_trace.data - obs.data) * z[:, None, None]


def reverse_sweep(st, N, direct=None, emit=None, k_min=0, seed=None, mutation=None):
    """Transpose of ``N`` forward steps of the stepper ``st``.

    Parameters
    ----------
    st : LeapfrogStepper
    N : int
        Index of the last forward level.
    direct : callable, optional
        ``direct(k)`` returns the explicit sensitivity of the output with
        respect to level ``k`` as a (3, n) array, or ``None``.
    emit : callable, optional
        Called as ``emit(k, Ubar, V)`` after transposing step ``k``, where
        ``Ubar`` is the sensitivity of the pre-boundary update and
        ``V = Ubar / w``.
    k_min : int
        Last step to transpose.
    seed : ndarray, optional
        Extra sensitivity of level ``N``.
    mutation : {None, "penalty_sign", "boundary_sign"}
        Deliberately wrong variants used to show the identity check bites.

    Returns
    -------
    ndarray
        The complete sensitivity of level ``k_min``.
    """
    if mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}")
    n = st.grid.size
    nxt = np.zeros((3, n))
    if seed is not None:
        nxt += seed
    if direct is not None:
        d = direct(N)
        if d is not None:
            nxt += d
    cur = np.zeros((3, n))
    bnd = st.bmap.boundary
    all_rows = slice(None)
    tau2 = st.tau ** 2
    w = st.w.reshape(-1)

    for k in range(N - 1, k_min - 1, -1):
        Ub = nxt.copy()
        Ub[:, bnd] = 0.0
        for rule in st.rules((k + 1) * st.tau):
            alpha, gamma = rule.alpha, rule.gamma
            if mutation == "boundary_sign" and gamma:
                alpha, gamma = -alpha, -gamma
            g = nxt[:, rule.nodes]
            if alpha:
                np.add.at(Ub, (all_rows, rule.adjacent), alpha * g)
            if rule.beta:
                np.add.at(cur, (all_rows, rule.adjacent), rule.beta * g)
            if gamma:
                cur[:, rule.nodes] += gamma * g
        V = Ub / w
        AT = st.apply_AT(V)
        if mutation == "penalty_sign" and st.ctx.s:
            AT += 2.0 * adjoint_penalty(V.reshape(st.shape3), st.coef, st.ctx).reshape(3, -1)
        cur += 2.0 * Ub - tau2 * AT
        if direct is not None:
            d = direct(k)
            if d is not None:
                cur += d
        if emit is not None:
            emit(k, Ub, V)
        if not np.all(np.isfinite(cur)):
            raise NonFinite(f"non-finite adjoint field at level {k}")
        nxt, cur = cur, -Ub
    return nxt


def misfit_sensitivity(src, bmap, tau, h):
    """Per-level sensitivity of the misfit to the observed nodes.

    The misfit is ``1/2 sum_k w_k tau h^2 z_k |E - E_obs|^2``, so with
    ``src = -(E - E_obs) z`` the sensitivity at level k is
    ``-w_k tau h^2 src_k``.
    """
    N = src.shape[0] - 1
    wk = trapezoid_weights(N) * tau * h * h
    obs = bmap.observation
    n = bmap.grid.size

    def direct(k):
        if wk[k] == 0.0 or not np.any(src[k]):
            return None
        d = np.zeros((3, n))
        d[:, obs] = -wk[k] * src[k].T
        return d

    return direct


def solve_adjoint(coef, src, spec, bmap, pulse=None, s=1.0, injection="neumann",
                  boundary="physical", mutation=None, out=None):
    """March the adjoint field from ``T`` back to 0.

    ``src`` is the output of `residual_source`.  ``pulse`` and ``injection``
    must match the forward run, since the observation face is absorbing only
    once the pulse has ended.  The result is scaled so that the gradient
    densities of `objective` carry the units of the continuous problem; it
    vanishes at the last two levels and on all boundary nodes.
    """
    N = spec.N
    if src.shape[0] != N + 1 or src.shape[1] != bmap.observation.size:
        raise TraceMismatch(f"source shape {src.shape} does not match N={N}, "
                            f"{bmap.observation.size} observation nodes")
    st = LeapfrogStepper(coef, bmap, spec.tau, pulse, s, injection, boundary)
    h = bmap.grid.h
    frames = out if out is not None else np.zeros((N + 1,) + st.shape3)
    frames[N] = 0.0
    scale = -spec.tau / h ** 3

    def emit(k, Ub, V):
        frames[k] = (scale * V).reshape(st.shape3)

    reverse_sweep(st, N, direct=misfit_sensitivity(src, bmap, spec.tau, h), emit=emit,
                  mutation=mutation)
    return FieldHistory(frames, tau=spec.tau, T=spec.T)

