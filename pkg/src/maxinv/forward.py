"""Explicit leapfrog integration of the stabilized Maxwell system for E.

Each step is an interior update

    U = 2 E^k - E^{k-1} - tau^2 / w * A(E^k)

followed by a boundary pass that overwrites every boundary node ``b`` as

    E^{k+1}[b] = alpha U[a] + beta E^k[a] + gamma E^k[b] + data

where ``a`` is the interior neighbour of ``b``.  Keeping every boundary
rule in this affine form makes the transposed pass in `adjoint` mechanical.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import CflViolation, NonFinite
from .fields import FieldHistory, ObservationTrace
from .operators import (StencilContext, apply_adjoint_operator, apply_stabilized_operator,
                        cfl_max_step, lumped_mass_weights)


@dataclass(frozen=True)
class SourcePulse:
    """One period of ``amplitude * sin(omega t)`` on one E component of the illuminated face."""

    omega: float
    component: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.component not in (0, 1, 2):
            raise ValueError("component must be 0, 1 or 2")

    @property
    def t_end(self):
        return 2.0 * math.pi / self.omega


def pulse(t, p):
    """``amplitude * sin(omega t)`` on ``(0, 2 pi / omega)``, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.where((t > 0) & (t < p.t_end), p.amplitude * np.sin(p.omega * t), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TimeLoopSpec:
    tau: float
    T: float
    record: str = "full"

    @property
    def N(self):
        n = int(round(self.T / self.tau))
        if abs(n * self.tau - self.T) > 1e-9 * max(1.0, self.T):
            raise ValueError(f"T={self.T} is not a multiple of tau={self.tau}")
        return n

    @property
    def times(self):
        return self.tau * np.arange(self.N + 1)


@dataclass(frozen=True)
class BoundaryRule:
    nodes: np.ndarray
    adjacent: np.ndarray
    alpha: float
    beta: float
    gamma: float
    data: object = None     # (3,) vector added to every node, or None


class LeapfrogStepper:
    """Single-run stepping engine shared by the forward and adjoint solvers.

    Parameters
    ----------
    coef : CoefficientField
    bmap : BoundaryMap
    tau : float
        Time step; checked against `cfl_max_step`.
    pulse : SourcePulse, optional
        Illumination; ``None`` gives homogeneous data on the observation face.
    s : float
        Divergence penalty factor.
    injection : {"dirichlet", "neumann"}
        How the pulse is imposed on the observation face while it lasts.
    boundary : {"physical", "frozen"}
        ``frozen`` pins every boundary node to zero (used by the adjoint
        identity check).
    """

    def __init__(self, coef, bmap, tau, pulse=None, s=1.0, injection="neumann",
                 boundary="physical"):
        grid = bmap.grid
        tmax = cfl_max_step(grid, coef)
        if tau > tmax * (1 + 1e-12):
            raise CflViolation(f"tau={tau} exceeds the CFL bound {tmax:.6g}")
        if injection not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown injection {injection!r}")
        if boundary not in ("physical", "frozen"):
            raise ValueError(f"unknown boundary mode {boundary!r}")
        self.coef = coef
        self.bmap = bmap
        self.grid = grid
        self.tau = float(tau)
        self.pulse = pulse
        self.ctx = StencilContext(grid, s)
        self.injection = injection
        self.boundary = boundary
        self.shape3 = (3,) + tuple(grid.shape)
        self.w = lumped_mass_weights(coef)
        self.tau2_w = (self.tau ** 2 / self.w).reshape(-1)
        h = grid.h
        self.r_mur = (self.tau - h) / (self.tau + h)   # wave speed 1 on the boundary

    def injecting(self, t):
        return self.pulse is not None and t <= self.pulse.t_end

    def rules(self, t_next):
        bm = self.bmap
        if self.boundary == "frozen":
            return [BoundaryRule(bm.boundary, bm.boundary, 0.0, 0.0, 0.0)]
        r = self.r_mur
        out = [BoundaryRule(bm.lateral, bm.lateral_adjacent, 1.0, 0.0, 0.0),
               BoundaryRule(bm.back, bm.back_adjacent, r, 1.0, -r)]
        if self.injecting(t_next):
            data = np.zeros(3)
            amp = pulse(t_next, self.pulse)
            if self.injection == "dirichlet":
                data[self.pulse.component] = amp
                out.append(BoundaryRule(bm.observation, bm.observation_adjacent, 0.0, 0.0, 0.0, data))
            else:
                data[self.pulse.component] = self.grid.h * amp
                out.append(BoundaryRule(bm.observation, bm.observation_adjacent, 1.0, 0.0, 0.0, data))
        else:
            out.append(BoundaryRule(bm.observation, bm.observation_adjacent, r, 1.0, -r))
        return out

    # flat layout: (3, n_nodes)
    def apply_A(self, E):
        return apply_stabilized_operator(E.reshape(self.shape3), self.coef, self.ctx).reshape(3, -1)

    def apply_AT(self, L):
        return apply_adjoint_operator(L.reshape(self.shape3), self.coef, self.ctx).reshape(3, -1)

    def step(self, E_prev, E_curr, t_next):
        U = 2.0 * E_curr - E_prev - self.tau2_w * self.apply_A(E_curr)
        E_next = U
        updates = []
        for rule in self.rules(t_next):
            val = rule.alpha * U[:, rule.adjacent]
            if rule.beta:
                val += rule.beta * E_curr[:, rule.adjacent]
            if rule.gamma:
                val += rule.gamma * E_curr[:, rule.nodes]
            if rule.data is not None:
                val += rule.data[:, None]
            updates.append((rule.nodes, val))
        for nodes, val in updates:
            E_next[:, nodes] = val
        if not np.all(np.isfinite(E_next)):
            raise NonFinite(f"non-finite field at t={t_next}")
        return E_next


def step_forward(E_prev, E_curr, coef, bmap, t_next, spec, pulse=None, s=1.0,
                 injection="neumann"):
    """Advance one level; frames have shape (3, n1, n2, n3)."""
    st = LeapfrogStepper(coef, bmap, spec.tau, pulse, s, injection)
    out = st.step(E_prev.reshape(3, -1), E_curr.reshape(3, -1), t_next)
    return out.reshape(st.shape3)


def solve_forward(coef, src, spec, bmap, record=None, s=1.0, injection="neumann",
                  boundary="physical", initial=None, out=None):
    """March from zero initial data to ``T``.

    ``record`` (default ``spec.record``) is ``"full"`` for a `FieldHistory`
    or ``"trace"`` for the `ObservationTrace` on the observation face.
    ``out`` may be a preallocated (N+1, 3, n1, n2, n3) array, e.g. a
    ``numpy.memmap``, to keep long histories off the heap.  ``initial``
    optionally gives ``(E^0, E^1)`` instead of zero data.
    """
    record = record or spec.record
    st = LeapfrogStepper(coef, bmap, spec.tau, src, s, injection, boundary)
    N = spec.N
    n = bmap.grid.size
    obs = bmap.observation
    if initial is None:
        E_prev = np.zeros((3, n))
        E_curr = np.zeros((3, n))
        k0 = 0
    else:
        E_prev = np.asarray(initial[0], dtype=float).reshape(3, n).copy()
        E_curr = np.asarray(initial[1], dtype=float).reshape(3, n).copy()
        k0 = 1

    omega = src.omega if src is not None else float("nan")
    if record == "full":
        frames = out if out is not None else np.zeros((N + 1,) + st.shape3)
        frames[0] = E_prev.reshape(st.shape3) if k0 else 0.0
        if k0:
            frames[1] = E_curr.reshape(st.shape3)
    elif record == "trace":
        trace = np.zeros((N + 1, obs.size, 3))
        if k0:
            trace[0] = E_prev[:, obs].T
            trace[1] = E_curr[:, obs].T
    else:
        raise ValueError(f"unknown record policy {record!r}")

    for k in range(k0, N):
        E_next = st.step(E_prev, E_curr, (k + 1) * spec.tau)
        if record == "full":
            frames[k + 1] = E_next.reshape(st.shape3)
        else:
            trace[k + 1] = E_next[:, obs].T
        E_prev, E_curr = E_curr, E_next

    if record == "full":
        return FieldHistory(frames, tau=spec.tau, T=spec.T)
    return ObservationTrace(trace, tau=spec.tau, T=spec.T, omega=omega)
