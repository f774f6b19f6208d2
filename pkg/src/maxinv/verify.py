"""Independent checks run before trusting the optimizer.

`adjoint_identity_check` tests the backward sweep against the forward step
chain through the duality pairing.  `fd_gradient_oracle` differentiates the
functional by central differences using forward solves only.
"""
from dataclasses import dataclass

import numpy as np

from .adjoint import reverse_sweep
from .domain import build_grid, classify_boundary
from .errors import ClampContact, OutsideInner
from .fields import CoefficientField
from .forward import LeapfrogStepper
from .operators import cfl_max_step

PARAMS = ("eps", "mu")


def _linear_chain(st, u, N):
    """Level N of the step chain started from ``E^0 = 0, E^1 = u``, data terms removed."""
    def run(E1):
        E_prev, E_curr = np.zeros_like(E1), E1.copy()
        for k in range(1, N):
            E_prev, E_curr = E_curr, st.step(E_prev, E_curr, (k + 1) * st.tau)
        return E_curr
    out = run(u)
    if st.pulse is not None and st.boundary == "physical":
        out -= run(np.zeros_like(u))
    return out


def adjoint_identity_check(grid=None, seed=0, steps=50, boundary="frozen", mutation=None,
                           coef=None, pulse=None, s=1.0, injection="neumann", cfl_fraction=0.5):
    """Relative duality gap ``|<L u, v> - <u, L* v>| / (|u| |v|)``.

    ``L`` maps ``E^1`` to ``E^N`` (with ``E^0 = 0``) through ``steps - 1``
    forward steps and ``L*`` is the backward sweep.  ``u`` and ``v`` are
    random and supported on interior nodes.

    Parameters
    ----------
    grid : Grid3, optional
        Defaults to 9 x 9 x 9 nodes with spacing 0.1.
    seed : int
        Seeds the coefficients (when ``coef`` is not given) and ``u``, ``v``.
    steps : int
    boundary : {"frozen", "physical"}
    mutation : {None, "penalty_sign", "boundary_sign"}
        Passed to the backward sweep to break it on purpose.
    coef : CoefficientField, optional
        Random admissible coefficients by default.
    pulse : SourcePulse, optional
        Only sets when the observation face switches to absorbing.
    cfl_fraction : float
        Time step as a fraction of the stability bound.
    """
    if grid is None:
        grid = build_grid(((0.0, 0.8),) * 3, 0.1)
    rng = np.random.default_rng(seed)
    if coef is None:
        coef = CoefficientField(1.0 + rng.uniform(0.0, 3.0, grid.shape),
                                1.0 + rng.uniform(0.0, 1.0, grid.shape))
    bmap = classify_boundary(grid)
    tau = cfl_fraction * cfl_max_step(grid, coef)
    st = LeapfrogStepper(coef, bmap, tau, pulse, s, injection, boundary)
    u = np.zeros((3, grid.size))
    v = np.zeros((3, grid.size))
    u[:, bmap.interior] = rng.standard_normal((3, bmap.interior.size))
    v[:, bmap.interior] = rng.standard_normal((3, bmap.interior.size))
    Lu = _linear_chain(st, u, steps)
    Lv = reverse_sweep(st, steps, seed=v, k_min=1, mutation=mutation)
    gap = abs(float(np.vdot(Lu, v)) - float(np.vdot(u, Lv)))
    return gap / (np.linalg.norm(u) * np.linalg.norm(v))


def fd_gradient_oracle(problem, c, param, node, h_fd=1e-3):
    """Central difference ``(F(c + h e) - F(c - h e)) / (2 h)`` at one node.

    Uses only forward solves and the functional, never the adjoint path.
    The result is the derivative with respect to the nodal value, i.e. the
    gradient density times the cell volume ``h^3``.
    """
    if param not in PARAMS:
        raise ValueError(f"param must be one of {PARAMS}")
    node = tuple(int(i) for i in node)
    if not problem.mask.inner[node]:
        raise OutsideInner(f"node {node} is not an INNER node")
    arr = getattr(c, param)
    lo, hi = c.bounds_eps if param == "eps" else c.bounds_mu
    if arr[node] - h_fd < lo or arr[node] + h_fd > hi:
        raise ClampContact(f"{param}={arr[node]} +/- {h_fd} leaves [{lo}, {hi}]")
    vals = []
    for sign in (1.0, -1.0):
        trial = c.copy()
        getattr(trial, param)[node] += sign * h_fd
        vals.append(problem.value(trial).value)
    return (vals[0] - vals[1]) / (2.0 * h_fd)


@dataclass(frozen=True)
class GradientComparison:
    param: str
    nodes: tuple
    oracle: tuple
    adjoint: tuple

    @property
    def node_errors(self):
        o, a = np.array(self.oracle), np.array(self.adjoint)
        return tuple(float(x) for x in np.abs(o - a) / np.abs(o))

    @property
    def relative_error(self):
        """Error of the whole sampled vector, ``|oracle - adjoint| / |oracle|``."""
        o, a = np.array(self.oracle), np.array(self.adjoint)
        return float(np.linalg.norm(o - a) / np.linalg.norm(o))


def compare_gradients(problem, c, nodes, h_fd=1e-3, evaluation=None):
    """Adjoint gradient against the finite-difference oracle at ``nodes``.

    Returns one `GradientComparison` per parameter.
    """
    ev = evaluation if evaluation is not None else problem.value_and_gradient(c)
    vol = problem.grid.h ** 3
    out = []
    for param, g in (("eps", ev.gradient.g_eps), ("mu", ev.gradient.g_mu)):
        oracle, adj = [], []
        for node in nodes:
            node = tuple(int(i) for i in node)
            oracle.append(fd_gradient_oracle(problem, c, param, node, h_fd))
            adj.append(vol * float(g[node]))
        out.append(GradientComparison(param, tuple(tuple(int(i) for i in nd) for nd in nodes),
                                      tuple(oracle), tuple(adj)))
    return tuple(out)
