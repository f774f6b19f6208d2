"""Difference operators on the node lattice and the stabilized Maxwell operator.

Vector fields are arrays of shape ``(..., 3, n1, n2, n3)`` and scalar fields
``(..., n1, n2, n3)``; any leading axes (time levels, say) are carried along.

Two one-sided difference kinds are used in pairs so that their composition
gives the compact 7-point second difference at interior nodes:

``forward``   (f[i+1] - f[i]) / h, backward difference on the last node
``backward``  (f[i] - f[i-1]) / h, forward difference on the first node

The ``*_adj`` kinds are the exact negative transposes of these two as
matrices, ``forward_adj = -forward.T`` and ``backward_adj = -backward.T``.
Away from the boundary ``forward_adj`` coincides with ``backward`` and
``backward_adj`` with ``forward``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

KINDS = ("forward", "backward", "forward_adj", "backward_adj")
ADJOINT_KIND = {
    "forward": "forward_adj",
    "backward": "backward_adj",
    "forward_adj": "forward",
    "backward_adj": "backward",
}


def diff(f, axis, h, kind="forward"):
    """One-sided first difference of ``f`` along spatial ``axis`` (0, 1 or 2)."""
    ax = f.ndim - 3 + axis
    g = np.moveaxis(f, ax, -1)
    n = g.shape[-1]
    if n < 3:
        raise ShapeMismatch(f"need at least 3 nodes along axis {axis}, got {n}")
    out = np.empty_like(g)
    if kind == "forward":
        np.subtract(g[..., 1:], g[..., :-1], out=out[..., :-1])
        out[..., -1] = out[..., -2]
    elif kind == "backward":
        np.subtract(g[..., 1:], g[..., :-1], out=out[..., 1:])
        out[..., 0] = out[..., 1]
    elif kind == "forward_adj":
        out[..., 0] = g[..., 0]
        np.subtract(g[..., 1:-2], g[..., :-3], out=out[..., 1:-2])
        out[..., -2] = g[..., -2] + g[..., -1] - g[..., -3]
        out[..., -1] = -(g[..., -2] + g[..., -1])
    elif kind == "backward_adj":
        out[..., 0] = g[..., 0] + g[..., 1]
        out[..., 1] = g[..., 2] - g[..., 1] - g[..., 0]
        np.subtract(g[..., 3:], g[..., 2:-1], out=out[..., 2:-1])
        out[..., -1] = -g[..., -1]
    else:
        raise ValueError(f"unknown difference kind {kind!r}")
    out /= h
    return np.moveaxis(out, -1, ax)


def _check_vector(F):
    if F.ndim < 4 or F.shape[-4] != 3:
        raise ShapeMismatch(f"expected a (..., 3, n1, n2, n3) field, got shape {F.shape}")


def curl(F, h, kind="forward"):
    _check_vector(F)
    F1, F2, F3 = F[..., 0, :, :, :], F[..., 1, :, :, :], F[..., 2, :, :, :]
    return np.stack([
        diff(F3, 1, h, kind) - diff(F2, 2, h, kind),
        diff(F1, 2, h, kind) - diff(F3, 0, h, kind),
        diff(F2, 0, h, kind) - diff(F1, 1, h, kind),
    ], axis=-4)


def divergence(F, h, kind="backward"):
    _check_vector(F)
    return (diff(F[..., 0, :, :, :], 0, h, kind)
            + diff(F[..., 1, :, :, :], 1, h, kind)
            + diff(F[..., 2, :, :, :], 2, h, kind))


def gradient_scalar(p, h, kind="forward"):
    return np.stack([diff(p, a, h, kind) for a in range(3)], axis=-4)


@dataclass(frozen=True)
class StencilContext:
    grid: object
    s: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.s <= 1.0:
            raise ValueError(f"penalty s must lie in [0, 1], got {self.s!r}")

    @property
    def h(self):
        return self.grid.h


def _check_shapes(E, coef, ctx):
    _check_vector(E)
    if E.shape[-3:] != tuple(ctx.grid.shape) or coef.eps.shape != tuple(ctx.grid.shape):
        raise ShapeMismatch(
            f"field {E.shape[-3:]}, coefficients {coef.eps.shape}, grid {ctx.grid.shape}")


def apply_stabilized_operator(E, coef, ctx):
    """``curl(mu^-1 curl E) - s grad(div(eps E))``.

    The inner curl and the outer gradient use forward differences, the outer
    curl and the inner divergence backward ones. With unit coefficients and
    ``s = 1`` this is exactly minus the 7-point Laplacian at interior nodes.
    """
    _check_shapes(E, coef, ctx)
    h = ctx.h
    out = curl(curl(E, h, "forward") / coef.mu, h, "backward")
    if ctx.s:
        out -= ctx.s * gradient_scalar(divergence(coef.eps * E, h, "backward"), h, "forward")
    return out


def apply_adjoint_operator(lam, coef, ctx):
    """Exact matrix transpose of `apply_stabilized_operator`.

    Reads ``curl(mu^-1 curl lam) - s eps grad(div lam)``: the permittivity
    sits outside the divergence, as the transpose moves it there.
    """
    _check_shapes(lam, coef, ctx)
    h = ctx.h
    out = curl(curl(lam, h, "backward_adj") / coef.mu, h, "forward_adj")
    if ctx.s:
        out -= adjoint_penalty(lam, coef, ctx)
    return out


def adjoint_penalty(lam, coef, ctx):
    """The ``s eps grad(div lam)`` part of `apply_adjoint_operator`."""
    h = ctx.h
    return ctx.s * coef.eps * gradient_scalar(divergence(lam, h, "forward_adj"), h, "backward_adj")


def lumped_mass_weights(coef):
    """Diagonal of the lumped mass matrix, per node, in units of the cell volume."""
    return np.array(coef.eps, dtype=float, copy=True)


def cfl_max_step(grid, coef):
    """Largest stable leapfrog step ``h / (sqrt(3) c_max)``."""
    c_max = float(np.max(1.0 / np.sqrt(coef.eps * coef.mu)))
    return grid.h / (np.sqrt(3.0) * c_max)
