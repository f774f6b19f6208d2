"""Coefficient fields, field histories and boundary observation traces."""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import HistoryMismatch, OutOfBounds, OutsideInner

EPS_BOUNDS = (1.0, 15.0)
MU_BOUNDS = (1.0, 3.0)


@dataclass
class CoefficientField:
    """Nodal relative permittivity and permeability."""

    eps: np.ndarray
    mu: np.ndarray
    bounds_eps: tuple = EPS_BOUNDS
    bounds_mu: tuple = MU_BOUNDS

    @classmethod
    def uniform(cls, grid, eps=1.0, mu=1.0, **kw):
        return cls(np.full(grid.shape, float(eps)), np.full(grid.shape, float(mu)), **kw)

    def copy(self):
        return replace(self, eps=self.eps.copy(), mu=self.mu.copy())

    def validate(self, mask=None):
        """Raise unless bounds hold everywhere and OUTER nodes are exactly 1."""
        for name, arr, (lo, hi) in (("eps", self.eps, self.bounds_eps),
                                    ("mu", self.mu, self.bounds_mu)):
            if not np.all(np.isfinite(arr)):
                raise OutOfBounds(f"{name} has non-finite entries")
            if arr.min() < lo or arr.max() > hi:
                raise OutOfBounds(f"{name} range [{arr.min()}, {arr.max()}] outside [{lo}, {hi}]")
            if mask is not None and np.any(arr[mask.outer] != 1.0):
                raise OutsideInner(f"{name} differs from 1 on the outer region")
        return self

    def clamped(self, mask=None):
        eps = np.clip(self.eps, *self.bounds_eps)
        mu = np.clip(self.mu, *self.bounds_mu)
        if mask is not None:
            eps[mask.outer] = 1.0
            mu[mask.outer] = 1.0
        return replace(self, eps=eps, mu=mu)


@dataclass(frozen=True)
class Inclusion:
    box: tuple
    eps: float
    mu: float

    @property
    def centroid(self):
        return np.array([(lo + hi) / 2 for lo, hi in self.box])


def phantom(grid, mask, inclusions, bounds_eps=EPS_BOUNDS, bounds_mu=MU_BOUNDS):
    """Unit background with box inclusions of constant ``(eps, mu)``."""
    coef = CoefficientField.uniform(grid, bounds_eps=bounds_eps, bounds_mu=bounds_mu)
    for inc in inclusions:
        if not isinstance(inc, Inclusion):
            inc = Inclusion(*inc)
        if not (bounds_eps[0] <= inc.eps <= bounds_eps[1]):
            raise OutOfBounds(f"eps={inc.eps} outside {bounds_eps}")
        if not (bounds_mu[0] <= inc.mu <= bounds_mu[1]):
            raise OutOfBounds(f"mu={inc.mu} outside {bounds_mu}")
        sl = grid.box_slices(inc.box)
        if not np.all(mask.inner[sl]):
            raise OutsideInner(f"inclusion {inc.box} leaks into the outer region")
        coef.eps[sl] = inc.eps
        coef.mu[sl] = inc.mu
    return coef


@dataclass
class FieldHistory:
    """Vector field at time levels ``0..N``; ``frames`` has shape (N+1, 3, n1, n2, n3)."""

    frames: np.ndarray
    tau: float
    T: float

    def __post_init__(self):
        n = self.frames.shape[0] - 1
        if abs(n * self.tau - self.T) > 1e-9 * max(1.0, self.T):
            raise HistoryMismatch(f"{n} steps of {self.tau} do not span T={self.T}")

    @property
    def N(self):
        return self.frames.shape[0] - 1

    @property
    def times(self):
        return self.tau * np.arange(self.N + 1)

    def observe(self, bmap, **meta):
        flat = self.frames.reshape(self.N + 1, 3, -1)[:, :, bmap.observation]
        return ObservationTrace(np.ascontiguousarray(flat.transpose(0, 2, 1)),
                                tau=self.tau, T=self.T, **meta)


@dataclass
class ObservationTrace:
    """E on the observation face: ``data[k, p, c]`` for level k, node p, component c."""

    data: np.ndarray
    tau: float
    T: float
    omega: float = float("nan")
    noise_level: float = 0.0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.data.shape[0] - 1

    @property
    def n_nodes(self):
        return self.data.shape[1]

    def congruent(self, other):
        return (self.data.shape == other.data.shape
                and abs(self.tau - other.tau) <= 1e-12 * max(1.0, self.tau))


def add_noise(obs, level_percent, seed):
    """Additive uniform noise relative to the largest clean sample.

    ``noisy = clean + level/100 * u * max|clean|`` with ``u`` iid on [-1, 1].
    """
    if level_percent < 0:
        raise ValueError("noise level must be non-negative")
    if level_percent == 0:
        return replace(obs, data=obs.data.copy(), noise_level=0.0, seed=int(seed))
    rng = np.random.default_rng(seed)
    amp = float(np.max(np.abs(obs.data)))
    u = rng.uniform(-1.0, 1.0, size=obs.data.shape)
    noisy = obs.data + (level_percent / 100.0) * amp * u
    return replace(obs, data=noisy, noise_level=float(level_percent), seed=int(seed))
