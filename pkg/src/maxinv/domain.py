"""Structured node-centred grid, inner/outer decomposition and boundary faces."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateAxis, InnerNotContained, NonConformingSpacing

RTOL = 1e-9

INNER = 1
OUTER = 0


def _steps(length, h):
    """Number of h-steps in ``length``; raises if it is not an integer."""
    q = length / h
    n = int(round(q))
    if abs(q - n) > RTOL * max(1.0, abs(q)):
        raise NonConformingSpacing(f"length {length!r} is not a multiple of h={h!r}")
    return n


@dataclass(frozen=True)
class Grid3:
    """Uniform node-centred grid on a box.

    Node ``(i, j, k)`` sits at ``lo + (i, j, k) * h``.
    """

    extents: tuple
    h: float
    shape: tuple

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.extents])

    def axis_coords(self, axis):
        lo = self.extents[axis][0]
        return lo + self.h * np.arange(self.shape[axis])

    def node_coordinates(self, index):
        index = np.asarray(index)
        return self.lower + self.h * index

    def index_of(self, x):
        q = (np.asarray(x, dtype=float) - self.lower) / self.h
        idx = np.rint(q).astype(int)
        return tuple(int(i) for i in idx) if idx.ndim == 1 else idx

    def mesh(self):
        return np.meshgrid(*(self.axis_coords(a) for a in range(3)), indexing="ij")

    def box_slices(self, box):
        """Index slices of the nodes inside a closed box (inclusive)."""
        out = []
        for a, (lo, hi) in enumerate(box):
            i0 = _steps(lo - self.extents[a][0], self.h)
            i1 = _steps(hi - self.extents[a][0], self.h)
            if i1 < i0:
                raise NonConformingSpacing(f"empty interval {lo, hi} on axis {a}")
            out.append(slice(i0, i1 + 1))
        return tuple(out)

    def refined(self, factor=2):
        return build_grid(self.extents, self.h / factor)


def build_grid(extents, h):
    """Build a `Grid3` on three closed intervals with uniform spacing ``h``."""
    if not h > 0:
        raise DegenerateAxis(f"spacing must be positive, got {h!r}")
    extents = tuple((float(lo), float(hi)) for lo, hi in extents)
    if len(extents) != 3:
        raise DegenerateAxis("need exactly three intervals")
    shape = []
    for a, (lo, hi) in enumerate(extents):
        if hi - lo < 2 * h * (1 - RTOL):
            raise DegenerateAxis(f"axis {a}: extent {hi - lo} shorter than 2h")
        shape.append(_steps(hi - lo, h) + 1)
    return Grid3(extents=extents, h=float(h), shape=tuple(shape))


@dataclass(frozen=True, eq=False)
class RegionMask:
    grid: Grid3
    inner_extents: tuple
    slices: tuple

    @cached_property
    def flags(self):
        out = np.full(self.grid.shape, OUTER, dtype=np.int8)
        out[self.slices] = INNER
        return out

    @cached_property
    def inner(self):
        return self.flags == INNER

    @property
    def outer(self):
        return ~self.inner

    @property
    def inner_shape(self):
        return tuple(s.stop - s.start for s in self.slices)


def build_decomposition(grid, inner_extents):
    """Split the grid into an inner box of unknowns and a frozen outer collar.

    Raises `InnerNotContained` unless every inner interval lies strictly
    inside the matching grid interval.
    """
    inner_extents = tuple((float(lo), float(hi)) for lo, hi in inner_extents)
    for a, ((lo, hi), (glo, ghi)) in enumerate(zip(inner_extents, grid.extents)):
        tol = RTOL * grid.h
        if lo <= glo + tol or hi >= ghi - tol:
            raise InnerNotContained(
                f"axis {a}: inner {lo, hi} not strictly inside {glo, ghi}")
    slices = grid.box_slices(inner_extents)
    return RegionMask(grid=grid, inner_extents=inner_extents, slices=slices)


@dataclass(frozen=True, eq=False)
class BoundaryMap:
    """Partition of the boundary nodes into the three face classes.

    ``observation`` is the face interior of the max face on
    ``observation_axis``, ``back`` the face interior of the opposite face and
    ``lateral`` every other boundary node (edges and corners included).
    All index arrays are flat (C order) node indices; each ``*_adjacent``
    array holds the interior neighbour used by the boundary update.
    """

    grid: Grid3
    observation_axis: int
    observation: np.ndarray
    back: np.ndarray
    lateral: np.ndarray
    observation_adjacent: np.ndarray
    back_adjacent: np.ndarray
    lateral_adjacent: np.ndarray
    interior: np.ndarray

    @property
    def boundary(self):
        return np.concatenate([self.observation, self.back, self.lateral])

    def face_mask(self, which):
        m = np.zeros(self.grid.size, dtype=bool)
        m[getattr(self, which)] = True
        return m.reshape(self.grid.shape)

    @cached_property
    def observation_coordinates(self):
        idx = np.stack(np.unravel_index(self.observation, self.grid.shape), axis=1)
        return self.grid.lower + self.grid.h * idx


def classify_boundary(grid, observation_axis=2):
    if observation_axis not in (0, 1, 2):
        raise ValueError(f"observation_axis must be 0, 1 or 2, got {observation_axis!r}")
    shape = grid.shape
    idx = np.indices(shape)
    on_bnd = np.zeros(shape, dtype=bool)
    for a in range(3):
        on_bnd |= (idx[a] == 0) | (idx[a] == shape[a] - 1)

    # interior of a face: boundary only along that one axis
    others = [b for b in range(3) if b != observation_axis]
    face_interior = np.ones(shape, dtype=bool)
    for b in others:
        face_interior &= (idx[b] > 0) & (idx[b] < shape[b] - 1)
    ax = idx[observation_axis]
    obs = face_interior & (ax == shape[observation_axis] - 1)
    back = face_interior & (ax == 0)
    lateral = on_bnd & ~obs & ~back

    clamped = np.stack([np.clip(idx[a], 1, shape[a] - 2) for a in range(3)])
    adjacent = np.ravel_multi_index(tuple(clamped), shape)

    def flat(m):
        return np.flatnonzero(m.ravel())

    o, b, l = flat(obs), flat(back), flat(lateral)
    adj = adjacent.ravel()
    return BoundaryMap(
        grid=grid, observation_axis=observation_axis,
        observation=o, back=b, lateral=l,
        observation_adjacent=adj[o], back_adjacent=adj[b], lateral_adjacent=adj[l],
        interior=flat(~on_bnd),
    )
