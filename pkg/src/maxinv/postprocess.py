"""Thresholded images, relative errors and inclusion localization."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatch, ZeroDenominator

EPS_FRACTION = 0.25
MU_FRACTION = 0.87

# 6-connectivity on the node lattice
_FACES = ndimage.generate_binary_structure(3, 1)


def threshold(field, fraction):
    """Keep values strictly above ``fraction * max``; everything else becomes 1."""
    field = np.asarray(field, dtype=float)
    return np.where(field > fraction * field.max(), field, 1.0)


def threshold_fields(eps_n, mu_l, eps_fraction=EPS_FRACTION, mu_fraction=MU_FRACTION):
    return threshold(eps_n, eps_fraction), threshold(mu_l, mu_fraction)


def relative_error(computed, exact, mask=None):
    """``|exact - computed| / |computed|`` in the discrete L2 norm over INNER nodes."""
    computed = np.asarray(computed, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if computed.shape != exact.shape:
        raise ShapeMismatch(f"{computed.shape} vs {exact.shape}")
    if mask is not None:
        computed, exact = computed[mask.inner], exact[mask.inner]
    den = float(np.linalg.norm(computed))
    if den == 0.0:
        raise ZeroDenominator("computed field has zero norm")
    return float(np.linalg.norm(exact - computed)) / den


@dataclass(frozen=True)
class Component:
    label: int
    size: int
    centroid: tuple
    bbox_lo: tuple
    bbox_hi: tuple
    peak: float
    nearest: int          # index of the nearest true inclusion, -1 if none
    distance: float       # centroid distance in the (x1, x2) plane
    distance_3d: float


@dataclass(frozen=True)
class LocalizationReport:
    components: tuple
    hits: tuple           # per true inclusion: distance of the closest component, or None
    tolerance: float

    @property
    def n_components(self):
        return len(self.components)

    @property
    def all_hit(self):
        return bool(self.hits) and all(d is not None and d <= self.tolerance for d in self.hits)


def localization_report(masked, grid, inclusions, tolerance=None, background=1.0):
    """Connected components above the background and their match to true inclusions.

    Parameters
    ----------
    masked : ndarray
        Thresholded field (background value exactly ``background``).
    grid : Grid3
    inclusions : sequence of Inclusion
    tolerance : float, optional
        Largest (x1, x2) centroid distance that counts as a hit; ``3 h`` by default.

    Returns
    -------
    LocalizationReport
        Components are sorted by decreasing size.  ``hits[i]`` is the
        (x1, x2) distance from inclusion ``i`` to the nearest component
        centroid, ``None`` when there is no component at all.
    """
    masked = np.asarray(masked, dtype=float)
    if masked.shape != tuple(grid.shape):
        raise ShapeMismatch(f"field {masked.shape} vs grid {grid.shape}")
    tol = 3.0 * grid.h if tolerance is None else float(tolerance)
    labels, n = ndimage.label(masked > background, structure=_FACES)
    truths = np.array([inc.centroid for inc in inclusions]) if inclusions else np.zeros((0, 3))
    comps = []
    for lab in range(1, n + 1):
        idx = np.argwhere(labels == lab)
        cen = grid.node_coordinates(idx.mean(axis=0))
        lo = grid.node_coordinates(idx.min(axis=0))
        hi = grid.node_coordinates(idx.max(axis=0))
        if len(truths):
            d2 = np.linalg.norm(truths[:, :2] - cen[:2], axis=1)
            j = int(np.argmin(d2))
            dist, d3 = float(d2[j]), float(np.linalg.norm(truths[j] - cen))
        else:
            j, dist, d3 = -1, float("inf"), float("inf")
        comps.append(Component(lab, len(idx), tuple(float(v) for v in cen),
                               tuple(float(v) for v in lo), tuple(float(v) for v in hi),
                               float(masked[labels == lab].max()), j, dist, d3))
    comps.sort(key=lambda c: (-c.size, c.label))
    hits = []
    for t in truths:
        if not comps:
            hits.append(None)
            continue
        hits.append(float(min(np.linalg.norm(np.array(c.centroid[:2]) - t[:2]) for c in comps)))
    return LocalizationReport(tuple(comps), tuple(hits), tol)
