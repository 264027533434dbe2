"""Quadrature rules on triangles and edges, plus oscillation-adaptive subdivision.

Triangle rules are built by collapsing a Gauss-Legendre x Gauss-Jacobi tensor
rule onto the reference triangle (Duffy transform), so node positions and
weights are exact to machine precision for any requested degree. Points are
stored in barycentric coordinates with weights summing to 1; integrals are
``|tau| * sum(w * f(x))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (Q, 3) and weights (Q,) exact for polynomials of `degree`.

    The collapsed n x n tensor rule is exact up to degree 2n - 1, so
    n = ceil((degree + 1) / 2).
    """
    if degree < 0:
        raise ValueError(f"quadrature degree must be nonnegative, got {degree}")
    n = (degree + 2) // 2
    xg, wg = leggauss(n)                      # weight 1 on [-1, 1]
    xj, wj = roots_jacobi(n, 1.0, 0.0)        # weight (1 - x) on [-1, 1]
    xi = (xj + 1.0) / 2.0                     # radial coordinate, weight (1 - xi), factor 1/4
    wxi = wj / 4.0
    eta = (xg + 1.0) / 2.0
    weta = wg / 2.0
    x = np.repeat(xi, n)
    y = np.tile(eta, n) * (1.0 - x)
    w = np.repeat(wxi, n) * np.tile(weta, n)  # sums to 1/2 = reference area
    bary = np.stack([1.0 - x - y, x, y], axis=1)
    return bary, 2.0 * w


@lru_cache(maxsize=None)
def edge_rule(npoints: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]; exact to degree 2*npoints - 1."""
    x, w = leggauss(npoints)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def subdivision_template(level: int) -> np.ndarray:
    """Corner coordinates (4**level, 3, 2) of the uniform refinement of the
    reference triangle, in reference (x, y) coordinates."""
    tris = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    for _ in range(level):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        tris = np.concatenate([
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, c], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ])
    return tris


@lru_cache(maxsize=None)
def subdivided_rule(degree: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule: base triangle rule applied on each of 4**level subtriangles.

    Returns barycentric points (Q, 3) and weights (Q,) relative to the parent
    triangle (weights sum to 1).
    """
    bary, w = triangle_rule(degree)
    ref = bary[:, 1:]                          # (q, 2) reference coords
    tmpl = subdivision_template(level)         # (m, 3, 2)
    a, b, c = tmpl[:, 0], tmpl[:, 1], tmpl[:, 2]
    pts = (a[:, None, :]
           + ref[None, :, 0, None] * (b - a)[:, None, :]
           + ref[None, :, 1, None] * (c - a)[:, None, :]).reshape(-1, 2)
    wts = np.tile(w, len(tmpl)) / 4.0 ** level
    bary_out = np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])
    return bary_out, wts


@dataclass(frozen=True)
class QuadratureSettings:
    """Quadrature configuration shared by assembly and error integration.

    Oscillatory integrals subdivide each triangle until
    ``wavenumber * subtriangle_diameter <= osc_target`` (capped at
    ``max_subdiv_levels``) and apply the volume rule per subtriangle.
    """
    volume_degree: int = 6
    edge_points: int = 6
    osc_target: float = 1.0
    max_subdiv_levels: int = 6

    def subdivision_levels(self, k: float, diameters: np.ndarray) -> np.ndarray:
        """Per-triangle subdivision level for wavenumber-k integrands."""
        ratio = np.maximum(k * np.asarray(diameters) / self.osc_target, 1e-300)
        lev = np.ceil(np.log2(ratio))
        return np.clip(lev, 0, self.max_subdiv_levels).astype(int)

    def edge_subdivisions(self, k: float, length: float) -> int:
        n = int(np.ceil(k * length / self.osc_target))
        return max(1, min(n, 2 ** self.max_subdiv_levels))


DEFAULT_QUADRATURE = QuadratureSettings()


def integrate_over_triangles(func, vertices: np.ndarray, triangles: np.ndarray,
                             areas: np.ndarray, k: float,
                             settings: QuadratureSettings = DEFAULT_QUADRATURE,
                             point_budget: int = 2_000_000):
    """Integrate ``func`` elementwise with the oscillation-adaptive rule.

    ``func(tri_idx, points, bary)`` receives a chunk of triangle indices, the
    physical quadrature points ``(m, q, 2)`` and barycentric coordinates
    ``(q, 3)``; it must return values ``(m, q)``. Returns the per-triangle
    integrals ``(T,)`` (complex).
    """
    p = vertices[triangles]                    # (T, 3, 2)
    diam = triangle_diameters(vertices, triangles)
    levels = settings.subdivision_levels(k, diam)
    out = np.zeros(len(triangles), dtype=complex)
    for lev in np.unique(levels):
        idx = np.flatnonzero(levels == lev)
        bary, w = subdivided_rule(settings.volume_degree, int(lev))
        chunk = max(1, point_budget // len(bary))
        for s in range(0, len(idx), chunk):
            ts = idx[s:s + chunk]
            phys = np.einsum('qi,tid->tqd', bary, p[ts])
            vals = func(ts, phys, bary)
            out[ts] = areas[ts] * (vals @ w)
    return out


def triangle_diameters(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    e0 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    e1 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    e2 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    return np.maximum(e0, np.maximum(e1, e2))
