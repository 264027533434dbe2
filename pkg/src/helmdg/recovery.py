"""Polynomial-preserving gradient recovery on the DG space, Richardson
extrapolation of recovered gradients, and the recovery-based error estimator.

Recovery runs in two stages. First the discontinuous field is averaged into a
continuous one: at each vertex z the patch triangles tau_{z,1..n_z} contribute
convex weights, either lambda = (1, 0, ..., 0) ("first", taking the value from
the deterministic first patch triangle) or uniform weights ("average"). Then
at every vertex a quadratic polynomial is fitted by least squares to the
averaged nodal values over a sampling patch of >= 6 nodes (grown by element
layers when too small or ill-conditioned), and the recovered gradient at the
vertex is the gradient of that quadratic. Fitting is done in a local frame
centered at the vertex and scaled by the patch diameter, so the normal
equations stay well conditioned independently of the mesh size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dg import CGFunction, DGFunction
from .mesh import TriMesh
from .quadrature import triangle_rule

MIN_SAMPLING_NODES = 6
MAX_PATCH_GROWTH = 3
RANK_TOL = 1e-10
CONDITION_LIMIT = 1e8


class RecoveryError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# DG -> CG averaging
# ---------------------------------------------------------------------------

def dg_to_cg(u_h: DGFunction, policy: str = "first") -> CGFunction:
    """Convex nodal averaging of element traces; weights sum to 1 by construction."""
    if policy not in ("first", "average"):
        raise ValueError(f"unknown averaging policy {policy!r}")
    mesh = u_h.mesh
    tri_of_dof = mesh.triangles            # (T, 3)
    vals = u_h.coeffs.reshape(-1, 3)
    out = np.zeros(mesh.num_vertices, dtype=complex)
    if policy == "first":
        first_tri = mesh.patch_tris[mesh.patch_offsets[:-1]]
        for z in range(mesh.num_vertices):
            t = int(first_tri[z])
            local = int(np.flatnonzero(tri_of_dof[t] == z)[0])
            out[z] = vals[t, local]
    else:
        counts = np.zeros(mesh.num_vertices)
        np.add.at(out, tri_of_dof.ravel(), u_h.coeffs)
        np.add.at(counts, tri_of_dof.ravel(), 1.0)
        out /= counts
    return CGFunction(mesh, out)


# ---------------------------------------------------------------------------
# least-squares quadratic fit patches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveryPatch:
    center: int
    nodes: np.ndarray          # sampling vertex indices, includes the center
    growth: int                # layers added beyond the immediate element patch
    condition: float           # of the scaled design matrix


@dataclass(frozen=True)
class RecoveryOperator:
    """Sparse nodal-gradient operators: Gx = Rx @ u_tilde, Gy = Ry @ u_tilde."""
    mesh: TriMesh
    Rx: sp.csr_matrix
    Ry: sp.csr_matrix
    patches: list

    def apply(self, u_tilde: CGFunction) -> "RecoveredGradient":
        return RecoveredGradient(CGFunction(self.mesh, self.Rx @ u_tilde.coeffs),
                                 CGFunction(self.mesh, self.Ry @ u_tilde.coeffs))


@dataclass
class RecoveredGradient:
    """Continuous P1 vector field (the two components share one mesh)."""
    x: CGFunction
    y: CGFunction

    @property
    def mesh(self) -> TriMesh:
        return self.x.mesh

    def element_values(self, bary: np.ndarray) -> np.ndarray:
        """(T, Q, 2) values at barycentric points."""
        return np.stack([self.x.element_values(bary), self.y.element_values(bary)], axis=-1)

    def l2_norm(self) -> float:
        bary, w = triangle_rule(2)
        vals = self.element_values(bary)
        return float(np.sqrt(np.sum(self.mesh.areas[:, None] * w
                                    * np.sum(np.abs(vals) ** 2, axis=2))))


_OPERATOR_CACHE: dict[int, RecoveryOperator] = {}


def build_recovery_operator(mesh: TriMesh) -> RecoveryOperator:
    """Construct (and cache per mesh) the nodal least-squares gradient operator."""
    cached = _OPERATOR_CACHE.get(id(mesh))
    if cached is not None:
        return cached
    nv = mesh.num_vertices
    tri = mesh.triangles
    vertex_tris = [mesh.patch(z) for z in range(nv)]
    rows, cols_x, vals_x, vals_y = [], [], [], []
    patches = []
    for z in range(nv):
        nodes, growth = _sampling_nodes(mesh, z, vertex_tris)
        pts = mesh.vertices[nodes]
        center = mesh.vertices[z]
        d = float(np.max(np.linalg.norm(pts - center, axis=1)))
        local = (pts - center) / d
        A = np.column_stack([np.ones(len(nodes)), local[:, 0], local[:, 1],
                             local[:, 0] ** 2, local[:, 0] * local[:, 1], local[:, 1] ** 2])
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        grown = growth
        while (s[-1] < RANK_TOL * s[0] or s[0] / s[-1] > CONDITION_LIMIT):
            if grown >= MAX_PATCH_GROWTH:
                raise RecoveryError(
                    f"sampling patch of node {z} is not unisolvent after "
                    f"{MAX_PATCH_GROWTH} growth layers (condition {s[0] / s[-1]:.2e})")
            nodes = _grow(mesh, nodes)
            grown += 1
            pts = mesh.vertices[nodes]
            d = float(np.max(np.linalg.norm(pts - center, axis=1)))
            local = (pts - center) / d
            A = np.column_stack([np.ones(len(nodes)), local[:, 0], local[:, 1],
                                 local[:, 0] ** 2, local[:, 0] * local[:, 1], local[:, 1] ** 2])
            U, s, Vt = np.linalg.svd(A, full_matrices=False)
        pinv = (Vt.T / s) @ U.T                     # (6, n)
        rows.append(np.full(len(nodes), z))
        cols_x.append(nodes)
        vals_x.append(pinv[1] / d)                  # d(fit)/dx at the center
        vals_y.append(pinv[2] / d)
        patches.append(RecoveryPatch(z, nodes, grown, float(s[0] / s[-1])))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols_x)
    Rx = sp.coo_matrix((np.concatenate(vals_x), (rows, cols)), shape=(nv, nv)).tocsr()
    Ry = sp.coo_matrix((np.concatenate(vals_y), (rows, cols)), shape=(nv, nv)).tocsr()
    op = RecoveryOperator(mesh, Rx, Ry, patches)
    _OPERATOR_CACHE[id(mesh)] = op
    return op


def _sampling_nodes(mesh: TriMesh, z: int, vertex_tris) -> tuple[np.ndarray, int]:
    nodes = np.unique(mesh.triangles[vertex_tris[z]])
    growth = 0
    while len(nodes) < MIN_SAMPLING_NODES:
        if growth >= MAX_PATCH_GROWTH:
            raise RecoveryError(
                f"sampling patch of node {z} has only {len(nodes)} nodes after "
                f"{MAX_PATCH_GROWTH} growth layers")
        nodes = _grow(mesh, nodes)
        growth += 1
    return nodes, growth


def _grow(mesh: TriMesh, nodes: np.ndarray) -> np.ndarray:
    tris = np.unique(np.concatenate([mesh.patch(int(v)) for v in nodes]))
    return np.unique(mesh.triangles[tris])


def recover_gradient(u_h: DGFunction, policy: str = "first") -> RecoveredGradient:
    """Recovered gradient of a DG field: quadratic fit of the averaged field."""
    op = build_recovery_operator(u_h.mesh)
    return op.apply(dg_to_cg(u_h, policy))


def recover_gradient_cg(v: CGFunction) -> RecoveredGradient:
    """Recovery applied directly to a continuous field (the two coincide there)."""
    return build_recovery_operator(v.mesh).apply(v)


# ---------------------------------------------------------------------------
# Richardson extrapolation
# ---------------------------------------------------------------------------

def richardson_extrapolate(coarse: RecoveredGradient, fine: RecoveredGradient) -> RecoveredGradient:
    """(4*fine - coarse)/3 at fine vertices; coarse components are P1-interpolated.

    Cancels the leading quadratic error term of the recovered gradient; the
    fine mesh must be the nested uniform refinement of the coarse one.
    """
    fm, cm = fine.mesh, coarse.mesh
    if cm.kind not in ("regular", "chevron") or cm.kind != fm.kind or fm.N != 2 * cm.N:
        raise ValueError(
            f"meshes are not a nested (N, 2N) pair of a uniform family: "
            f"{cm.kind},N={cm.N} vs {fm.kind},N={fm.N}")
    cx = coarse.x.evaluate(fm.vertices)
    cy = coarse.y.evaluate(fm.vertices)
    gx = (4.0 * fine.x.coeffs - cx) / 3.0
    gy = (4.0 * fine.y.coeffs - cy) / 3.0
    return RecoveredGradient(CGFunction(fm, gx), CGFunction(fm, gy))


# ---------------------------------------------------------------------------
# a posteriori estimator
# ---------------------------------------------------------------------------

def error_estimator(u_h: DGFunction, gradient: RecoveredGradient) -> float:
    """eta_h = ( sum_tau || G - grad u_h ||^2_{L2(tau)} )^(1/2).

    G is P1-interpolated inside each triangle and the (quadratic) integrand is
    integrated by the degree-6 triangle rule, which is exact for it.
    """
    if gradient.mesh is not u_h.mesh:
        raise ValueError("recovered gradient and DG field live on different meshes")
    bary, w = triangle_rule(6)
    G = gradient.element_values(bary)                    # (T, Q, 2)
    gh = u_h.element_gradients()[:, None, :]             # (T, 1, 2)
    diff = np.sum(np.abs(G - gh) ** 2, axis=2)
    return float(np.sqrt(np.sum(u_h.mesh.areas[:, None] * w * diff)))
