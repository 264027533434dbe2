"""Triangulations of planar rectangles with full edge topology and vertex patches.

Conventions (fixed throughout the package):

* every triangle is stored counterclockwise (positive signed area);
* an interior edge knows its two elements ``tau`` (first) and ``tau_prime``
  (second); the stored unit normal points from ``tau_prime`` into ``tau``,
  and jumps are ``[v] = v|tau' - v|tau``, averages ``{v} = (v|tau + v|tau')/2``;
* a boundary edge stores the outward normal of the domain;
* the per-vertex patch lists the incident triangles counterclockwise around
  the vertex; for interior vertices the cycle starts at the incident triangle
  with the smallest element index, for boundary vertices at the clockwise end
  of the fan (the only contiguous choice).

The edge-wise coefficients used by the mesh-condition analysis follow the
orientation that makes the integration-by-parts identity for linear
interpolation defects exact: walking the boundary of a triangle
counterclockwise, the tangent on each edge is the walk direction, the normal
is the inward normal, ``h_{e+1}`` is the length of the preceding edge and
``h_{e-1}`` the length of the following edge.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .quadrature import edge_rule, triangle_rule, triangle_diameters

DOMAIN_LO = 0.5
DOMAIN_HI = 1.5


class MeshError(ValueError):
    """Invalid mesh construction or degenerate geometry."""


@dataclass(frozen=True)
class TriMesh:
    """Immutable oriented triangulation with edge topology and vertex patches."""

    vertices: np.ndarray          # (V, 2) float
    triangles: np.ndarray         # (T, 3) int, CCW
    edge_vertices: np.ndarray     # (E, 2) int, endpoints in tau's traversal order
    edge_tris: np.ndarray         # (E, 2) int, (tau, tau'); tau' = -1 on boundary
    edge_local: np.ndarray        # (E, 2) int, local edge index in tau / tau' (-1)
    edge_normals: np.ndarray      # (E, 2) float; interior: tau'->tau, boundary: outward
    edge_tangents: np.ndarray     # (E, 2) float, unit, endpoint order
    edge_lengths: np.ndarray      # (E,) float
    boundary: np.ndarray          # (E,) bool
    patch_offsets: np.ndarray     # (V+1,) int, CSR layout of patches
    patch_tris: np.ndarray        # (sum n_z,) int, CCW-ordered incident triangles
    kind: str = "custom"
    N: int = 0

    # derived geometry, filled in __post_init__
    areas: np.ndarray = field(default=None, repr=False)
    grads: np.ndarray = field(default=None, repr=False)     # (T, 3, 2) hat gradients
    diameters: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0):
            t = int(np.argmin(det))
            raise MeshError(f"triangle {t} is not positively oriented (2*area={det[t]:.3e})")
        grads = np.empty((len(self.triangles), 3, 2))
        for i in range(3):
            e = self.vertices[self.triangles[:, (i + 2) % 3]] - self.vertices[self.triangles[:, (i + 1) % 3]]
            grads[:, i, 0] = -e[:, 1] / det
            grads[:, i, 1] = e[:, 0] / det
        object.__setattr__(self, "areas", det / 2.0)
        object.__setattr__(self, "grads", grads)
        object.__setattr__(self, "diameters", triangle_diameters(self.vertices, self.triangles))

    # -- basic counts ------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edge_vertices)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    @property
    def h(self) -> float:
        """Mesh size: max triangle diameter."""
        return float(self.diameters.max())

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        return (float(self.vertices[:, 0].min()), float(self.vertices[:, 0].max()),
                float(self.vertices[:, 1].min()), float(self.vertices[:, 1].max()))

    def patch(self, z: int) -> np.ndarray:
        """Incident triangles of vertex z, counterclockwise."""
        return self.patch_tris[self.patch_offsets[z]:self.patch_offsets[z + 1]]

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        ang = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            c = np.einsum('td,td->t', u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            ang.append(np.arccos(np.clip(c, -1, 1)))
        return float(np.degrees(np.min(ang)))

    def element_edge_geometry(self, t: int):
        """Per-edge (tangent, inward normal, h_plus, h_minus, cot_opposite, length)
        for the three CCW edges of triangle t, in the orientation used by the
        interpolation-defect identity."""
        tri = self.triangles[t]
        p = self.vertices[tri]
        out = []
        lens = [np.linalg.norm(p[(i + 1) % 3] - p[i]) for i in range(3)]
        for i in range(3):
            a, b, c = p[i], p[(i + 1) % 3], p[(i + 2) % 3]
            tv = (b - a) / lens[i]
            nv = np.array([-tv[1], tv[0]])        # inward for CCW triangle
            h_plus = lens[(i + 2) % 3]            # preceding edge in CCW walk
            h_minus = lens[(i + 1) % 3]           # following edge
            u, v = a - c, b - c
            cross = u[0] * v[1] - u[1] * v[0]
            cot = float(np.dot(u, v)) / abs(float(cross))
            out.append((tv, nv, float(h_plus), float(h_minus), cot, float(lens[i])))
        return out


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def build_mesh(kind: str, N: int, seed: int = 0, delta: float = 0.0,
               perturbation_exponent: float = 0.0, min_angle_floor: float = 1.0) -> TriMesh:
    """Triangulate [0.5, 1.5]^2 with 2*N^2 triangles.

    kind:
      regular   - all squares split along the lower-left to upper-right diagonal
      chevron   - diagonal direction alternates per column
      perturbed - regular connectivity, interior vertices displaced by a
                  deterministic pseudo-random offset of magnitude
                  delta * h^(1 + perturbation_exponent)
    """
    if N < 1:
        raise MeshError(f"N must be a positive integer, got {N}")
    if kind not in ("regular", "chevron", "perturbed"):
        raise MeshError(f"unknown mesh kind {kind!r}")
    xs = DOMAIN_LO + np.arange(N + 1) / N
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    V = np.column_stack([X.ravel(), Y.ravel()])
    vid = lambda i, j: i * (N + 1) + j
    tris = np.empty((2 * N * N, 3), dtype=np.int64)
    t = 0
    for i in range(N):
        for j in range(N):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if kind == "chevron" and i % 2 == 1:
                tris[t] = (a, b, d); tris[t + 1] = (b, c, d)
            else:
                tris[t] = (a, b, c); tris[t + 1] = (a, c, d)
            t += 2
    if kind == "perturbed" and delta != 0.0:
        h = 1.0 / N
        amp = delta * h ** (1.0 + perturbation_exponent)
        interior = np.ones(len(V), dtype=bool)
        ij = np.stack(np.divmod(np.arange(len(V)), N + 1), axis=1)
        interior &= (ij[:, 0] > 0) & (ij[:, 0] < N) & (ij[:, 1] > 0) & (ij[:, 1] < N)
        angle = _counter_hash(seed, np.arange(len(V))) * (2 * np.pi)
        radius = _counter_hash(seed + 0x9E3779B9, np.arange(len(V)))
        off = amp * radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
        V = V + np.where(interior[:, None], off, 0.0)
    mesh = _finalize(V, tris, kind, N)
    if kind == "perturbed" and mesh.min_angle() < min_angle_floor:
        raise MeshError(
            f"perturbed mesh min angle {mesh.min_angle():.2f} deg below floor "
            f"{min_angle_floor} deg; reduce delta")
    return mesh


def _counter_hash(seed: int, idx: np.ndarray) -> np.ndarray:
    """Deterministic counter-based values in [0, 1): splitmix64 keyed on (seed, idx)."""
    x = (np.uint64(seed) + idx.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15))
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    return (x >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def mesh_from_arrays(vertices: np.ndarray, triangles: np.ndarray, kind: str = "custom",
                     N: int = 0) -> TriMesh:
    return _finalize(np.asarray(vertices, dtype=float), np.asarray(triangles, dtype=np.int64),
                     kind, N)


def _finalize(V: np.ndarray, tris: np.ndarray, kind: str, N: int) -> TriMesh:
    nt = len(tris)
    ta = np.repeat(np.arange(nt, dtype=np.int64), 3)
    la = np.tile(np.arange(3, dtype=np.int64), nt)
    vi = tris[ta, la]
    vj = tris[ta, (la + 1) % 3]
    lo = np.minimum(vi, vj)
    hi = np.maximum(vi, vj)
    order = np.lexsort((ta, hi, lo))            # group undirected edges; tau = smaller t
    lo, hi, ta, la, vi, vj = lo[order], hi[order], ta[order], la[order], vi[order], vj[order]
    new = np.ones(len(lo), dtype=bool)
    new[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
    eid = np.cumsum(new) - 1
    ne = eid[-1] + 1 if len(eid) else 0
    counts = np.bincount(eid, minlength=ne)
    if np.any(counts > 2):
        bad = int(np.flatnonzero(counts > 2)[0])
        raise MeshError(f"an edge is shared by {counts[bad]} triangles")
    first = np.flatnonzero(new)
    ev = np.column_stack([vi[first], vj[first]])
    et = np.full((ne, 2), -1, dtype=np.int64)
    el = np.full((ne, 2), -1, dtype=np.int64)
    et[:, 0] = ta[first]
    el[:, 0] = la[first]
    second = first[counts == 2] + 1
    et[counts == 2, 1] = ta[second]
    el[counts == 2, 1] = la[second]
    bnd = counts == 1
    d = V[ev[:, 1]] - V[ev[:, 0]]
    lens = np.hypot(d[:, 0], d[:, 1])
    tan = d / lens[:, None]
    nrm = np.empty_like(tan)
    # interior: inward for tau (= from tau' to tau); boundary: outward of the domain
    nrm[:, 0] = np.where(bnd, tan[:, 1], -tan[:, 1])
    nrm[:, 1] = np.where(bnd, -tan[:, 0], tan[:, 0])
    offsets, patches = _build_patches(V, tris, ev, bnd)
    mesh = TriMesh(V, tris, ev, et, el, nrm, tan, lens, bnd, offsets, patches, kind, N)
    _check_topology(mesh)
    return mesh


def _build_patches(V, tris, ev, bnd):
    nv = len(V)
    nt = len(tris)
    vert = tris.ravel()
    tri_id = np.repeat(np.arange(nt, dtype=np.int64), 3)
    centroids = V[tris].mean(axis=1)
    ang = np.arctan2(centroids[tri_id, 1] - V[vert, 1], centroids[tri_id, 0] - V[vert, 0])
    order = np.lexsort((ang, vert))
    vert, tri_id, ang = vert[order], tri_id[order], ang[order]
    counts = np.bincount(vert, minlength=nv)
    if np.any(counts == 0):
        raise MeshError(f"vertex {int(np.flatnonzero(counts == 0)[0])} has no incident triangle")
    offsets = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    boundary_vertex = np.zeros(nv, dtype=bool)
    boundary_vertex[ev[bnd].ravel()] = True
    patches = np.empty(len(vert), dtype=np.int64)
    for z in range(nv):
        s, e = offsets[z], offsets[z + 1]
        ts = tri_id[s:e]
        if boundary_vertex[z] and e - s > 1:
            # start after the largest angular gap so the fan is contiguous
            a = ang[s:e]
            gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
            start = (int(np.argmax(gaps)) + 1) % len(ts)
        else:
            start = int(np.argmin(ts))              # deterministic first triangle
        patches[s:e] = np.roll(ts, -start)
    return offsets, patches


def _check_topology(mesh: TriMesh) -> None:
    V, E, T = mesh.num_vertices, mesh.num_edges, mesh.num_triangles
    if V - E + T != 1:
        raise MeshError(f"Euler relation violated: V-E+T = {V - E + T} != 1")


def vertices_without_interior_edge(mesh: TriMesh) -> np.ndarray:
    """Vertices touching no interior edge (two corners of the uniform grids).

    The analysis assumes there are none; on the uniform meshes the two
    corners missed by the diagonals violate it, so this is informational
    rather than a construction error.
    """
    touched = np.zeros(mesh.num_vertices, dtype=bool)
    for e in mesh.interior_edges:
        touched[mesh.edge_vertices[e, 0]] = True
        touched[mesh.edge_vertices[e, 1]] = True
    return np.flatnonzero(~touched)


# ---------------------------------------------------------------------------
# mesh condition measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeshConditionReport:
    """Parallelogram/isosceles defects and edge coefficients of one mesh."""

    interior_defects: np.ndarray       # eps_e per interior edge
    boundary_defects: np.ndarray       # |h_{e+1} - h_{e-1}| per boundary edge
    beta: np.ndarray                   # (E, 2) beta_e from tau / tau' (nan where absent)
    gamma: np.ndarray                  # (E, 2)
    beta_mismatch: np.ndarray          # |beta_e - beta'_e| per interior edge
    gamma_mismatch: np.ndarray
    h: float

    @property
    def max_defect(self) -> float:
        vals = np.concatenate([self.interior_defects, self.boundary_defects])
        return float(vals.max()) if len(vals) else 0.0

    @property
    def mean_defect(self) -> float:
        vals = np.concatenate([self.interior_defects, self.boundary_defects])
        return float(vals.mean()) if len(vals) else 0.0

    @property
    def max_interior_defect(self) -> float:
        return float(self.interior_defects.max()) if len(self.interior_defects) else 0.0


def measure_mesh_condition(mesh: TriMesh) -> MeshConditionReport:
    E = mesh.num_edges
    beta = np.full((E, 2), np.nan)
    gamma = np.full((E, 2), np.nan)
    hplus = np.full((E, 2), np.nan)
    hminus = np.full((E, 2), np.nan)
    geom_cache: dict[int, list] = {}
    for e in range(E):
        for side in range(2):
            t = int(mesh.edge_tris[e, side])
            if t < 0:
                continue
            if t not in geom_cache:
                geom_cache[t] = mesh.element_edge_geometry(t)
            _, _, hp, hm, cot, _ = geom_cache[t][int(mesh.edge_local[e, side])]
            beta[e, side] = cot / 12.0 * (hp ** 2 - hm ** 2)
            gamma[e, side] = cot / 3.0 * mesh.areas[t]
            hplus[e, side] = hp
            hminus[e, side] = hm
    interior = mesh.interior_edges
    bdry = mesh.boundary_edges
    interior_defects = (np.abs(hminus[interior, 0] - hminus[interior, 1])
                        + np.abs(hplus[interior, 0] - hplus[interior, 1]))
    boundary_defects = np.abs(hplus[bdry, 0] - hminus[bdry, 0])
    return MeshConditionReport(
        interior_defects=interior_defects,
        boundary_defects=boundary_defects,
        beta=beta,
        gamma=gamma,
        beta_mismatch=np.abs(beta[interior, 0] - beta[interior, 1]),
        gamma_mismatch=np.abs(gamma[interior, 0] - gamma[interior, 1]),
        h=mesh.h,
    )


DEFECT_EXACT_TOL = 1e-13


def estimate_alpha(meshes: list[TriMesh]) -> float | str:
    """Least-squares exponent alpha from max interior defect ~ h^(1+alpha).

    The fit uses the parallelogram defects only: on the uniform grids the
    boundary triangles are right triangles with one leg on the boundary, whose
    isosceles defect is ~0.41*h regardless of any interior perturbation, so
    including them would mask the interior regularity entirely. Returns the
    string "exact (defect 0)" when all interior defects are below 1e-13.
    """
    if len(meshes) < 3:
        raise ValueError("alpha estimation needs at least 3 meshes of a refinement family")
    reports = [measure_mesh_condition(m) for m in meshes]
    defects = np.array([r.max_interior_defect for r in reports])
    hs = np.array([r.h for r in reports])
    if np.all(defects < DEFECT_EXACT_TOL):
        return "exact (defect 0)"
    slope = np.polyfit(np.log(hs), np.log(np.maximum(defects, 1e-300)), 1)[0]
    return float(slope - 1.0)


# ---------------------------------------------------------------------------
# fundamental identity of the interpolation defect
# ---------------------------------------------------------------------------

def verify_fundamental_identity(tri: np.ndarray, phi_coeffs, v_coeffs) -> float:
    """|LHS - RHS| of the edge representation of int grad(phi - phi_I) . grad v.

    ``tri`` is a (3, 2) CCW vertex array, ``phi_coeffs`` the 6 coefficients of
    phi = c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2 and ``v_coeffs`` the 3
    coefficients of v = d0 + d1 x + d2 y. Both sides are evaluated with
    quadrature exact for the integrand degree.
    """
    tri = np.asarray(tri, dtype=float)
    c = np.asarray(phi_coeffs, dtype=float)
    d = np.asarray(v_coeffs, dtype=float)
    d1 = tri[1] - tri[0]
    d2 = tri[2] - tri[0]
    det = d1[0] * d2[1] - d1[1] * d2[0]
    if det <= 0:
        raise MeshError("triangle must be counterclockwise and non-degenerate")
    area = det / 2.0

    def phi(p):
        x, y = p[..., 0], p[..., 1]
        return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y

    def grad_phi(p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([c[1] + 2 * c[3] * x + c[4] * y,
                         c[2] + c[4] * x + 2 * c[5] * y], axis=-1)

    grad_v = np.array([d[1], d[2]])
    hess = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])

    # LHS: integrand (grad(phi - phi_I) . grad v) has degree 1
    vals_phi = phi(tri)
    hat_grads = np.array([
        [-(tri[2] - tri[1])[1], (tri[2] - tri[1])[0]],
        [-(tri[0] - tri[2])[1], (tri[0] - tri[2])[0]],
        [-(tri[1] - tri[0])[1], (tri[1] - tri[0])[0]],
    ]) / det
    grad_phi_I = vals_phi @ hat_grads
    bary, w = triangle_rule(2)
    pts = bary @ tri
    lhs = area * np.sum(w * ((grad_phi(pts) - grad_phi_I) @ grad_v))

    # RHS: constant integrands per edge
    rhs = 0.0
    lens = [float(np.linalg.norm(tri[(i + 1) % 3] - tri[i])) for i in range(3)]
    for i in range(3):
        a, b, cc = tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]
        tv = (b - a) / lens[i]
        nv = np.array([-tv[1], tv[0]])
        h_plus, h_minus = lens[(i + 2) % 3], lens[(i + 1) % 3]
        u, v = a - cc, b - cc
        cross = u[0] * v[1] - u[1] * v[0]
        cot = float(np.dot(u, v)) / abs(float(cross))
        beta = cot / 12.0 * (h_plus ** 2 - h_minus ** 2)
        gamma = cot / 3.0 * area
        d2t = float(tv @ hess @ tv)
        dtn = float(tv @ hess @ nv)
        dvt = float(grad_v @ tv)
        sq, wq = edge_rule(2)
        rhs += (beta * d2t + gamma * dtn) * dvt * lens[i] * float(wq.sum())
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# plain-text mesh format
# ---------------------------------------------------------------------------

def write_mesh_text(mesh: TriMesh, path_or_file) -> None:
    """`vertices V triangles T` header, V lines `x y`, T lines `i j k`."""
    own = isinstance(path_or_file, (str, bytes))
    f = open(path_or_file, "w") if own else path_or_file
    try:
        f.write(f"vertices {mesh.num_vertices} triangles {mesh.num_triangles}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for i, j, k in mesh.triangles:
            f.write(f"{i} {j} {k}\n")
    finally:
        if own:
            f.close()


def read_mesh_text(path_or_file) -> TriMesh:
    own = isinstance(path_or_file, (str, bytes))
    f = open(path_or_file) if own else path_or_file
    try:
        header = f.readline().split()
        if len(header) != 4 or header[0] != "vertices" or header[2] != "triangles":
            raise MeshError(f"bad mesh header: {' '.join(header)!r}")
        nv, nt = int(header[1]), int(header[3])
        V = np.array([[float(tok) for tok in f.readline().split()] for _ in range(nv)])
        T = np.array([[int(tok) for tok in f.readline().split()] for _ in range(nt)], dtype=np.int64)
    finally:
        if own:
            f.close()
    return mesh_from_arrays(V, T)


def mesh_to_text(mesh: TriMesh) -> str:
    buf = io.StringIO()
    write_mesh_text(mesh, buf)
    return buf.getvalue()
