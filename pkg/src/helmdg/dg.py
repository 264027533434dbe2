"""Discrete spaces and assembly of the interior-penalty DG Helmholtz scheme.

The sesquilinear form (conjugation on the test function; all basis functions
are real, so the assembled blocks are real symmetric) is

    a_h(u, v) = sum_K (grad u, grad v)_K
                - sum_{e interior} ( <{du/dn_e}, [v]>_e + <[u], {dv/dn_e}>_e )
                + sum_{e interior} rho0 / h_e^(1+mu) * <[u], [v]>_e

and the scheme reads  a_h(u_h, v) - k^2 (u_h, v) + i k <u_h, v>_Gamma
= (f, v) + <g, v>_Gamma.  The assembled matrix splits as
A = S - k^2 M + i k B with S = S_core + P (P the jump penalty), all three
parts complex symmetric with real entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .linsolve import SolveReport, solve_sparse_complex
from .mesh import TriMesh
from .quadrature import (DEFAULT_QUADRATURE, QuadratureSettings, edge_rule,
                         integrate_over_triangles, subdivided_rule)


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# discrete functions
# ---------------------------------------------------------------------------

@dataclass
class DGFunction:
    """Piecewise-linear discontinuous field: 3 complex coefficients per triangle,
    in vertex-value (Lagrange) form; dof 3*t + i is the value at vertex i of
    triangle t."""

    mesh: TriMesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (3 * self.mesh.num_triangles,):
            raise ValueError(
                f"expected {3 * self.mesh.num_triangles} coefficients, got {self.coeffs.shape}")

    @property
    def ndof(self) -> int:
        return len(self.coeffs)

    def vertex_value(self, z: int, t: int) -> complex:
        """u_h(z, tau): the trace of element t at its vertex z."""
        local = np.flatnonzero(self.mesh.triangles[t] == z)
        if len(local) != 1:
            raise ValueError(f"vertex {z} is not a vertex of triangle {t}")
        return complex(self.coeffs[3 * t + int(local[0])])

    def element_values(self, bary: np.ndarray) -> np.ndarray:
        """Values (T, Q) at barycentric points (Q, 3) in every element."""
        return np.einsum('qi,ti->tq', bary, self.coeffs.reshape(-1, 3))

    def element_gradients(self) -> np.ndarray:
        """Constant gradient per element, (T, 2)."""
        return np.einsum('tid,ti->td', self.mesh.grads, self.coeffs.reshape(-1, 3))

    def broken_h1_seminorm(self) -> float:
        g = self.element_gradients()
        return float(np.sqrt(np.sum(self.mesh.areas * np.sum(np.abs(g) ** 2, axis=1))))

    def l2_norm(self) -> float:
        from .quadrature import triangle_rule
        bary, w = triangle_rule(2)
        vals = self.element_values(bary)
        return float(np.sqrt(np.sum(self.mesh.areas[:, None] * w * np.abs(vals) ** 2)))

    def __add__(self, other: "DGFunction") -> "DGFunction":
        return DGFunction(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other: "DGFunction") -> "DGFunction":
        return DGFunction(self.mesh, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "DGFunction":
        return DGFunction(self.mesh, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass
class CGFunction:
    """Continuous piecewise-linear field: one complex coefficient per vertex."""

    mesh: TriMesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (self.mesh.num_vertices,):
            raise ValueError(
                f"expected {self.mesh.num_vertices} coefficients, got {self.coeffs.shape}")

    def to_dg(self) -> DGFunction:
        return DGFunction(self.mesh, self.coeffs[self.mesh.triangles].ravel())

    def element_values(self, bary: np.ndarray) -> np.ndarray:
        return np.einsum('qi,ti->tq', bary, self.coeffs[self.mesh.triangles])

    def element_gradients(self) -> np.ndarray:
        return np.einsum('tid,ti->td', self.mesh.grads, self.coeffs[self.mesh.triangles])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """P1 interpolation at arbitrary points of the meshed domain."""
        tri_idx, bary = locate_points(self.mesh, points)
        return np.einsum('pi,pi->p', bary, self.coeffs[self.mesh.triangles[tri_idx]])

    def __add__(self, other: "CGFunction") -> "CGFunction":
        return CGFunction(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other: "CGFunction") -> "CGFunction":
        return CGFunction(self.mesh, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "CGFunction":
        return CGFunction(self.mesh, self.coeffs * scalar)

    __rmul__ = __mul__


def interpolate_p1(fieldfn, mesh: TriMesh) -> CGFunction:
    """Nodal interpolant: coefficient at a vertex is the field value there."""
    return CGFunction(mesh, np.asarray(fieldfn(mesh.vertices), dtype=complex))


# ---------------------------------------------------------------------------
# point location (uniform-grid buckets)
# ---------------------------------------------------------------------------

_LOCATOR_CACHE: dict[int, tuple] = {}


def locate_points(mesh: TriMesh, points: np.ndarray, tol: float = 1e-10):
    """Containing triangle and barycentric coordinates for each point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    key = id(mesh)
    if key not in _LOCATOR_CACHE:
        _LOCATOR_CACHE[key] = _build_locator(mesh)
    x0, y0, cell, ncx, ncy, cell_tris, cell_offsets = _LOCATOR_CACHE[key]
    ci = np.clip(((pts[:, 0] - x0) / cell).astype(int), 0, ncx - 1)
    cj = np.clip(((pts[:, 1] - y0) / cell).astype(int), 0, ncy - 1)
    cells = ci * ncy + cj
    counts = cell_offsets[cells + 1] - cell_offsets[cells]
    pair_pt = np.repeat(np.arange(len(pts)), counts)
    pair_tri = np.concatenate(
        [cell_tris[cell_offsets[c]:cell_offsets[c + 1]] for c in cells]) if len(pts) else np.empty(0, int)
    tri_pts = mesh.vertices[mesh.triangles[pair_tri]]
    a, b, c = tri_pts[:, 0], tri_pts[:, 1], tri_pts[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    d = pts[pair_pt] - a
    l1 = (d[:, 0] * (c[:, 1] - a[:, 1]) - d[:, 1] * (c[:, 0] - a[:, 0])) / det
    l2 = (d[:, 1] * (b[:, 0] - a[:, 0]) - d[:, 0] * (b[:, 1] - a[:, 1])) / det
    l0 = 1.0 - l1 - l2
    ok = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
    tri_idx = np.full(len(pts), -1, dtype=np.int64)
    bary = np.zeros((len(pts), 3))
    hit_pts, first = np.unique(pair_pt[ok], return_index=True)
    sel = np.flatnonzero(ok)[first]
    tri_idx[hit_pts] = pair_tri[sel]
    bary[hit_pts, 0] = l0[sel]
    bary[hit_pts, 1] = l1[sel]
    bary[hit_pts, 2] = l2[sel]
    if np.any(tri_idx < 0):
        missing = pts[tri_idx < 0][0]
        raise ValueError(f"point {missing} not inside the meshed domain")
    return tri_idx, bary


def _build_locator(mesh: TriMesh):
    x0, x1, y0, y1 = mesh.bounding_box
    cell = max(mesh.h, 1e-12)
    ncx = max(1, int(np.ceil((x1 - x0) / cell)))
    ncy = max(1, int(np.ceil((y1 - y0) / cell)))
    p = mesh.vertices[mesh.triangles]
    lox = np.clip(((p[..., 0].min(axis=1) - x0) / cell).astype(int), 0, ncx - 1)
    hix = np.clip(((p[..., 0].max(axis=1) - x0) / cell).astype(int), 0, ncx - 1)
    loy = np.clip(((p[..., 1].min(axis=1) - y0) / cell).astype(int), 0, ncy - 1)
    hiy = np.clip(((p[..., 1].max(axis=1) - y0) / cell).astype(int), 0, ncy - 1)
    buckets: list[list[int]] = [[] for _ in range(ncx * ncy)]
    for t in range(mesh.num_triangles):
        for i in range(lox[t], hix[t] + 1):
            for j in range(loy[t], hiy[t] + 1):
                buckets[i * ncy + j].append(t)
    offsets = np.zeros(ncx * ncy + 1, dtype=np.int64)
    for c, lst in enumerate(buckets):
        offsets[c + 1] = offsets[c] + len(lst)
    flat = np.array([t for lst in buckets for t in lst], dtype=np.int64)
    return x0, y0, cell, ncx, ncy, flat, offsets


# ---------------------------------------------------------------------------
# system assembly
# ---------------------------------------------------------------------------

@dataclass
class ComplexSparseSystem:
    """Assembled matrix split A = S - k^2 M + i k B, with S = S_core + penalty."""

    S: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    penalty: sp.csr_matrix
    S_core: sp.csr_matrix
    k: float
    mu: float
    rho0: float
    b: np.ndarray | None = None

    @property
    def A(self) -> sp.csr_matrix:
        return (self.S - self.k ** 2 * self.M).astype(complex) + 1j * self.k * self.B

    @property
    def ndof(self) -> int:
        return self.S.shape[0]


def _edge_quadrature_traces(mesh: TriMesh, npoints: int):
    """Per interior edge: jump matrix (E, q, 6), averaged normal derivative (E, 6),
    dof indices (E, 6), and scaled weights (E, q)."""
    eint = mesh.interior_edges
    s, w = edge_rule(npoints)
    t0 = mesh.edge_tris[eint, 0]
    t1 = mesh.edge_tris[eint, 1]
    a0 = mesh.edge_local[eint, 0]
    a1 = mesh.edge_local[eint, 1]
    ne = len(eint)
    q = len(s)
    tr0 = np.zeros((ne, q, 3))
    tr1 = np.zeros((ne, q, 3))
    rows = np.arange(ne)[:, None]
    # side tau traverses the edge start->end, side tau' end->start
    tr0[rows, :, a0[:, None]] = 1.0 - s
    tr0[rows, :, ((a0 + 1) % 3)[:, None]] = s
    tr1[rows, :, a1[:, None]] = s
    tr1[rows, :, ((a1 + 1) % 3)[:, None]] = 1.0 - s
    n_e = mesh.edge_normals[eint]
    dn0 = np.einsum('eid,ed->ei', mesh.grads[t0], n_e)
    dn1 = np.einsum('eid,ed->ei', mesh.grads[t1], n_e)
    jump = np.concatenate([-tr0, tr1], axis=2)              # [v] = v|tau' - v|tau
    avg = 0.5 * np.concatenate([dn0, dn1], axis=1)
    dofs = np.concatenate([3 * t0[:, None] + np.arange(3), 3 * t1[:, None] + np.arange(3)], axis=1)
    wts = mesh.edge_lengths[eint][:, None] * w[None, :]
    return eint, jump, avg, dofs, wts


def assemble_penalty(mesh: TriMesh, mu: float, rho0: float,
                     settings: QuadratureSettings = DEFAULT_QUADRATURE) -> sp.csr_matrix:
    """Jump-penalty matrix: sum_e rho0 / h_e^(1+mu) <[u], [v]>_e."""
    if rho0 <= 0:
        raise AssemblyError(f"penalty weight rho0 must be positive, got {rho0}")
    if mu < 0:
        raise AssemblyError(f"penalty exponent mu must be nonnegative, got {mu}")
    n = 3 * mesh.num_triangles
    eint, jump, _, dofs, wts = _edge_quadrature_traces(mesh, settings.edge_points)
    coef = rho0 / mesh.edge_lengths[eint] ** (1.0 + mu)
    blocks = coef[:, None, None] * np.einsum('eq,eqj,eqi->eij', wts, jump, jump)
    rows = np.broadcast_to(dofs[:, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], blocks.shape).ravel()
    P = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    P.sum_duplicates()
    return P


def assemble_system(mesh: TriMesh, k: float, mu: float = 0.0, rho0: float = 5.0,
                    settings: QuadratureSettings = DEFAULT_QUADRATURE) -> ComplexSparseSystem:
    """Matrix part of the scheme (no right-hand side)."""
    if rho0 <= 0:
        raise AssemblyError(f"penalty weight rho0 must be positive, got {rho0}")
    if mu < 0:
        raise AssemblyError(f"penalty exponent mu must be nonnegative, got {mu}")
    nt = mesh.num_triangles
    n = 3 * nt

    # element blocks
    Sloc = np.einsum('tid,tjd,t->tij', mesh.grads, mesh.grads, mesh.areas)
    Mloc = ((np.ones((3, 3)) + np.eye(3)) / 12.0)[None, :, :] * mesh.areas[:, None, None]
    base = 3 * np.repeat(np.arange(nt), 9)
    li = np.tile(np.repeat(np.arange(3), 3), nt)
    lj = np.tile(np.tile(np.arange(3), 3), nt)
    vol_rows = base + li
    vol_cols = base + lj

    # interior-edge consistency blocks
    eint, jump, avg, dofs, wts = _edge_quadrature_traces(mesh, settings.edge_points)
    term = -np.einsum('eq,ej,eqi->eij', wts, avg, jump)
    blocks = term + term.transpose(0, 2, 1)
    erows = np.broadcast_to(dofs[:, :, None], blocks.shape).ravel()
    ecols = np.broadcast_to(dofs[:, None, :], blocks.shape).ravel()

    S_core = sp.coo_matrix(
        (np.concatenate([Sloc.ravel(), blocks.ravel()]),
         (np.concatenate([vol_rows, erows]), np.concatenate([vol_cols, ecols]))),
        shape=(n, n)).tocsr()
    S_core.sum_duplicates()
    M = sp.coo_matrix((Mloc.ravel(), (vol_rows, vol_cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()

    # boundary mass (exact closed form of the P1 edge mass matrix)
    bidx = mesh.boundary_edges
    brows, bcols, bvals = [], [], []
    for e in bidx:
        t = int(mesh.edge_tris[e, 0])
        a = int(mesh.edge_local[e, 0])
        he = mesh.edge_lengths[e]
        d = np.array([3 * t + a, 3 * t + (a + 1) % 3])
        bm = he / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        R, C = np.meshgrid(d, d, indexing='ij')
        brows.append(R.ravel()); bcols.append(C.ravel()); bvals.append(bm.ravel())
    if bidx.size:
        B = sp.coo_matrix((np.concatenate(bvals),
                           (np.concatenate(brows), np.concatenate(bcols))), shape=(n, n)).tocsr()
    else:
        B = sp.csr_matrix((n, n))
    B.sum_duplicates()

    P = assemble_penalty(mesh, mu, rho0, settings)
    return ComplexSparseSystem(S=S_core + P, M=M, B=B, penalty=P, S_core=S_core,
                               k=k, mu=mu, rho0=rho0)


def assemble_rhs(mesh: TriMesh, k: float, f, g,
                 settings: QuadratureSettings = DEFAULT_QUADRATURE) -> np.ndarray:
    """Load vector b_i = int f conj(phi_i) + int_Gamma g conj(phi_i).

    ``f(points)`` maps (..., 2) to complex; ``g(points, normals)`` likewise.
    Volume and boundary integrals use the oscillation-adaptive rules.
    """
    nt = mesh.num_triangles
    b = np.zeros(3 * nt, dtype=complex)
    if f is not None:
        levels = settings.subdivision_levels(k, mesh.diameters)
        p = mesh.vertices[mesh.triangles]
        for lev in np.unique(levels):
            idx = np.flatnonzero(levels == lev)
            bary, w = subdivided_rule(settings.volume_degree, int(lev))
            chunk = max(1, 2_000_000 // len(bary))
            for s0 in range(0, len(idx), chunk):
                ts = idx[s0:s0 + chunk]
                phys = np.einsum('qi,tid->tqd', bary, p[ts])
                fv = np.asarray(f(phys), dtype=complex)
                contrib = mesh.areas[ts, None] * np.einsum('tq,q,qi->ti', fv, w, bary)
                cols = (3 * ts[:, None] + np.arange(3)).ravel()
                b[cols] += contrib.ravel()
    if g is not None:
        sq, wq = edge_rule(settings.edge_points)
        for e in mesh.boundary_edges:
            t = int(mesh.edge_tris[e, 0])
            a = int(mesh.edge_local[e, 0])
            he = float(mesh.edge_lengths[e])
            nsub = settings.edge_subdivisions(k, he)
            s = ((np.arange(nsub)[:, None] + sq[None, :]) / nsub).ravel()
            w = np.tile(wq, nsub) / nsub
            v0 = mesh.vertices[mesh.edge_vertices[e, 0]]
            v1 = mesh.vertices[mesh.edge_vertices[e, 1]]
            pts = v0[None, :] + s[:, None] * (v1 - v0)[None, :]
            gv = np.asarray(g(pts, np.broadcast_to(mesh.edge_normals[e], pts.shape)),
                            dtype=complex)
            b[3 * t + a] += he * np.sum(w * (1.0 - s) * gv)
            b[3 * t + (a + 1) % 3] += he * np.sum(w * s * gv)
    return b


def solve_helmholtz(mesh: TriMesh, k: float, f, g, mu: float = 0.0, rho0: float = 5.0,
                    settings: QuadratureSettings = DEFAULT_QUADRATURE,
                    tol: float = 1e-10) -> tuple[DGFunction, SolveReport]:
    """Assemble and solve the DG scheme; returns the solution and solve report."""
    system = assemble_system(mesh, k, mu, rho0, settings)
    b = assemble_rhs(mesh, k, f, g, settings)
    system.b = b
    try:
        x, report = solve_sparse_complex(system.A, b, tol=tol)
    except Exception as exc:
        raise type(exc)(f"{exc} (k={k}, N={mesh.N or mesh.num_triangles}, mu={mu})") from exc
    return DGFunction(mesh, x), report


def j0_form(mesh_or_penalty, u: DGFunction, v: DGFunction | None = None,
            mu: float = 0.0, rho0: float = 5.0) -> complex:
    """Penalty form J0(u, v); pass a prebuilt penalty matrix to avoid reassembly."""
    if isinstance(mesh_or_penalty, TriMesh):
        P = assemble_penalty(mesh_or_penalty, mu, rho0)
    else:
        P = mesh_or_penalty
    v = u if v is None else v
    val = np.vdot(v.coeffs, P @ u.coeffs)     # conjugates the test argument
    return complex(val)
