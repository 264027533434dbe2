import numpy as np
import pytest

from helmdg.mesh import (build_mesh, estimate_alpha, measure_mesh_condition,
                         verify_fundamental_identity)


def test_regular_mesh_is_exact_parallelogram():
    m = build_mesh("regular", 8)
    r = measure_mesh_condition(m)
    assert r.max_interior_defect <= 1e-14
    assert r.beta_mismatch.max() <= 1e-14 * m.h ** 2
    assert r.gamma_mismatch.max() <= 1e-14 * m.h ** 2
    # the boundary triangles of this grid are right triangles with a leg on
    # the boundary: their isosceles defect is (sqrt(2)-1)*h by geometry
    assert np.allclose(r.boundary_defects.max(), (np.sqrt(2) - 1) * 0.125)


def test_beta_gamma_closed_form():
    # right triangle (0,0),(1,0),(0,1); e = edge from (0,0) to (1,0):
    # theta_e = 45 deg, |tau| = 1/2  =>  gamma_e = 1/6, |beta_e| = 1/12
    from helmdg.mesh import mesh_from_arrays
    m = mesh_from_arrays(np.array([[0., 0.], [1., 0.], [0., 1.]]), np.array([[0, 1, 2]]))
    geo = m.element_edge_geometry(0)
    tv, nv, hp, hm, cot, length = geo[0]
    assert abs(cot - 1.0) < 1e-14
    beta = cot / 12 * (hp ** 2 - hm ** 2)
    gamma = cot / 3 * m.areas[0]
    assert abs(abs(beta) - 1.0 / 12.0) < 1e-14
    assert abs(gamma - 1.0 / 6.0) < 1e-14
    # the hypotenuse: opposite angle is 90 deg  =>  beta = gamma = 0
    tv, nv, hp, hm, cot, length = geo[1]
    assert abs(cot) < 1e-14


def test_report_populates_all_edges(mesh_zoo):
    for m in mesh_zoo.values():
        r = measure_mesh_condition(m)
        assert len(r.interior_defects) == len(m.interior_edges)
        assert len(r.boundary_defects) == len(m.boundary_edges)
        assert np.all(r.interior_defects >= 0)
        assert np.all(r.boundary_defects >= 0)
        interior = ~m.boundary
        assert not np.any(np.isnan(r.beta[interior]))
        assert not np.any(np.isnan(r.gamma[:, 0]))


def test_alpha_estimate_exact_on_regular():
    meshes = [build_mesh("regular", n) for n in (4, 8, 16)]
    assert estimate_alpha(meshes) == "exact (defect 0)"
    with pytest.raises(ValueError):
        estimate_alpha(meshes[:2])


@pytest.mark.parametrize("q", [0.0, 0.5, 1.0])
def test_alpha_estimate_tracks_perturbation_exponent(q):
    meshes = [build_mesh("perturbed", n, seed=5, delta=0.25, perturbation_exponent=q)
              for n in (8, 16, 32, 64)]
    alpha = estimate_alpha(meshes)
    assert isinstance(alpha, float)
    assert abs(alpha - q) < 0.25


# ---------------------------------------------------------------------------
# fundamental identity
# ---------------------------------------------------------------------------

TRI = np.array([[0.2, -0.1], [1.3, 0.3], [0.1, 1.1]])


def test_identity_trivial_linear_phi():
    # phi linear => phi = phi_I, both sides vanish
    res = verify_fundamental_identity(TRI, [1.0, 2.0, -3.0, 0, 0, 0], [0.5, 1.0, 2.0])
    assert res < 1e-15


def test_identity_trivial_constant_v():
    res = verify_fundamental_identity(TRI, [0, 0, 0, 1.0, 2.0, -1.0], [7.0, 0.0, 0.0])
    assert res < 1e-15


def identity_sweep(n_cases: int, seed: int = 42) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    made = 0
    while made < n_cases:
        pts = rng.uniform(-1.0, 1.0, size=(3, 2))
        d1, d2 = pts[1] - pts[0], pts[2] - pts[0]
        area2 = d1[0] * d2[1] - d1[1] * d2[0]
        if area2 < 0:
            pts = pts[[0, 2, 1]]
            area2 = -area2
        h = max(np.linalg.norm(pts[1] - pts[0]), np.linalg.norm(pts[2] - pts[1]),
                np.linalg.norm(pts[0] - pts[2]))
        if area2 < 0.05 * h * h:          # skip near-degenerate triangles
            continue
        phi = rng.uniform(-1.0, 1.0, 6)
        v = rng.uniform(-1.0, 1.0, 3)
        res = verify_fundamental_identity(pts, phi, v)
        scale = np.max(np.abs(phi)) * np.max(np.abs(v)) * h ** 2
        worst = max(worst, res / scale)
        made += 1
    return worst


def test_identity_random_triangles():
    assert identity_sweep(200) <= 1e-12


def test_identity_rejects_degenerate():
    with pytest.raises(Exception):
        verify_fundamental_identity(np.array([[0., 0.], [1., 0.], [2., 0.]]),
                                    np.ones(6), np.ones(3))
