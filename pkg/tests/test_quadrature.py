import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helmdg.quadrature import (QuadratureSettings, edge_rule, subdivided_rule,
                               subdivision_template, triangle_rule)


def reference_monomial_integral(p: int, q: int) -> float:
    # int_T x^p y^q over the unit reference triangle
    return math.factorial(p) * math.factorial(q) / math.factorial(p + q + 2)


@pytest.mark.parametrize("degree", [1, 2, 4, 6, 8])
def test_triangle_rule_monomial_exactness(degree):
    bary, w = triangle_rule(degree)
    assert abs(w.sum() - 1.0) < 1e-14
    x, y = bary[:, 1], bary[:, 2]
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            val = 0.5 * np.sum(w * x ** p * y ** q)   # reference area is 1/2
            exact = reference_monomial_integral(p, q)
            assert abs(val - exact) <= 1e-14 * max(abs(exact), 1.0), (p, q)


@pytest.mark.parametrize("npts", [1, 2, 3, 6])
def test_edge_rule_exactness(npts):
    s, w = edge_rule(npts)
    assert abs(w.sum() - 1.0) < 1e-14
    for d in range(2 * npts):
        val = np.sum(w * s ** d)
        assert abs(val - 1.0 / (d + 1)) < 1e-14


def test_subdivision_template_partitions_area():
    for level in range(4):
        tris = subdivision_template(level)
        assert len(tris) == 4 ** level
        d1 = tris[:, 1] - tris[:, 0]
        d2 = tris[:, 2] - tris[:, 0]
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        assert np.all(areas > 0)
        assert abs(areas.sum() - 0.5) < 1e-14


def test_subdivided_rule_still_integrates_polynomials():
    bary, w = subdivided_rule(6, 2)
    assert abs(w.sum() - 1.0) < 1e-13
    x, y = bary[:, 1], bary[:, 2]
    val = 0.5 * np.sum(w * x ** 3 * y ** 2)
    assert abs(val - reference_monomial_integral(3, 2)) < 1e-14


def test_subdivided_rule_resolves_oscillation():
    # int over reference triangle of cos(40 x): resolved only after subdivision
    vals = []
    for level in (0, 3, 5, 6):
        bary, w = subdivided_rule(6, level)
        vals.append(0.5 * np.sum(w * np.cos(40.0 * bary[:, 1])))
    assert abs(vals[-1] - vals[-2]) < 1e-10      # converged
    assert abs(vals[0] - vals[-1]) > 1e-7        # unsubdivided rule was off


def test_settings_levels():
    s = QuadratureSettings()
    lev = s.subdivision_levels(50.0, np.array([np.sqrt(2) / 4, np.sqrt(2) / 256]))
    assert lev[0] == 5          # k h = 17.7 -> 2^5 subdivision
    assert lev[1] == 0
    assert s.subdivision_levels(1e4, np.array([1.0]))[0] == 6    # capped
    assert s.edge_subdivisions(50.0, 0.25) == 13


@given(st.integers(min_value=0, max_value=6), st.integers(min_value=0, max_value=3))
def test_rule_weights_positive(degree, level):
    bary, w = subdivided_rule(degree, level)
    assert np.all(w > 0)
    assert np.all(bary >= -1e-15)
    assert np.allclose(bary.sum(axis=1), 1.0, atol=1e-14)
