"""Independent oracles used to freeze expected values.

Everything here is deliberately implemented with different machinery than the
package: extended-precision decimal series for Bessel functions, finite
differences for derivatives, exact rational arithmetic for least-squares
solves. Keep it that way; the point is independence.
"""

from __future__ import annotations

from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np


def bessel_series(order: int, x: float) -> float:
    """J0/J1 by the ascending power series in extended-precision decimals.

    Working precision grows with x to absorb the ~e^x cancellation between
    series terms; the result is accurate to far below double roundoff.
    """
    assert order in (0, 1)
    if x == 0.0:
        return 1.0 if order == 0 else 0.0
    prec = 60 + int(0.48 * x)
    ctx_prec = getcontext().prec
    getcontext().prec = prec
    try:
        xd = Decimal(repr(float(x)))
        q = (xd / 2) ** 2
        term = Decimal(1) if order == 0 else xd / 2
        total = term
        cutoff = Decimal(10) ** (-(prec - 10))
        m = 1
        while True:
            denom = m * m if order == 0 else m * (m + 1)
            term = -term * q / denom
            total += term
            if abs(term) < cutoff and m > x / 2:
                break
            m += 1
            if m > 2000:
                raise RuntimeError("bessel series did not converge")
        return float(total)
    finally:
        getcontext().prec = ctx_prec


def bessel_zero(order: int, bracket: tuple[float, float]) -> float:
    """A zero of J_order located by bisection on the series oracle."""
    lo, hi = bracket
    flo = bessel_series(order, lo)
    fhi = bessel_series(order, hi)
    assert flo * fhi < 0, "bracket does not straddle a zero"
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = bessel_series(order, mid)
        if flo * fmid <= 0:
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def fd_gradient(f, points: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar field, (..., 2)."""
    p = np.asarray(points, dtype=float)
    ex = np.zeros_like(p); ex[..., 0] = step
    ey = np.zeros_like(p); ey[..., 1] = step
    gx = (f(p + ex) - f(p - ex)) / (2 * step)
    gy = (f(p + ey) - f(p - ey)) / (2 * step)
    return np.stack([gx, gy], axis=-1)


def fd_laplacian(f, points: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """5-point finite-difference Laplacian of a scalar field."""
    p = np.asarray(points, dtype=float)
    ex = np.zeros_like(p); ex[..., 0] = step
    ey = np.zeros_like(p); ey[..., 1] = step
    return (f(p + ex) + f(p - ex) + f(p + ey) + f(p - ey) - 4.0 * f(p)) / step ** 2


def lstsq_quadratic_exact(points: np.ndarray, values) -> tuple:
    """Exact rational least-squares fit of a quadratic in 2D.

    Solves the 6x6 normal equations in Fraction arithmetic (floats are taken
    at their exact binary values) and returns the gradient (dp/dx, dp/dy) at
    the origin of the coordinates as a complex pair of floats.
    """
    pts = [(Fraction(float(x)), Fraction(float(y))) for x, y in points]
    vals = list(values)

    def design_row(x, y):
        return [Fraction(1), x, y, x * x, x * y, y * y]

    rows = [design_row(x, y) for x, y in pts]
    AtA = [[sum(r[i] * r[j] for r in rows) for j in range(6)] for i in range(6)]

    def solve_normal(rhs_vals):
        Atb = [sum(rows[n][i] * rhs_vals[n] for n in range(len(rows))) for i in range(6)]
        M = [row[:] + [Atb[i]] for i, row in enumerate([r[:] for r in AtA])]
        for col in range(6):
            piv = next(r for r in range(col, 6) if M[r][col] != 0)
            M[col], M[piv] = M[piv], M[col]
            pv = M[col][col]
            M[col] = [v / pv for v in M[col]]
            for r in range(6):
                if r != col and M[r][col] != 0:
                    fac = M[r][col]
                    M[r] = [a - fac * b for a, b in zip(M[r], M[col])]
        return [M[i][6] for i in range(6)]

    re = solve_normal([Fraction(float(np.real(v))) for v in vals])
    im = solve_normal([Fraction(float(np.imag(v))) for v in vals])
    coeff = [complex(float(a), float(b)) for a, b in zip(re, im)]
    return coeff[1], coeff[2]


def loglog_slope(ns, errs) -> float:
    """Least-squares slope of log(err) against log(1/N)."""
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    return float(np.polyfit(np.log(1.0 / ns), np.log(errs), 1)[0])
