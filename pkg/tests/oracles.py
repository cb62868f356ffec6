"""Reference computations independent of LAPACK."""

from fractions import Fraction

import mpmath
import numpy as np
import sympy


def charpoly_roots(a, dps=50):
    """Eigenvalues of a symmetric matrix as roots of its exact characteristic polynomial."""
    m = sympy.Matrix([[sympy.Rational(Fraction(float(x))) for x in row] for row in np.asarray(a)])
    coeffs = m.charpoly().all_coeffs()
    with mpmath.workdps(dps):
        roots = mpmath.polyroots([mpmath.mpf(sympy.Rational(c).p) / sympy.Rational(c).q for c in coeffs],
                                 maxsteps=500, extraprec=4 * dps)
        return np.sort([float(mpmath.re(r)) for r in roots])


def cubic_eigenvalues(a, dps=60):
    """Closed-form (trigonometric) eigenvalues of a real symmetric 3x3 matrix.

    Evaluated in extended precision so the arccos near +-1 stays accurate.
    """
    with mpmath.workdps(dps):
        m = mpmath.matrix(np.asarray(a, dtype=float).tolist())
        p1 = m[0, 1] ** 2 + m[0, 2] ** 2 + m[1, 2] ** 2
        q = (m[0, 0] + m[1, 1] + m[2, 2]) / 3
        p2 = (m[0, 0] - q) ** 2 + (m[1, 1] - q) ** 2 + (m[2, 2] - q) ** 2 + 2 * p1
        if p2 == 0:
            return np.array([float(q)] * 3)
        p = mpmath.sqrt(p2 / 6)
        b = (m - q * mpmath.eye(3)) / p
        r = max(mpmath.mpf(-1), min(mpmath.mpf(1), mpmath.det(b) / 2))
        phi = mpmath.acos(r) / 3
        e1 = q + 2 * p * mpmath.cos(phi)
        e3 = q + 2 * p * mpmath.cos(phi + 2 * mpmath.pi / 3)
        return np.sort([float(e1), float(3 * q - e1 - e3), float(e3)])


def jacobi_eigenvalues(a, dps=30):
    """Eigenvalues from mpmath's Jacobi solver at extended precision."""
    with mpmath.workdps(dps):
        e, _ = mpmath.eigsy(mpmath.matrix(np.asarray(a, dtype=float).tolist()))
        return np.sort([float(x) for x in e])


def arrowhead_matrix(diag, arrow):
    diag = np.asarray(diag, dtype=float)
    h = np.diag(diag)
    h[0, 1:] = h[1:, 0] = arrow
    return h
