"""Independent reference values: closed forms and 1-D radial quadrature.

Nothing here imports biflow, so the tests compare the lattice code against
arithmetic that shares none of its machinery.
"""
import math

import sympy as sp
from scipy.integrate import quad

SPHERE_AREA = 2 * math.pi**2       # |S^3|
BALL_VOLUME = math.pi**2 / 2       # |B_1| in R^4
GREEN_CONSTANT = -1 / (8 * math.pi**2)

r = sp.symbols("r", nonnegative=True)


def radial_integral(f, a=0.0, b=1.0):
    """``2 pi^2 int_a^b f(r) r^3 dr``: the integral of a radial function over a 4-D shell."""
    val, err = quad(lambda s: f(s) * s**3, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    assert err < 1e-10
    return SPHERE_AREA * val


def radial_laplacian(expr):
    """``f'' + 3 f' / r`` for a radial expression in the symbol ``r``."""
    return sp.simplify(sp.diff(expr, r, 2) + 3 * sp.diff(expr, r) / r)


def radial_bilaplacian(expr):
    return radial_laplacian(radial_laplacian(expr))


def hardy_ratio_radial(w_expr):
    """Continuum Hardy ratio ``int w^2 (1-r)^-4 / int (Delta w)^2`` for a radial clamped ``w``."""
    num_expr = sp.simplify(w_expr**2 / (1 - r) ** 4)
    lap = radial_laplacian(w_expr)
    num = radial_integral(sp.lambdify(r, num_expr, "math"))
    den = radial_integral(sp.lambdify(r, lap**2, "math"))
    return num / den


def green_at_origin(rho, c=GREEN_CONSTANT):
    """``G(0, y)`` for ``|y| = rho``: the ``x -> 0`` limit of the clamped kernel."""
    return c * (math.log(rho) + (1 - rho**2) / 2)


def hardy_plain_exact():
    """The ratio for ``w = (1 - |x|^2)^2``, exactly: ``769 / 2240``."""
    w = (1 - r**2) ** 2
    num = sp.integrate(sp.simplify(w**2 / (1 - r) ** 4) * r**3, (r, 0, 1))
    den = sp.integrate(radial_laplacian(w) ** 2 * r**3, (r, 0, 1))
    return sp.nsimplify(num / den)
