"""Clamped-plate Green's function of the unit 4-ball and a kernel-quadrature solver for
``Delta^2 psi = f``, ``psi = d_nu psi = 0`` on the boundary."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.sparse.linalg import LinearOperator, cg

from . import kernels
from .errors import PreconditionError, ShapeError, SingularityError
from .fields import Field
from .grid import Grid4, build_grid
from .ops import gradient_sq_support, laplacian_array

GREEN_CONSTANT = -1.0 / (8.0 * math.pi**2)


def green_kernel(x, y, c: float = GREEN_CONSTANT) -> float:
    """``G(x, y) = c (log|x-y| - log|x/|x| - |x|y| - |x-y|^2 / (2 |x/|x| - |x|y|^2) + 1/2)``.

    Uses ``|x/|x| - |x|y|^2 = |x|^2|y|^2 - 2 x.y + 1``, which is symmetric and
    also covers ``x = 0``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d2 = float(np.sum((x - y) ** 2))
    if d2 == 0.0:
        raise SingularityError("G(x, y) is singular at x = y")
    q = float(np.dot(x, x) * np.dot(y, y) - 2.0 * np.dot(x, y) + 1.0)
    return c * (0.5 * math.log(d2 / q) - d2 / (2.0 * q) + 0.5)


def green_matrix(x: np.ndarray, y: np.ndarray, c: float = GREEN_CONSTANT) -> np.ndarray:
    """Vectorized ``G(x_i, y_j)`` for point sets of shape ``(4, n)`` and ``(4, k)``."""
    x2 = np.sum(x * x, axis=0)[:, None]
    y2 = np.sum(y * y, axis=0)[None, :]
    dot = x.T @ y
    d2 = np.maximum(x2 + y2 - 2.0 * dot, 0.0)
    q = x2 * y2 - 2.0 * dot + 1.0
    with np.errstate(divide="ignore"):
        return c * (0.5 * np.log(d2 / q) - d2 / (2.0 * q) + 0.5)


@lru_cache(maxsize=4)
def _self_cell_mean(h: float, sub: int = 3) -> tuple:
    # offsets of the sub^4 sample points, centre excluded
    offs = ((np.arange(sub) - (sub - 1) / 2) / sub) * h
    pts = np.stack(np.meshgrid(*([offs] * 4), indexing="ij")).reshape(4, -1)
    keep = np.any(pts != 0.0, axis=0)
    return pts[:, keep]


def self_cell_average(x: np.ndarray, h: float, c: float = GREEN_CONSTANT, sub: int = 3) -> np.ndarray:
    """Mean of ``G(x, .)`` over ``sub^4 - 1`` sample points of the cell around each ``x`` (centre excluded)."""
    offs = _self_cell_mean(h, sub)
    out = np.empty(x.shape[1])
    for i in range(x.shape[1]):
        y = x[:, i:i + 1] + offs
        out[i] = green_matrix(x[:, i:i + 1], y, c).mean()
    return out


def _targets(grid: Grid4, targets=None) -> np.ndarray:
    if targets is None:
        # the kernel is only meaningful inside the ball; psi is extended by 0
        return np.flatnonzero((grid.r < 1.0).reshape(-1))
    return np.asarray(targets, dtype=np.int64)


def solve_clamped_biharmonic(f, grid: Grid4 | None = None, targets=None, c: float = GREEN_CONSTANT,
                             backend=None) -> Field:
    """``psi(x) = sum_y w_y G(x, y) f(y)`` with the self cell desingularized.

    ``f`` is a scalar field (``Field`` or array over the lattice).  ``psi`` is
    computed at ``targets`` (flat node indices; default every node inside
    the open ball) and is zero elsewhere.
    """
    backend = backend or kernels.backend
    if isinstance(f, Field):
        grid, vals = f.grid, f.flat
    else:
        if grid is None:
            raise ShapeError("a raw array needs its grid")
        vals = np.asarray(f, dtype=np.float64).reshape(-1, grid.size)
    if vals.shape[0] != 1:
        raise ShapeError(f"f must be scalar, got {vals.shape[0]} components")
    fv = vals[0]
    w = grid.weights.reshape(-1)
    src = np.flatnonzero((w > 0) & (fv != 0))
    tgt = _targets(grid, targets)
    xs = grid.x.reshape(4, -1)
    tx = np.ascontiguousarray(xs[:, tgt])
    sx = np.ascontiguousarray(xs[:, src])
    coef = np.ascontiguousarray(w[src] * fv[src])
    pos = np.full(grid.size, -1, dtype=np.int64)
    pos[src] = np.arange(src.size)
    self_index = np.ascontiguousarray(pos[tgt])
    out = np.zeros(tgt.size)
    backend.green_sum(tx, sx, coef, c, self_index, out, kernels.thread_count())
    has_self = self_index >= 0
    if np.any(has_self):
        rows = np.flatnonzero(has_self)
        out[rows] += coef[self_index[rows]] * self_cell_average(tx[:, rows], grid.h, c)
    psi = np.zeros(grid.size)
    psi[tgt] = out
    return Field(grid, psi.reshape((1,) + grid.shape))


def fd_clamped_solve(f, grid: Grid4 | None = None, free: str = "ball", rtol: float = 1e-10,
                     maxiter: int = 20000) -> Field:
    """Independent finite-difference solve of ``Delta_h^2 psi = f`` with ``psi = 0`` off the free nodes.

    ``free="ball"`` solves on the nodes with ``|x| < 1`` and ``"interior"``
    on the flow's interior nodes (clamping at ``|x| ~ 1 - 2h``, which costs
    a larger O(h) constant).  Restricted to the free nodes the operator
    ``Delta_h(Delta_h psi)`` equals ``L^T L`` with ``L`` the zero-extended
    stencil, so it is symmetric positive definite and conjugate gradients
    apply.
    """
    if isinstance(f, Field):
        grid, vals = f.grid, f.flat[0]
    else:
        if grid is None:
            raise ShapeError("a raw array needs its grid")
        vals = np.asarray(f, dtype=np.float64).reshape(-1)
    if free == "ball":
        idx = np.flatnonzero((grid.r2_index < grid.c**2).reshape(-1))
    elif free == "interior":
        idx = grid.interior_idx
    else:
        raise ValueError(f"free must be 'ball' or 'interior', got {free!r}")
    n = idx.size
    full = np.zeros((1, grid.size))

    def apply(v):
        full[0, idx] = v
        lap = laplacian_array(full, grid)
        return laplacian_array(lap, grid, nodes=idx)[0, idx]

    op = LinearOperator((n, n), matvec=apply, dtype=np.float64)
    sol, info = cg(op, vals[idx], rtol=rtol, atol=0.0, maxiter=maxiter)
    if info != 0:
        raise PreconditionError(f"conjugate gradients did not converge (info={info})")
    psi = np.zeros(grid.size)
    psi[idx] = sol
    return Field(grid, psi.reshape((1,) + grid.shape))


def relative_l2_difference(a: Field, b: Field, mask=None) -> float:
    g = a.grid
    w = g.weights.reshape(-1)
    if mask is not None:
        w = w * np.asarray(mask, dtype=np.float64).reshape(-1)
    d = np.sum((a.flat - b.flat) ** 2, axis=0)
    ref = np.sum(b.flat**2, axis=0)
    return math.sqrt(float(np.sum(w * d)) / float(np.sum(w * ref)))


# -- calibration of the normalizing constant -------------------------------

_R = sp.symbols("r", nonnegative=True)


def _radial_bilaplacian(expr):
    lap = lambda e: sp.diff(e, _R, 2) + 3 / _R * sp.diff(e, _R)  # noqa: E731
    return sp.simplify(lap(lap(expr)))


@lru_cache(maxsize=4)
def _bump(rho: float, power: int = 5):
    expr = (1 - _R**2 / sp.Rational(str(rho)) ** 2) ** power
    return (sp.lambdify(_R, expr, "numpy"), sp.lambdify(_R, _radial_bilaplacian(expr), "numpy"))


@dataclass
class GreenCalibration:
    N: int
    c_fit: float            # least-squares constant reproducing phi from Delta^2 phi
    c_theory: float
    l2_error: float         # relative L^2 error of the reproduced phi using c_theory
    l2_error_fit: float


def calibrate_green_constant(N: int = 13, rho: float = 0.8, power: int = 5) -> GreenCalibration:
    """Reproduce ``phi = (1 - |x|^2/rho^2)_+^power`` from its bilaplacian through the kernel."""
    g = build_grid(N)
    phi_f, bil_f = _bump(rho, power)
    r = g.r.reshape(-1)
    inside = r < rho
    phi = np.where(inside, phi_f(np.minimum(r, rho)), 0.0)
    f = np.where(inside, bil_f(np.minimum(r, rho)), 0.0)
    unit = solve_clamped_biharmonic(f[None], g, c=1.0).flat[0]
    ball = (r < 1.0)
    w = g.weights.reshape(-1) * ball
    c_fit = float(np.sum(w * unit * phi) / np.sum(w * unit * unit))
    norm = math.sqrt(float(np.sum(w * phi**2)))

    def err(c):
        return math.sqrt(float(np.sum(w * (c * unit - phi) ** 2))) / norm

    return GreenCalibration(N, c_fit, GREEN_CONSTANT, err(GREEN_CONSTANT), err(c_fit))


# -- bounds for the solution -----------------------------------------------

@dataclass
class ThmB2Report:
    C0: float
    norm_lap2: float
    norm_grad4: float
    norm_inf: float
    ratio: float

    def to_row(self):
        return [self.C0, self.norm_lap2, self.norm_grad4, self.norm_inf, self.ratio]


THMB2_CSV_HEADER = ["C0", "norm_lap2", "norm_grad4", "norm_inf", "ratio"]


def check_source(f, grid: Grid4, C0: float, rtol: float = 1e-2) -> None:
    """Admissibility: ``0 <= f <= C0 (1 - |x| + h/2)^-4`` nodewise and ``int f <= C0``.

    ``rtol`` absorbs the quadrature error of ``int f`` (the discrete ball
    volume differs from ``pi^2/2`` by a fraction of a percent).
    """
    fv = np.asarray(f, dtype=np.float64).reshape(-1)
    if np.any(fv < 0):
        k = int(np.flatnonzero(fv < 0)[0])
        raise PreconditionError(f"f < 0 at node {np.unravel_index(k, grid.shape)}")
    r = grid.r.reshape(-1)
    bound = C0 * np.where(r < 1.0, (1.0 - r + grid.h / 2) ** -4.0, np.inf)
    over = np.flatnonzero(fv > bound * (1 + 1e-12))
    if over.size:
        k = int(over[0])
        raise PreconditionError(
            f"f = {fv[k]:.4g} exceeds C0 (1-|x|+h/2)^-4 = {bound[k]:.4g} at node "
            f"{np.unravel_index(k, grid.shape)}")
    total = float(np.sum(grid.weights.reshape(-1) * fv))
    if total > C0 * (1 + rtol):
        raise PreconditionError(f"int f = {total:.6g} exceeds C0 = {C0:.6g}")


def solution_norms(psi: Field) -> tuple[float, float, float]:
    """``(||Delta_h psi||_2, ||grad_h psi||_4, ||psi||_inf)``."""
    g = psi.grid
    lap = laplacian_array(psi.flat, g)[0, g.lap_idx]
    lap2 = math.sqrt(float(np.sum(g.lap_weights * lap * lap)))
    sq = gradient_sq_support(psi.flat, g)
    grad4 = float(np.sum(g.weights.reshape(-1)[g.support_idx] * sq * sq)) ** 0.25
    return lap2, grad4, float(np.abs(psi.flat).max())


def verify_thmB2_bounds(f, C0: float, grid: Grid4 | None = None) -> ThmB2Report:
    """Solve ``Delta^2 psi = f`` through the kernel and report the norms against ``C0``."""
    if isinstance(f, Field):
        grid, fv = f.grid, f.flat[0]
    else:
        fv = np.asarray(f, dtype=np.float64).reshape(-1)
    if C0 <= 0:
        raise PreconditionError(f"C0 must be positive, got {C0}")
    check_source(fv, grid, C0)
    if not np.any(fv):
        return ThmB2Report(C0, 0.0, 0.0, 0.0, 0.0)
    psi = solve_clamped_biharmonic(fv[None], grid)
    lap2, grad4, sup = solution_norms(psi)
    return ThmB2Report(C0, lap2, grad4, sup, (lap2 + grad4 + sup) / C0)


def shell_source(grid: Grid4, C0: float = 1.0, inner: float = 0.5) -> np.ndarray:
    """``min(C0, C0 (1-|x|+h/2)^-4)`` on ``inner < |x| < 1``, zero elsewhere."""
    r = grid.r.reshape(-1)
    safe = np.where(r < 1.0, (1.0 - r + grid.h / 2), 1.0)
    return np.where((r > inner) & (r < 1.0), np.minimum(C0, C0 * safe**-4.0), 0.0)
