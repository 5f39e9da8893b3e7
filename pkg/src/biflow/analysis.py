"""Functional-analytic checks: the second-order Hardy inequality, an epsilon-regularity
scaling diagnostic and the mean-value monotonicity of harmonic functions."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp

from .errors import ConfigurationError, DomainRangeError, PreconditionError
from .fields import Field
from .grid import Grid4, build_grid
from .ops import gradient_sq_support, laplacian_array
from .sphere import residual_intrinsic

BALL_VOLUME = math.pi**2 / 2


def _as_flat(w, grid: Grid4 | None = None):
    if isinstance(w, Field):
        return w.grid, w.flat
    if grid is None:
        raise ConfigurationError("a raw array needs its grid")
    arr = np.asarray(w, dtype=np.float64)
    return grid, arr.reshape(-1, grid.size)


# -- Hardy inequality ------------------------------------------------------

def hardy_weight(grid: Grid4, rule: str = "exact") -> np.ndarray:
    """Nodal Hardy weight.

    ``exact``: ``|1 - |x||^-4`` at every node off the unit sphere and 0 on it
    (a clamped field vanishes there to fourth order in the integrand).
    ``mollified``: ``(1 - |x| + h/2)^-4`` inside the ball, 0 outside.
    """
    r = grid.r
    if rule == "exact":
        on_sphere = grid.r2_index == grid.c**2
        dist = np.where(on_sphere, 1.0, np.abs(1.0 - r))
        return np.where(on_sphere | grid.exterior, 0.0, dist**-4.0)
    if rule == "mollified":
        return np.where(r < 1.0, (1.0 - r + grid.h / 2) ** -4.0, 0.0)
    raise ConfigurationError(f"unknown Hardy weight rule {rule!r}")


@dataclass
class HardyReport:
    ratio: float
    numerator: float
    denominator: float
    degenerate: bool = False
    notes: list = field(default_factory=list)


def hardy_report(w, grid: Grid4 | None = None, rule: str = "exact", tol: float = 1e-10) -> HardyReport:
    """``int |w|^2 (1-|x|)^-4 / int |Delta_h w|^2`` for a clamped field ``w``.

    ``w`` is sampled from a smooth function on every non-exterior node, so
    the stencil sees the natural continuation across ``|x| = 1``.  Clamped
    means the trace vanishes: ``|w| <= tol`` at lattice nodes on the unit
    sphere, and ``w = 0`` on exterior nodes.
    """
    g, flat = _as_flat(w, grid)
    on_sphere = (g.r2_index == g.c**2).reshape(-1)
    outside = g.exterior.reshape(-1)
    sq = np.sum(flat * flat, axis=0)
    bad = np.flatnonzero((on_sphere & (sq > tol * tol)) | (outside & (sq > 0)))
    if bad.size:
        node = np.unravel_index(bad[0], g.shape)
        raise PreconditionError(f"w is not clamped: |w| = {math.sqrt(sq[bad[0]]):.3e} at node {node}")
    num = float(np.sum(g.weights.reshape(-1) * sq * hardy_weight(g, rule).reshape(-1)))
    lap = laplacian_array(flat, g)[:, g.lap_idx]
    den = float(np.sum(g.lap_weights * np.sum(lap * lap, axis=0)))
    if den <= 1e-300:
        return HardyReport(math.nan, num, den, degenerate=True, notes=["degenerate"])
    return HardyReport(num / den, num, den)


def hardy_ratio(w, grid: Grid4 | None = None, rule: str = "exact") -> float:
    """Scalar form of :func:`hardy_report`; ``nan`` for the degenerate field ``w = 0``."""
    return hardy_report(w, grid, rule).ratio


def clamped_field(grid: Grid4, fn) -> Field:
    """Scalar field ``(1 - |x|^2)^2 fn(x)`` on the non-exterior nodes, zero elsewhere."""
    x = grid.x.reshape(4, -1)
    r2 = np.sum(x * x, axis=0)
    vals = (1.0 - r2) ** 2 * np.asarray(fn(x), dtype=np.float64)
    vals = np.where(grid.nonexterior.reshape(-1), vals, 0.0)
    # exact zero trace on lattice nodes of the unit sphere
    vals[(grid.r2_index == grid.c**2).reshape(-1)] = 0.0
    return Field(grid, vals.reshape((1,) + grid.shape))


def hardy_family(grid: Grid4, K: int, seed: int) -> list:
    """``K`` clamped test fields: ``(1 - |x|^2)^2`` first, then seeded Gaussian bumps times it.

    Members depend only on ``(seed, index)``, so the family for ``K`` is a
    prefix of the family for any larger ``K``.
    """
    out = [clamped_field(grid, lambda x: np.ones(x.shape[1]))]
    rng = np.random.default_rng(seed)
    for _ in range(K - 1):
        direction = rng.standard_normal(4)
        centre = direction / np.linalg.norm(direction) * rng.uniform(0.0, 0.9)
        width = rng.uniform(0.15, 0.5)

        def bump(x, c=centre, s=width):
            d2 = np.sum((x - c[:, None]) ** 2, axis=0)
            return np.exp(-d2 / (2 * s * s))

        out.append(clamped_field(grid, bump))
    return out


def hardy_constant_estimate(K: int = 50, seed: int = 0, N: int = 17, rule: str = "exact") -> float:
    """Largest Hardy ratio over a ``K``-member clamped family: a lower bound for the best constant."""
    if K < 1:
        raise ConfigurationError(f"family size must be >= 1, got {K}")
    g = build_grid(N)
    return max(hardy_ratio(w, g, rule) for w in hardy_family(g, K, seed))


# -- epsilon-regularity diagnostic -----------------------------------------

@dataclass
class EpsRegProfile:
    l: int
    value: float            # sup (1-|x|)^l |D^l u| / ||Delta_h u||_2
    lap_norm: float         # ||Delta_h u||_2
    argmax: tuple | None
    trivial: bool = False


def epsilon_regularity_profile(u: Field, l: int = 1, eps0: float = 0.05,
                               tol: float | None = 1e-6) -> EpsRegProfile:
    """Boundary-weighted derivative bound ``sup (1-|x|)^l |D^l u| / ||Delta_h u||_2``.

    ``D^1`` is the gradient magnitude and ``D^2`` the Laplacian magnitude (a
    surrogate for the full Hessian).  With ``tol`` set, ``u`` must be a
    numerical intrinsic bi-harmonic map to that tolerance.
    """
    if l not in (1, 2):
        raise ConfigurationError(f"l must be 1 or 2, got {l}")
    g = u.grid
    lap = laplacian_array(u.flat, g)
    lap_norm = math.sqrt(float(np.sum(g.weights_lap.reshape(-1) * np.sum(lap * lap, axis=0))))
    if lap_norm <= 1e-14:
        return EpsRegProfile(l, math.nan, lap_norm, None, trivial=True)
    if lap_norm**2 > eps0:
        raise PreconditionError(f"||Delta_h u||_2^2 = {lap_norm**2:.4g} exceeds eps0 = {eps0:g}")
    if tol is not None:
        _, res = residual_intrinsic(u)
        if res > tol:
            raise PreconditionError(f"u is not intrinsic bi-harmonic: residual {res:.3e} > {tol:g}")
    idx = g.interior_idx
    if l == 1:
        full = np.zeros(g.size)
        full[g.support_idx] = gradient_sq_support(u.flat, g)
        mag = np.sqrt(full[idx])
    else:
        mag = np.sqrt(np.sum(lap[:, idx] ** 2, axis=0))
    vals = (1.0 - g.r.reshape(-1)[idx]) ** l * mag / lap_norm
    k = int(np.argmax(vals))
    return EpsRegProfile(l, float(vals[k]), lap_norm,
                         tuple(int(i) for i in np.unravel_index(idx[k], g.shape)))


# -- harmonic polynomials and mean-value monotonicity -------------------------

_X = sp.symbols("x0:4")


@dataclass(frozen=True)
class HarmonicPoly:
    """Homogeneous harmonic polynomial on R^4 with exact rational coefficients."""

    degree: int
    coeffs: tuple    # ((exponents, Rational), ...)

    @property
    def expr(self) -> sp.Expr:
        return sp.Add(*[c * sp.Mul(*[v**e for v, e in zip(_X, exps)])
                        for exps, c in self.coeffs])

    def laplacian(self) -> sp.Expr:
        return sp.expand(sum(sp.diff(self.expr, v, 2) for v in _X))

    def sphere_eigenvalue(self) -> sp.Expr:
        """``Delta_S3 p / p`` on the unit sphere via ``Delta = d_rr + (3/r) d_r + Delta_S / r^2``."""
        r = sp.symbols("r", positive=True)
        scaled = self.expr.subs({v: r * v for v in _X}, simultaneous=True)
        radial = sp.diff(scaled, r, 2) + 3 / r * sp.diff(scaled, r)
        ang = sp.expand((self.laplacian().subs({v: r * v for v in _X}, simultaneous=True)
                         - radial) * r**2).subs(r, 1)
        return sp.simplify(ang / self.expr)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape[1:])
        for exps, c in self.coeffs:
            term = np.full(x.shape[1:], float(c))
            for k, e in enumerate(exps):
                if e:
                    term = term * x[k] ** e
            out += term
        return out

    def stencil_tolerance(self, grid: Grid4) -> float:
        """Bound on ``|Delta_h p|`` over the ball: ``h^2/12 sum_k max |d_k^4 p|`` plus rounding."""
        bound = 0.0
        for v in _X:
            d4 = sp.diff(self.expr, v, 4)
            bound += float(sum(abs(c) for c in sp.Poly(d4, *_X).coeffs())) if d4 != 0 else 0.0
        return grid.h**2 / 12 * bound + 1e-8


@lru_cache(maxsize=None)
def _harmonic_basis(l: int) -> tuple:
    monos = [e for e in itertools.product(range(l + 1), repeat=4) if sum(e) == l]
    if l < 2:
        return tuple(((e, sp.Integer(1)),) for e in monos)
    targets = [e for e in itertools.product(range(l - 1), repeat=4) if sum(e) == l - 2]
    row = {e: i for i, e in enumerate(targets)}
    M = sp.zeros(len(targets), len(monos))
    for j, e in enumerate(monos):
        for k in range(4):
            if e[k] >= 2:
                t = list(e)
                t[k] -= 2
                M[row[tuple(t)], j] += e[k] * (e[k] - 1)
    basis = []
    for vec in M.nullspace():
        scale = sp.ilcm(*[sp.fraction(c)[1] for c in vec])
        vec = vec * scale
        basis.append(tuple((monos[j], sp.Rational(vec[j])) for j in range(len(monos)) if vec[j] != 0))
    return tuple(basis)


def harmonic_dimension(l: int) -> int:
    return len(_harmonic_basis(l))


def harmonic_poly(l: int, k: int = 0) -> HarmonicPoly:
    """``k``-th member of an exact basis of degree-``l`` harmonic polynomials on R^4 (``(l+1)^2`` of them)."""
    if l < 0:
        raise ConfigurationError(f"degree must be >= 0, got {l}")
    basis = _harmonic_basis(l)
    if not 0 <= k < len(basis):
        raise ConfigurationError(f"degree {l} has {len(basis)} basis polynomials, got k={k}")
    return HarmonicPoly(l, basis[k])


def ball_weights(grid: Grid4, p, rho: float, sub: int = 4) -> np.ndarray:
    """Flat nodal weights ``h^4 * |cell n B(p, rho)| / |cell|`` with ``sub**4`` samples on cut cells."""
    p = tuple(float(t) for t in np.asarray(p, dtype=np.float64).reshape(4))
    w = _ball_weights(grid.N, p, float(rho), sub)
    w.flags.writeable = False
    return w


@lru_cache(maxsize=64)
def _ball_weights(N: int, p: tuple, rho: float, sub: int) -> np.ndarray:
    grid = build_grid(N)
    p = np.asarray(p)
    x = grid.x.reshape(4, -1)
    dist = np.sqrt(np.sum((x - p[:, None]) ** 2, axis=0))
    h = grid.h
    w = np.where(dist + h <= rho, h**4, 0.0)   # cell half-diagonal is h
    cut = np.flatnonzero((dist + h > rho) & (dist - h < rho))
    if cut.size:
        offs = ((np.arange(sub) + 0.5) / sub - 0.5) * h
        grid_offs = np.stack(np.meshgrid(*([offs] * 4), indexing="ij")).reshape(4, -1)
        rel = x[:, cut] - p[:, None]
        inside = np.zeros(cut.size)
        for j in range(grid_offs.shape[1]):
            pt = rel + grid_offs[:, j:j + 1]
            inside += np.sum(pt * pt, axis=0) < rho * rho
        w[cut] = h**4 * inside / grid_offs.shape[1]
    return w


@dataclass
class MonotonicityProfile:
    radii: list
    values: list        # rho^-4 int_{B(p,rho)} |v|^2 with the volume-ratio correction
    raw: list           # rho^-4 sum w |v|^2 without it
    volume_ratio: list  # sum w / |B_rho|

    def is_monotone(self, tol: float = 1e-3) -> bool:
        v = self.values
        return all(v[i + 1] >= v[i] - tol * abs(v[i]) for i in range(len(v) - 1))


def monotonicity_profile(v, p, radii, grid: Grid4 | None = None, harmonic_tol: float | None = 1e-8,
                         sub: int = 4) -> MonotonicityProfile:
    """``m(rho) = rho^-4 int_{B(p, rho)} |v|^2`` at each radius.

    The discrete ball integral is divided by the discrete ball volume and
    multiplied by the exact one, so constants give exactly ``pi^2 / 2``.
    """
    g, flat = _as_flat(v, grid)
    p = np.asarray(p, dtype=np.float64)
    radii = [float(r) for r in radii]
    for rho in radii:
        if rho <= 0 or np.linalg.norm(p) + rho > 1.0:
            raise DomainRangeError(f"ball B(p, {rho:g}) with |p| = {np.linalg.norm(p):g} leaves B_1")
    if harmonic_tol is not None and g.N >= 9:
        lap = laplacian_array(flat, g)[:, g.deep_idx]
        worst = float(np.abs(lap).max(initial=0.0))
        if worst > harmonic_tol:
            raise PreconditionError(f"v is not discretely harmonic: max |Delta_h v| = {worst:.3e}")
    sq = np.sum(flat * flat, axis=0)
    values, raw, ratio = [], [], []
    for rho in radii:
        w = ball_weights(g, p, rho, sub)
        vol = BALL_VOLUME * rho**4
        total = float(np.sum(w * sq))
        q = float(np.sum(w)) / vol
        raw.append(total / rho**4)
        values.append(total / q / rho**4)
        ratio.append(q)
    return MonotonicityProfile(radii, values, raw, ratio)


def poly_field(grid: Grid4, poly) -> Field:
    """Sample a polynomial (or any ``(4, k) -> (k,)`` callable) on the non-exterior nodes."""
    x = grid.x.reshape(4, -1)
    vals = np.where(grid.nonexterior.reshape(-1), poly(x), 0.0)
    return Field(grid, vals.reshape((1,) + grid.shape))
