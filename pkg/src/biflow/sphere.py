"""Sphere-target geometry: projections, tension field, energies and the
three forms of the intrinsic bi-harmonic equation for maps into S^n.

The tension is the exact tangential projection of the stencil Laplacian,
``tau_h = Delta_h u - <u, Delta_h u> u``, so ``<u, tau_h> = 0`` and
``|Delta_h u|^2 = |tau_h|^2 + <u, Delta_h u>^2`` hold node by node.
Energies built from ``Delta_h`` use the weights of nodes that carry a full
Laplacian stencil (``grid.weights_lap``).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ConfigurationError, ShapeError
from .fields import Field, field_from_function, great_circle_map
from .grid import Grid4, build_grid
from .ops import bilaplacian, gradient_sq_support, laplacian_array, partial


class SphereGeometry:
    """Normal and tangential projections at points of S^n."""

    def __init__(self, n: int):
        if n < 1:
            raise ConfigurationError(f"sphere dimension must be >= 1, got {n}")
        self.n = int(n)

    @property
    def m(self) -> int:
        return self.n + 1

    def normal_projection(self, y) -> np.ndarray:
        """``P_perp(y) = y y^T``."""
        y = np.asarray(y, dtype=np.float64)
        return np.outer(y, y)

    def tangent_projection(self, y) -> np.ndarray:
        """``P(y) = Id - y y^T``."""
        return np.eye(self.m) - self.normal_projection(y)

    @staticmethod
    def tangential(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Apply ``P(u)`` to ``v`` pointwise; component axis first."""
        return v - np.sum(u * v, axis=0) * u

    @staticmethod
    def curvature(X, Y, Z) -> np.ndarray:
        """Unit-sphere curvature ``R(X, Y) Z = <Y, Z> X - <X, Z> Y``."""
        return np.sum(Y * Z, axis=0) * X - np.sum(X * Z, axis=0) * Y


@dataclass(frozen=True)
class EnergyReport:
    D: float
    E: float
    I: float
    G4: float
    normal: float

    def as_dict(self):
        return asdict(self)


# -- tension ---------------------------------------------------------------

def tension_parts(u: Field, backend=None):
    """Compact ``(a, s, tau)`` at ``grid.lap_idx``: ``Delta_h u``, ``<u, Delta_h u>``, ``tau_h``."""
    backend = backend or kernels.backend
    g = u.grid
    n = g.lap_idx.size
    a = np.empty((u.m, n))
    s = np.empty(n)
    tau = np.empty((u.m, n))
    backend.tension_nodes(u.flat, g.lap_idx, g.neighbor_offsets, 1.0 / g.h**2, a, s, tau)
    return a, s, tau


def expand(grid: Grid4, compact: np.ndarray, idx) -> np.ndarray:
    """Scatter a compact ``(m, len(idx))`` array into a zero field of shape ``(m, N, N, N, N)``."""
    compact = np.atleast_2d(compact)
    out = np.zeros((compact.shape[0], grid.size))
    out[:, idx] = compact
    return out.reshape((compact.shape[0],) + grid.shape)


def tension(u: Field) -> Field:
    u.check_sphere()
    _, _, tau = tension_parts(u)
    return Field(u.grid, expand(u.grid, tau, u.grid.lap_idx))


def _wsum_sq(w_c, v_c) -> float:
    """``sum_i w_i |v_i|^2`` for compact ``v`` with the component axis first."""
    sq = v_c * v_c if v_c.ndim == 1 else np.sum(v_c * v_c, axis=0)
    return float(np.sum(w_c * sq))


def intrinsic_energy(u: Field, parts=None) -> float:
    """``I_h(u) = 1/4 sum w_lap |tau_h|^2``; no sphere check, so it also accepts off-sphere probes."""
    _, _, tau = parts if parts is not None else tension_parts(u)
    return 0.25 * _wsum_sq(u.grid.lap_weights, tau)


def dirichlet_energy(u: Field) -> float:
    g = u.grid
    sq = gradient_sq_support(u.flat, g)
    return 0.5 * float(np.sum(g.weights.reshape(-1)[g.support_idx] * sq))


def energies(u: Field, parts=None, with_g4: bool = True, check: bool = True) -> EnergyReport:
    if check:
        u.check_sphere()
    g = u.grid
    a, s, tau = parts if parts is not None else tension_parts(u)
    wl = g.lap_weights
    sq = gradient_sq_support(u.flat, g)
    w = g.weights.reshape(-1)[g.support_idx]
    return EnergyReport(D=0.5 * float(np.sum(w * sq)),
                        E=0.25 * _wsum_sq(wl, a),
                        I=0.25 * _wsum_sq(wl, tau),
                        G4=0.25 * float(np.sum(w * sq * sq)) if with_g4 else float("nan"),
                        normal=0.25 * _wsum_sq(wl, s))


def consistency_defect(u: Field) -> float:
    """``int |<u, Delta_h u> + |grad_h u|^2|^2`` over Laplacian nodes (zero in the continuum)."""
    g = u.grid
    _, s, _ = tension_parts(u)
    full = np.zeros(g.size)
    full[g.support_idx] = gradient_sq_support(u.flat, g)
    return _wsum_sq(g.lap_weights, s + full[g.lap_idx])


# -- variational residual --------------------------------------------------

_SCRATCH = {}


def _scratch(grid: Grid4, m: int) -> np.ndarray:
    # the gradient kernel leaves its scratch zeroed, so one buffer per shape suffices
    key = (grid.N, m)
    if key not in _SCRATCH:
        _SCRATCH[key] = np.zeros((m, grid.size))
    return _SCRATCH[key]


def intrinsic_gradient_compact(u: Field, parts=None, backend=None) -> np.ndarray:
    """Exact gradient of ``I_h`` with respect to the interior nodal values, compact on ``interior_idx``."""
    backend = backend or kernels.backend
    g = u.grid
    a, s, tau = parts if parts is not None else tension_parts(u, backend)
    out = np.empty((u.m, g.interior_idx.size))
    backend.intrinsic_grad(u.flat, a, s, tau, g.lap_weights, g.lap_idx, g.interior_idx,
                           g.interior_pos, g.neighbor_offsets, 1.0 / g.h**2,
                           _scratch(g, u.m), out)
    return out


def intrinsic_gradient_flat(u: Field, parts=None, backend=None) -> np.ndarray:
    """As :func:`intrinsic_gradient_compact`, scattered to a full ``(m, N**4)`` array."""
    grad = intrinsic_gradient_compact(u, parts, backend)
    return expand(u.grid, grad, u.grid.interior_idx).reshape(u.m, -1)


def tangential_compact(u_flat: np.ndarray, v_c: np.ndarray, nodes, backend=None) -> np.ndarray:
    """``P(u) v`` at ``nodes`` for compact ``v``."""
    backend = backend or kernels.backend
    v_c = np.ascontiguousarray(v_c, dtype=np.float64)
    out = np.empty(v_c.shape)
    backend.tangent_nodes(np.ascontiguousarray(u_flat), v_c, nodes, out)
    return out


def intrinsic_velocity(u: Field, grad_c: np.ndarray) -> np.ndarray:
    """Tangential L^2 gradient ``P(u) grad / w`` at the interior nodes (compact)."""
    g = u.grid
    return tangential_compact(u.flat, grad_c, g.interior_idx) / g.interior_weights


def residual_intrinsic(u: Field) -> tuple[Field, float]:
    """Tangential L^2 gradient ``P(u) grad I_h(u) / w`` on interior nodes and its L^2 norm.

    ``grad I_h`` is the exact nodal gradient; dividing by the quadrature
    weight turns it into the gradient for the discrete L^2 inner product,
    the same velocity the flow uses.
    """
    u.check_sphere()
    g = u.grid
    res = intrinsic_velocity(u, intrinsic_gradient_compact(u))
    norm = np.sqrt(_wsum_sq(g.interior_weights, res))
    return Field(g, expand(g, res, g.interior_idx)), float(norm)


_BILAP_SCRATCH = {}


def extrinsic_residual_compact(u: Field, parts=None, backend=None) -> np.ndarray:
    """``P(u) Delta_h^2 u`` compact on ``deep_idx``, reusing ``Delta_h u`` from ``parts`` if given."""
    backend = backend or kernels.backend
    g = u.grid
    if g.N < 9:
        raise ConfigurationError(f"bilaplacian needs N >= 9 (deep interior empty at N={g.N})")
    a = parts[0] if parts is not None else tension_parts(u, backend)[0]
    key = (g.N, u.m)
    if key not in _BILAP_SCRATCH:
        # entries outside lap_idx stay zero; only lap_idx is ever rewritten
        _BILAP_SCRATCH[key] = (np.zeros((u.m, g.size)), np.zeros((u.m, g.size)))
    full, out = _BILAP_SCRATCH[key]
    full[:, g.lap_idx] = a
    backend.lap_nodes(full, g.deep_idx, g.neighbor_offsets, 1.0 / g.h**2, out)
    return tangential_compact(u.flat, out[:, g.deep_idx], g.deep_idx, backend)


def residual_extrinsic(u: Field) -> tuple[Field, float]:
    """``P(u) Delta_h^2 u`` on the deep interior and its weighted L^2 norm."""
    u.check_sphere()
    g = u.grid
    res = extrinsic_residual_compact(u)
    norm = np.sqrt(_wsum_sq(g.weights_deep.reshape(-1)[g.deep_idx], res))
    return Field(g, expand(g, res, g.deep_idx)), float(norm)


# -- divergence form of the equation ---------------------------------------

def _grad(arr, grid):
    """First differences of an array with lattice as last four axes; direction axis first."""
    return np.stack([partial(arr, grid, k) for k in range(4)])


def intrinsic_rhs_raw(u: Field) -> np.ndarray:
    """Uncalibrated ``Delta(V.grad u) + div(w grad u) + W.grad u`` on the deep interior.

    ``V^{ij} = u^i grad u^j - u^j grad u^i``, ``w^{ij} = div V^{ij}`` and
    ``W^{ij} = grad w^{ij} + 2 (Delta u^i grad u^j - Delta u^j grad u^i + |grad u|^2 V^{ij})``;
    the contraction pairs the second index with ``grad u^j``.
    """
    g = u.grid
    if g.N < 9:
        raise ConfigurationError(f"intrinsic_rhs needs N >= 9 (deep interior empty at N={g.N})")
    vals = u.values
    du = _grad(vals, g)                                        # (4, m, ...)
    lap = laplacian_array(vals, g)                             # (m, ...)
    V = vals[None, :, None] * du[:, None, :] - vals[None, None, :] * du[:, :, None]
    V = V.transpose(1, 2, 0, 3, 4, 5, 6)                       # (m, m, 4, ...)
    w = sum(partial(V[:, :, k], g, k) for k in range(4))       # (m, m, ...)
    grad_sq = np.einsum("ki...,ki...->...", du, du)
    gw = _grad(w, g).transpose(1, 2, 0, 3, 4, 5, 6)            # (m, m, 4, ...)
    W = gw + 2.0 * (lap[:, None, None] * du.transpose(1, 0, 2, 3, 4, 5)[None]
                    - lap[None, :, None] * du.transpose(1, 0, 2, 3, 4, 5)[:, None]
                    + grad_sq * V)
    Vdu = np.einsum("ijk...,kj...->i...", V, du)
    term1 = laplacian_array(Vdu, g, nodes=g.deep_idx)
    flux = np.einsum("ij...,kj...->ki...", w, du)              # (4, m, ...)
    term2 = sum(partial(flux[k], g, k) for k in range(4))
    term3 = np.einsum("ijk...,kj...->i...", W, du)
    out = (term1 + term2 + term3).reshape(u.m, -1)
    res = np.zeros_like(out)
    res[:, g.deep_idx] = out[:, g.deep_idx]
    return res.reshape(vals.shape)


@dataclass(frozen=True)
class SignCalibration:
    sigma: int
    fit: float          # least-squares coefficient of rhs against Delta_h^2 u
    rel_residual: float  # |Delta_h^2 u - sigma rhs| / |Delta_h^2 u| on the calibration map


def _deep_rel_residual(g: Grid4, target, approx) -> float:
    w = g.weights_deep.reshape(-1)[g.deep_idx]
    t = target.reshape(target.shape[0], -1)[:, g.deep_idx]
    a = approx.reshape(approx.shape[0], -1)[:, g.deep_idx]
    num = np.sum(w * np.sum((t - a) ** 2, axis=0))
    den = np.sum(w * np.sum(t * t, axis=0))
    return float(np.sqrt(num / den))


def _deep_fit(g: Grid4, target, approx) -> float:
    w = g.weights_deep.reshape(-1)[g.deep_idx]
    t = target.reshape(target.shape[0], -1)[:, g.deep_idx]
    a = approx.reshape(approx.shape[0], -1)[:, g.deep_idx]
    return float(np.sum(w * np.sum(t * a, axis=0)) / np.sum(w * np.sum(a * a, axis=0)))


@lru_cache(maxsize=4)
def calibrate_sign(N: int = 9, alpha: float = 1.0, m: int = 3) -> SignCalibration:
    """Fix the global sign of the divergence form on the great-circle map."""
    g = build_grid(N)
    u = field_from_function(g, great_circle_map(alpha, m), sphere=True)
    raw = intrinsic_rhs_raw(u)
    target = bilaplacian(u).values
    fit = _deep_fit(g, target, raw)
    sigma = 1 if fit > 0 else -1
    return SignCalibration(sigma, fit, _deep_rel_residual(g, target, sigma * raw))


def intrinsic_rhs(u: Field, sigma: int | None = None) -> Field:
    """``sigma * [Delta(V.grad u) + div(w grad u) + W.grad u]`` on the deep interior."""
    u.check_sphere()
    if sigma is None:
        sigma = calibrate_sign().sigma
    if sigma not in (1, -1):
        raise ConfigurationError(f"sigma must be +1 or -1, got {sigma}")
    return Field(u.grid, sigma * intrinsic_rhs_raw(u))


def rhs_relative_residual(u: Field, sigma: int | None = None) -> float:
    """``|Delta_h^2 u - rhs| / |Delta_h^2 u|`` over the deep interior."""
    rhs = intrinsic_rhs(u, sigma)
    return _deep_rel_residual(u.grid, bilaplacian(u).values, rhs.values)


# -- curvature form --------------------------------------------------------

def jiang_parts(u: Field):
    """Rough Laplacian ``sum_k P d_k (P d_k tau)`` and ``sum_k R(d_k u, tau) d_k u`` (deep interior)."""
    g = u.grid
    if g.N < 9:
        raise ConfigurationError(f"curvature form needs N >= 9 (deep interior empty at N={g.N})")
    vals = u.values
    _, _, tau = tension_parts(u)
    tau = expand(g, tau, g.lap_idx)
    du = _grad(vals, g)
    rough = np.zeros_like(vals)
    curv = np.zeros_like(vals)
    for k in range(4):
        inner = SphereGeometry.tangential(vals, partial(tau, g, k))
        rough += SphereGeometry.tangential(vals, partial(inner, g, k))
        curv += SphereGeometry.curvature(du[k], tau, du[k])
    mask = g.deep
    return rough * mask, curv * mask


@dataclass(frozen=True)
class JiangCheck:
    sigma: int
    rel_residual: float  # of J = rough + sigma curv against 2 grad I_h / h^4, deep interior


def jiang_residual(u: Field, sigma: int | None = None) -> JiangCheck:
    """Compare the curvature form with the variational gradient of ``I_h``.

    Away from the boundary the nodal gradient of ``I_h`` is ``h^4 / 2`` times
    the L^2 gradient of ``1/2 int |tau|^2``.  With ``sigma=None`` both signs
    of the curvature term are tried and the better fit is returned.
    """
    u.check_sphere()
    g = u.grid
    rough, curv = jiang_parts(u)
    grad = intrinsic_gradient_compact(u)
    target = (2.0 / g.h**4) * expand(g, tangential_compact(u.flat, grad, g.interior_idx),
                                      g.interior_idx)
    if np.sum(target[:, g.deep] ** 2) == 0.0:
        return JiangCheck(sigma or 1, 0.0)
    signs = (1, -1) if sigma is None else (sigma,)
    fits = [(_deep_rel_residual(g, target, rough + s * curv), s) for s in signs]
    best, s = min(fits)
    return JiangCheck(s, best)


def check_shapes(u: Field, v: Field) -> None:
    if u.grid is not v.grid or u.values.shape != v.values.shape:
        raise ShapeError(f"fields do not share a grid: {u!r} vs {v!r}")
