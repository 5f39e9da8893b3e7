"""Static convexity and uniqueness checks on pairs of maps with equal clamped data.

A pair ``(u, v)`` is built from a numerical intrinsic bi-harmonic map ``u``
(the flow limit for the boundary data) and a perturbation
``v = Pi(u + A phi eta)`` by a seeded smooth direction ``eta`` times a
cutoff ``phi`` that vanishes, together with its radial derivative, on the
whole boundary band.  The inequalities are then evaluated with the same
quadrature and stencils as the flow.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PreconditionError, ShapeError, SmallnessError
from .fields import BoundaryData, Field, initial_map, project_to_sphere
from .flow import FlowConfig, _extrinsic_gradient_compact, _velocity, run_flow
from .grid import Grid4, build_grid
from .ops import bilaplacian, gradient_sq_support, laplacian_array
from .reports import ConvexityReport, slack_for
from .sphere import _wsum_sq, check_shapes, residual_intrinsic, tension_parts

Q_KINDS = ("grad4", "grad2lap", "gradDlap")


def clamped_cutoff(grid: Grid4) -> np.ndarray:
    """``phi_h = (1 - |x|^2 / r_c^2)_+^2`` with ``r_c = 1 - 2h``: zero with its gradient on the band."""
    rc = 1.0 - 2.0 * grid.h
    return np.clip(1.0 - grid.r**2 / rc**2, 0.0, None) ** 2


def random_direction(grid: Grid4, m: int, seed: int, bumps: int = 3, width: float = 0.35) -> np.ndarray:
    """Seeded smooth ``R^m``-valued field: a few Gaussian bumps with random centres and vectors.

    Scaled so that ``max |eta| = 1`` over the ball.
    """
    rng = np.random.default_rng(seed)
    x = grid.x
    eta = np.zeros((m,) + grid.shape)
    for _ in range(bumps):
        centre = rng.uniform(-0.5, 0.5, size=4)
        vec = rng.standard_normal(m)
        d2 = sum((x[k] - centre[k]) ** 2 for k in range(4))
        eta += vec[(slice(None),) + (None,) * 4] * np.exp(-d2 / (2 * width**2))
    peak = np.sqrt(np.sum(eta * eta, axis=0))[grid.r <= 1.0].max()
    return eta / peak


def smallness(u: Field) -> tuple[float, float]:
    """``(int |Delta_h u|^2, int |grad_h u|^4)``, the two measured smallness quantities."""
    g = u.grid
    a, _, _ = tension_parts(u)
    sq = gradient_sq_support(u.flat, g)
    w = g.weights.reshape(-1)[g.support_idx]
    return _wsum_sq(g.lap_weights, a), float(np.sum(w * sq * sq))


def perturb(u: Field, seed: int, amplitude: float) -> Field:
    """``Pi(u + amplitude phi_h P(u) eta)``; identical to ``u`` outside the interior."""
    g = u.grid
    eta = random_direction(g, u.m, seed).reshape(u.m, -1)
    uf = u.flat
    eta -= np.sum(eta * uf, axis=0) * uf  # tangent at u
    y = uf + amplitude * clamped_cutoff(g).reshape(-1) * eta
    out = uf.copy()
    idx = g.interior_idx
    out[:, idx] = project_to_sphere(y[:, idx])
    return Field(g, out.reshape(u.values.shape), sphere=True)


def flow_limit(b: BoundaryData, N: int = 17, cfg: FlowConfig | None = None, u0: Field | None = None):
    """Numerical intrinsic bi-harmonic map for ``b``: the flow limit from ``initial_map``."""
    g = build_grid(N)
    u0 = initial_map(g, b) if u0 is None else u0
    tr = run_flow(u0, b, cfg or FlowConfig())
    return tr.final.u, tr


def make_pair(b: BoundaryData, seed: int, amplitude: float, N: int = 17, eps0: float = 0.05,
              u: Field | None = None, check: bool = True, cfg: FlowConfig | None = None):
    """``(u, v)`` with ``u`` the flow limit for ``b`` and ``v`` a clamped perturbation of it.

    Pass ``u`` to reuse a limit across seeds.  With ``check`` the pair must
    satisfy ``int |Delta_h u|^2 <= eps0`` and ``int |grad_h v|^4 <= eps0``.
    """
    if u is None:
        u, _ = flow_limit(b, N, cfg)
    if u.m != b.m:
        raise ShapeError(f"map has m={u.m}, boundary data m={b.m}")
    v = perturb(u, seed, amplitude) if amplitude else u.copy()
    if check:
        eps_u = smallness(u)[0]
        eps_v = smallness(v)[1]
        if eps_u > eps0 or eps_v > eps0:
            raise SmallnessError("pair violates the smallness hypothesis",
                                 {"lap2_u": eps_u, "grad4_v": eps_v, "eps0": eps0})
    return u, v


# -- inequality reports ----------------------------------------------------

def _pair_parts(u: Field, v: Field):
    check_shapes(u, v)
    pu, pv = tension_parts(u), tension_parts(v)
    eps_u, eps_v = smallness(u)[0], smallness(v)[1]
    return pu, pv, eps_u, eps_v


def _scale(g, pu, pv) -> float:
    return _wsum_sq(g.lap_weights, pu[0]) + _wsum_sq(g.lap_weights, pv[0])


def eval_intrinsic_convexity(u: Field, v: Field, eps0: float = 0.05, tol: float | None = None,
                             slack_factor: float = 1e-3) -> ConvexityReport:
    """``1/8 int |Delta(v-u)|^2 <= 1/2 int |tau(v)-tau(u)|^2 <= int |tau(v)|^2 - int |tau(u)|^2``.

    ``u`` must be intrinsic bi-harmonic: its variational residual must not
    exceed ``tol`` (default: the flow tolerance).
    """
    tol = FlowConfig().tol if tol is None else tol
    _, res = residual_intrinsic(u)
    if res > tol:
        raise PreconditionError(f"u is not intrinsic bi-harmonic: residual {res:.3e} > {tol:g}")
    g = u.grid
    (au, _, tu), (av, _, tv), eps_u, eps_v = pu_pv = _pair_parts(u, v)
    wl = g.lap_weights
    lhs = _wsum_sq(wl, av - au) / 8.0
    mid = _wsum_sq(wl, tv - tu) / 2.0
    rhs = _wsum_sq(wl, tv) - _wsum_sq(wl, tu)
    slack = slack_for(max(lhs, mid), rhs, g.h, _scale(g, pu_pv[0], pu_pv[1]), slack_factor)
    return ConvexityReport("intrinsic-convexity", lhs, rhs, slack, mid=mid,
                           hypotheses_met=eps_u <= eps0 and eps_v <= eps0,
                           eps0=eps0, eps_u=eps_u, eps_v=eps_v)


def extrinsic_residual(u: Field) -> float:
    """L^2 norm of the tangential gradient of ``E_h`` (zero at a clamped minimizer)."""
    g = u.grid
    grad = _extrinsic_gradient_compact(u, laplacian_array(u.flat, g))
    return math.sqrt(_wsum_sq(g.interior_weights, _velocity(u, grad)))


def extrinsic_equation_residual(u: Field) -> float:
    """L^2 norm of ``P(u) Delta_h^2 u`` over the deep interior (the strong-form equation)."""
    g = u.grid
    b = bilaplacian(u).flat[:, g.deep_idx]
    ud = u.flat[:, g.deep_idx]
    tang = b - np.sum(b * ud, axis=0) * ud
    return math.sqrt(_wsum_sq(g.weights_deep.reshape(-1)[g.deep_idx], tang))


def eval_extrinsic_convexity(u: Field, v: Field, eps0: float = 0.05, tol: float | None = None,
                             slack_factor: float = 1e-3) -> ConvexityReport:
    """``1/2 int |Delta(v-u)|^2 <= int |Delta v|^2 - int |Delta u|^2`` for an extrinsic ``u``."""
    tol = FlowConfig().tol if tol is None else tol
    res = extrinsic_residual(u)
    if res > tol:
        raise PreconditionError(f"u is not extrinsic bi-harmonic: residual {res:.3e} > {tol:g}")
    g = u.grid
    pu, pv, eps_u, _ = _pair_parts(u, v)
    wl = g.lap_weights
    lhs = _wsum_sq(wl, pv[0] - pu[0]) / 2.0
    rhs = _wsum_sq(wl, pv[0]) - _wsum_sq(wl, pu[0])
    slack = slack_for(lhs, rhs, g.h, _scale(g, pu, pv), slack_factor)
    return ConvexityReport("extrinsic-convexity", lhs, rhs, slack,
                           hypotheses_met=eps_u <= eps0, eps0=eps0, eps_u=eps_u,
                           eps_v=_wsum_sq(wl, pv[0]))


def eval_lemma_conv2(u: Field, v: Field, eps0: float = 0.05,
                     slack_factor: float = 1e-3) -> ConvexityReport:
    """``int |Delta(v-u)|^2 <= 4 int |tau(v)-tau(u)|^2``; smallness is only flagged."""
    g = u.grid
    pu, pv, eps_u, eps_v = _pair_parts(u, v)
    wl = g.lap_weights
    lhs = _wsum_sq(wl, pv[0] - pu[0])
    rhs = 4.0 * _wsum_sq(wl, pv[2] - pu[2])
    met = eps_u <= eps0 and eps_v <= eps0
    rep = ConvexityReport("lemma-conv2", lhs, rhs, slack_for(lhs, rhs, g.h, _scale(g, pu, pv),
                                                             slack_factor),
                          hypotheses_met=met, eps0=eps0, eps_u=eps_u, eps_v=eps_v)
    if not met:
        rep.notes.append("hypotheses unmet")
    return rep


@dataclass
class KeyEstimateReport:
    q_kind: str
    numerator: float        # int |v-u|^2 q(u)
    denominator: float      # int |Delta(v-u)|^2
    ratio: float
    eps_measured: float     # int |Delta_h u|^2
    ratio_over_eps: float
    degenerate: bool = False
    notes: list = field(default_factory=list)


def q_field(u: Field, q_kind: str) -> np.ndarray:
    """Nodal ``q(u)`` at the interior nodes (compact)."""
    if q_kind not in Q_KINDS:
        raise ConfigurationError(f"q_kind must be one of {Q_KINDS}, got {q_kind!r}")
    g = u.grid
    full = np.zeros(g.size)
    full[g.support_idx] = gradient_sq_support(u.flat, g)
    gsq = full[g.interior_idx]
    if q_kind == "grad4":
        return gsq * gsq
    lap = laplacian_array(u.flat, g)
    if q_kind == "grad2lap":
        return gsq * np.sqrt(np.sum(lap[:, g.interior_idx] ** 2, axis=0))
    # central differences of Delta_h u; every neighbour of an interior node has a full stencil
    idx = g.interior_idx
    acc = np.zeros(idx.size)
    for s in g.strides:
        d = (lap[:, idx + s] - lap[:, idx - s]) / (2 * g.h)
        acc += np.sum(d * d, axis=0)
    return np.sqrt(gsq) * np.sqrt(acc)


def eval_key_estimate(u: Field, v: Field, q_kind: str = "grad4") -> KeyEstimateReport:
    """``int |v-u|^2 q(u) / int |Delta(v-u)|^2`` together with the measured ``int |Delta_h u|^2``."""
    check_shapes(u, v)
    g = u.grid
    q = q_field(u, q_kind)
    idx = g.interior_idx
    diff = v.flat - u.flat
    num = float(np.sum(g.interior_weights * np.sum(diff[:, idx] ** 2, axis=0) * q))
    den = _wsum_sq(g.lap_weights, laplacian_array(diff, g)[:, g.lap_idx])
    eps = smallness(u)[0]
    if den <= 1e-300:
        rep = KeyEstimateReport(q_kind, num, den, math.nan, eps, math.nan, degenerate=True)
        rep.notes.append("degenerate pair")
        return rep
    ratio = num / den
    return KeyEstimateReport(q_kind, num, den, ratio, eps, ratio / eps if eps > 0 else math.nan)


# -- uniqueness ------------------------------------------------------------

def w22_distance(u: Field, v: Field) -> float:
    """Discrete ``(int |Delta d|^2 + int |grad d|^2 + int |d|^2)^(1/2)`` with ``d = u - v``."""
    check_shapes(u, v)
    g = u.grid
    d = u.flat - v.flat
    lap = _wsum_sq(g.lap_weights, laplacian_array(d, g)[:, g.lap_idx])
    grad = float(np.sum(g.weights.reshape(-1)[g.support_idx] * gradient_sq_support(d, g)))
    l2 = float(np.sum(g.weights.reshape(-1) * np.sum(d * d, axis=0)))
    return math.sqrt(lap + grad + l2)


@dataclass
class UniquenessReport:
    seeds: list
    max_distance: float
    distances: dict          # (seed_i, seed_j) -> W^{2,2} distance of the limits
    steps: list
    converged: list
    initial_energy: list     # int |Delta_h u0|^2 per seed
    limits: list = field(default_factory=list, repr=False)


def uniqueness_experiment(b: BoundaryData, seeds, N: int = 17, amplitude: float = 0.03,
                          eps0: float = 0.05, cfg: FlowConfig | None = None) -> UniquenessReport:
    """Flow from one perturbed start per seed; report the largest pairwise distance of the limits."""
    seeds = list(seeds)
    if not seeds:
        raise ConfigurationError("need at least one seed")
    g = build_grid(N)
    base = initial_map(g, b)
    cfg = cfg or FlowConfig(eps0=eps0)
    limits, steps, conv, e0 = [], [], [], []
    for seed in seeds:
        u0 = perturb(base, seed, amplitude)
        e0.append(smallness(u0)[0])
        tr = run_flow(u0, b, cfg)
        limits.append(tr.final.u)
        steps.append(tr.steps)
        conv.append(tr.converged)
    dist = {(si, sj): w22_distance(limits[i], limits[j])
            for (i, si), (j, sj) in itertools.combinations(enumerate(seeds), 2)}
    return UniquenessReport(seeds, max(dist.values(), default=0.0), dist, steps, conv, e0, limits)
