"""The intrinsic bi-harmonic heat flow as projected gradient descent on ``I_h``.

A step moves the interior nodes along ``-P(u) grad I_h(u) / w``: the exact
nodal gradient of the discrete energy divided by the quadrature weight,
i.e. the gradient for the discrete L^2 inner product.  The result is
renormalized onto the sphere and the band stays frozen at the clamped
extension of the boundary data.  A step of size ``dt`` is accepted only if
it satisfies the per-step energy inequality
``2 int |u_t|^2 dt + int |tau_h(u')|^2 <= int |tau_h(u)|^2``, which makes
``I_h`` strictly decrease and the time-integrated inequality hold by
construction.  ``u_t`` is the difference quotient ``(u^{k+1} - u^k) / dt_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import PreconditionError, ShapeError, SmallnessError, StagnationError
from .fields import (BoundaryData, Field, extend_boundary, field_from_function, write_csv,
                     write_snapshot)
from .ops import laplacian_array
from .reports import ConvexityReport, MonotoneReport
from .sphere import (EnergyReport, _wsum_sq, dirichlet_energy, energies, expand,
                     extrinsic_residual_compact, intrinsic_energy,
                     intrinsic_gradient_compact, tangential_compact, tension_parts)

LEDGER_COLUMNS = ["step", "t", "dt", "I", "E", "D", "ut_l2sq", "res_intrinsic",
                  "res_extrinsic", "min_norm", "max_norm"]


@dataclass(frozen=True)
class FlowConfig:
    """Step-size control and stopping rules.

    ``None`` step sizes default to ``dt0 = h**4`` and ``dt_max = 1e3 h**4``;
    both are then capped at ``stability / lambda_max`` where
    ``lambda_max = (16 / h^2)^2 / 2`` bounds the linearized L^2 Hessian of
    ``I_h``.  Below ``2 / lambda_max`` no mode is amplified, so ``|u_t|``
    decays monotonically in the convex regime; ``stability=None`` disables
    the cap.
    """

    dt0: float | None = None
    dt_max: float | None = None
    grow: float = 1.2
    max_halvings: int = 30
    tol: float = 1e-8
    max_steps: int = 200_000
    eps0: float = 0.05
    check_smallness: bool = True
    gradcheck_every: int = 100
    gradcheck_seed: int = 12345
    max_snapshots: int = 40
    snapshot_dir: str | None = None
    energy: str = "intrinsic"  # or "extrinsic" for the clamped minimizer of E_h
    stability: float | None = 1.5

    def resolved(self, h: float) -> "FlowConfig":
        dt_max = self.dt_max or 1e3 * h**4
        if self.stability is not None:
            dt_max = min(dt_max, self.stability * h**4 / 128.0)
        return replace(self, dt0=min(self.dt0 or h**4, dt_max), dt_max=dt_max)


@dataclass
class FlowState:
    t: float
    u: Field
    last_dt: float
    energy: EnergyReport
    step: int = 0


@dataclass
class GradCheck:
    step: int
    analytic: float
    numeric: float
    rel_error: float
    passed: bool


@dataclass
class FlowTrajectory:
    """Per-step ledger plus thinned snapshots of the flow."""

    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # (ledger row index, t, Field)
    snapshot_paths: list = field(default_factory=list)
    gradchecks: list = field(default_factory=list)
    final: FlowState | None = None
    converged: bool = False
    energy_lhs: float = 0.0     # 2 sum dt |u_t|^2 + int |tau(u^K)|^2
    energy_rhs: float = 0.0     # int |tau(u^0)|^2

    def column(self, name: str) -> np.ndarray:
        j = LEDGER_COLUMNS.index(name)
        return np.array([row[j] for row in self.rows], dtype=np.float64)

    @property
    def steps(self) -> int:
        return len(self.rows) - 1

    @property
    def energy_excess(self) -> float:
        """Violation of the integrated energy inequality (``<= 0`` when it holds)."""
        return self.energy_lhs - self.energy_rhs

    def transient_end(self, eps0: float) -> int:
        """First ledger row with ``|u_t|^2 <= eps0``."""
        ut = self.column("ut_l2sq")
        hits = np.flatnonzero(ut[1:] <= eps0)
        return int(hits[0]) + 1 if hits.size else len(self.rows) - 1

    def snapshot_rows(self) -> list:
        return [r for r, _, _ in self.snapshots]

    def snapshot_at(self, row: int) -> Field:
        for r, _, u in self.snapshots:
            if r == row:
                return u
        raise KeyError(f"no snapshot stored for ledger row {row}")

    def write_ledger(self, path) -> None:
        write_csv(path, LEDGER_COLUMNS, self.rows)


# -- energies and gradients ------------------------------------------------

def grad_intrinsic_energy(u: Field) -> Field:
    """Exact gradient of ``I_h`` with respect to interior nodal values; zero on the band."""
    g = u.grid
    return Field(g, expand(g, intrinsic_gradient_compact(u), g.interior_idx))


def extrinsic_energy(u: Field, a=None) -> float:
    g = u.grid
    if a is None:
        a = laplacian_array(u.flat, g)
    return 0.25 * _wsum_sq(g.lap_weights, a[:, g.lap_idx])


def _extrinsic_gradient_compact(u: Field, a) -> np.ndarray:
    g = u.grid
    H = 0.5 * g.weights_lap.reshape(-1) * a
    out = np.zeros_like(a)
    kernels.backend.lap_nodes(H, g.interior_idx, g.neighbor_offsets, 1.0 / g.h**2, out)
    return np.ascontiguousarray(out[:, g.interior_idx])


def grad_extrinsic_energy(u: Field) -> Field:
    """Exact gradient of ``E_h = 1/4 sum w_lap |Delta_h u|^2`` at interior nodes."""
    g = u.grid
    grad = _extrinsic_gradient_compact(u, laplacian_array(u.flat, g))
    return Field(g, expand(g, grad, g.interior_idx))


class _Objective:
    """Value (with a reusable cache) and compact gradient of one of the bi-energies."""

    def __init__(self, kind: str):
        if kind not in ("intrinsic", "extrinsic"):
            raise ValueError(f"unknown energy {kind!r}")
        self.kind = kind

    def value(self, u: Field):
        if self.kind == "intrinsic":
            parts = tension_parts(u)
            return intrinsic_energy(u, parts), parts
        a = laplacian_array(u.flat, u.grid)
        return extrinsic_energy(u, a), a

    def gradient(self, u: Field, cache) -> np.ndarray:
        if self.kind == "intrinsic":
            return intrinsic_gradient_compact(u, cache)
        return _extrinsic_gradient_compact(u, cache)

    def evaluate(self, u: Field):
        """``(value, cache, grad, defect)`` with ``value`` corrected for ``|u| != 1``.

        Renormalized nodes still miss the unit sphere by an ulp or so, and
        the normal component of the full gradient turns that into an energy
        offset far above the late-stage decrease.  ``defect`` is the first
        order offset ``sum_i <g_i, u_i> (|u_i| - 1)``, with ``|u_i| - 1``
        taken in extended precision; subtracting it gives the energy of the
        exactly normalized map.
        """
        value, cache = self.value(u)
        grad = self.gradient(u, cache)
        defect = normal_defect(u, grad)
        return value - defect, cache, grad, defect

    def change(self, u: Field, cache, cand: Field, cand_cache) -> float:
        """``value(cand) - value(u)`` evaluated from ``delta = cand - u``.

        Differencing two directly evaluated energies loses everything below
        the rounding level of the stencil (about ``eps * |tau| / h^2`` per
        node), which stalls the line search once ``I_h`` stops being tiny.
        Here every term is linear in ``delta`` or a product with it, so the
        change is accurate relative to its own size.
        """
        g = u.grid
        if self.kind == "intrinsic":
            _, s, tau = cache
            a2, _, tau2 = cand_cache
            return kernels.backend.intrinsic_change(u.flat, cand.flat, g.lap_idx,
                                                    g.neighbor_offsets, 1.0 / g.h**2,
                                                    s, tau, a2, tau2, g.lap_weights)
        delta = _scratch_delta(g, u.m)
        np.subtract(cand.flat, u.flat, out=delta)
        n = g.lap_idx.size
        ld, js, jt = np.empty((u.m, n)), np.empty(n), np.empty((u.m, n))
        kernels.backend.tension_nodes(delta, g.lap_idx, g.neighbor_offsets, 1.0 / g.h**2,
                                      ld, js, jt)
        a, a2 = cache[:, g.lap_idx], cand_cache[:, g.lap_idx]
        return 0.25 * float(np.sum(g.lap_weights * np.sum(ld * (a + a2), axis=0)))

    def report(self, u: Field, cache) -> EnergyReport:
        if self.kind == "intrinsic":
            return energies(u, cache, with_g4=False, check=False)
        return EnergyReport(D=dirichlet_energy(u), E=extrinsic_energy(u, cache), I=math.nan,
                            G4=math.nan, normal=math.nan)


# -- stepping --------------------------------------------------------------

def normal_defect(u: Field, grad_c) -> float:
    """``sum_i <g_i, u_i> (|u_i| - 1)`` over the interior nodes."""
    g = u.grid
    vals = u.flat[:, g.interior_idx]
    wide = vals.astype(np.longdouble)
    off = (np.sum(wide * wide, axis=0) - 1.0) / 2.0
    return float(np.sum(np.sum(grad_c * vals, axis=0) * off.astype(np.float64)))


def _velocity(u: Field, grad_c) -> np.ndarray:
    """Tangential L^2 gradient ``P(u) grad / w`` at the interior nodes (compact)."""
    g = u.grid
    return tangential_compact(u.flat, grad_c, g.interior_idx) / g.interior_weights


def _try_step(u: Field, velocity, dt, objective, value, ev):
    g = u.grid
    out = u.flat.copy()
    kernels.backend.project_step(u.flat, velocity, g.interior_idx, dt, out)
    cand = Field(g, out.reshape(u.values.shape), sphere=True)
    _, cache, grad, defect = new_ev = objective.evaluate(cand)
    change = objective.change(u, ev[1], cand, cache) - (defect - ev[3])
    moved = _wsum_sq(g.interior_weights, out[:, g.interior_idx] - u.flat[:, g.interior_idx])
    # per-step energy inequality: 2 |u' - u|^2 / dt <= 4 (I - I')
    ok = change <= 0.0 and 2.0 * moved / dt <= -4.0 * change
    return ok, cand, value + change, new_ev, moved


_DELTA = {}


def _scratch_delta(grid, m) -> np.ndarray:
    key = (grid.N, m)
    if key not in _DELTA:
        _DELTA[key] = np.empty((m, grid.size))
    return _DELTA[key]


def _advance(s: FlowState, value, velocity, dt, objective, cfg, ev):
    """Line search from trial size ``dt``; ``ev`` is ``objective.evaluate(s.u)``."""
    for _ in range(cfg.max_halvings + 1):
        ok, cand, new_value, new_ev, moved = _try_step(s.u, velocity, dt, objective, value, ev)
        if ok:
            break
        dt *= 0.5
    else:
        raise StagnationError(
            f"step rejected {cfg.max_halvings} times at t={s.t:g} (energy {value:.6e})", state=s)
    report = objective.report(cand, new_ev[1])
    # the ledger carries the energy tracked through accurate increments
    report = replace(report, **{"I" if objective.kind == "intrinsic" else "E": new_value})
    new = FlowState(t=s.t + dt, u=cand, last_dt=min(dt * cfg.grow, cfg.dt_max),
                    energy=report, step=s.step + 1)
    return new, new_value, new_ev, moved, dt


def flow_step(s: FlowState, dt: float, cfg: FlowConfig | None = None) -> FlowState:
    """One accepted step starting from trial size ``dt``.

    The trial size is halved on rejection (at most ``cfg.max_halvings``
    times) and grown by ``cfg.grow`` (capped at ``cfg.dt_max``) on acceptance;
    the grown value is returned as ``last_dt`` of the new state.
    """
    cfg = (cfg or FlowConfig()).resolved(s.u.grid.h)
    objective = _Objective(cfg.energy)
    ev = objective.evaluate(s.u)
    velocity = _velocity(s.u, ev[2])
    return _advance(s, ev[0], velocity, dt, objective, cfg, ev)[0]


def _gradcheck(u: Field, grad_c, objective, rng, eps=1e-6) -> GradCheck:
    """Central-difference check of the analytic gradient along a random interior direction."""
    g = u.grid
    delta = rng.standard_normal((u.m, g.interior_idx.size))
    analytic = float(np.sum(grad_c * delta))
    probe = u.flat.copy()
    probe[:, g.interior_idx] += eps * delta
    plus, _ = objective.value(Field(g, probe.reshape(u.values.shape)))
    probe[:, g.interior_idx] = u.flat[:, g.interior_idx] - eps * delta
    minus, _ = objective.value(Field(g, probe.reshape(u.values.shape)))
    numeric = (plus - minus) / (2 * eps)
    rel = abs(numeric - analytic) / max(abs(analytic), 1e-300)
    # rounding floor of the difference quotient: each stencil value carries an
    # absolute error of about 16 eps / h^2, entering the energy through sum w |tau|
    stencil_err = 16 * np.finfo(float).eps * 16.0 / g.h**2
    weighted = math.sqrt(float(np.sum(g.lap_weights)) * 4.0 * max(abs(plus), abs(minus)))
    floor = 10.0 * stencil_err * weighted / eps
    passed = abs(numeric - analytic) <= 1e-5 * abs(analytic) + floor
    return GradCheck(0, analytic, numeric, rel, bool(passed))


def gradient_check(u: Field, directions: int = 20, seed: int = 0, energy: str = "intrinsic",
                   eps: float = 1e-6) -> list:
    """Compare the analytic gradient of ``I_h`` (or ``E_h``) with central differences.

    One :class:`GradCheck` per random interior direction.
    """
    objective = _Objective(energy)
    _, cache = objective.value(u)
    grad = objective.gradient(u, cache)
    rng = np.random.default_rng(seed)
    return [_gradcheck(u, grad, objective, rng, eps) for _ in range(directions)]


def _extrinsic_residual_norm(u: Field, parts=None) -> float:
    g = u.grid
    if g.N < 9:
        return math.nan
    res = extrinsic_residual_compact(u, parts)
    return math.sqrt(_wsum_sq(g.weights_deep.reshape(-1)[g.deep_idx], res))


def bump_initial_map(grid, amplitude: float = 0.03, m: int = 3, centre: float = 0.2) -> Field:
    """``e_1`` tilted towards ``e_2`` by a clamped bump of height ``amplitude``.

    The tilt is ``amplitude * phi_h(x) * exp(-4 (x_1 - centre)^2)`` with
    ``phi_h = (1 - |x|^2 / (1 - 2h)^2)_+^2``, so the band carries exactly the
    constant data ``e_1`` with zero normal derivative.
    """
    if m < 2:
        raise ShapeError(f"need m >= 2 target components, got {m}")
    rc = 1.0 - 2.0 * grid.h

    def fn(x):
        phi = np.clip(1.0 - np.sum(x * x, axis=0) / rc**2, 0.0, None) ** 2
        y = np.zeros((m, x.shape[1]))
        y[0] = 1.0
        y[1] = amplitude * phi * np.exp(-4.0 * (x[0] - centre) ** 2)
        return y / np.linalg.norm(y, axis=0)

    return field_from_function(grid, fn, sphere=True)


def run_flow(u0: Field, b: BoundaryData, cfg: FlowConfig | None = None) -> FlowTrajectory:
    """Run the flow until the L^2 norm of the tangential gradient falls below ``cfg.tol``."""
    g = u0.grid
    cfg = (cfg or FlowConfig()).resolved(g.h)
    if u0.m != b.m:
        raise ShapeError(f"initial map has m={u0.m}, boundary data m={b.m}")
    if not u0.sphere:
        raise PreconditionError("flow requires a field flagged sphere-valued")
    u = extend_boundary(u0, b)
    u.check_sphere()
    objective = _Objective(cfg.energy)
    ev = objective.evaluate(u)
    value = ev[0]

    E0 = extrinsic_energy(u)
    if cfg.check_smallness and E0 > cfg.eps0:
        raise SmallnessError("initial bi-energy exceeds eps0", {"E": E0, "eps0": cfg.eps0})

    report = replace(objective.report(u, ev[1]),
                     **{"I" if objective.kind == "intrinsic" else "E": value})
    state = FlowState(t=0.0, u=u, last_dt=cfg.dt0, energy=report, step=0)
    tr = FlowTrajectory()
    rng = np.random.default_rng(cfg.gradcheck_seed)
    snap_dir = Path(cfg.snapshot_dir) if cfg.snapshot_dir else None
    if snap_dir is not None:
        snap_dir.mkdir(parents=True, exist_ok=True)
    band_norms = u.norms().reshape(-1)[g.band_idx]

    next_snap = 0
    integrated = 0.0   # sum_k dt_k |u_t|^2
    initial_sq = 4.0 * value
    ut_sq, dt_taken = math.nan, 0.0

    while True:
        cache, grad = ev[1], ev[2]
        velocity = _velocity(state.u, grad)
        res = math.sqrt(_wsum_sq(g.interior_weights, velocity))
        vals = state.u.flat[:, g.interior_idx]
        norms = np.concatenate([np.sqrt(np.sum(vals * vals, axis=0)), band_norms])
        tr.rows.append([state.step, state.t, dt_taken, state.energy.I, state.energy.E,
                        state.energy.D, ut_sq, res, _extrinsic_residual_norm(
                            state.u, cache if objective.kind == "intrinsic" else None),
                        float(norms.min()), float(norms.max())])
        row = len(tr.rows) - 1
        done = res <= cfg.tol or state.step >= cfg.max_steps
        if cfg.gradcheck_every and state.step % cfg.gradcheck_every == 0:
            check = _gradcheck(state.u, grad, objective, rng)
            check.step = state.step
            tr.gradchecks.append(check)
        if row >= next_snap or done:
            _store_snapshot(tr, row, state, snap_dir)
            next_snap = _next_snapshot(row, cfg)
        if done:
            tr.converged = res <= cfg.tol
            break
        try:
            state, value, ev, moved, dt_taken = _advance(
                state, value, velocity, state.last_dt, objective, cfg, ev)
        except StagnationError as err:
            _close(tr, state, integrated, value, initial_sq)
            err.trajectory = tr
            raise
        ut_sq = moved / dt_taken**2
        integrated += moved / dt_taken
    _close(tr, state, integrated, value, initial_sq)
    return tr


def _close(tr, state, integrated, value, initial_sq):
    tr.final = state
    tr.energy_lhs = 2.0 * integrated + 4.0 * value
    tr.energy_rhs = initial_sq


def _next_snapshot(row: int, cfg: FlowConfig) -> int:
    # geometric thinning keeps early transients and late convergence both visible
    ratio = 1.0 + 8.0 / max(cfg.max_snapshots, 1)
    return max(row + 1, int(math.ceil(row * ratio)))


def _store_snapshot(tr: FlowTrajectory, row: int, state: FlowState, snap_dir):
    if tr.snapshots and tr.snapshots[-1][0] == row:
        return
    tr.snapshots.append((row, state.t, state.u))
    if snap_dir is not None:
        path = snap_dir / f"snapshot_{state.step:07d}.bif4"
        write_snapshot(state.u, path)
        tr.snapshot_paths.append(str(path))


# -- trajectory checks -----------------------------------------------------

def check_ut_monotone(tr: FlowTrajectory, t1_index: int, rel_slack: float = 1e-3) -> MonotoneReport:
    """``|u_t(t2)|^2 <= mean_[t1, t2] |u_t|^2 + slack`` for all ledger pairs past ``t1_index``.

    ``u_t`` is piecewise constant: ledger row ``k`` holds its value on
    ``(t_{k-1}, t_k]``.  The slack is ``rel_slack`` times the peak of
    ``|u_t|^2`` past ``t1_index``.
    """
    ut = tr.column("ut_l2sq")
    t = tr.column("t")
    start = max(int(t1_index), 1)
    if len(ut) - start < 3:
        raise PreconditionError(
            f"need >= 3 ledger rows past row {t1_index}, have {len(ut) - start}")
    return ut_monotone_report(t, ut, start, rel_slack)


def ut_monotone_report(t, ut, start: int, rel_slack: float = 1e-3) -> MonotoneReport:
    t = np.asarray(t, dtype=np.float64)
    ut = np.asarray(ut, dtype=np.float64)
    increments = np.zeros_like(ut)
    increments[1:] = ut[1:] * np.diff(t)
    cum = np.cumsum(increments)
    peak = float(np.max(ut[start:]))
    slack = rel_slack * peak
    worst, pair, count = -math.inf, None, 0
    for j in range(start + 1, len(ut)):
        i = np.arange(start, j)
        span = t[j] - t[i]
        mean = (cum[j] - cum[i]) / np.where(span > 0, span, 1.0)
        excess = np.where(span > 0, ut[j] - mean, 0.0)
        k = int(np.argmax(excess))
        count += j - start
        if excess[k] > worst:
            worst, pair = float(excess[k]), (int(i[k]), j)
    if pair is None:
        worst = 0.0
    return MonotoneReport(passed=worst <= slack, worst_excess=worst, slack=slack,
                          worst_pair=pair, pairs_checked=count)


def check_flow_convexity(tr: FlowTrajectory, row1: int, row2: int, eps0: float = 0.05,
                         rel_slack: float = 1e-3) -> ConvexityReport:
    """``(1/16) int |Delta u1 - Delta u2|^2 <= int |tau(u1)|^2 - int |tau(u2)|^2`` between snapshots.

    The slack is ``rel_slack * int |tau(u1)|^2``.
    """
    if row2 < row1:
        raise ValueError("need row1 <= row2")
    u1, u2 = tr.snapshot_at(row1), tr.snapshot_at(row2)
    return flow_convexity_report(u1, u2, eps0, rel_slack)


def flow_convexity_report(u1: Field, u2: Field, eps0: float = 0.05,
                          rel_slack: float = 1e-3) -> ConvexityReport:
    wl = u1.grid.lap_weights
    a1, _, tau1 = tension_parts(u1)
    a2, _, tau2 = tension_parts(u2)
    lhs = _wsum_sq(wl, a1 - a2) / 16.0
    T1, T2 = _wsum_sq(wl, tau1), _wsum_sq(wl, tau2)
    E1, E2 = 0.25 * _wsum_sq(wl, a1), 0.25 * _wsum_sq(wl, a2)
    return ConvexityReport(name="flow-convexity", lhs=lhs, rhs=T1 - T2, slack=rel_slack * T1,
                           hypotheses_met=max(E1, E2) <= eps0, eps0=eps0, eps_u=E1, eps_v=E2)


def minimize_extrinsic(u0: Field, b: BoundaryData, cfg: FlowConfig | None = None) -> FlowTrajectory:
    """Projected descent on ``E_h`` under the clamped constraint (cross-check helper)."""
    return run_flow(u0, b, replace(cfg or FlowConfig(), energy="extrinsic"))
