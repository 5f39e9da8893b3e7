import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings, strategies as st

from biflow import _pykernels, kernels
from biflow.errors import PreconditionError, ShapeError, SingularityError
from biflow.fields import Field
from biflow.grid import build_grid
from biflow.green import (GREEN_CONSTANT, calibrate_green_constant, check_source,
                          fd_clamped_solve, green_kernel, green_matrix, relative_l2_difference,
                          shell_source, solve_clamped_biharmonic, solution_norms,
                          verify_thmB2_bounds)

from oracles import GREEN_CONSTANT as C_REF, green_at_origin

coord = st.floats(-0.7, 0.7)
point = st.tuples(coord, coord, coord, coord).map(np.array).filter(lambda p: p @ p < 0.95)


def test_constant():
    assert GREEN_CONSTANT == C_REF
    assert green_at_origin(0.5) == pytest.approx(0.0040294, abs=1e-7)
    assert green_kernel(np.zeros(4), [0.5, 0, 0, 0]) == pytest.approx(0.0040294, abs=1e-7)


@settings(max_examples=200, deadline=None)
@given(point, point)
def test_kernel_symmetric(x, y):
    assume(np.sum((x - y) ** 2) > 1e-6)
    assert green_kernel(x, y) == pytest.approx(green_kernel(y, x), rel=1e-10, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(point, st.tuples(*[st.floats(-1, 1)] * 4).map(np.array).filter(lambda w: w @ w > 0.1))
def test_kernel_clamped_on_sphere(y, w):
    w = w / np.linalg.norm(w)
    assert abs(green_kernel(w, y)) < 1e-14
    # zero normal derivative: G((1 - t) w, y) is quadratic in t, with a cubic
    # term of relative size t / |w - y|
    d = np.linalg.norm(w - y)
    t = 1e-3 * min(1.0, 10 * d)
    g1, g2 = green_kernel((1 - t) * w, y), green_kernel((1 - t / 2) * w, y)
    assert g1 == pytest.approx(4 * g2, rel=0.01, abs=1e-15)
    # the quadratic coefficient grows like |w - y|^-2 near the pole
    if d > 0.25:
        assert abs(g1) < 10 * t * t


@settings(max_examples=50, deadline=None)
@given(point, st.floats(0.0, 2 * math.pi))
def test_kernel_rotation_invariant(y, theta):
    x = np.array([0.3, -0.2, 0.1, 0.4])
    c, s = math.cos(theta), math.sin(theta)
    Q = np.eye(4)
    Q[:2, :2] = [[c, -s], [s, c]]
    assume(np.sum((x - y) ** 2) > 1e-6)
    assert green_kernel(Q @ x, Q @ y) == pytest.approx(green_kernel(x, y), rel=1e-9, abs=1e-15)


def test_kernel_is_biharmonic_off_diagonal():
    # symbolic Laplacian, then a central-difference Laplacian of it
    xs = sp.symbols("x0:4")
    y = (sp.Rational(1, 5), 0, sp.Rational(-1, 10), 0)
    d2 = sum((a - b) ** 2 for a, b in zip(xs, y))
    q = sum(a * a for a in xs) * sum(b * b for b in y) - 2 * sum(a * b for a, b in zip(xs, y)) + 1
    G = sp.log(d2 / q) / 2 - d2 / (2 * q)
    lap = sp.lambdify(xs, sum(sp.diff(G, v, 2) for v in xs), "math")
    e = 1e-3
    for pt in [np.array([0.5, 0.1, 0.2, -0.1]), np.array([-0.3, 0.4, 0.0, 0.2])]:
        centre = lap(*pt)
        bil = sum(lap(*(pt + e * d)) + lap(*(pt - e * d)) - 2 * centre for d in np.eye(4)) / e**2
        # a non-biharmonic perturbation of size d^4 / 10 would give 19.2 here
        assert abs(bil) < 1e-2


def test_singularity():
    with pytest.raises(SingularityError):
        green_kernel([0.1, 0, 0, 0], [0.1, 0, 0, 0])


def test_matrix_matches_kernel(rng):
    x = rng.uniform(-0.5, 0.5, (4, 5))
    y = rng.uniform(-0.5, 0.5, (4, 3))
    M = green_matrix(x, y)
    for i in range(5):
        for j in range(3):
            assert M[i, j] == pytest.approx(green_kernel(x[:, i], y[:, j]), rel=1e-12)


def _clamped_quartic_source(g):
    return np.where(g.r < 1.0, 192.0, 0.0)[None]


def test_solver_reproduces_quartic():
    # Delta^2 (1 - |x|^2)^2 = 192 with clamped data, so psi(0) = 1
    errs = []
    for N in (9, 17):
        g = build_grid(N)
        centre = np.ravel_multi_index((g.c,) * 4, g.shape)
        psi = solve_clamped_biharmonic(_clamped_quartic_source(g), g, targets=[centre])
        errs.append(abs(psi.flat[0, centre] - 1.0))
    assert errs[0] < 0.01 and errs[1] < errs[0] / 2


def test_solver_outputs(g9):
    psi = solve_clamped_biharmonic(_clamped_quartic_source(g9), g9)
    assert np.all(psi.values[0][g9.r >= 1] == 0)
    exact = np.clip(1 - g9.r**2, 0, None) ** 2
    assert relative_l2_difference(psi, Field(g9, exact[None])) < 0.02
    with pytest.raises(ShapeError):
        solve_clamped_biharmonic(np.zeros(g9.size))
    with pytest.raises(ShapeError):
        solve_clamped_biharmonic(np.zeros((2, g9.size)), g9)


@settings(max_examples=5, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_solver_linear(a, b, seed):
    g = build_grid(7)
    rng = np.random.default_rng(seed)
    f1, f2 = rng.uniform(0, 1, (2, 1, g.size)) * (g.r < 1).reshape(-1)
    lhs = solve_clamped_biharmonic(a * f1 + b * f2, g).flat
    rhs = a * solve_clamped_biharmonic(f1, g).flat + b * solve_clamped_biharmonic(f2, g).flat
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_backends_agree(g9):
    from biflow import _ckernels
    f = _clamped_quartic_source(g9)
    a = solve_clamped_biharmonic(f, g9, backend=_pykernels).flat
    b = solve_clamped_biharmonic(f, g9, backend=_ckernels).flat
    assert np.max(np.abs(a - b)) < 1e-13


def test_fd_oracle_agrees(g9):
    f = _clamped_quartic_source(g9)
    fd = fd_clamped_solve(f, g9)
    kq = solve_clamped_biharmonic(f, g9)
    assert relative_l2_difference(fd, kq) <= 8 * g9.h
    assert np.all(fd.values[0][g9.r >= 1] == 0)
    with pytest.raises(ValueError):
        fd_clamped_solve(f, g9, free="box")


def test_calibration():
    cal = calibrate_green_constant(13)
    assert cal.c_theory == GREEN_CONSTANT
    assert cal.l2_error < 0.05
    assert cal.c_fit == pytest.approx(GREEN_CONSTANT, rel=0.05)


def test_source_admissibility(g9):
    f = shell_source(g9)
    check_source(f, g9, C0=max(1.0, float(np.sum(g9.weights.reshape(-1) * f))))
    with pytest.raises(PreconditionError, match="f < 0"):
        check_source(-f, g9, 10.0)
    with pytest.raises(PreconditionError, match="exceeds C0"):
        check_source(100 * f, g9, 1.0)
    with pytest.raises(PreconditionError):
        verify_thmB2_bounds(f, 0.0, g9)


def test_thmB2_zero_and_scaling(g9):
    zero = verify_thmB2_bounds(np.zeros(g9.size), 1.0, g9)
    assert zero.ratio == 0.0
    f = np.where(g9.r.reshape(-1) < 0.5, 0.5, 0.0)
    a = verify_thmB2_bounds(f, 1.0, g9)
    b = verify_thmB2_bounds(2 * f, 2.0, g9)
    assert b.ratio == pytest.approx(a.ratio, rel=1e-12)
    assert 0 < a.ratio < 1
    psi = solve_clamped_biharmonic(f[None], g9)
    assert solution_norms(psi) == pytest.approx((a.norm_lap2, a.norm_grad4, a.norm_inf))
