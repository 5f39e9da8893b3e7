import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from biflow import _pykernels, kernels
from biflow.errors import ConfigurationError, ShapeError
from biflow.experiments import exactness_tolerance, observed_orders, operator_exactness
from biflow.fields import Field
from biflow.grid import build_grid
from biflow.ops import (VectorField, bilaplacian, divergence, gradient, gradient_sq_support,
                        gradient_support, laplacian, laplacian_array)

from oracles import r, radial_bilaplacian


@pytest.mark.parametrize("N", [9, 17])
def test_polynomial_exactness(N):
    g = build_grid(N)
    for name, err in operator_exactness(g).items():
        assert err <= exactness_tolerance(g, name), name


def test_radial_bilaplacian_of_clamped_quartic(g17):
    # (1 - r^2)^2 has bilaplacian 192 in four dimensions
    assert radial_bilaplacian((1 - r**2) ** 2) == 192
    u = Field(g17, ((1 - g17.r**2) ** 2)[None])
    bl = bilaplacian(u).values[0]
    assert np.max(np.abs(bl[g17.deep] - 192.0)) < 1e-9
    assert np.all(bl[~g17.deep] == 0)


def test_bilaplacian_needs_deep_interior():
    with pytest.raises(ConfigurationError):
        bilaplacian(Field(build_grid(7), np.zeros((1,) + (7,) * 4)))


def test_second_order_convergence():
    orders = observed_orders((9, 17))
    for name in ("gradient", "laplacian"):
        assert orders["orders"][name][-1] == pytest.approx(2.0, abs=0.1)


def test_sympy_laplacian_agrees(g17):
    xs = sp.symbols("x0:4")
    expr = sp.sin(xs[0]) * sp.exp(xs[1] / 2) + xs[2] ** 2 * xs[3]
    lap = sum(sp.diff(expr, v, 2) for v in xs)
    f = sp.lambdify(xs, expr, "numpy")
    fl = sp.lambdify(xs, lap, "numpy")
    x = g17.x
    u = Field(g17, f(*x)[None])
    err = np.abs(laplacian(u).values[0] - fl(*x))[g17.lap_ok]
    # leading truncation term is h^2/12 max|d^4 f| <= h^2/12 * (1 + 1/16)
    assert err.max() <= g17.h**2 / 12 * 1.1 * math.e


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_operators_linear(seed, a, b):
    g = build_grid(9)
    rng = np.random.default_rng(seed)
    u, v = (rng.standard_normal((2,) + g.shape) * g.nonexterior for _ in range(2))
    U, V, W = Field(g, u), Field(g, v), Field(g, a * u + b * v)
    tol = 1e-9 * (1 + abs(a) + abs(b))
    for op in (lambda f: gradient(f).values, lambda f: laplacian(f).values,
               lambda f: bilaplacian(f).values):
        lhs, rhs = op(W), a * op(U) + b * op(V)
        assert np.max(np.abs(lhs - rhs)) <= tol * max(1.0, np.max(np.abs(rhs)))


def test_divergence_of_gradient_is_a_laplacian(g17):
    u = Field(g17, np.sin(g17.x[0]) * np.cos(g17.x[1]))
    dd = divergence(gradient(u)).values[0]
    exact = -2 * np.sin(g17.x[0]) * np.cos(g17.x[1])
    mask = g17.r <= 0.5
    assert np.max(np.abs(dd - exact)[mask]) < 0.02


def test_vector_field_shape(g9):
    with pytest.raises(ShapeError):
        VectorField(g9, np.zeros((3, 1) + g9.shape))


def test_support_gradient_matches_full(g9, rng):
    vals = rng.standard_normal((3,) + g9.shape) * g9.nonexterior
    u = Field(g9, vals)
    full = gradient(u).values.reshape(4, 3, -1)[..., g9.support_idx]
    assert np.allclose(gradient_support(u.flat, g9), full, atol=1e-12)
    assert np.allclose(gradient_sq_support(u.flat, g9), np.sum(full**2, axis=(0, 1)), atol=1e-10)


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_backends_agree(g17, rng):
    from biflow import _ckernels
    vals = rng.standard_normal((3,) + g17.shape) * g17.nonexterior
    a = laplacian_array(vals, g17, backend=_pykernels)
    b = laplacian_array(vals, g17, backend=_ckernels)
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))
    flat = vals.reshape(3, -1)
    assert np.allclose(gradient_sq_support(flat, g17, backend=_pykernels),
                       gradient_sq_support(flat, g17, backend=_ckernels), rtol=1e-13, atol=1e-12)


def test_backend_selection():
    assert kernels.get_backend("python") is _pykernels
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
    assert kernels.BACKEND in ("python", "cython")
