import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biflow.convexity import perturb
from biflow.errors import ConfigurationError, ConstraintViolation, ShapeError
from biflow.fields import Field, constant_field, great_circle_boundary, initial_map
from biflow.flow import gradient_check
from biflow.grid import build_grid
from biflow.sphere import (SphereGeometry, calibrate_sign, check_shapes, consistency_defect,
                           dirichlet_energy, energies, intrinsic_energy, jiang_residual,
                           residual_extrinsic, residual_intrinsic, rhs_relative_residual,
                           tension, tension_parts)

from conftest import great_circle

unit3 = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.asarray(v) / np.linalg.norm(v))


@settings(max_examples=100, deadline=None)
@given(unit3, st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_projections(y, v):
    geo = SphereGeometry(2)
    P, Q = geo.tangent_projection(y), geo.normal_projection(y)
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(P + Q, np.eye(3))
    assert abs(y @ (P @ v)) < 1e-10
    assert np.allclose(SphereGeometry.tangential(y[:, None], np.asarray(v)[:, None])[:, 0], P @ v)


@settings(max_examples=50, deadline=None)
@given(unit3, unit3, unit3)
def test_curvature_antisymmetric(x, y, z):
    R = SphereGeometry.curvature
    assert np.allclose(R(x, y, z), -R(y, x, z))
    # first Bianchi identity
    assert np.allclose(R(x, y, z) + R(y, z, x) + R(z, x, y), 0, atol=1e-12)


def test_geometry_rejects_n0():
    with pytest.raises(ConfigurationError):
        SphereGeometry(0)


def _random_map(g, seed=0, amplitude=0.4):
    return perturb(initial_map(g, great_circle_boundary(0.5)), seed, amplitude)


def test_tension_identities(g9):
    u = _random_map(g9)
    a, s, tau = tension_parts(u)
    ul = u.flat[:, g9.lap_idx]
    assert np.max(np.abs(np.sum(ul * tau, axis=0))) < 1e-10 * np.max(np.abs(a))
    assert np.allclose(np.sum(a * a, axis=0), np.sum(tau * tau, axis=0) + s * s, rtol=1e-12)
    rep = energies(u)
    assert rep.E == pytest.approx(rep.I + rep.normal, rel=1e-12)


def test_great_circle_is_harmonic(g17):
    u = great_circle(g17, 1.0)
    assert np.max(np.abs(tension(u).values)) < 1e-11
    assert intrinsic_energy(u) < 1e-20
    _, res = residual_intrinsic(u)
    assert res < 1e-10
    # Dirichlet energy -> 1/2 * alpha^2 * |B_1|
    assert dirichlet_energy(u) == pytest.approx(0.5 * math.pi**2 / 2, rel=0.05)
    assert consistency_defect(u) < 1e-3


def test_constant_map_is_trivial(g9):
    u = constant_field(g9, [0.0, 0.0, 1.0])
    rep = energies(u)
    assert rep.D == rep.E == rep.I == rep.G4 == 0.0
    assert residual_extrinsic(u)[1] == 0.0


def test_energy_rejects_off_sphere(g9):
    u = constant_field(g9, [2.0, 0.0, 0.0])
    with pytest.raises(ConstraintViolation):
        energies(u)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(0, 2 * math.pi))
def test_energy_invariant_under_target_rotation(seed, theta):
    g = build_grid(9)
    u = _random_map(g, seed)
    c, s = math.cos(theta), math.sin(theta)
    Q = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])
    v = Field(g, np.einsum("ij,j...->i...", Q, u.values), sphere=True)
    assert intrinsic_energy(v) == pytest.approx(intrinsic_energy(u), rel=1e-10)
    assert dirichlet_energy(v) == pytest.approx(dirichlet_energy(u), rel=1e-10)


def test_gradient_is_exact(g9):
    u = _random_map(g9, seed=3, amplitude=0.2)
    for energy in ("intrinsic", "extrinsic"):
        checks = gradient_check(u, directions=5, seed=1, energy=energy)
        assert all(c.rel_error <= 1e-5 for c in checks), energy


def test_sign_calibration_frozen():
    cal = calibrate_sign()
    assert cal.sigma == -1
    assert cal.fit == pytest.approx(-0.98516, abs=1e-4)
    assert cal.rel_residual < 0.05


def test_divergence_form_and_curvature_form(g17):
    u = great_circle(g17, 1.0)
    assert rhs_relative_residual(u) < 0.05
    v = _random_map(g17, seed=1, amplitude=0.1)
    check = jiang_residual(v)
    assert check.sigma == 1
    assert check.rel_residual < 0.2


def test_check_shapes(g9, g17):
    with pytest.raises(ShapeError):
        check_shapes(constant_field(g9, [1.0, 0, 0]), constant_field(g17, [1.0, 0, 0]))
