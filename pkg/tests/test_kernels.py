"""The compiled kernels and the numpy fallback must agree to rounding."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biflow import _pykernels, kernels
from biflow.convexity import perturb
from biflow.fields import great_circle_boundary, initial_map
from biflow.flow import FlowConfig, bump_initial_map, run_flow
from biflow.fields import constant_boundary
from biflow.grid import build_grid
from biflow.sphere import intrinsic_gradient_compact, tension_parts

pytestmark = pytest.mark.skipif("cython" not in kernels.available_backends(),
                                reason="extension not built")


@pytest.fixture(scope="module")
def ck():
    from biflow import _ckernels
    return _ckernels


def _map(N, seed):
    g = build_grid(N)
    return perturb(initial_map(g, great_circle_boundary(0.5)), seed, 0.3)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([9, 13]))
def test_tension_and_gradient(ck, seed, N):
    u = _map(N, seed)
    pp, pc = tension_parts(u, _pykernels), tension_parts(u, ck)
    for a, b in zip(pp, pc):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-10)
    gp = intrinsic_gradient_compact(u, pp, _pykernels)
    gc = intrinsic_gradient_compact(u, pc, ck)
    assert np.max(np.abs(gp - gc)) <= 1e-12 * np.max(np.abs(gp))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-6, 1e-1))
def test_intrinsic_change_matches_energy_difference(ck, seed, scale):
    u = _map(9, seed)
    v = perturb(u, seed + 1, scale)
    g = u.grid
    pu, pv = tension_parts(u), tension_parts(v)
    args = (u.flat, v.flat, g.lap_idx, g.neighbor_offsets, 1.0 / g.h**2,
            pu[1], pu[2], pv[0], pv[2], g.lap_weights)
    fast, slow = ck.intrinsic_change(*args), _pykernels.intrinsic_change(*args)
    direct = 0.25 * (np.sum(g.lap_weights * np.sum(pv[2]**2, axis=0))
                     - np.sum(g.lap_weights * np.sum(pu[2]**2, axis=0)))
    assert abs(fast - slow) <= 1e-12 * abs(slow) + 1e-16
    assert abs(fast - direct) <= 1e-9 * max(abs(direct), 1.0)


def test_tangent_and_projection(ck, rng):
    u = _map(9, 1)
    g = u.grid
    v = np.ascontiguousarray(rng.standard_normal((3, g.interior_idx.size)))
    outs = []
    for be in (_pykernels, ck):
        t = np.empty_like(v)
        be.tangent_nodes(u.flat, v, g.interior_idx, t)
        p = u.flat.copy()
        be.project_step(u.flat, v, g.interior_idx, 1e-3, p)
        outs.append((t, p))
    assert np.allclose(outs[0][0], outs[1][0], atol=1e-14)
    assert np.allclose(outs[0][1], outs[1][1], atol=1e-15)
    assert np.allclose(np.linalg.norm(outs[1][1][:, g.interior_idx], axis=0), 1.0, atol=1e-15)


def test_green_sum_thread_independent(ck):
    g = build_grid(9)
    inside = np.flatnonzero((g.r < 1).reshape(-1))
    x = np.ascontiguousarray(g.x.reshape(4, -1)[:, inside])
    coef = np.ascontiguousarray(g.weights.reshape(-1)[inside])
    self_index = np.arange(inside.size, dtype=np.int64)
    outs = []
    for be, threads in ((_pykernels, 1), (ck, 1), (ck, 4)):
        out = np.zeros(inside.size)
        be.green_sum(x, x, coef, 1.0, self_index, out, threads)
        outs.append(out)
    assert np.array_equal(outs[1], outs[2])
    assert np.allclose(outs[0], outs[1], rtol=1e-13, atol=1e-15)


def test_flow_same_on_both_backends(monkeypatch, ck):
    g = build_grid(9)
    cfg = FlowConfig(max_steps=25, check_smallness=False)
    rows = []
    for be in (_pykernels, ck):
        monkeypatch.setattr(kernels, "backend", be)
        rows.append(run_flow(bump_initial_map(g, 0.05), constant_boundary(m=3), cfg).column("I"))
    assert np.allclose(rows[0], rows[1], rtol=1e-10)


def test_environment_forces_fallback():
    env = dict(os.environ, BIFLOW_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from biflow import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
