import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from biflow.errors import BoundaryDataError, ConstraintViolation, ShapeError, SnapshotFormatError
from biflow.fields import (BoundaryData, Field, band_values, constant_boundary, constant_field,
                           extend_boundary, great_circle_boundary, initial_map, project_to_sphere,
                           read_snapshot, write_csv, write_snapshot)
from biflow.grid import build_grid

from conftest import great_circle

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (3, 7), elements=finite))
def test_projection_idempotent_and_unit(y):
    norms = np.linalg.norm(y, axis=0)
    y = y[:, norms > 1e-6]
    p = project_to_sphere(y)
    assert np.allclose(np.linalg.norm(p, axis=0), 1.0, atol=1e-14)
    assert np.array_equal(project_to_sphere(p), p)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (4, 5), elements=finite), st.floats(0.01, 100))
def test_projection_scale_invariant(y, s):
    y = y[:, np.linalg.norm(y, axis=0) > 1e-3]
    assert np.allclose(project_to_sphere(s * y), project_to_sphere(y), atol=1e-14)


def test_field_shape_checks(g9):
    with pytest.raises(ShapeError):
        Field(g9, np.zeros((3, 9, 9, 9)))
    f = Field(g9, np.zeros(g9.shape))
    assert f.m == 1 and f.values.flags.c_contiguous


def test_constant_field_and_sphere_check(g9):
    u = constant_field(g9, [1.0, 0.0, 0.0])
    assert u.sphere
    u.check_sphere()
    assert np.all(u.values[:, g9.exterior] == 0)
    bad = u.values.copy()
    bad[0, g9.c, g9.c, g9.c, g9.c] = 1.0 + 1e-9
    with pytest.raises(ConstraintViolation):
        Field(g9, bad, sphere=True).check_sphere()


def test_equality_is_bitwise(g9):
    u = constant_field(g9, [0.0, 1.0, 0.0])
    assert u == u.copy()
    v = u.values.copy()
    v[1, g9.c, g9.c, g9.c, g9.c] = np.nextafter(1.0, 2.0)
    assert u != Field(g9, v)


def test_band_extension_constant(g9):
    idx, vals = band_values(g9, constant_boundary(m=3))
    assert idx.size == np.count_nonzero(g9.band)
    assert np.array_equal(vals, np.repeat([[1.0], [0.0], [0.0]], idx.size, axis=1))


def test_band_extension_great_circle_is_first_order(g17):
    alpha = 0.5
    idx, vals = band_values(g17, great_circle_boundary(alpha))
    exact = great_circle(g17, alpha).flat[:, idx]
    r = g17.r.reshape(-1)[idx]
    # projected Taylor extension differs from the map by O((|x|-1)^2)
    err = np.linalg.norm(vals - exact, axis=0)
    assert np.all(err <= 2 * alpha**2 * (r - 1) ** 2 + 1e-14)


def test_band_rejects_inconsistent_data(g9):
    def chi(w):
        return np.repeat([[1.0], [0.0], [0.0]], w.shape[1], axis=1)

    def xi_bad(w):
        return np.repeat([[0.1], [0.0], [0.0]], w.shape[1], axis=1)

    with pytest.raises(BoundaryDataError):
        band_values(g9, BoundaryData(chi, xi_bad, 3))
    with pytest.raises(BoundaryDataError):
        band_values(g9, BoundaryData(lambda w: 2 * chi(w), lambda w: 0 * chi(w), 3))


def test_initial_map_is_sphere_valued(g9):
    for b in (constant_boundary(m=3), great_circle_boundary(0.3)):
        u = initial_map(g9, b)
        u.check_sphere()
    e = extend_boundary(initial_map(g9, constant_boundary(m=3)), constant_boundary(m=3))
    assert e == initial_map(g9, constant_boundary(m=3))
    with pytest.raises(ShapeError):
        extend_boundary(initial_map(g9, constant_boundary(m=4)), constant_boundary(m=3))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 3, 4]))
def test_snapshot_round_trip(tmp_path_factory, seed, m):
    g = build_grid(5)
    vals = np.random.default_rng(seed).standard_normal((m,) + g.shape)
    path = tmp_path_factory.mktemp("snap") / "u.bin"
    u = Field(g, vals)
    write_snapshot(u, path)
    assert read_snapshot(path) == u
    assert path.stat().st_size == 20 + 8 * m * 5**4


def test_snapshot_detects_sphere(tmp_path, g9):
    u = great_circle(g9, 1.0)
    write_snapshot(u, tmp_path / "u.bin")
    assert read_snapshot(tmp_path / "u.bin").sphere


def test_snapshot_errors(tmp_path):
    g = build_grid(5)
    path = tmp_path / "u.bin"
    write_snapshot(constant_field(g, [1.0, 0.0]), path)
    raw = path.read_bytes()
    cases = {
        "magic": (b"XXXX" + raw[4:], 0),
        "truncated": (raw[:-8], len(raw) - 8),
        "trailing": (raw + b"\0" * 8, len(raw)),
        "header": (raw[:10], 10),
    }
    for name, (data, offset) in cases.items():
        path.write_bytes(data)
        with pytest.raises(SnapshotFormatError) as info:
            read_snapshot(path)
        assert info.value.offset == offset, name
    # wrong spacing for the declared N
    bad = bytearray(raw)
    bad[12:20] = np.float64(0.3).tobytes()
    path.write_bytes(bytes(bad))
    with pytest.raises(SnapshotFormatError, match="dimension mismatch"):
        read_snapshot(path)


def test_csv_uses_repr_and_header(tmp_path):
    write_csv(tmp_path / "t.csv", ["a", "b"], [[0.1, "x"], [np.float64(1 / 3), 2]])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["a,b", "0.1,x", "0.3333333333333333,2"]
