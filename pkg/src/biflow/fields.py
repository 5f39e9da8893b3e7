"""Nodal maps into R^{n+1}, clamped boundary data, band extension and snapshot I/O."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (BoundaryDataError, ConstraintViolation, ShapeError,
                     SnapshotFormatError)
from .grid import Grid4, build_grid

UNIT_TOL = 1e-12
MAGIC = b"BIF4"
_HEADER = struct.Struct("<4sIId")


class Field:
    """Values in R^m on every lattice node; exterior nodes hold zeros.

    ``values`` has shape ``(m, N, N, N, N)`` and is C-contiguous so the
    kernels can work on the flat ``(m, N**4)`` view.
    """

    __slots__ = ("grid", "values", "sphere")

    def __init__(self, grid: Grid4, values, sphere: bool = False):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim == 4:
            values = values[None]
        if values.shape[1:] != grid.shape:
            raise ShapeError(f"values of shape {values.shape} do not fit {grid}")
        self.grid = grid
        self.values = values
        self.sphere = bool(sphere)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        """Sphere dimension when the field is S^n-valued."""
        return self.m - 1

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(self.m, -1)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.sphere)

    def with_values(self, values, sphere=None) -> "Field":
        return Field(self.grid, values, self.sphere if sphere is None else sphere)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.einsum("i...,i...->...", self.values, self.values))

    def check_sphere(self, tol: float = UNIT_TOL) -> None:
        """Raise if any non-exterior node is off the unit sphere."""
        dev = np.abs(self.norms() - 1.0)[self.grid.nonexterior]
        worst = float(dev.max(initial=0.0))
        if worst > tol:
            raise ConstraintViolation(f"|u| deviates from 1 by {worst:.3e} (> {tol:g})")

    def __eq__(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        return (self.grid.N == other.grid.N and self.values.shape == other.values.shape
                and self.values.tobytes() == other.values.tobytes())

    __hash__ = None

    def __repr__(self):
        return f"Field(N={self.grid.N}, m={self.m}, sphere={self.sphere})"


def project_to_sphere(y: np.ndarray, axis: int = 0) -> np.ndarray:
    """Nearest-point projection ``y / |y|`` along ``axis``.

    Vectors whose float norm is already 1 up to a few ulp are returned
    untouched, so the projection is exactly idempotent.
    """
    y = np.asarray(y, dtype=np.float64)
    nrm = np.sqrt(np.sum(y * y, axis=axis, keepdims=True))
    keep = np.abs(nrm - 1.0) <= 4 * np.finfo(float).eps
    safe = np.where(nrm == 0.0, 1.0, nrm)
    return np.where(keep, y, y / safe)


def constant_field(grid: Grid4, vector) -> Field:
    vector = np.asarray(vector, dtype=np.float64)
    vals = np.zeros((vector.size,) + grid.shape)
    vals[:, grid.nonexterior] = vector[:, None]
    return Field(grid, vals, sphere=bool(np.isclose(np.linalg.norm(vector), 1.0)))


def field_from_function(grid: Grid4, fn: Callable[[np.ndarray], np.ndarray], sphere=False) -> Field:
    """Evaluate ``fn(x)`` (``x`` of shape ``(4, k)``, result ``(m, k)``) on non-exterior nodes."""
    idx = np.flatnonzero(grid.nonexterior.reshape(-1))
    pts = grid.x.reshape(4, -1)[:, idx]
    vals = np.atleast_2d(np.asarray(fn(pts), dtype=np.float64))
    out = np.zeros((vals.shape[0], grid.size))
    out[:, idx] = vals
    return Field(grid, out.reshape((vals.shape[0],) + grid.shape), sphere)


@dataclass(frozen=True)
class BoundaryData:
    """Clamped data on S^3: value ``chi(w)`` in S^n and normal derivative ``xi(w)``.

    Both callables take points of shape ``(4, k)`` on S^3 and return ``(m, k)``.
    ``interior`` optionally gives a smooth map of the whole ball used as the
    initial guess for flows; otherwise the band extension formula is used.
    """

    chi: Callable[[np.ndarray], np.ndarray]
    xi: Callable[[np.ndarray], np.ndarray]
    m: int
    name: str = "custom"
    interior: Callable[[np.ndarray], np.ndarray] | None = None


def constant_boundary(vector=None, m: int = 3) -> BoundaryData:
    e = np.zeros(m) if vector is None else np.asarray(vector, dtype=np.float64)
    if vector is None:
        e[0] = 1.0
    m = e.size

    def chi(w):
        return np.repeat(e[:, None], w.shape[1], axis=1)

    def xi(w):
        return np.zeros((m, w.shape[1]))

    return BoundaryData(chi, xi, m, name=f"constant{tuple(e)}", interior=chi)


def great_circle_map(alpha: float, m: int = 3) -> Callable[[np.ndarray], np.ndarray]:
    """``x -> (cos(alpha x1), sin(alpha x1), 0, ...)``, a harmonic map into S^n."""

    def u(x):
        out = np.zeros((m, x.shape[1]))
        out[0] = np.cos(alpha * x[0])
        out[1] = np.sin(alpha * x[0])
        return out

    return u


def great_circle_boundary(alpha: float, m: int = 3) -> BoundaryData:
    u = great_circle_map(alpha, m)

    def xi(w):
        # d/dr u(r w) at r = 1 is w1 * alpha * (-sin, cos)
        out = np.zeros((m, w.shape[1]))
        out[0] = -alpha * w[0] * np.sin(alpha * w[0])
        out[1] = alpha * w[0] * np.cos(alpha * w[0])
        return out

    return BoundaryData(u, xi, m, name=f"great-circle(alpha={alpha:g})", interior=u)


def band_values(grid: Grid4, b: BoundaryData) -> tuple[np.ndarray, np.ndarray]:
    """Flat band indices and the clamped extension ``Pi(chi + (|x|-1) xi)`` there."""
    idx = grid.band_idx
    x = grid.x.reshape(4, -1)[:, idx]
    r = grid.r.reshape(-1)[idx]
    omega = x / r
    chi = np.asarray(b.chi(omega), dtype=np.float64)
    xi = np.asarray(b.xi(omega), dtype=np.float64)
    if chi.shape != (b.m, idx.size) or xi.shape != chi.shape:
        raise BoundaryDataError(f"boundary callables must return shape {(b.m, idx.size)}")
    dev = np.max(np.abs(np.linalg.norm(chi, axis=0) - 1.0), initial=0.0)
    if dev > 1e-8:
        raise BoundaryDataError(f"|chi| deviates from 1 by {dev:.3e}")
    dot = np.max(np.abs(np.sum(chi * xi, axis=0)), initial=0.0)
    if dot > 1e-8:
        raise BoundaryDataError(f"<chi, xi> = {dot:.3e}, expected 0")
    return idx, project_to_sphere(chi + (r - 1.0) * xi)


def extend_boundary(u: Field, b: BoundaryData) -> Field:
    """Overwrite band nodes with the first-order clamped extension of ``b``."""
    if u.m != b.m:
        raise ShapeError(f"field has m={u.m}, boundary data m={b.m}")
    idx, vals = band_values(u.grid, b)
    out = u.flat.copy()
    out[:, idx] = vals
    return Field(u.grid, out.reshape(u.values.shape), sphere=u.sphere)


def initial_map(grid: Grid4, b: BoundaryData) -> Field:
    """Sphere-valued starting map compatible with ``b`` (band already extended)."""
    if b.interior is not None:
        u = field_from_function(grid, b.interior)
    else:
        def radial(x):
            r = np.sqrt(np.sum(x * x, axis=0))
            w = x / np.where(r == 0, 1.0, r)
            w[0, r == 0] = 1.0
            return np.asarray(b.chi(w)) + (r - 1.0) * np.asarray(b.xi(w))
        u = field_from_function(grid, radial)
    vals = u.values.copy()
    vals[:, grid.nonexterior] = project_to_sphere(vals[:, grid.nonexterior])
    return extend_boundary(Field(grid, vals, sphere=True), b)


# -- snapshots -------------------------------------------------------------

def write_snapshot(u: Field, path) -> None:
    """Little-endian ``BIF4`` header then node-major ``m`` doubles per node."""
    g = u.grid
    header = _HEADER.pack(MAGIC, g.N, u.m, g.h)
    payload = np.moveaxis(u.values, 0, -1).astype("<f8", copy=False)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(payload).tobytes())


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError("truncated header", len(raw))
    magic, N, m, h = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}", 0)
    if N < 5 or N % 2 == 0 or m < 1:
        raise SnapshotFormatError(f"dimension mismatch: N={N}, m={m}", 4)
    if h != 2.0 / (N - 1):
        raise SnapshotFormatError(f"dimension mismatch: h={h!r} for N={N}", 12)
    expected = N**4 * m * 8
    body = len(raw) - _HEADER.size
    if body < expected:
        raise SnapshotFormatError(f"truncated payload: {body} of {expected} bytes", len(raw))
    if body > expected:
        raise SnapshotFormatError(f"dimension mismatch: {body - expected} trailing bytes",
                                  _HEADER.size + expected)
    data = np.frombuffer(raw, dtype="<f8", count=N**4 * m, offset=_HEADER.size)
    values = np.moveaxis(data.reshape((N,) * 4 + (m,)), -1, 0).astype(np.float64)
    grid = build_grid(N)
    norms = np.sqrt(np.sum(values * values, axis=0))[grid.nonexterior]
    sphere = bool(norms.size) and bool(np.all(np.abs(norms - 1.0) <= UNIT_TOL))
    return Field(grid, values, sphere)


def write_csv(path, header, rows) -> None:
    """CSV with a mandatory header row; floats written with ``repr`` ('.' decimal)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])
