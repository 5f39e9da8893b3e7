"""Finite-difference operators on lattice fields: gradient, divergence, Laplacian, bilaplacian.

Stencils only read non-exterior nodes.  The Laplacian is the 9-point
stencil and lives on nodes whose eight neighbours are all non-exterior;
first differences are central where possible and one-sided second order
next to the exterior or the lattice edge.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ConfigurationError, ShapeError, StencilError
from .fields import Field
from .grid import Grid4


class VectorField:
    """Per-node derivative vectors; ``values`` has shape ``(4, m, N, N, N, N)``."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid4, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 6 or values.shape[0] != 4 or values.shape[2:] != grid.shape:
            raise ShapeError(f"vector field of shape {values.shape} does not fit {grid}")
        self.grid = grid
        self.values = values

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def sqnorm(self) -> np.ndarray:
        """Pointwise ``|F|^2`` summed over directions and components."""
        return np.einsum("ki...,ki...->...", self.values, self.values)


@lru_cache(maxsize=8)
def _diff_masks(grid: Grid4):
    """Per axis: (central, forward, backward) masks over the 4-D lattice."""
    ok = grid.nonexterior
    out = []
    for axis in range(4):
        p1, m1 = _shift(ok, axis, 1), _shift(ok, axis, -1)
        p2, m2 = _shift(ok, axis, 2), _shift(ok, axis, -2)
        central = ok & p1 & m1
        forward = ok & ~central & p1 & p2
        backward = ok & ~central & ~forward & m1 & m2
        missing = ok & ~(central | forward | backward)
        if np.any(missing & (grid.weights > 0)):
            raise StencilError(f"grid too coarse: quadrature node lacks a stencil along axis {axis}")
        out.append((central, forward, backward))
    return tuple(out)


def _shift(mask, axis, step):
    out = np.zeros_like(mask)
    src = [slice(None)] * 4
    dst = [slice(None)] * 4
    if step > 0:
        dst[axis], src[axis] = slice(None, -step), slice(step, None)
    else:
        dst[axis], src[axis] = slice(-step, None), slice(None, step)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def _roll(arr, axis, step):
    """``out[..., i, ...] = arr[..., i + step, ...]`` on the last four axes (zero fill)."""
    ax = arr.ndim - 4 + axis
    out = np.zeros_like(arr)
    src = [slice(None)] * arr.ndim
    dst = [slice(None)] * arr.ndim
    if step > 0:
        dst[ax], src[ax] = slice(None, -step), slice(step, None)
    else:
        dst[ax], src[ax] = slice(-step, None), slice(None, step)
    out[tuple(dst)] = arr[tuple(src)]
    return out


def partial(arr: np.ndarray, grid: Grid4, axis: int) -> np.ndarray:
    """First difference along ``axis`` of an array whose last four axes are the lattice."""
    central, forward, backward = _diff_masks(grid)[axis]
    h = grid.h
    p1, m1 = _roll(arr, axis, 1), _roll(arr, axis, -1)
    out = np.where(central, (p1 - m1) / (2 * h), 0.0)
    if forward.any():
        p2 = _roll(arr, axis, 2)
        out = np.where(forward, (-3 * arr + 4 * p1 - p2) / (2 * h), out)
    if backward.any():
        m2 = _roll(arr, axis, -2)
        out = np.where(backward, (3 * arr - 4 * m1 + m2) / (2 * h), out)
    return out


def gradient(u: Field) -> VectorField:
    return VectorField(u.grid, np.stack([partial(u.values, u.grid, k) for k in range(4)]))


def divergence(F: VectorField) -> Field:
    total = partial(F.values[0], F.grid, 0)
    for k in range(1, 4):
        total = total + partial(F.values[k], F.grid, k)
    return Field(F.grid, total)


def laplacian_array(values: np.ndarray, grid: Grid4, nodes=None, backend=None) -> np.ndarray:
    """9-point Laplacian at ``nodes`` (default: every node with a full stencil)."""
    backend = backend or kernels.backend
    vals = np.ascontiguousarray(values, dtype=np.float64)
    flat = vals.reshape(-1, grid.size)
    out = np.zeros_like(flat)
    nodes = grid.lap_idx if nodes is None else nodes
    backend.lap_nodes(flat, nodes, grid.neighbor_offsets, 1.0 / grid.h**2, out)
    return out.reshape(vals.shape)


def laplacian(u: Field) -> Field:
    return Field(u.grid, laplacian_array(u.values, u.grid))


def bilaplacian(u: Field) -> Field:
    """``Delta_h(Delta_h u)`` on the deep interior ``|x| <= 1 - 4h``; zero elsewhere."""
    g = u.grid
    if g.N < 9:
        raise ConfigurationError(f"bilaplacian needs N >= 9 (deep interior empty at N={g.N})")
    lap = laplacian_array(u.values, g)
    return Field(g, laplacian_array(lap, g, nodes=g.deep_idx))



@lru_cache(maxsize=8)
def _support_stencil(grid: Grid4):
    """Three-point first-difference stencils at every weighted node, per axis.

    Returns ``(idx, cols, coef)`` with ``cols`` of shape ``(4, 3, k)`` and
    ``coef`` of shape ``(4, 3, k)``; same masks as :func:`partial`.
    """
    idx = grid.support_idx
    masks = _diff_masks(grid)
    inv = 1.0 / (2 * grid.h)
    cols = np.empty((4, 3, idx.size), dtype=np.int64)
    coef = np.empty((4, 3, idx.size))
    for axis in range(4):
        s = grid.strides[axis]
        central, forward, backward = (m.reshape(-1)[idx] for m in masks[axis])
        cols[axis] = np.where(central, [idx + s, idx - s, idx],
                              np.where(forward, [idx, idx + s, idx + 2 * s],
                                       [idx, idx - s, idx - 2 * s]))
        coef[axis] = np.where(central, np.array([[1.0], [-1.0], [0.0]]),
                              np.where(forward, np.array([[-3.0], [4.0], [-1.0]]),
                                       np.array([[3.0], [-4.0], [1.0]]))) * inv
    cols.flags.writeable = False
    coef.flags.writeable = False
    return idx, cols, coef


def gradient_support(flat: np.ndarray, grid: Grid4) -> np.ndarray:
    """``(4, m, k)`` first differences of a flat ``(m, N**4)`` array at ``grid.support_idx``.

    Agrees with :func:`gradient` to rounding on those nodes; much cheaper
    when only weighted integrals of the gradient are needed.
    """
    _, cols, coef = _support_stencil(grid)
    return (coef[:, None, 0] * flat[:, cols[:, 0]].transpose(1, 0, 2)
            + coef[:, None, 1] * flat[:, cols[:, 1]].transpose(1, 0, 2)
            + coef[:, None, 2] * flat[:, cols[:, 2]].transpose(1, 0, 2))


def gradient_sq_support(flat: np.ndarray, grid: Grid4, backend=None) -> np.ndarray:
    """``|grad_h u|^2`` at ``grid.support_idx`` for a flat ``(m, N**4)`` array."""
    backend = backend or kernels.backend
    _, cols, coef = _support_stencil(grid)
    out = np.empty(cols.shape[-1])
    backend.gradsq_nodes(np.ascontiguousarray(flat, dtype=np.float64), cols, coef, out)
    return out
