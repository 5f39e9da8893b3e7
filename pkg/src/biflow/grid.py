"""Structured 4-D lattice over [-1, 1]^4 with unit-ball node classes and quadrature.

Nodes are addressed by integer offsets ``k = i - c`` from the centre index
``c = (N - 1) / 2`` so that ``x = k * h`` and ``h = 1 / c``.  All radius tests
are done on the exact integer ``sum(k**2)``, which makes the classification
invariant under coordinate permutations and sign flips.
"""
from __future__ import annotations

import itertools
from functools import cached_property, lru_cache

import numpy as np

from .errors import ConfigurationError, ShapeError

INTERIOR, BAND, EXTERIOR = 0, 1, 2
BALL_VOLUME = np.pi**2 / 2
SPHERE_AREA = 2 * np.pi**2

QUADRATURE_RULES = ("partial-cell", "indicator")


class Grid4:
    """Immutable lattice of ``N**4`` nodes with spacing ``h = 2 / (N - 1)``.

    Tags: interior ``|x| <= 1 - 2h``, band ``1 - 2h < |x| <= 1 + 2h``,
    exterior otherwise.  Band values are prescribed by boundary data and
    never evolved.
    """

    def __init__(self, N: int):
        self.N = int(N)
        self.c = (self.N - 1) // 2
        self.h = 2.0 / (self.N - 1)
        self.shape = (self.N,) * 4
        self.size = self.N**4

        k = np.arange(self.N, dtype=np.int64) - self.c
        k0, k1, k2, k3 = np.meshgrid(k, k, k, k, indexing="ij", sparse=True)
        self.r2_index = k0 * k0 + k1 * k1 + k2 * k2 + k3 * k3
        c = self.c

        tags = np.full(self.shape, EXTERIOR, dtype=np.int8)
        tags[self.r2_index <= (c + 2) ** 2] = BAND
        tags[self.r2_index <= (c - 2) ** 2] = INTERIOR
        self.tags = tags

        self.interior = tags == INTERIOR
        self.band = tags == BAND
        self.exterior = tags == EXTERIOR
        self.nonexterior = ~self.exterior
        self.deep = self.r2_index <= (c - 4) ** 2 if c >= 4 else np.zeros(self.shape, bool)

        # flat neighbour offsets: +e0, -e0, +e1, -e1, ...
        strides = [self.N**3, self.N**2, self.N, 1]
        self.strides = np.array(strides, dtype=np.int64)
        self.neighbor_offsets = np.array(
            [s * sgn for s in strides for sgn in (1, -1)], dtype=np.int64
        )

        lap_ok = self.nonexterior.copy()
        for axis in range(4):
            lap_ok &= _shifted(self.nonexterior, axis, +1)
            lap_ok &= _shifted(self.nonexterior, axis, -1)
        self.lap_ok = lap_ok

        self.weights_indicator = np.where(self.r2_index < c * c, self.h**4, 0.0)
        self.weights_partial = self._partial_cell_weights()
        self.weights = self.weights_partial
        self.weights_lap = np.where(self.lap_ok, self.weights, 0.0)
        self.weights_deep = np.where(self.deep, self.weights, 0.0)

        for arr in (self.r2_index, self.tags, self.interior, self.band, self.exterior,
                    self.nonexterior, self.deep, self.lap_ok, self.weights_indicator,
                    self.weights_partial, self.weights_lap, self.weights_deep):
            arr.flags.writeable = False

    def _partial_cell_weights(self) -> np.ndarray:
        # subsample centres at x + (+-h/4)^4; |x+o|^2 < 1  <=>  sum (4k +- 1)^2 < 16 c^2
        c = self.c
        k = np.arange(self.N, dtype=np.int64) - c
        count = np.zeros(self.shape, dtype=np.int64)
        limit = 16 * c * c
        for signs in itertools.product((-1, 1), repeat=4):
            parts = [(4 * k + s) ** 2 for s in signs]
            g = np.meshgrid(*parts, indexing="ij", sparse=True)
            count += (g[0] + g[1] + g[2] + g[3]) < limit
        return count * (self.h**4 / 16.0)

    # -- coordinates -------------------------------------------------------
    @cached_property
    def x(self) -> np.ndarray:
        """Node coordinates, shape ``(4, N, N, N, N)``."""
        k = (np.arange(self.N) - self.c) * self.h
        out = np.stack(np.meshgrid(k, k, k, k, indexing="ij"))
        out.flags.writeable = False
        return out

    @cached_property
    def r(self) -> np.ndarray:
        out = self.h * np.sqrt(self.r2_index.astype(np.float64))
        out.flags.writeable = False
        return out

    # -- flat index sets used by the kernels --------------------------------
    @cached_property
    def interior_idx(self) -> np.ndarray:
        return _flat_index(self.interior)

    @cached_property
    def band_idx(self) -> np.ndarray:
        return _flat_index(self.band)

    @cached_property
    def lap_idx(self) -> np.ndarray:
        return _flat_index(self.lap_ok)

    @cached_property
    def deep_idx(self) -> np.ndarray:
        return _flat_index(self.deep)

    @cached_property
    def support_idx(self) -> np.ndarray:
        return _flat_index(self.weights_partial > 0)

    @cached_property
    def lap_weights(self) -> np.ndarray:
        """``weights_lap`` gathered at ``lap_idx`` (contiguous)."""
        out = np.ascontiguousarray(self.weights_lap.reshape(-1)[self.lap_idx])
        out.flags.writeable = False
        return out

    @cached_property
    def interior_weights(self) -> np.ndarray:
        out = np.ascontiguousarray(self.weights.reshape(-1)[self.interior_idx])
        out.flags.writeable = False
        return out

    @cached_property
    def interior_pos(self) -> np.ndarray:
        """Position of each interior node inside ``lap_idx``."""
        pos = np.searchsorted(self.lap_idx, self.interior_idx).astype(np.int64)
        pos.flags.writeable = False
        return pos

    def weight_table(self, rule: str = "partial-cell") -> np.ndarray:
        if rule == "partial-cell":
            return self.weights_partial
        if rule == "indicator":
            return self.weights_indicator
        raise ConfigurationError(f"unknown quadrature rule {rule!r}")

    def integrate(self, s, weights=None) -> float:
        """Weighted sum ``sum(w * s)`` over the nodes where ``w > 0``.

        The reduction runs over a contiguous gather in fixed node order, so
        numpy's pairwise summation makes the result bit-reproducible.
        """
        s = np.asarray(s, dtype=np.float64)
        if s.shape != self.shape:
            raise ShapeError(f"scalar field of shape {s.shape} on grid of shape {self.shape}")
        w = self.weights if weights is None else np.asarray(weights)
        if w.shape != self.shape:
            raise ShapeError(f"weight table of shape {w.shape} on grid of shape {self.shape}")
        if w is self.weights or w is self.weights_partial:
            idx = self.support_idx
        else:
            idx = _flat_index(w != 0)
        return float(np.sum(w.reshape(-1)[idx] * s.reshape(-1)[idx]))

    def __repr__(self):
        return f"Grid4(N={self.N}, h={self.h:g})"


def _shifted(mask: np.ndarray, axis: int, step: int) -> np.ndarray:
    """``out[i] = mask[i + step]`` along ``axis``; False past the lattice edge."""
    out = np.zeros_like(mask)
    src = [slice(None)] * 4
    dst = [slice(None)] * 4
    if step > 0:
        dst[axis] = slice(None, -step)
        src[axis] = slice(step, None)
    else:
        dst[axis] = slice(-step, None)
        src[axis] = slice(None, step)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def _flat_index(mask: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(mask.reshape(-1)).astype(np.int64)
    idx.flags.writeable = False
    return idx


def count_inside_unit_ball(N: int) -> int:
    """Number of lattice nodes of ``{-1, ..., 1}``-spaced grid with ``|x| < 1``."""
    c = (N - 1) / 2
    k = np.arange(N) - c
    g = np.meshgrid(k, k, k, k, indexing="ij", sparse=True)
    return int(np.count_nonzero(sum(a * a for a in g) < c * c))


@lru_cache(maxsize=8)
def build_grid(N: int) -> Grid4:
    """Classified grid with both quadrature rules precomputed (cached per ``N``)."""
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool):
        raise ConfigurationError(f"N must be an integer, got {N!r}")
    if N < 5 or N % 2 == 0:
        raise ConfigurationError(f"N must be odd >= 5, got {N}")
    return Grid4(int(N))


def integrate(g: Grid4, s, rule: str | None = None) -> float:
    """Module-level form of :meth:`Grid4.integrate` with a named rule."""
    weights = None if rule is None else g.weight_table(rule)
    return g.integrate(s, weights)
