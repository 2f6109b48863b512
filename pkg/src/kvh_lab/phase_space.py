"""Phase-space grids, quadrature and 4th-order finite differences.

Axes are ordered q1..qn, p1..pn. Grid points include both endpoints of
every axis; quadrature uses the rectangle rule with half weights on the
boundary faces, so the total weight equals the domain volume.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ._backend import get_kernels
from .errors import GridMismatch, KvhLabError


@dataclass(frozen=True)
class PhasePoint:
    q: tuple
    p: tuple

    def __post_init__(self):
        q = tuple(float(v) for v in np.atleast_1d(self.q))
        p = tuple(float(v) for v in np.atleast_1d(self.p))
        if len(q) != len(p) or len(q) not in (1, 2, 3):
            raise ValueError("q and p must have equal length n in {1, 2, 3}")
        if not np.all(np.isfinite(q + p)):
            raise ValueError("phase point components must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return len(self.q)

    def as_array(self):
        return np.array(self.q + self.p)

    @classmethod
    def from_array(cls, z):
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(tuple(z[:n]), tuple(z[n:]))


def _broadcast(value, count, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, count)
    if arr.size != count:
        raise ValueError(f"{name} needs {count} entries, got {arr.size}")
    return arr


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform tensor-product grid on a box in R^(2n).

    ``lower``, ``upper`` and ``points`` accept a scalar (applied to all 2n
    axes) or one entry per axis.
    """

    n: int
    lower: tuple = field(default=-8.0)
    upper: tuple = field(default=8.0)
    points: tuple = field(default=64)

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError("n must be 1, 2 or 3")
        d = 2 * self.n
        lo = _broadcast(self.lower, d, "lower")
        hi = _broadcast(self.upper, d, "upper")
        pts = _broadcast(self.points, d, "points").astype(int)
        if np.any(pts < 8):
            raise ValueError("need at least 8 points per axis")
        if np.any(hi <= lo):
            raise ValueError("bounds must be strictly ordered")
        object.__setattr__(self, "lower", tuple(lo))
        object.__setattr__(self, "upper", tuple(hi))
        object.__setattr__(self, "points", tuple(int(v) for v in pts))

    @property
    def ndim(self):
        return 2 * self.n

    @property
    def shape(self):
        return self.points

    @property
    def size(self):
        return int(np.prod(self.points, dtype=np.int64))

    @property
    def spacing(self):
        return tuple((u - l) / (m - 1) for l, u, m in zip(self.lower, self.upper, self.points))

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def axis(self, a):
        return np.linspace(self.lower[a], self.upper[a], self.points[a])

    def mesh(self, a):
        """Coordinate of axis ``a`` shaped to broadcast against the grid."""
        shape = [1] * self.ndim
        shape[a] = self.points[a]
        return self.axis(a).reshape(shape)

    def coordinates(self):
        """Arrays q, p of shape grid.shape + (n,)."""
        full = [np.broadcast_to(self.mesh(a), self.shape) for a in range(self.ndim)]
        q = np.stack(full[: self.n], axis=-1)
        p = np.stack(full[self.n:], axis=-1)
        return q, p

    @cached_property
    def weights(self):
        w = np.ones(self.shape)
        for a, h in enumerate(self.spacing):
            wa = np.full(self.points[a], h)
            wa[0] = wa[-1] = 0.5 * h
            shape = [1] * self.ndim
            shape[a] = self.points[a]
            w = w * wa.reshape(shape)
        w.setflags(write=False)
        return w

    def boundary_band(self, width=2):
        """Boolean mask of points within ``width`` cells of any face."""
        mask = np.zeros(self.shape, dtype=bool)
        for a in range(self.ndim):
            idx = [slice(None)] * self.ndim
            idx[a] = slice(0, width)
            mask[tuple(idx)] = True
            idx[a] = slice(self.points[a] - width, None)
            mask[tuple(idx)] = True
        return mask

    def interior(self, width=2):
        return ~self.boundary_band(width)

    def covers(self, center, radius):
        c = np.asarray(center, dtype=float)
        return bool(np.all(c - radius >= np.array(self.lower)) and
                    np.all(c + radius <= np.array(self.upper)))


def grid_points(grid: PhaseGrid):
    """All grid nodes as an array of shape (size, 2n), lexicographic order."""
    axes = [grid.axis(a) for a in range(grid.ndim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _as_field(grid, samples):
    arr = np.asarray(samples)
    if arr.shape != grid.shape:
        if arr.size != grid.size:
            raise GridMismatch(
                f"sample count {arr.size} does not match grid size {grid.size}"
            )
        arr = arr.reshape(grid.shape)
    return arr


def integrate(grid: PhaseGrid, samples):
    """Quadrature of a field sampled on the grid."""
    arr = _as_field(grid, samples)
    # np.sum reduces with a fixed pairwise tree: bit-reproducible
    return np.sum(arr * grid.weights)


def partial_derivative(field, grid: PhaseGrid, axis: int, backend=None):
    """4th-order central derivative along ``axis``, zero outside the box."""
    if not 0 <= axis < grid.ndim:
        raise KvhLabError(f"axis {axis} out of range for a {grid.ndim}-d grid")
    arr = np.ascontiguousarray(_as_field(grid, field))
    if not np.iscomplexobj(arr):
        arr = arr.astype(np.float64)
    kern = get_kernels(backend)
    out = np.empty_like(arr)
    kern.fd_axis(_view3(arr, axis), 1.0 / grid.spacing[axis], _view3(out, axis))
    return out


def _view3(a, axis):
    s = a.shape
    outer = int(np.prod(s[:axis], dtype=np.int64))
    inner = int(np.prod(s[axis + 1:], dtype=np.int64))
    return a.reshape(outer, s[axis], inner)


def gradient(field, grid: PhaseGrid, axes: Sequence[int] | None = None):
    axes = range(grid.ndim) if axes is None else axes
    return [partial_derivative(field, grid, a) for a in axes]
