"""Classical wavefunctions on a phase-space grid, inner products and
the KvN / KvH densities."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainTooSmall, GridMismatch
from .phase_space import PhaseGrid, grid_points, integrate, partial_derivative


@dataclass(frozen=True, eq=False)
class GridWaveFunction:
    grid: PhaseGrid
    values: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.size != self.grid.size:
            raise GridMismatch(f"{v.size} values for a grid of {self.grid.size} points")
        v = np.ascontiguousarray(v.reshape(self.grid.shape))
        if not np.all(np.isfinite(v)):
            raise ValueError("wavefunction values must be finite")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values):
        return GridWaveFunction(self.grid, values, self.hbar)

    def conj(self):
        return self.with_values(np.conj(self.values))

    def __add__(self, other):
        _same(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _same(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class InitialStateSpec:
    """Isotropic Gaussian exp(-|z - z0|^2 / (4 sigma^2)) e^{i k.z}."""

    center: tuple
    width: float
    phase_wavevector: tuple | None = None
    kind: str = "gaussian"

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) % 2 or len(c) // 2 not in (1, 2, 3):
            raise ValueError("center must have 2n entries, n in {1, 2, 3}")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if self.kind != "gaussian":
            raise ValueError("only gaussian initial states are supported")
        k = self.phase_wavevector
        k = (0.0,) * len(c) if k is None else tuple(float(v) for v in np.atleast_1d(k))
        if len(k) != len(c):
            raise ValueError("phase_wavevector must have 2n entries")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "phase_wavevector", k)

    @property
    def n(self):
        return len(self.center) // 2

    @property
    def norm_constant(self):
        """Analytic normalization (2 pi sigma^2)^(-n/2) of the continuum state."""
        return (2.0 * np.pi * self.width**2) ** (-self.n / 2.0)

    def envelope(self, z):
        d = np.asarray(z, dtype=float) - np.asarray(self.center)
        return np.exp(-np.sum(d * d, axis=-1) / (4.0 * self.width**2))

    def evaluate(self, z, normalization=None):
        """Closed-form value at points z (..., 2n)."""
        z = np.asarray(z, dtype=float)
        c = self.norm_constant if normalization is None else normalization
        phase = z @ np.asarray(self.phase_wavevector)
        return c * self.envelope(z) * np.exp(1j * phase)

    def density_kvn(self, z):
        return np.abs(self.evaluate(z)) ** 2

    def density_kvh(self, z, hbar=1.0):
        """Closed form of the symplectic KvH density (see ``density_kvh``).

        With rho = |chi|^2, grad rho = -(z - z0) rho / sigma^2 and a constant
        phase gradient k, the density is
        rho [1 + n - (z - z0).z / (2 sigma^2) - hbar (J k).(z - z0) / sigma^2],
        J k = (k_p, -k_q).
        """
        z = np.asarray(z, dtype=float)
        n = self.n
        d = z - np.asarray(self.center)
        k = np.asarray(self.phase_wavevector)
        jk = np.concatenate([k[n:], -k[:n]])
        s2 = self.width**2
        rho = self.density_kvn(z)
        return rho * (1.0 + n - np.sum(d * z, axis=-1) / (2 * s2) - hbar * (d @ jk) / s2)


def _same(a, b):
    if a.grid != b.grid:
        raise GridMismatch("wavefunctions live on different grids")
    if a.hbar != b.hbar:
        raise GridMismatch("wavefunctions carry different hbar")


def make_initial(spec: InitialStateSpec, grid: PhaseGrid, hbar: float = 1.0):
    """Sample ``spec`` on ``grid`` and normalize by quadrature."""
    if spec.n != grid.n:
        raise GridMismatch("state and grid dimensions differ")
    if not grid.covers(spec.center, 6.0 * spec.width):
        raise DomainTooSmall(
            f"grid does not cover +-6 sigma = {6 * spec.width:g} around {spec.center}"
        )
    z = grid_points(grid).reshape(grid.shape + (grid.ndim,))
    vals = spec.evaluate(z, normalization=1.0)
    nrm = np.sqrt(integrate(grid, np.abs(vals) ** 2).real)
    return GridWaveFunction(grid, vals / nrm, hbar)


def inner(a: GridWaveFunction, b: GridWaveFunction):
    """<a|b> = integral of conj(a) b."""
    _same(a, b)
    return integrate(a.grid, np.conj(a.values) * b.values)


def norm_sq(chi: GridWaveFunction):
    return float(integrate(chi.grid, (chi.values.real**2 + chi.values.imag**2)))


def expectation(applied: GridWaveFunction, chi: GridWaveFunction):
    """<chi|A chi> given applied = A chi."""
    return inner(chi, applied)


def boundary_ratio(chi: GridWaveFunction, width=2):
    """max |chi| on the boundary band relative to max |chi|."""
    mag = np.abs(chi.values)
    top = mag.max()
    if top == 0:
        return 0.0
    return float(mag[chi.grid.boundary_band(width)].max() / top)


def density_kvn(chi: GridWaveFunction):
    return chi.values.real**2 + chi.values.imag**2


def _current(chi):
    """Symplectic density current j = z|chi|^2/2 + hbar J Im(chi* grad chi)."""
    g = chi.grid
    n = g.n
    rho = density_kvn(chi)
    u = [np.imag(np.conj(chi.values) * partial_derivative(chi.values, g, a))
         for a in range(g.ndim)]
    j = []
    for a in range(g.ndim):
        ju = u[a + n] if a < n else -u[a - n]
        j.append(0.5 * g.mesh(a) * rho + chi.hbar * ju)
    return j


def density_kvh(chi: GridWaveFunction):
    """KvH density rho = |chi|^2 + div(z|chi|^2/2 + hbar J Im(chi* grad chi)).

    This is the density whose pairing with any observable F reproduces
    <chi|L_F chi>, in particular integral(H rho) = <chi|L_H chi>. For real
    chi it coincides with ``density_kvh_literal``.
    """
    g = chi.grid
    rho = density_kvn(chi)
    for a, ja in enumerate(_current(chi)):
        rho = rho + partial_derivative(ja, g, a)
    return rho


def density_kvh_literal(chi: GridWaveFunction, real_part=True):
    """|chi|^2 + div(chi* (z chi/2 + i hbar grad chi)), as a complex field
    when ``real_part`` is False."""
    g = chi.grid
    c = chi.values
    out = density_kvn(chi).astype(np.complex128)
    for a in range(g.ndim):
        j = np.conj(c) * (0.5 * g.mesh(a) * c + 1j * chi.hbar * partial_derivative(c, g, a))
        out = out + partial_derivative(j, g, a)
    return out.real if real_part else out


def kvh_literal_residue(chi: GridWaveFunction):
    """Imaginary part of the literal divergence form; analytically equal to
    (hbar/2) Laplacian |chi|^2."""
    return density_kvh_literal(chi, real_part=False).imag


def to_csv(chi: GridWaveFunction, path):
    """Snapshot with columns z1..z2n, re, im in lexicographic order."""
    pts = grid_points(chi.grid)
    vals = chi.values.reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"z{i + 1}" for i in range(chi.grid.ndim)] + ["re", "im"])
        for row, v in zip(pts, vals):
            w.writerow([f"{x:.17g}" for x in row] + [f"{v.real:.17g}", f"{v.imag:.17g}"])
