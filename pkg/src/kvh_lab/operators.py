"""Operator algebra on grid wavefunctions.

Position Z, momentum Lambda = -i hbar grad, the KvN Liouvillian
L_H = X_H . Lambda, the van Hove Liouvillian L_H + a(z), the KvH angular
and linear momenta, momentum-map generators and the rotation action.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import KvhLabError, SupportEscapesDomain, UnsupportedDimension
from .hamiltonians import phase_term_on_grid, vector_field_on_grid
from .phase_space import partial_derivative
from .wavefunction import GridWaveFunction


def _d(chi, axis):
    return partial_derivative(chi.values, chi.grid, axis)


# --- primitives ----------------------------------------------------------

def apply_primitive(kind, axis, chi: GridWaveFunction):
    g = chi.grid
    if not 0 <= axis < g.ndim:
        raise KvhLabError(f"axis {axis} out of range for a {g.ndim}-d grid")
    z = g.mesh(axis)
    if kind == "position_Z":
        return chi.with_values(z * chi.values)
    if kind == "momentum_Lambda":
        return chi.with_values(-1j * chi.hbar * _d(chi, axis))
    if kind == "zeta_Z":
        return chi.with_values(0.5 * z * chi.values + 1j * chi.hbar * _d(chi, axis))
    raise ValueError(f"unknown primitive {kind!r}")


def commutator_residual(m, chi: GridWaveFunction, pair="canonical", other=None):
    """Max-norm residual of a canonical commutation relation on the interior,
    normalized by max|chi|.

    pair="canonical": [Z_m, Lambda_m] chi - i hbar chi
    pair="ZZ":        [Z_m, Z_other] chi
    pair="LL":        [Lambda_m, Lambda_other] chi
    """
    def op(kind, ax, f):
        return apply_primitive(kind, ax, f)

    if pair == "canonical":
        a, b, ax2 = "position_Z", "momentum_Lambda", m
    elif pair == "ZZ":
        a, b, ax2 = "position_Z", "position_Z", other
    elif pair == "LL":
        a, b, ax2 = "momentum_Lambda", "momentum_Lambda", other
    else:
        raise ValueError(f"unknown commutator pair {pair!r}")
    if pair == "ZZ":
        # products of the coordinate fields are formed first; IEEE
        # multiplication commutes but does not associate
        g = chi.grid
        res = (g.mesh(m) * g.mesh(ax2)) * chi.values - (g.mesh(ax2) * g.mesh(m)) * chi.values
    else:
        res = op(a, m, op(b, ax2, chi)).values - op(b, ax2, op(a, m, chi)).values
    if pair == "canonical":
        res = res - 1j * chi.hbar * chi.values
    top = np.abs(chi.values).max()
    if top == 0:
        return 0.0
    return float(np.abs(res[chi.grid.interior(2)]).max() / top)


# --- Liouvillians --------------------------------------------------------

@lru_cache(maxsize=16)
def grid_fields(model, grid):
    """(X_H components, phase term) sampled on the grid, read-only."""
    x = vector_field_on_grid(model, grid)
    a = phase_term_on_grid(model, grid)
    x.setflags(write=False)
    a.setflags(write=False)
    return x, a


def kvn_liouvillian(model, chi: GridWaveFunction):
    """-i hbar X_H . grad chi."""
    x, _ = grid_fields(model, chi.grid)
    out = np.zeros(chi.grid.shape, dtype=np.complex128)
    for ax in range(chi.grid.ndim):
        out = out + x[ax] * (-1j * chi.hbar * _d(chi, ax))
    return chi.with_values(out)


def phase_multiplier(model, chi: GridWaveFunction):
    """a(z) chi with a = H - z.grad(H)/2."""
    _, a = grid_fields(model, chi.grid)
    return chi.with_values(a * chi.values)


def kvh_liouvillian(model, chi: GridWaveFunction):
    """van Hove Liouvillian: kvn_liouvillian + a(z) chi."""
    return chi.with_values(kvn_liouvillian(model, chi).values + phase_multiplier(model, chi).values)


def liouvillian(model, chi, formalism="kvh"):
    if formalism == "kvh":
        return kvh_liouvillian(model, chi)
    if formalism == "kvn":
        return kvn_liouvillian(model, chi)
    raise ValueError(f"formalism must be 'kvn' or 'kvh', got {formalism!r}")


# --- momenta -------------------------------------------------------------

def _cross_fields(chi):
    """Components of (d_q chi x q + d_p chi x p); one entry for n = 2."""
    g = chi.grid
    n = g.n
    if n == 1:
        raise UnsupportedDimension("angular momentum needs n >= 2")
    dq = [_d(chi, i) for i in range(n)]
    dp = [_d(chi, n + i) for i in range(n)]
    q = [g.mesh(i) for i in range(n)]
    p = [g.mesh(n + i) for i in range(n)]

    def cross(a, b, i, j):
        return a[i] * b[j] - a[j] * b[i]

    if n == 2:
        return [cross(dp, p, 0, 1) + cross(dq, q, 0, 1)]
    return [cross(dp, p, (c + 1) % 3, (c + 2) % 3) + cross(dq, q, (c + 1) % 3, (c + 2) % 3)
            for c in range(3)]


def angular_momentum(chi: GridWaveFunction):
    """L chi = i hbar (d_p chi x p + d_q chi x q); n = 2 returns only the
    third component."""
    return [chi.with_values(1j * chi.hbar * f) for f in _cross_fields(chi)]


def linear_momentum(variant, chi: GridWaveFunction):
    """kvh: -i hbar d_q chi + p chi / 2;  kvn: -i hbar d_q chi."""
    g = chi.grid
    out = []
    for i in range(g.n):
        base = -1j * chi.hbar * _d(chi, i)
        if variant == "kvh":
            base = base + 0.5 * g.mesh(g.n + i) * chi.values
        elif variant != "kvn":
            raise ValueError(f"variant must be 'kvh' or 'kvn', got {variant!r}")
        out.append(chi.with_values(base))
    return out


def generator(kind, xi, chi: GridWaveFunction):
    """Momentum-map generators.

    A_xi chi = xi.(d_q chi x q + d_p chi x p), so that L_xi = i hbar A_xi.
    B_xi chi = (-d_q chi - (i/(2 hbar)) p chi).xi, so that P_xi = i hbar B_xi.
    For n = 2, A_xi uses only the third component of xi.
    """
    g = chi.grid
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if kind == "A_xi":
        comps = _cross_fields(chi)
        if g.n == 2:
            return chi.with_values(xi[-1] * comps[0])
        if xi.size != 3:
            raise ValueError("xi must be a 3-vector")
        return chi.with_values(sum(x * c for x, c in zip(xi, comps)))
    if kind == "B_xi":
        if xi.size != g.n:
            raise ValueError(f"xi must have {g.n} entries")
        out = np.zeros(g.shape, dtype=np.complex128)
        for i in range(g.n):
            term = -_d(chi, i) - (0.5j / chi.hbar) * g.mesh(g.n + i) * chi.values
            out = out + xi[i] * term
        return chi.with_values(out)
    raise ValueError(f"unknown generator {kind!r}")


# --- group actions -------------------------------------------------------

def rotation_matrix(xi, angle):
    """exp(angle * hat(xi)) for a unit axis xi (Rodrigues formula)."""
    xi = np.asarray(xi, dtype=float)
    xi = xi / np.linalg.norm(xi)
    k = np.array([[0, -xi[2], xi[1]], [xi[2], 0, -xi[0]], [-xi[1], xi[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def _block_rotation(R, n):
    R = np.asarray(R, dtype=float)
    if n == 3:
        if R.shape != (3, 3):
            raise ValueError("need a 3x3 rotation")
        return R
    if n == 2:
        if R.shape == (3, 3):
            if not np.allclose(R[2], [0, 0, 1]) or not np.allclose(R[:, 2], [0, 0, 1]):
                raise UnsupportedDimension("for n = 2 only rotations about the third axis act")
            R = R[:2, :2]
        if R.shape != (2, 2):
            raise ValueError("need a 2x2 rotation")
        return R
    raise UnsupportedDimension("rotations need n >= 2")


def _resample_block(values, grid, R, offset, order=3):
    """values(x) -> values(R^-1 x) on the axes offset..offset+n-1."""
    n = grid.n
    lo = np.array(grid.lower[offset:offset + n])
    h = np.array(grid.spacing[offset:offset + n])
    pts = np.stack(np.meshgrid(*[grid.axis(offset + i) for i in range(n)], indexing="ij"), axis=-1)
    src = pts @ np.linalg.inv(R).T
    coords = ((src - lo) / h).reshape(-1, n).T
    moved = np.moveaxis(values, list(range(offset, offset + n)), list(range(n)))
    block = moved.shape[:n]
    rest = moved.reshape(block + (-1,))
    out = np.empty_like(rest)
    for j in range(rest.shape[-1]):
        out[..., j] = ndimage.map_coordinates(
            rest[..., j], coords, order=order, mode="grid-constant", cval=0.0
        ).reshape(block)
    return np.moveaxis(out.reshape(moved.shape), list(range(n)), list(range(offset, offset + n)))


def _check_support(chi, maps, tol=1e-8):
    g = chi.grid
    mag = np.abs(chi.values)
    keep = mag > tol * mag.max()
    q, p = g.coordinates()
    z = np.concatenate([q[keep], p[keep]], axis=-1)
    img = maps(z)
    lo, hi = np.array(g.lower), np.array(g.upper)
    if np.any(img < lo) or np.any(img > hi):
        raise SupportEscapesDomain("transformed support leaves the grid")


def rotation_action(R, chi: GridWaveFunction, order=5):
    """Pullback chi(R^-1 q, R^-1 p), resampled with splines.

    Quintic by default: cubic splines (order=3) already keep the 4th-order
    stencils meaningful downstream, but leave ~1e-4 composition errors at
    the grid spacings used in tests.
    """
    g = chi.grid
    R = _block_rotation(R, g.n)
    if np.array_equal(R, np.eye(g.n)):
        return chi.with_values(chi.values.copy())
    n = g.n
    _check_support(chi, lambda z: np.concatenate([z[:, :n] @ R.T, z[:, n:] @ R.T], axis=1))
    if order not in (3, 4, 5):
        raise ValueError("spline order must be 3, 4 or 5")
    vals = _resample_block(np.asarray(chi.values), g, R, 0, order)
    vals = _resample_block(vals, g, R, n, order)
    return chi.with_values(vals)


def translation_action(v, chi: GridWaveFunction, phase_sign=-1.0):
    """Candidate translation action e^{s (i/(2 hbar)) p.v} chi(q - v, p), s = phase_sign.

    s = -1 is the sign whose generator is B_xi above; s = +1 is the
    alternative written in some references. Used only for reporting.
    """
    g = chi.grid
    v = np.atleast_1d(np.asarray(v, dtype=float))
    _check_support(chi, lambda z: np.concatenate([z[:, :g.n] + v, z[:, g.n:]], axis=1))
    shift = [v[i] / g.spacing[i] for i in range(g.n)] + [0.0] * g.n
    moved = ndimage.shift(np.asarray(chi.values), shift, order=3, mode="grid-constant", cval=0.0)
    pv = sum(g.mesh(g.n + i) * v[i] for i in range(g.n))
    return chi.with_values(np.exp(phase_sign * 0.5j * pv / chi.hbar) * moved)


def translation_generator_report(xi, chi: GridWaveFunction, t=1e-3):
    """Relative L2 mismatch between [T(t xi) chi - chi]/t and B_xi chi for
    both phase signs of the candidate action."""
    from .wavefunction import norm_sq

    b = generator("B_xi", xi, chi)
    scale = np.sqrt(norm_sq(b))
    out = {}
    for s in (-1.0, 1.0):
        fd = (translation_action(np.asarray(xi) * t, chi, s).values - chi.values) / t
        err = chi.with_values(fd - b.values)
        out["minus" if s < 0 else "plus"] = float(np.sqrt(norm_sq(err)) / scale)
    return out

