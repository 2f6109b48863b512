"""Catalogued Hamiltonians, observables, Poisson brackets and the
symplectic classical flow.

Every observable here exposes ``value(q, p)`` and ``grad(q, p)`` on
arrays whose last axis has length n, so the same objects can drive both
pointwise evaluation and grid operators.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels_numpy as _np_kernels
from ._backend import get_kernels
from .errors import SingularRegion
from .phase_space import PhasePoint

KINDS = ("harmonic", "anharmonic", "kepler_reduced", "free", "quadratic")
_CODES = {
    "harmonic": _np_kernels.HARMONIC,
    "anharmonic": _np_kernels.ANHARMONIC,
    "kepler_reduced": _np_kernels.KEPLER,
    "free": _np_kernels.FREE,
    "quadratic": _np_kernels.QUADRATIC,
}
METHODS = {"leapfrog": 0, "yoshida4": 1}


def _split(z, n=None):
    """Accept a PhasePoint, a (q, p) pair or an array (..., 2n)."""
    if isinstance(z, PhasePoint):
        return np.array(z.q), np.array(z.p)
    if isinstance(z, tuple) and len(z) == 2:
        return np.asarray(z[0], dtype=float), np.asarray(z[1], dtype=float)
    z = np.asarray(z, dtype=float)
    m = z.shape[-1] // 2
    return z[..., :m], z[..., m:]


@dataclass(frozen=True)
class HamiltonianModel:
    """A catalogued separable Hamiltonian H(q, p).

    harmonic        H = |p|^2 + k|q|^2/2
    anharmonic      H = |p|^2 - a|q|^2 + b|q|^4
    kepler_reduced  H = |p|^2/(2 mu) - lam/|q|,  evaluated only for |q| >= r_min
    free            H = |p|^2/(2 m)
    quadratic       H = sum_i alpha_i q_i^2 + beta_i p_i^2
    """

    kind: str
    n: int = 3
    k: float = 1.0
    a: float = 0.0
    b: float = 1.0
    mu: float = 1.0
    lam: float = 1.0
    r_min: float = 1e-3
    m: float = 1.0
    alpha: tuple = ()
    beta: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.n not in (1, 2, 3):
            raise ValueError("n must be 1, 2 or 3")
        if self.kind == "harmonic" and not self.k > 0:
            raise ValueError("harmonic needs k > 0")
        if self.kind == "anharmonic" and not self.b > 0:
            raise ValueError("anharmonic needs b > 0")
        if self.kind == "kepler_reduced" and not (self.mu > 0 and self.lam > 0 and self.r_min > 0):
            raise ValueError("kepler_reduced needs mu, lam, r_min > 0")
        if self.kind == "free" and not self.m > 0:
            raise ValueError("free needs m > 0")
        if self.kind == "quadratic":
            al = tuple(float(v) for v in np.broadcast_to(np.asarray(self.alpha or 0.0, float), (self.n,)))
            be = tuple(float(v) for v in np.broadcast_to(np.asarray(self.beta or 0.0, float), (self.n,)))
            object.__setattr__(self, "alpha", al)
            object.__setattr__(self, "beta", be)

    # convenience constructors
    @classmethod
    def harmonic(cls, n=1, k=1.0):
        return cls("harmonic", n=n, k=k)

    @classmethod
    def anharmonic(cls, n=1, a=1.0, b=1.0):
        return cls("anharmonic", n=n, a=a, b=b)

    @classmethod
    def kepler(cls, n=3, mu=1.0, lam=1.0, r_min=1e-3):
        return cls("kepler_reduced", n=n, mu=mu, lam=lam, r_min=r_min)

    @classmethod
    def free(cls, n=1, m=1.0):
        return cls("free", n=n, m=m)

    @classmethod
    def quadratic(cls, alpha, beta):
        alpha = tuple(np.atleast_1d(alpha).astype(float))
        beta = tuple(np.atleast_1d(beta).astype(float))
        return cls("quadratic", n=len(alpha), alpha=alpha, beta=beta)

    @property
    def code(self):
        return _CODES[self.kind]

    @property
    def params(self):
        if self.kind == "harmonic":
            return np.array([self.k])
        if self.kind == "anharmonic":
            return np.array([self.a, self.b])
        if self.kind == "kepler_reduced":
            return np.array([self.mu, self.lam, self.r_min])
        if self.kind == "free":
            return np.array([self.m])
        return np.array(self.alpha + self.beta)

    @property
    def is_quadratic(self):
        return self.kind in ("harmonic", "free", "quadratic")

    def _check(self, q):
        if self.kind != "kepler_reduced":
            return
        r = np.sqrt(np.sum(q * q, axis=-1))
        if np.any(r < self.r_min):
            bad = np.argwhere(np.atleast_1d(r < self.r_min))[0]
            raise SingularRegion(
                f"|q| < r_min = {self.r_min:g} for the Kepler model", point=tuple(bad)
            )

    def evaluate(self, q, p):
        """Return (H, dH/dq, dH/dp, a) with a = H - z.grad(H)/2."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        self._check(q)
        return _np_kernels.evaluate(self.code, self.params, self.n, q, p)

    def value(self, q, p):
        return self.evaluate(q, p)[0]

    def grad(self, q, p):
        _, gq, gp, _ = self.evaluate(q, p)
        return gq, gp

    def phase_term(self, q, p):
        return self.evaluate(q, p)[3]


@dataclass(frozen=True)
class LinearObservable:
    """A(q, p) = c_q.q + c_p.p."""

    c_q: tuple
    c_p: tuple

    @property
    def n(self):
        return len(self.c_q)

    def value(self, q, p):
        return np.asarray(q) @ np.asarray(self.c_q, float) + np.asarray(p) @ np.asarray(self.c_p, float)

    def grad(self, q, p):
        q = np.asarray(q, dtype=float)
        gq = np.broadcast_to(np.asarray(self.c_q, float), q.shape)
        gp = np.broadcast_to(np.asarray(self.c_p, float), q.shape)
        return gq, gp


@dataclass(frozen=True)
class AngularMomentumObservable:
    """J(q, p) = (q x p).xi; for n = 2 only the third component exists."""

    xi: tuple = (0.0, 0.0, 1.0)
    n: int = 3

    def value(self, q, p):
        q = np.asarray(q, float)
        p = np.asarray(p, float)
        if self.n == 2:
            return self.xi[2] * (q[..., 0] * p[..., 1] - q[..., 1] * p[..., 0])
        return np.cross(q, p) @ np.asarray(self.xi, float)

    def grad(self, q, p):
        q = np.asarray(q, float)
        p = np.asarray(p, float)
        if self.n == 2:
            c = self.xi[2]
            gq = c * np.stack([p[..., 1], -p[..., 0]], axis=-1)
            gp = c * np.stack([-q[..., 1], q[..., 0]], axis=-1)
            return gq, gp
        xi = np.broadcast_to(np.asarray(self.xi, float), q.shape)
        return np.cross(p, xi), np.cross(xi, q)


@dataclass(frozen=True)
class ConstantObservable:
    """A(q, p) = c; its Hamiltonian vector field vanishes."""

    c: float
    n: int = 1

    def value(self, q, p):
        return np.full(np.shape(q)[:-1], float(self.c))

    def grad(self, q, p):
        z = np.zeros(np.shape(q), dtype=float)
        return z, z


# --- pointwise operations ------------------------------------------------

def h_value(model, z):
    q, p = _split(z)
    return model.value(q, p)


def h_grad(model, z):
    q, p = _split(z)
    return model.grad(q, p)


def hamiltonian_vector_field(model, z):
    """X_H = (dH/dp, -dH/dq)."""
    gq, gp = h_grad(model, z)
    return np.asarray(gp), -np.asarray(gq)


def poisson_bracket(f_grad, g_grad):
    """{F, G} = dF/dq.dG/dp - dF/dp.dG/dq from gradient pairs (dq, dp)."""
    fq, fp = (np.asarray(v, float) for v in f_grad)
    gq, gp = (np.asarray(v, float) for v in g_grad)
    if fq.shape[-1] != gq.shape[-1] or fp.shape != fq.shape or gp.shape != gq.shape:
        raise ValueError("gradient dimensions do not match")
    return np.sum(fq * gp, axis=-1) - np.sum(fp * gq, axis=-1)


def kvh_phase_term(model, z):
    """a(z) = H - (q.dH/dq + p.dH/dp)/2 for any observable."""
    q, p = _split(z)
    if isinstance(model, HamiltonianModel):
        return model.phase_term(q, p)
    gq, gp = model.grad(q, p)
    return model.value(q, p) - 0.5 * (np.sum(q * gq, axis=-1) + np.sum(p * gp, axis=-1))


def vector_field_on_grid(model, grid):
    """Stacked X_H components, shape (2n,) + grid.shape."""
    q, p = grid.coordinates()
    gq, gp = model.grad(q, p)
    x = np.empty((grid.ndim,) + grid.shape)
    for i in range(grid.n):
        x[i] = gp[..., i]
        x[grid.n + i] = -gq[..., i]
    return x


def phase_term_on_grid(model, grid):
    q, p = grid.coordinates()
    return np.ascontiguousarray(np.broadcast_to(kvh_phase_term(model, (q, p)), grid.shape))


# --- classical flow ------------------------------------------------------

def _run(model, z, dt, nsteps, method, backend):
    if not isinstance(model, HamiltonianModel):
        raise TypeError("the classical flow needs a catalogued HamiltonianModel")
    kern = get_kernels(backend)
    return kern.integrate_flow(model.code, model.params, model.n, z, dt, nsteps, METHODS[method])


def flow_step(model, z, dt, method="leapfrog", backend=None):
    """One position-Verlet step (negative dt flows backward)."""
    zz = np.atleast_2d(np.asarray(_to_array(z), dtype=float))
    out, _, status, _ = _run(model, zz, dt, 1, method, backend)
    if status[0]:
        raise SingularRegion("trajectory entered |q| < r_min", time=0.0, point=tuple(zz[0]))
    return out[0]


def _to_array(z):
    if isinstance(z, PhasePoint):
        return z.as_array()
    if isinstance(z, tuple) and len(z) == 2:
        return np.concatenate([np.atleast_1d(z[0]), np.atleast_1d(z[1])]).astype(float)
    return np.asarray(z, dtype=float)


def n_steps(t, dt):
    """Number of steps of size |dt| covering |t| (t must be a multiple)."""
    if t == 0:
        return 0
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = int(round(abs(t) / dt))
    if k > 1_000_000_000:
        raise ValueError("t/dt exceeds 1e9 steps")
    if abs(k * dt - abs(t)) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t} is not an integer multiple of dt={dt}")
    return k


def flow_to(model, z, t, dt, method="leapfrog", backend=None):
    """Flow z for time t (any sign) with steps of size dt > 0.

    Returns (endpoint, accumulated phase) where the phase is the integral
    of a(z(s)) from 0 to t, taken with the midpoint rule at half steps.
    """
    k = n_steps(t, dt)
    zz = np.atleast_2d(_to_array(z))
    if k == 0:
        return zz[0].copy(), 0.0
    h = np.copysign(abs(t) / k, t)
    out, theta, status, abort = _run(model, zz, h, k, method, backend)
    if status[0]:
        raise SingularRegion(
            f"trajectory entered |q| < r_min at t = {abort[0] * h:.6g}",
            time=float(abort[0] * h),
            point=tuple(zz[0]),
        )
    return out[0], float(theta[0])


def flow_batch(model, z, t, dt, method="leapfrog", backend=None):
    """Vectorized flow_to over rows of z; aborted rows are flagged, not raised."""
    k = n_steps(t, dt)
    zz = np.atleast_2d(np.asarray(z, dtype=float))
    if k == 0:
        m = zz.shape[0]
        return zz.copy(), np.zeros(m), np.zeros(m, np.int8), np.full(m, -1)
    h = np.copysign(abs(t) / k, t)
    return _run(model, zz, h, k, method, backend)
