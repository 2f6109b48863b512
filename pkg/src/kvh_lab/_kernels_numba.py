"""numba-compiled versions of the hot kernels (see ``_kernels_numpy``).

Every kernel is parallel over independent points or grid rows, so the
results do not depend on the worker count.
"""
import numpy as np
from numba import njit, prange

from ._kernels_numpy import (  # noqa: F401  (shared constants and evaluators)
    ANHARMONIC,
    FREE,
    HARMONIC,
    KEPLER,
    OK,
    QUADRATIC,
    SINGULAR,
    YOSHIDA_W0,
    YOSHIDA_W1,
    evaluate,
    kinetic_part,
    potential_part,
)


# The characteristic kernels keep the state in padded 3-vectors of scalars
# (n <= 3); unused components are exactly zero and drop out of every sum.
# Passing arrays to non-inlined helpers costs reference counting on each
# call, which dominated the step time.

@njit(cache=True)
def _unpack(code, prm, n):
    c = np.zeros(8)
    if code == QUADRATIC:
        for i in range(n):
            c[i] = prm[i]
            c[3 + i] = prm[n + i]
    else:
        for i in range(prm.size):
            c[i] = prm[i]
    return c[0], c[1], c[2], c[3], c[4], c[5]


@njit(cache=True)
def _gq3(code, c0, c1, c2, q0, q1, q2):
    if code == HARMONIC:
        return c0 * q0, c0 * q1, c0 * q2
    if code == ANHARMONIC:
        r2 = q0 * q0 + q1 * q1 + q2 * q2
        f = -2.0 * c0 + 4.0 * c1 * r2
        return f * q0, f * q1, f * q2
    if code == KEPLER:
        r = np.sqrt(q0 * q0 + q1 * q1 + q2 * q2)
        f = c1 / (r * r * r)
        return f * q0, f * q1, f * q2
    if code == FREE:
        return 0.0, 0.0, 0.0
    return 2.0 * (c0 * q0), 2.0 * (c1 * q1), 2.0 * (c2 * q2)


@njit(cache=True)
def _gp3(code, c0, c3, c4, c5, p0, p1, p2):
    if code == HARMONIC or code == ANHARMONIC:
        return 2.0 * p0, 2.0 * p1, 2.0 * p2
    if code == KEPLER or code == FREE:
        return p0 / c0, p1 / c0, p2 / c0
    return 2.0 * (c3 * p0), 2.0 * (c4 * p1), 2.0 * (c5 * p2)


@njit(cache=True)
def _phase3(code, c0, c1, c2, c3, c4, c5, q0, q1, q2, g0, g1, g2,
            p0, p1, p2, h0, h1, h2):
    # mirrors _kernels_numpy.evaluate so quadratic models give exactly 0;
    # (g, h) are the gradients at (q, p)
    qg = q0 * g0 + q1 * g1 + q2 * g2
    pg = p0 * h0 + p1 * h1 + p2 * h2
    r2 = q0 * q0 + q1 * q1 + q2 * q2
    if code == HARMONIC:
        hq = 0.5 * qg
    elif code == ANHARMONIC:
        hq = -c0 * r2 + c1 * r2 * r2
    elif code == KEPLER:
        hq = -c1 / np.sqrt(r2)
    elif code == FREE:
        hq = 0.0
    else:
        hq = q0 * (c0 * q0) + q1 * (c1 * q1) + q2 * (c2 * q2)
    if code == HARMONIC or code == ANHARMONIC:
        hp = p0 * p0 + p1 * p1 + p2 * p2
    elif code == KEPLER or code == FREE:
        hp = 0.5 * pg
    else:
        hp = p0 * (c3 * p0) + p1 * (c4 * p1) + p2 * (c5 * p2)
    return (hq + hp) - 0.5 * (qg + pg)


@njit(cache=True)
def _run_point(code, prm, n, q, p, dt, nsteps, ws):
    """Advance one point in place; returns (theta, abort_step or -1)."""
    c0, c1, c2, c3, c4, c5 = _unpack(code, prm, n)
    kep = code == KEPLER
    q0 = q[0]
    p0 = p[0]
    q1 = q[1] if n > 1 else 0.0
    p1 = p[1] if n > 1 else 0.0
    q2 = q[2] if n > 2 else 0.0
    p2 = p[2] if n > 2 else 0.0
    theta = 0.0
    ab = -1
    if kep and np.sqrt(q0 * q0 + q1 * q1 + q2 * q2) < c2:
        ab = 0
    nw = ws.size
    step = 0
    while ab < 0 and step < nsteps:
        for k in range(nw):
            h = ws[k] * dt
            h0, h1, h2 = _gp3(code, c0, c3, c4, c5, p0, p1, p2)
            q0 += 0.5 * h * h0
            q1 += 0.5 * h * h1
            q2 += 0.5 * h * h2
            if kep and np.sqrt(q0 * q0 + q1 * q1 + q2 * q2) < c2:
                ab = step
                break
            g0, g1, g2 = _gq3(code, c0, c1, c2, q0, q1, q2)
            o0, o1, o2 = p0, p1, p2
            p0 -= h * g0
            p1 -= h * g1
            p2 -= h * g2
            m0 = 0.5 * (o0 + p0)
            m1 = 0.5 * (o1 + p1)
            m2 = 0.5 * (o2 + p2)
            k0, k1, k2 = _gp3(code, c0, c3, c4, c5, m0, m1, m2)
            theta += h * _phase3(code, c0, c1, c2, c3, c4, c5, q0, q1, q2,
                                 g0, g1, g2, m0, m1, m2, k0, k1, k2)
            h0, h1, h2 = _gp3(code, c0, c3, c4, c5, p0, p1, p2)
            q0 += 0.5 * h * h0
            q1 += 0.5 * h * h1
            q2 += 0.5 * h * h2
            if kep and np.sqrt(q0 * q0 + q1 * q1 + q2 * q2) < c2:
                ab = step
                break
        step += 1
    q[0] = q0
    p[0] = p0
    if n > 1:
        q[1] = q1
        p[1] = p1
    if n > 2:
        q[2] = q2
        p[2] = p2
    return theta, ab


def _weights(method):
    if method == 0:
        return np.array([1.0])
    return np.array([YOSHIDA_W1, YOSHIDA_W0, YOSHIDA_W1])


@njit(parallel=True, cache=True)
def _integrate(code, prm, n, z, dt, nsteps, ws, out, theta, status, abort):
    m = z.shape[0]
    for j in prange(m):
        q = z[j, :n].copy()
        p = z[j, n:].copy()
        th, ab = _run_point(code, prm, n, q, p, dt, nsteps, ws)
        out[j, :n] = q
        out[j, n:] = p
        theta[j] = th
        abort[j] = ab
        status[j] = OK if ab < 0 else SINGULAR


def integrate_flow(code, prm, n, z, dt, nsteps, method):
    z = np.ascontiguousarray(z, dtype=np.float64)
    m = z.shape[0]
    out = np.empty_like(z)
    theta = np.empty(m)
    status = np.empty(m, dtype=np.int8)
    abort = np.empty(m, dtype=np.int64)
    _integrate(int(code), np.asarray(prm, dtype=np.float64), int(n), z, float(dt),
               int(nsteps), _weights(method), out, theta, status, abort)
    return out, theta, status, abort


@njit(parallel=True, cache=True)
def _checkpoints(code, prm, n, z0, dt, every, nchk, ws, zs, th, status, abort):
    m = z0.shape[0]
    for j in prange(m):
        q = z0[j, :n].copy()
        p = z0[j, n:].copy()
        zs[0, j, :n] = q
        zs[0, j, n:] = p
        th[0, j] = 0.0
        acc = 0.0
        status[j] = OK
        abort[j] = -1
        for c in range(nchk):
            if status[j] == OK:
                dth, ab = _run_point(code, prm, n, q, p, dt, every, ws)
                acc += dth
                if ab >= 0:
                    status[j] = SINGULAR
                    abort[j] = ab + c * every
            zs[c + 1, j, :n] = q
            zs[c + 1, j, n:] = p
            th[c + 1, j] = acc


def flow_checkpoints(code, prm, n, z0, dt, every, nchk, method):
    z0 = np.ascontiguousarray(z0, dtype=np.float64)
    m = z0.shape[0]
    zs = np.empty((nchk + 1, m, 2 * n))
    th = np.empty((nchk + 1, m))
    status = np.empty(m, dtype=np.int8)
    abort = np.empty(m, dtype=np.int64)
    _checkpoints(int(code), np.asarray(prm, dtype=np.float64), int(n), z0, float(dt),
                 int(every), int(nchk), _weights(method), zs, th, status, abort)
    return zs, th, status, abort


# --- grid stencils -------------------------------------------------------

@njit(parallel=True, cache=True)
def _fd3(f, inv_h, out):
    no, nn, ni = f.shape
    c = inv_h / 12.0
    zero = f[0, 0, 0] * 0.0
    for o in prange(no):
        for i in range(nn):
            hp1 = i + 1 < nn
            hp2 = i + 2 < nn
            hm1 = i >= 1
            hm2 = i >= 2
            for j in range(ni):
                fp1 = f[o, i + 1, j] if hp1 else zero
                fp2 = f[o, i + 2, j] if hp2 else zero
                fm1 = f[o, i - 1, j] if hm1 else zero
                fm2 = f[o, i - 2, j] if hm2 else zero
                out[o, i, j] = (8.0 * (fp1 - fm1) - (fp2 - fm2)) * c


@njit(cache=True)
def _edge(f, o, i, j, nn, zero):
    fp1 = f[o, i + 1, j] if i + 1 < nn else zero
    fp2 = f[o, i + 2, j] if i + 2 < nn else zero
    fm1 = f[o, i - 1, j] if i >= 1 else zero
    fm2 = f[o, i - 2, j] if i >= 2 else zero
    return 8.0 * (fp1 - fm1) - (fp2 - fm2)


@njit(parallel=True, cache=True)
def _accum3(f, x, inv_h, out):
    # out -= x * d(f)/d(axis 1); branch-free interior, guarded edges
    no, nn, ni = f.shape
    c = inv_h / 12.0
    zero = f[0, 0, 0] * 0.0
    for o in prange(no):
        for i in range(2, nn - 2):
            for j in range(ni):
                d = 8.0 * (f[o, i + 1, j] - f[o, i - 1, j]) - (f[o, i + 2, j] - f[o, i - 2, j])
                out[o, i, j] -= x[o, i, j] * (d * c)
        for i in (0, 1, nn - 2, nn - 1):
            for j in range(ni):
                out[o, i, j] -= x[o, i, j] * (_edge(f, o, i, j, nn, zero) * c)


@njit(parallel=True, cache=True)
def _accum_last(f, x, inv_h, out):
    # same as _accum3 for a contiguous last axis, f: (outer, nn)
    no, nn = f.shape
    c = inv_h / 12.0
    zero = f[0, 0] * 0.0
    for o in prange(no):
        fo = f[o]
        xo = x[o]
        oo = out[o]
        for i in range(2, nn - 2):
            d = 8.0 * (fo[i + 1] - fo[i - 1]) - (fo[i + 2] - fo[i - 2])
            oo[i] -= xo[i] * (d * c)
        for i in (0, 1, nn - 2, nn - 1):
            fp1 = fo[i + 1] if i + 1 < nn else zero
            fp2 = fo[i + 2] if i + 2 < nn else zero
            fm1 = fo[i - 1] if i >= 1 else zero
            fm2 = fo[i - 2] if i >= 2 else zero
            oo[i] -= xo[i] * ((8.0 * (fp1 - fm1) - (fp2 - fm2)) * c)


@njit(parallel=True, cache=True)
def _phase_init(chi, alpha, inv_hbar, out):
    for k in prange(chi.size):
        out[k] = (-1j * inv_hbar) * (alpha[k] * chi[k])


@njit(parallel=True, cache=True)
def _axpy(x, a, y, out):
    for k in prange(x.size):
        out[k] = x[k] + a * y[k]


@njit(parallel=True, cache=True)
def _rk4_combine(chi, c, k1, k2, k3, k4, out):
    for k in prange(chi.size):
        out[k] = chi[k] + c * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])


def _view3(a, axis):
    s = a.shape
    outer = 1
    for v in s[:axis]:
        outer *= v
    inner = 1
    for v in s[axis + 1:]:
        inner *= v
    return a.reshape(outer, s[axis], inner)


def fd_axis(f, inv_h, out):
    _fd3(f, float(inv_h), out)
    return out


def liouville_rhs(chi, xfields, alpha, inv_h, inv_hbar, out):
    _phase_init(chi.reshape(-1), alpha.reshape(-1), float(inv_hbar), out.reshape(-1))
    last = chi.ndim - 1
    for ax in range(chi.ndim):
        if ax == last:
            n = chi.shape[last]
            _accum_last(chi.reshape(-1, n), xfields[ax].reshape(-1, n), float(inv_h[ax]),
                        out.reshape(-1, n))
        else:
            _accum3(_view3(chi, ax), _view3(xfields[ax], ax), float(inv_h[ax]),
                    _view3(out, ax))
    return out


def rk4_step(chi, dt, xfields, alpha, inv_h, inv_hbar):
    k1 = np.empty_like(chi)
    k2 = np.empty_like(chi)
    k3 = np.empty_like(chi)
    k4 = np.empty_like(chi)
    y = np.empty_like(chi)
    flat = chi.reshape(-1)
    liouville_rhs(chi, xfields, alpha, inv_h, inv_hbar, k1)
    _axpy(flat, 0.5 * dt, k1.reshape(-1), y.reshape(-1))
    liouville_rhs(y, xfields, alpha, inv_h, inv_hbar, k2)
    _axpy(flat, 0.5 * dt, k2.reshape(-1), y.reshape(-1))
    liouville_rhs(y, xfields, alpha, inv_h, inv_hbar, k3)
    _axpy(flat, dt, k3.reshape(-1), y.reshape(-1))
    liouville_rhs(y, xfields, alpha, inv_h, inv_hbar, k4)
    _rk4_combine(flat, dt / 6.0, k1.reshape(-1), k2.reshape(-1), k3.reshape(-1),
                 k4.reshape(-1), y.reshape(-1))
    return y
