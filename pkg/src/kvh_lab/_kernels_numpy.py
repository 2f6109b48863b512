"""Vectorized numpy implementations of the hot kernels.

Reference fallback for ``_kernels_numba``; both modules expose the same
functions with the same argument conventions.
"""
import numpy as np

HARMONIC, ANHARMONIC, KEPLER, FREE, QUADRATIC = range(5)
OK, SINGULAR = 0, 1

_CBRT2 = 2.0 ** (1.0 / 3.0)
YOSHIDA_W1 = 1.0 / (2.0 - _CBRT2)
YOSHIDA_W0 = 1.0 - 2.0 * YOSHIDA_W1


def substeps(method):
    if method == 0:
        return (1.0,)
    return (YOSHIDA_W1, YOSHIDA_W0, YOSHIDA_W1)


# --- model evaluation ----------------------------------------------------
# Operation order is chosen so that, for quadratic models, H - z.gradH/2
# cancels to exactly zero in floating point.

def _sum(x):
    return np.sum(x, axis=-1)


def potential_part(code, prm, n, q):
    """Return (H_q, dH/dq) for the position-dependent part."""
    if code == HARMONIC:
        g = prm[0] * q
        return 0.5 * _sum(q * g), g
    if code == ANHARMONIC:
        a, b = prm[0], prm[1]
        r2 = _sum(q * q)
        g = (-2.0 * a + 4.0 * b * r2)[..., None] * q
        return -a * r2 + b * r2 * r2, g
    if code == KEPLER:
        lam = prm[1]
        r = np.sqrt(_sum(q * q))
        g = (lam / (r * r * r))[..., None] * q
        return -lam / r, g
    if code == FREE:
        return np.zeros(q.shape[:-1]), np.zeros_like(q)
    if code == QUADRATIC:
        aq = prm[:n] * q
        return _sum(q * aq), 2.0 * aq
    raise ValueError(f"unknown model code {code}")


def kinetic_part(code, prm, n, p):
    """Return (H_p, dH/dp)."""
    if code in (HARMONIC, ANHARMONIC):
        return _sum(p * p), 2.0 * p
    if code in (KEPLER, FREE):
        g = p / prm[0]
        return 0.5 * _sum(p * g), g
    if code == QUADRATIC:
        bp = prm[n:2 * n] * p
        return _sum(p * bp), 2.0 * bp
    raise ValueError(f"unknown model code {code}")


def evaluate(code, prm, n, q, p):
    """H, dH/dq, dH/dp and the phase term a = H - z.gradH/2."""
    hq, gq = potential_part(code, prm, n, q)
    hp, gp = kinetic_part(code, prm, n, p)
    h = hq + hp
    a = h - 0.5 * (_sum(q * gq) + _sum(p * gp))
    return h, gq, gp, a


def _too_close(code, prm, q):
    if code != KEPLER:
        return np.zeros(q.shape[:-1], dtype=bool)
    return np.sqrt(_sum(q * q)) < prm[2]


# --- characteristics -----------------------------------------------------

def _leapfrog(code, prm, n, q, p, theta, h, live):
    """One position-Verlet step of size h on rows where ``live``; returns
    the mask of rows that became singular."""
    _, gp = kinetic_part(code, prm, n, p)
    q[live] += 0.5 * h * gp[live]
    bad = _too_close(code, prm, q) & live
    go = live & ~bad
    _, gq = potential_part(code, prm, n, np.where(go[:, None], q, 1.0))
    p_old = p.copy()
    p[go] -= h * gq[go]
    pm = 0.5 * (p_old + p)
    _, _, _, a = evaluate(code, prm, n, np.where(go[:, None], q, 1.0), pm)
    theta[go] += h * a[go]
    _, gp = kinetic_part(code, prm, n, p)
    q[go] += 0.5 * h * gp[go]
    bad |= _too_close(code, prm, q) & go
    return bad


def integrate_flow(code, prm, n, z, dt, nsteps, method):
    """Advance every row of z (M, 2n) by ``nsteps`` steps of size dt.

    Returns (z_end, theta, status, abort_step); theta is the action
    integral of the phase term accumulated along the way (sign follows dt).
    """
    z = np.array(z, dtype=np.float64, copy=True)
    m = z.shape[0]
    q = z[:, :n].copy()
    p = z[:, n:].copy()
    theta = np.zeros(m)
    status = np.zeros(m, dtype=np.int8)
    abort = np.full(m, -1, dtype=np.int64)
    live = np.ones(m, dtype=bool)
    if code == KEPLER:
        bad = _too_close(code, prm, q)
        status[bad] = SINGULAR
        abort[bad] = 0
        live &= ~bad
    ws = substeps(method)
    for step in range(nsteps):
        if not live.any():
            break
        for w in ws:
            bad = _leapfrog(code, prm, n, q, p, theta, w * dt, live)
            if bad.any():
                status[bad] = SINGULAR
                abort[bad] = step
                live &= ~bad
    return np.concatenate([q, p], axis=1), theta, status, abort


def flow_checkpoints(code, prm, n, z0, dt, every, nchk, method):
    """Forward flow recording state and phase every ``every`` steps."""
    m = z0.shape[0]
    zs = np.empty((nchk + 1, m, 2 * n))
    th = np.empty((nchk + 1, m))
    zs[0] = z0
    th[0] = 0.0
    status = np.zeros(m, dtype=np.int8)
    abort = np.full(m, -1, dtype=np.int64)
    cur = np.array(z0, dtype=np.float64)
    acc = np.zeros(m)
    for c in range(nchk):
        cur, dth, st, ab = integrate_flow(code, prm, n, cur, dt, every, method)
        acc = acc + dth
        new = (st != OK) & (status == OK)
        abort[new] = ab[new] + c * every
        status |= st
        zs[c + 1] = cur
        th[c + 1] = acc
    return zs, th, status, abort


# --- grid stencils -------------------------------------------------------

def fd_axis(f, inv_h, out):
    """4th-order central first derivative along axis 1 of a 3-d view,
    zero outside the array."""
    pad = np.zeros((f.shape[0], f.shape[1] + 4, f.shape[2]), dtype=f.dtype)
    pad[:, 2:-2] = f
    out[...] = (8.0 * (pad[:, 3:-1] - pad[:, 1:-3]) - (pad[:, 4:] - pad[:, :-4])) * (
        inv_h / 12.0
    )
    return out


def _view3(a, axis):
    s = a.shape
    outer = int(np.prod(s[:axis], dtype=np.int64))
    inner = int(np.prod(s[axis + 1:], dtype=np.int64))
    return a.reshape(outer, s[axis], inner)


def liouville_rhs(chi, xfields, alpha, inv_h, inv_hbar, out):
    """out = -sum_a X_a d_a chi - (i/hbar) alpha chi, i.e. -(i/hbar) L chi."""
    out[...] = (-1j * inv_hbar) * (alpha * chi)
    d = np.empty_like(chi)
    for ax in range(chi.ndim):
        fd_axis(_view3(chi, ax), inv_h[ax], _view3(d, ax))
        out -= xfields[ax] * d
    return out


def rk4_step(chi, dt, xfields, alpha, inv_h, inv_hbar):
    k1 = liouville_rhs(chi, xfields, alpha, inv_h, inv_hbar, np.empty_like(chi))
    k2 = liouville_rhs(chi + (0.5 * dt) * k1, xfields, alpha, inv_h, inv_hbar,
                       np.empty_like(chi))
    k3 = liouville_rhs(chi + (0.5 * dt) * k2, xfields, alpha, inv_h, inv_hbar,
                       np.empty_like(chi))
    k4 = liouville_rhs(chi + dt * k3, xfields, alpha, inv_h, inv_hbar,
                       np.empty_like(chi))
    return chi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
