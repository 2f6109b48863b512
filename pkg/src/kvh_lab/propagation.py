"""Time evolution of classical wavefunctions.

Grid route: RK4 on d chi/dt = -(i/hbar) L chi with the 4th-order stencil.
Characteristic route: chi(t, z) = exp(-i Theta/hbar) chi0(Phi_{-t} z),
exact in space and used as the reference solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from ._backend import get_kernels
from .errors import (
    BoundaryNotDecayed,
    CflViolation,
    InsufficientSamples,
    KvhLabError,
    NonFinite,
    TooManyAborts,
    UnsupportedDimension,
)
from .hamiltonians import (
    HamiltonianModel,
    METHODS,
    flow_batch,
    n_steps,
)
from .operators import grid_fields
from .wavefunction import GridWaveFunction, InitialStateSpec, boundary_ratio

BOUNDARY_TOL = 1e-10
IMAG_TOL = 1e-7


@dataclass(frozen=True)
class PropagationConfig:
    dt: float
    steps: int
    formalism: str = "kvh"
    cfl_safety: float = 0.5
    diagnostics_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.steps) < 1:
            raise ValueError("steps must be a positive integer")
        if self.formalism not in ("kvn", "kvh"):
            raise ValueError("formalism must be 'kvn' or 'kvh'")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if int(self.diagnostics_every) < 1:
            raise ValueError("diagnostics_every must be a positive integer")


def cfl_bound(model, grid, safety=0.5):
    """(largest admissible dt, max |X_H| over the grid)."""
    x, _ = grid_fields(model, grid)
    speed = float(np.sqrt(np.max(np.sum(x * x, axis=0))))
    if speed == 0.0:
        return np.inf, 0.0
    return safety * min(grid.spacing) / speed, speed


def check_cfl(model, grid, dt, safety=0.5):
    bound, speed = cfl_bound(model, grid, safety)
    if dt > bound:
        raise CflViolation(dt, bound, speed)
    return bound


def _rk4_fields(model, grid, formalism):
    x, a = grid_fields(model, grid)
    if formalism == "kvn":
        a = np.zeros(grid.shape)
    elif formalism != "kvh":
        raise ValueError("formalism must be 'kvn' or 'kvh'")
    inv_h = np.array([1.0 / h for h in grid.spacing])
    return x, a, inv_h


def step_rk4(chi: GridWaveFunction, model, formalism="kvh", dt=1e-3, backend=None):
    """One classical RK4 step; no renormalization."""
    x, a, inv_h = _rk4_fields(model, chi.grid, formalism)
    kern = get_kernels(backend)
    new = kern.rk4_step(np.asarray(chi.values), dt, x, a, inv_h, 1.0 / chi.hbar)
    if not np.all(np.isfinite(new)):
        raise NonFinite(1)
    return GridWaveFunction(chi.grid, new, chi.hbar)


def propagate_grid(chi0: GridWaveFunction, model, config: PropagationConfig,
                   diagnostics=True, snapshot_steps=(), backend=None, record_fn=None):
    """Advance ``config.steps`` RK4 steps.

    Returns (final state, DiagnosticSeries). Diagnostics are recorded at
    step 0 and every ``diagnostics_every`` steps. States at the steps
    listed in ``snapshot_steps`` are kept in ``series.snapshots``.
    """
    from .diagnostics import DiagnosticSeries, make_record

    grid = chi0.grid
    check_cfl(model, grid, config.dt, config.cfl_safety)
    br = boundary_ratio(chi0)
    if br > BOUNDARY_TOL:
        raise BoundaryNotDecayed(
            f"boundary band holds {br:.3g} of max|chi| (limit {BOUNDARY_TOL:g}); enlarge the domain"
        )
    x, a, inv_h = _rk4_fields(model, grid, config.formalism)
    kern = get_kernels(backend)
    record = record_fn or (lambda c, t: make_record(c, model, t, config.formalism))
    series = DiagnosticSeries(formalism=config.formalism, dt=config.dt * config.diagnostics_every)
    snaps = set(int(s) for s in snapshot_steps)
    values = np.array(chi0.values)
    inv_hbar = 1.0 / chi0.hbar

    def state(v):
        return GridWaveFunction(grid, v, chi0.hbar)

    if diagnostics:
        series.append(record(chi0, 0.0))
    if 0 in snaps:
        series.snapshots[0] = chi0
    for step in range(1, int(config.steps) + 1):
        values = kern.rk4_step(values, config.dt, x, a, inv_h, inv_hbar)
        if not np.all(np.isfinite(values)):
            raise NonFinite(step)
        if diagnostics and step % config.diagnostics_every == 0:
            series.append(record(state(values), step * config.dt))
        if step in snaps:
            series.snapshots[step] = state(values)
    return state(values), series


# --- characteristics -----------------------------------------------------

@dataclass
class CharacteristicState:
    """Per-point data of the characteristic solution (arrays over points).

    ``theta`` is the action integral of a(z) along the trajectory from
    time 0 to t that ends at ``z``; ``z_minus`` is its starting point.
    """

    z: np.ndarray
    z_minus: np.ndarray
    theta: np.ndarray
    status: np.ndarray

    @property
    def ok(self):
        return self.status == 0

    @property
    def aborted(self):
        return int(np.count_nonzero(self.status))

    def status_labels(self):
        return np.where(self.ok, "ok", "singular_abort")


def backward_characteristics(model, t, dt, eval_points, method="leapfrog", backend=None):
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    zm, th, status, _ = flow_batch(model, pts, -t, dt, method, backend)
    return CharacteristicState(pts, zm, -th, status)


def propagate_characteristics(spec: InitialStateSpec, model, t, dt, eval_points, hbar=1.0,
                              method="leapfrog", backend=None):
    """chi(t, z) at the given points; aborted points carry NaN."""
    st = backward_characteristics(model, t, dt, eval_points, method, backend)
    vals = spec.evaluate(st.z_minus) * np.exp(-1j * st.theta / hbar)
    vals = np.where(st.ok, vals, np.nan + 0j)
    return vals, st


def transport_density(rho0, model, t, dt, eval_points, method="leapfrog", backend=None):
    """rho0(Phi_{-t} z) for a closed-form density ``rho0(z_array)``."""
    st = backward_characteristics(model, t, dt, eval_points, method, backend)
    vals = np.where(st.ok, rho0(st.z_minus), np.nan)
    return vals, st


# --- quasi Monte Carlo expectations -------------------------------------

QMC_OPERATORS = ("identity", "position_Z", "energy", "angular_L", "linear_P", "linear_P_kvn")


@dataclass
class QmcResult:
    times: np.ndarray
    values: dict = field(default_factory=dict)   # name -> (n_times, n_comp) real parts
    errors: dict = field(default_factory=dict)   # interleaved half-sample error
    imag: dict = field(default_factory=dict)
    aborted: int = 0
    samples: int = 0


def _sobol_points(spec, sample_count, seed, sampler):
    d = 2 * spec.n
    m = int(np.log2(sample_count))
    if 2**m != sample_count:
        raise InsufficientSamples("sample_count must be a power of two")
    u = qmc.Sobol(d=d, scramble=True, seed=np.random.default_rng(seed)).random_base2(m)
    c = np.asarray(spec.center)
    s = spec.width
    if sampler == "uniform":
        z0 = c + s * (12.0 * u - 6.0)
        logp = np.full(sample_count, -d * np.log(12.0 * s))
        return z0, logp
    if sampler != "gaussian":
        raise ValueError("sampler must be 'gaussian' or 'uniform'")
    lo, hi = norm.cdf(-6.0), norm.cdf(6.0)
    x = norm.ppf(lo + u * (hi - lo))
    z0 = c + s * x
    logp = np.sum(norm.logpdf(x), axis=1) - d * np.log(s * (hi - lo))
    return z0, logp


def _apply_pointwise(name, model, z, chi, grad, hbar):
    """(A chi)(z) for the supported operators; returns (m, n_comp)."""
    n = z.shape[1] // 2
    q, p = z[:, :n], z[:, n:]
    dq, dp = grad[:, :n], grad[:, n:]
    if name == "identity":
        return chi[:, None]
    if name == "position_Z":
        return z * chi[:, None]
    if name == "energy":
        h, gq, gp, a = model.evaluate(q, p)
        adv = np.sum(gp * dq, axis=1) - np.sum(gq * dp, axis=1)
        return (-1j * hbar * adv + a * chi)[:, None]
    if name == "angular_L":
        if n == 2:     # the third component only
            c = dp[:, 0] * p[:, 1] - dp[:, 1] * p[:, 0] + dq[:, 0] * q[:, 1] - dq[:, 1] * q[:, 0]
            return 1j * hbar * c[:, None]
        if n != 3:
            raise UnsupportedDimension("angular_L needs n = 2 or 3")
        return 1j * hbar * (np.cross(dp, p) + np.cross(dq, q))
    if name == "linear_P":
        return -1j * hbar * dq + 0.5 * p * chi[:, None]
    if name == "linear_P_kvn":
        return -1j * hbar * dq
    raise ValueError(f"unsupported operator {name!r}; choose from {QMC_OPERATORS}")


def qmc_expectation(operators, spec: InitialStateSpec, model: HamiltonianModel, t_final,
                    checkpoints, dt, sample_count=2**16, seed=0, hbar=1.0, sampler="gaussian",
                    h_fd_rel=1e-4, method="leapfrog", max_abort_fraction=1e-3, backend=None):
    """<chi_t|A chi_t> at ``checkpoints`` evenly spaced times in [0, t_final].

    Samples z0 from a scrambled Sobol sequence on the +-6 sigma box (mapped
    through the truncated normal quantile for sampler="gaussian"), pushes
    them forward with the flow, and evaluates the integrand at z = Phi_t(z0)
    (the flow preserves volume). Derivatives of chi_t at z are central
    differences of backward characteristics with step h_fd_rel * sigma.
    The error estimate is half the gap between even- and odd-index halves.
    """
    if isinstance(operators, str):
        operators = [operators]
    for name in operators:
        if name not in QMC_OPERATORS:
            raise ValueError(f"unsupported operator {name!r}; choose from {QMC_OPERATORS}")
    n = spec.n
    kern = get_kernels(backend)
    times = np.linspace(0.0, t_final, checkpoints)
    every = n_steps(times[1] - times[0], dt) if checkpoints > 1 else 0
    z0, logp = _sobol_points(spec, sample_count, seed, sampler)
    zs, th, status, _ = kern.flow_checkpoints(model.code, model.params, n, z0, dt, every,
                                              checkpoints - 1, METHODS[method])
    chi0 = spec.evaluate(z0)
    weights = np.exp(-logp)
    h = h_fd_rel * spec.width
    eye = np.eye(2 * n)
    res = QmcResult(times=times, samples=sample_count)
    bad = status != 0
    for c, tc in enumerate(times):
        zc = zs[c]
        chi_c = chi0 * np.exp(-1j * th[c] / hbar)
        grad = np.empty((sample_count, 2 * n), dtype=np.complex128)
        shifted = np.concatenate([zc + h * eye[a] for a in range(2 * n)] +
                                 [zc - h * eye[a] for a in range(2 * n)])
        if c == 0:
            back, bth, bst = shifted, np.zeros(len(shifted)), np.zeros(len(shifted), np.int8)
        else:
            back, bth, bst, _ = kern.integrate_flow(model.code, model.params, n, shifted,
                                                    -dt, c * every, METHODS[method])
        vals = spec.evaluate(back) * np.exp(1j * bth / hbar)
        vals = vals.reshape(2, 2 * n, sample_count)
        grad = ((vals[0] - vals[1]) / (2 * h)).T
        bad |= (bst.reshape(2, 2 * n, sample_count) != 0).any(axis=(0, 1))
        good = ~bad
        for name in operators:
            a_chi = _apply_pointwise(name, model, zc, chi_c, grad, hbar)
            f = np.conj(chi_c)[:, None] * a_chi * weights[:, None]
            f = np.where(good[:, None], f, 0.0)
            total = np.sum(f, axis=0) / sample_count
            even = np.sum(f[0::2], axis=0) / (sample_count // 2)
            odd = np.sum(f[1::2], axis=0) / (sample_count // 2)
            res.values.setdefault(name, []).append(total.real)
            res.imag.setdefault(name, []).append(total.imag)
            res.errors.setdefault(name, []).append(np.abs(even.real - odd.real) / 2.0)
    res.aborted = int(np.count_nonzero(bad))
    if res.aborted > max_abort_fraction * sample_count:
        raise TooManyAborts(res.aborted, sample_count)
    for dct in (res.values, res.imag, res.errors):
        for k in dct:
            dct[k] = np.array(dct[k])
    return res


# --- Heisenberg picture --------------------------------------------------

@dataclass
class HeisenbergResult:
    times: np.ndarray
    values: np.ndarray
    imag: np.ndarray


def heisenberg_expectation(observable, chi0: GridWaveFunction, model, times, dt,
                           formalism="kvh", backend=None):
    """<chi_t | L_A chi_t> = <chi0 | U_t^dagger L_A U_t chi0> at the given
    times (multiples of dt, increasing)."""
    from .operators import kvh_liouvillian
    from .wavefunction import inner

    times = np.asarray(times, dtype=float)
    steps = [n_steps(t, dt) for t in times]
    if any(b < a for a, b in zip(steps, steps[1:])):
        raise ValueError("times must be increasing")
    chi = chi0
    done = 0
    vals = []
    if steps and steps[-1] > 0:
        check_cfl(model, chi0.grid, dt)
    for k in steps:
        for _ in range(k - done):
            chi = step_rk4(chi, model, formalism, dt, backend)
        done = k
        vals.append(inner(chi, kvh_liouvillian(observable, chi)))
    vals = np.array(vals)
    scale = max(1.0, float(np.max(np.abs(vals.real))))
    worst = float(np.max(np.abs(vals.imag))) if len(vals) else 0.0
    if worst > IMAG_TOL * scale:
        raise KvhLabError(f"Heisenberg expectation has imaginary part {worst:.3g} "
                          f"(limit {IMAG_TOL:g} relative); is the state decayed?")
    return HeisenbergResult(times, vals.real, vals.imag)
