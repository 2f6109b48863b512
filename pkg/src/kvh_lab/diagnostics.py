"""Executable checks of the conservation laws, rate identities and term
decompositions of the KvN / KvH formalisms."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, UnsupportedDimension, WrongModelKind
from .hamiltonians import HamiltonianModel
from .operators import (
    angular_momentum,
    grid_fields,
    kvh_liouvillian,
    kvn_liouvillian,
    linear_momentum,
)
from .phase_space import integrate, partial_derivative
from .wavefunction import GridWaveFunction, density_kvh, density_kvn, inner, norm_sq

IMAG_TOL = 1e-6
SUM_TOL = 1e-12


def _imag_rate(a, b, hbar):
    """(2/hbar) Im <a|b> componentwise for lists of fields."""
    return np.array([2.0 / hbar * inner(x, y).imag for x, y in zip(a, b)])


@dataclass
class RateDecomposition:
    """Four-way split of d<O>/dt = (2/hbar) Im <O chi | L chi>.

    O = O_kvn + delta and L = L_kvn + alpha give
    black = <O_kvn|L_kvn>, red = <O_kvn|alpha>, blue = <delta|L_kvn>,
    green = <delta|alpha>; ``total`` is evaluated directly from O and L.
    """

    which: str
    black: np.ndarray
    red: np.ndarray
    blue: np.ndarray
    green: np.ndarray
    total: np.ndarray
    red_present: bool
    delta_present: bool

    @property
    def terms(self):
        return {"black": self.black, "red": self.red, "blue": self.blue, "green": self.green}

    @property
    def extra_term_count(self):
        """Number of structurally present extra (non-black) terms."""
        return sum(self.present().values()) - 1

    def present(self):
        return {"black": True, "red": self.red_present, "blue": self.delta_present,
                "green": self.delta_present and self.red_present}

    def sum_residual(self):
        parts = self.black + self.red + self.blue + self.green
        scale = max(np.max(np.abs(np.stack([self.black, self.red, self.blue, self.green,
                                            self.total]))), 1e-300)
        return float(np.max(np.abs(parts - self.total)) / scale)


def _operator_parts(chi, which):
    """(O_kvn chi components, delta chi components or None)."""
    if which == "L":
        return angular_momentum(chi), None
    if which == "P":
        kvn = linear_momentum("kvn", chi)
        g = chi.grid
        delta = [chi.with_values(0.5 * g.mesh(g.n + i) * chi.values) for i in range(g.n)]
        return kvn, delta
    raise ValueError("which must be 'L' or 'P'")


def rate_decomposition(chi: GridWaveFunction, model, which, formalism="kvh", cache=None):
    """Black/red/blue/green split of the expectation rate of L or P."""
    hbar = chi.hbar
    if cache is None:
        cache = {}
    if "lkvn" not in cache:
        cache["lkvn"] = kvn_liouvillian(model, chi)
        _, a = grid_fields(model, chi.grid)
        if formalism == "kvn":
            a = np.zeros(chi.grid.shape)
        cache["alpha_field"] = a
        cache["achi"] = chi.with_values(a * chi.values)
    lkvn, achi, a = cache["lkvn"], cache["achi"], cache["alpha_field"]
    full = chi.with_values(lkvn.values + achi.values)
    okvn, delta = _operator_parts(chi, which)
    k = len(okvn)
    black = _imag_rate(okvn, [lkvn] * k, hbar)
    red = _imag_rate(okvn, [achi] * k, hbar)
    if delta is None:
        blue = np.zeros(k)
        green = np.zeros(k)
        ofull = okvn
    else:
        blue = _imag_rate(delta, [lkvn] * k, hbar)
        green = _imag_rate(delta, [achi] * k, hbar)
        ofull = [x.with_values(x.values + d.values) for x, d in zip(okvn, delta)]
    total = _imag_rate(ofull, [full] * k, hbar)
    red_present = bool(np.any(a != 0))
    return RateDecomposition(which, black, red, blue, green, total, red_present, delta is not None)


@dataclass
class DiagnosticRecord:
    t: float
    norm: float
    energy: float
    L: np.ndarray
    P: np.ndarray
    P_kvn: np.ndarray
    decomposition: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)


def _real_checked(z, scale, name, residuals):
    rel = abs(z.imag) / max(scale, 1e-300)
    residuals[f"imag_{name}"] = rel
    if rel > IMAG_TOL:
        raise ValueError(f"expectation {name} has imaginary part {z.imag:.3g} (relative {rel:.3g})")
    return z.real


def make_record(chi: GridWaveFunction, model, t, formalism="kvh"):
    g = chi.grid
    res = {}
    nrm = norm_sq(chi)
    cache = {}
    lkvn = kvn_liouvillian(model, chi)
    cache["lkvn"] = lkvn
    _, a = grid_fields(model, g)
    if formalism == "kvn":
        a = np.zeros(g.shape)
    cache["alpha_field"] = a
    cache["achi"] = chi.with_values(a * chi.values)
    gen = chi.with_values(lkvn.values + cache["achi"].values)
    scale = np.sqrt(nrm * norm_sq(gen))
    energy = _real_checked(inner(chi, gen), scale, "energy", res)

    L = np.full(3, np.nan)
    decomp = {}
    if g.n >= 2:
        comps = angular_momentum(chi)
        vals = [_real_checked(inner(chi, c), np.sqrt(nrm * norm_sq(c)), f"L{i}", res)
                for i, c in enumerate(comps)]
        if g.n == 2:
            L[2] = vals[0]
        else:
            L[:] = vals
        decomp["L"] = rate_decomposition(chi, model, "L", formalism, cache)
    pk = linear_momentum("kvn", chi)
    P_kvn = np.array([_real_checked(inner(chi, c), np.sqrt(nrm * norm_sq(c)), f"Pkvn{i}", res)
                      for i, c in enumerate(pk)])
    P = P_kvn + np.array([integrate(g, 0.5 * g.mesh(g.n + i) * density_kvn(chi)).real
                          for i in range(g.n)])
    decomp["P"] = rate_decomposition(chi, model, "P", formalism, cache)
    for key, d in decomp.items():
        res[f"sum_{key}"] = d.sum_residual()
    return DiagnosticRecord(t, nrm, energy, L, P, P_kvn, decomp, res)


@dataclass
class DiagnosticSeries:
    formalism: str = "kvh"
    dt: float = 0.0
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)

    def append(self, rec):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def times(self):
        return np.array([r.t for r in self.records])

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def expectation(self, which):
        if which == "L":
            return np.array([r.L for r in self.records])
        if which == "P":
            return np.array([r.P for r in self.records])
        raise ValueError("which must be 'L' or 'P'")

    def rates(self, which, term="total"):
        return np.array([getattr(r.decomposition[which], term) for r in self.records])

    def header(self):
        if not self.records:
            return []
        r0 = self.records[0]
        n = len(r0.P)
        ax = "xyz"[:n]
        cols = ["t", "norm", "energy", "Lx", "Ly", "Lz"]
        cols += [f"P{c}" for c in ax] + [f"Pkvn_{c}" for c in ax]
        comps = []
        if "L" in r0.decomposition:
            comps += ["Lz"] if n == 2 else ["Lx", "Ly", "Lz"]
        comps += [f"P{c}" for c in ax]
        for term in ("black", "red", "blue", "green", "total"):
            cols += [f"rate_{term}_{c}" for c in comps]
        return cols

    def rows(self):
        for r in self.records:
            row = [r.t, r.norm, r.energy, *r.L, *r.P, *r.P_kvn]
            for term in ("black", "red", "blue", "green", "total"):
                for key in ("L", "P"):
                    if key in r.decomposition:
                        row.extend(getattr(r.decomposition[key], term))
            yield row

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([f"{float(v):.17g}" for v in row])


# --- checks --------------------------------------------------------------

@dataclass
class RateIdentityReport:
    which: str
    max_relative: float
    max_abs: float
    fd: np.ndarray
    rhs: np.ndarray
    scale: float


def rate_identity_check(series: DiagnosticSeries, which):
    """Centered differences of <O> against the recorded (2/hbar) Im<O chi|L chi>.

    The residual is divided by max(max|rhs|, max|fd|, 1e-9 max(1, max|<O>|)),
    the floor keeping conserved quantities (rate ~ rounding) meaningful.
    """
    if len(series) < 3:
        raise InsufficientSamples("need at least three records")
    t = series.times
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise InsufficientSamples("records are not uniformly spaced")
    vals = series.expectation(which)
    rhs_all = series.rates(which)
    if which == "L":
        n_l = rhs_all.shape[1]
        vals = vals[:, 3 - n_l:]
    fd = (vals[2:] - vals[:-2]) / (t[2:] - t[:-2])[:, None]
    rhs = rhs_all[1:-1]
    err = np.abs(fd - rhs)
    scale = max(np.max(np.abs(rhs)), np.max(np.abs(fd)), 1e-9 * max(1.0, np.max(np.abs(vals))))
    return RateIdentityReport(which, float(err.max() / scale), float(err.max()), fd, rhs, scale)


def quadratic_coincidence_check(model, chi: GridWaveFunction):
    """max |L_vH chi - L_KvN chi|; exactly zero for quadratic Hamiltonians."""
    if not isinstance(model, HamiltonianModel) or not model.is_quadratic:
        raise WrongModelKind("quadratic coincidence needs a quadratic or harmonic model")
    diff = kvh_liouvillian(model, chi).values - kvn_liouvillian(model, chi).values
    return float(np.max(np.abs(diff)))


@dataclass
class PlanarityReport:
    value: complex
    scale: float
    real_state: bool
    relative: float
    passed: bool | None


def planarity_report(chi: GridWaveFunction, tol=1e-6):
    """Quadrature of i hbar (p x q).(grad_p chi) chi chi*.

    Asserted (``passed``) only for real-valued chi; for complex states the
    value is reported with ``passed = None``.
    """
    g = chi.grid
    if g.n != 3:
        raise UnsupportedDimension("planarity needs n = 3")
    q = [g.mesh(i) for i in range(3)]
    p = [g.mesh(3 + i) for i in range(3)]
    # accumulated per axis to keep the 6-d peak memory at a few grid copies
    acc = np.zeros(g.shape, dtype=np.complex128)
    v2 = np.zeros(g.shape)
    d2 = np.zeros(g.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        v = p[j] * q[k] - p[k] * q[j]
        d = partial_derivative(chi.values, g, 3 + i)
        acc += v * d
        v2 += v * v
        d2 += d.real**2 + d.imag**2
        del d
    rho = density_kvn(chi)
    value = complex(1j * chi.hbar * integrate(g, acc * rho))
    scale = float(chi.hbar * integrate(g, np.sqrt(v2 * d2) * rho).real)
    real_state = bool(np.all(chi.values.imag == 0))
    rel = abs(value) / scale if scale > 0 else 0.0
    return PlanarityReport(value, scale, real_state, rel, (rel <= tol) if real_state else None)


def bracket_field(chi: GridWaveFunction):
    """{chi*, chi} = sum_i d_qi chi* d_pi chi - d_pi chi* d_qi chi."""
    g = chi.grid
    out = np.zeros(g.shape, dtype=np.complex128)
    for i in range(g.n):
        dq = partial_derivative(chi.values, g, i)
        dp = partial_derivative(chi.values, g, g.n + i)
        out = out + np.conj(dq) * dp - np.conj(dp) * dq
    return out


@dataclass
class MismatchReport:
    h_kvn: float
    physical: float
    gap: float
    bracket_integral: float


def kvn_energy_mismatch_report(chi: GridWaveFunction, model):
    g = chi.grid
    h_kvn = inner(chi, kvn_liouvillian(model, chi)).real
    q, p = g.coordinates()
    physical = integrate(g, model.value(q, p) * density_kvn(chi)).real
    bracket = integrate(g, bracket_field(chi).imag).real
    return MismatchReport(float(h_kvn), float(physical), float(h_kvn - physical), float(bracket))


@dataclass
class CoincidenceReport:
    residual: float
    energy: float
    physical: float
    degenerate: bool


def kvh_energy_coincidence_check(chi: GridWaveFunction, model):
    """Relative gap between <chi|L_vH chi> and integral(H rho_kvh)."""
    g = chi.grid
    energy = inner(chi, kvh_liouvillian(model, chi)).real
    q, p = g.coordinates()
    physical = integrate(g, model.value(q, p) * density_kvh(chi)).real
    scale = max(abs(energy), abs(physical))
    if scale == 0:
        return CoincidenceReport(0.0, 0.0, 0.0, True)
    return CoincidenceReport(abs(energy - physical) / scale, float(energy), float(physical), False)


def extra_term_magnitude(model, chi: GridWaveFunction):
    """L2 norm of the van Hove phase term applied to chi, ||a chi||."""
    _, a = grid_fields(model, chi.grid)
    return float(np.sqrt(norm_sq(chi.with_values(a * chi.values))))


def relative_drift(values):
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(v - v[0])) / abs(v[0]))
