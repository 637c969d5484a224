"""Interacting meson creation operators and their wave-packet assembly.

b_k^dag = sum_{p+q=k} eta(p,q) sum_{m,n} C(p,m) D(q,n) M_{m,n}

with Gaussian eta in the relative momentum, free staggered spinor weights C, D
and gauge-invariant bare mesons M_{m,n}.  Pairs (p, q) are admitted only when
p + q equals k exactly on the momentum grid (no folding back into the zone).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .model import (
    LatticeSpec,
    OperatorSum,
    arc_bilinear,
    brillouin_zone,
    check_momentum,
    fermion_bilinear,
    hamiltonian_matrix,
    link_string,
)
from .spectra import fidelity, ground_state, mesonic_eigenpair

MOMENTUM_TOL = 1e-9


# --------------------------------------------------------------------------
# Parameter types

@dataclass(frozen=True)
class WavePacketSpec:
    """Gaussian profile Psi(k) ~ exp(-i k mu) exp(-(k - k0)^2 / (4 sigma^2))."""

    sigma: float
    mu: float
    k0: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("wave-packet width sigma must be positive")

    def profile(self, n_sites: int) -> dict[float, complex]:
        ks = brillouin_zone(n_sites)
        k0 = check_momentum(n_sites, self.k0)
        # log-weights keep very narrow profiles finite (delta-function limit)
        logw = -((ks - k0) ** 2) / (4 * self.sigma ** 2)
        amp = np.exp(logw - logw.max()) * np.exp(-1j * ks * self.mu)
        amp /= np.linalg.norm(amp)
        return {float(k): complex(a) for k, a in zip(ks, amp)}


@dataclass(frozen=True)
class SectorParams:
    k: float
    sigma_A: float
    mu_A: float
    energy: float = math.nan
    fidelity: float = math.nan
    converged: bool = True


@dataclass(frozen=True)
class AnsatzParams:
    sectors: tuple[SectorParams, ...] = ()

    def __getitem__(self, k: float) -> SectorParams:
        for s in self.sectors:
            if abs(s.k - k) < MOMENTUM_TOL:
                return s
        raise KeyError(k)

    def __iter__(self):
        return iter(self.sectors)

    @property
    def momenta(self) -> list[float]:
        return [s.k for s in self.sectors]

    def to_records(self) -> str:
        lines = ["k,sigma_A,mu_A,energy,fidelity"]
        for s in self.sectors:
            lines.append(f"{s.k:.12g},{s.sigma_A:.12g},{s.mu_A:.12g},{s.energy:.12g},{s.fidelity:.12g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_records(cls, text: str) -> "AnsatzParams":
        rows = [r.split(",") for r in text.strip().splitlines()[1:]]
        return cls(tuple(SectorParams(*(float(x) for x in r[:5])) for r in rows))


# --------------------------------------------------------------------------
# Spinor weights

def _spinor_scale(p: float, m_f: float) -> tuple[float, float]:
    """(sqrt((m_f + w)/(2 pi w)), v_p), with the m_f = 0, p = 0 limit taken."""
    s = math.sin(p)
    w = math.sqrt(m_f * m_f + s * s)
    if w < 1e-14:
        return math.sqrt(1 / math.pi), 0.0
    return math.sqrt((m_f + w) / (2 * math.pi * w)), s / (m_f + w)


def spinor_weights(p: float, site: int, role: str, m_f: float) -> complex:
    """Free staggered mode weight C(p, m) (role "C") or D(q, n) (role "D")."""
    norm, v = _spinor_scale(p, m_f)
    even = site % 2 == 0
    if role == "C":
        proj = 1.0 if even else v
    elif role == "D":
        proj = -v if even else 1.0
    else:
        raise ValueError(f"role must be 'C' or 'D', got {role!r}")
    return norm * complex(math.cos(p * site), math.sin(p * site)) * proj


def momentum_pairs(n_sites: int, k: float) -> list[tuple[float, float]]:
    """Constituent momenta (p, q) on the grid with p + q = k."""
    ks = brillouin_zone(n_sites)
    return [(float(p), float(q)) for p in ks for q in ks if abs(p + q - k) < MOMENTUM_TOL]


def eta_weights(pairs: list[tuple[float, float]], sigma_A: float, mu_A: float) -> np.ndarray:
    d = np.array([p - q for p, q in pairs])
    logw = -(d ** 2) / (4 * sigma_A ** 2)
    amp = np.exp(logw - logw.max()) * np.exp(0.5j * mu_A * d)
    return amp / np.linalg.norm(amp)


# --------------------------------------------------------------------------
# Bare mesons

class Wrapping(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    BOTH_HALVED = "both_halved"


@dataclass(frozen=True)
class MesonBranch:
    """One flux path of a bare meson.

    ``jw_sites`` carry sigma^z in the qubit image, which follows the same arc
    as the links.  Along the wrap-around arc that image equals the exact
    fermion operator times (-1)^(Q+1), i.e. exactly when N = 2 mod 4.
    """

    links: tuple[int, ...]
    link_op: str
    jw_sites: tuple[int, ...]
    weight: float

    @property
    def length(self) -> int:
        return len(self.links)


@dataclass(frozen=True)
class BareMeson:
    m: int
    n: int
    wrapping: Wrapping
    branches: tuple[MesonBranch, ...]
    operator: OperatorSum  # exact fermionic content, both branches summed

    @property
    def length(self) -> int:
        return self.branches[0].length

    def qubit_operator(self, spec: LatticeSpec) -> OperatorSum:
        """JW image with strings along the flux path (efficient form)."""
        if self.m == self.n:
            return self.operator
        if not spec.efficient_jw:
            raise ValueError("arc-following JW strings need N = 2 mod 4")
        out = OperatorSum()
        for b in self.branches:
            out = out + arc_bilinear(spec, self.m, self.n, list(b.jw_sites), b.weight) * link_string(spec, list(b.links), b.link_op)
        return out


def _arcs(N: int, m: int, n: int) -> tuple[MesonBranch, MesonBranch]:
    lo, hi = min(m, n), max(m, n)
    direct_links = tuple(range(lo, hi))
    wrap_links = tuple(l for l in range(N) if l not in direct_links)
    up = "U" if m < n else "Ud"
    down = "Ud" if m < n else "U"
    direct = MesonBranch(direct_links, up, tuple(range(lo + 1, hi)), 1.0)
    wrap_sites = tuple(j for j in range(N) if j not in range(lo, hi + 1))
    wrap = MesonBranch(wrap_links, down, wrap_sites, 1.0)
    return direct, wrap


def build_bare_meson(spec: LatticeSpec, m: int, n: int) -> BareMeson:
    """Shortest gauge-invariant xi^dag_m (links) xi_n; ties keep both paths at 1/sqrt(2)."""
    N = spec.n_sites
    if not (0 <= m < N and 0 <= n < N):
        raise ValueError(f"sites ({m}, {n}) outside lattice of {N}")
    ferm = fermion_bilinear(spec, m, n)
    if m == n:
        branch = MesonBranch((), "I", (), 1.0)
        return BareMeson(m, n, Wrapping.FORWARD, (branch,), ferm)
    direct, wrap = _arcs(N, m, n)
    if direct.length < wrap.length:
        chosen, kind = (direct,), Wrapping.FORWARD
    elif wrap.length < direct.length:
        chosen, kind = (wrap,), Wrapping.BACKWARD
    else:
        h = 1 / math.sqrt(2)
        chosen = (MesonBranch(direct.links, direct.link_op, direct.jw_sites, h),
                  MesonBranch(wrap.links, wrap.link_op, wrap.jw_sites, h))
        kind = Wrapping.BOTH_HALVED
    op = OperatorSum()
    for b in chosen:
        op = op + (ferm * link_string(spec, list(b.links), b.link_op)) * b.weight
    return BareMeson(m, n, kind, chosen, op)


@lru_cache(maxsize=32)
def _meson_matrices(spec: LatticeSpec) -> tuple[np.ndarray, ...]:
    N = spec.n_sites
    return tuple(build_bare_meson(spec, m, n).operator.to_matrix(spec, strict=True)
                 for m in range(N) for n in range(N))


def meson_matrix(spec: LatticeSpec, m: int, n: int) -> np.ndarray:
    return _meson_matrices(spec)[m * spec.n_sites + n]


def mesonic_span(spec: LatticeSpec, omega: np.ndarray) -> list[np.ndarray]:
    return [M @ omega for M in _meson_matrices(spec)]


# --------------------------------------------------------------------------
# Momentum-sector creation operators

def _weight_table(spec: LatticeSpec, p: float, q: float) -> np.ndarray:
    N = spec.n_sites
    c = np.array([spinor_weights(p, m, "C", spec.m_f) for m in range(N)])
    d = np.array([spinor_weights(q, n, "D", spec.m_f) for n in range(N)])
    return np.outer(c, d)


def sector_coefficients(spec: LatticeSpec, k: float, sigma_A: float, mu_A: float) -> np.ndarray:
    """N x N matrix of b_k^dag in the bare-meson basis."""
    pairs = momentum_pairs(spec.n_sites, k)
    if not pairs:
        raise ValueError(f"no constituent pairs for k={k}")
    eta = eta_weights(pairs, sigma_A, mu_A)
    return sum(e * _weight_table(spec, p, q) for e, (p, q) in zip(eta, pairs))


def operator_from_table(spec: LatticeSpec, C: np.ndarray) -> OperatorSum:
    out = OperatorSum()
    for m in range(spec.n_sites):
        for n in range(spec.n_sites):
            if C[m, n] != 0:
                out = out + build_bare_meson(spec, m, n).operator * complex(C[m, n])
    return out


def apply_table(spec: LatticeSpec, C: np.ndarray, state: np.ndarray) -> np.ndarray:
    """(sum_mn C_mn M_mn) |state> using cached dense meson matrices."""
    N = spec.n_sites
    out = np.zeros_like(state, dtype=complex)
    for m in range(N):
        for n in range(N):
            if C[m, n] != 0:
                out += C[m, n] * (meson_matrix(spec, m, n) @ state)
    return out


@dataclass
class SectorProblem:
    """Precomputed pieces for fast evaluation of b_k^dag |Omega> at any (sigma_A, mu_A)."""

    spec: LatticeSpec
    k: float
    H: np.ndarray
    omega: np.ndarray
    pairs: list[tuple[float, float]]
    columns: np.ndarray  # B(p, q) |Omega> per pair
    project_vacuum: bool = True

    @classmethod
    def build(cls, spec: LatticeSpec, k: float, *, H: np.ndarray | None = None,
              omega: np.ndarray | None = None) -> "SectorProblem":
        k = check_momentum(spec.n_sites, k)
        H = hamiltonian_matrix(spec) if H is None else H
        if omega is None:
            _, omega = ground_state(spec, H)
        pairs = momentum_pairs(spec.n_sites, k)
        cols = [apply_table(spec, _weight_table(spec, p, q), omega) for p, q in pairs]
        # only k = 0 summands can carry a vacuum component
        return cls(spec, k, H, omega, pairs, np.column_stack(cols), abs(k) < MOMENTUM_TOL)

    def raw_state(self, sigma_A: float, mu_A: float) -> np.ndarray:
        return self.columns @ eta_weights(self.pairs, sigma_A, mu_A)

    def state(self, sigma_A: float, mu_A: float) -> np.ndarray:
        v = self.raw_state(sigma_A, mu_A)
        if self.project_vacuum:
            v = v - (self.omega.conj() @ v) * self.omega
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            raise ZeroDivisionError(f"ansatz state vanishes at k={self.k}")
        return v / nrm

    def energy(self, sigma_A: float, mu_A: float) -> float:
        v = self.state(sigma_A, mu_A)
        return float(np.real(v.conj() @ self.H @ v))


def build_bk(spec: LatticeSpec, k: float, params: SectorParams | AnsatzParams, *,
             H: np.ndarray | None = None, omega: np.ndarray | None = None) -> tuple[OperatorSum, np.ndarray]:
    """b_k^dag as an operator and the normalized state b_k^dag |Omega> (vacuum removed for k = 0)."""
    sp = params[k] if isinstance(params, AnsatzParams) else params
    prob = SectorProblem.build(spec, k, H=H, omega=omega)
    op = operator_from_table(spec, sector_coefficients(spec, prob.k, sp.sigma_A, sp.mu_A))
    return op, prob.state(sp.sigma_A, sp.mu_A)


def optimize_sector(prob: SectorProblem, *, grid: int = 16, maxfev: int = 2000,
                    tol: float = 1e-8, exact: np.ndarray | None = None) -> SectorParams:
    """Grid-seeded Nelder-Mead minimization of <H> over (sigma_A, mu_A)."""
    N = prob.spec.n_sites

    def f(x):
        try:
            return prob.energy(abs(x[0]) + 1e-12, x[1])
        except ZeroDivisionError:
            return 1e6

    best = None
    for s in np.geomspace(0.1, 2 * np.pi, grid):
        for mu in np.linspace(-N / 2, N / 2, grid):
            e = f((s, mu))
            if best is None or e < best[0] - 1e-12:
                best = (e, (s, mu))
    res = minimize(f, best[1], method="Nelder-Mead",
                   options=dict(xatol=tol, fatol=tol, maxfev=maxfev))
    x = res.x if res.fun <= best[0] else np.array(best[1])
    converged = bool(res.success)
    if not converged:
        warnings.warn(f"ansatz optimization at k={prob.k} stopped after {res.nfev} evaluations; "
                      "returning best point found", RuntimeWarning, stacklevel=2)
    sigma, mu = abs(float(x[0])) + 1e-12, float(x[1])
    F = math.nan
    if exact is not None:
        F = fidelity(prob.state(sigma, mu), exact)
    return SectorParams(prob.k, sigma, mu, prob.energy(sigma, mu), F, converged)


def optimize_ansatz(spec: LatticeSpec, k: float, *, H: np.ndarray | None = None,
                    omega: np.ndarray | None = None, with_fidelity: bool = True, **kw) -> SectorParams:
    """Optimal (sigma_A, mu_A) in sector k with achieved energy and exact-state fidelity."""
    H = hamiltonian_matrix(spec) if H is None else H
    if omega is None:
        _, omega = ground_state(spec, H)
    prob = SectorProblem.build(spec, k, H=H, omega=omega)
    exact = mesonic_eigenpair(spec, prob.k, H=H, vacuum=omega)[1] if with_fidelity else None
    return optimize_sector(prob, exact=exact, **kw)


def optimize_all(spec: LatticeSpec, *, jobs: int = 1, **kw) -> AnsatzParams:
    H = hamiltonian_matrix(spec)
    _, omega = ground_state(spec, H)
    ks = [float(k) for k in brillouin_zone(spec.n_sites)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            futs = [ex.submit(optimize_ansatz, spec, k, **kw) for k in ks]
            return AnsatzParams(tuple(f.result() for f in futs))
    return AnsatzParams(tuple(optimize_ansatz(spec, k, H=H, omega=omega, **kw) for k in ks))


# --------------------------------------------------------------------------
# Wave packets

@dataclass(frozen=True)
class CoefficientTable:
    n_sites: int
    C: np.ndarray = field(repr=False)

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.C)

    def ranked(self) -> list[tuple[int, int, complex]]:
        """Entries by descending |C|, ties broken by (m, n)."""
        N = self.n_sites
        items = [(m, n, complex(self.C[m, n])) for m in range(N) for n in range(N)]
        return sorted(items, key=lambda t: (-round(abs(t[2]), 12), t[0], t[1]))

    def surviving(self, theta_c: float) -> list[tuple[int, int, complex]]:
        return [t for t in self.ranked() if abs(t[2]) >= theta_c and abs(t[2]) > 0]

    def to_csv(self) -> str:
        lines = ["m,n,re,im,abs"]
        for m in range(self.n_sites):
            for n in range(self.n_sites):
                c = self.C[m, n]
                lines.append(f"{m},{n},{c.real:.15g},{c.imag:.15g},{abs(c):.15g}")
        return "\n".join(lines) + "\n"


def build_cmn(spec: LatticeSpec, wp: WavePacketSpec, params: AnsatzParams) -> CoefficientTable:
    """Position-space coefficients C_mn = sum_k Psi(k) [b_k^dag]_mn."""
    C = np.zeros((spec.n_sites, spec.n_sites), dtype=complex)
    for k, amp in wp.profile(spec.n_sites).items():
        sp = params[k]
        C += amp * sector_coefficients(spec, k, sp.sigma_A, sp.mu_A)
    return CoefficientTable(spec.n_sites, C)


def wavepacket_exact(spec: LatticeSpec, wp: WavePacketSpec, params: AnsatzParams, *,
                     omega: np.ndarray | None = None) -> np.ndarray:
    """normalize(sum_k Psi(k) b_k^dag |Omega>), the benchmark wave packet."""
    if omega is None:
        _, omega = ground_state(spec)
    v = apply_table(spec, build_cmn(spec, wp, params).C, omega)
    nrm = np.linalg.norm(v)
    if nrm < 1e-12:
        raise ZeroDivisionError("wave-packet state vanishes")
    return v / nrm


@dataclass(frozen=True)
class EncodingDiagnostics:
    creation_norm: float       # || b^dag |Omega> ||
    annihilation_norm: float   # || b |Omega> ||
    commutator_residual: float  # || ([b, b^dag] - 1) |Omega> ||


def encoding_diagnostics(spec: LatticeSpec, table: CoefficientTable, omega: np.ndarray) -> EncodingDiagnostics:
    N = spec.n_sites
    Bd = sum(table.C[m, n] * meson_matrix(spec, m, n) for m in range(N) for n in range(N))
    B = Bd.conj().T
    comm = B @ Bd - Bd @ B
    return EncodingDiagnostics(
        float(np.linalg.norm(Bd @ omega)),
        float(np.linalg.norm(B @ omega)),
        float(np.linalg.norm(comm @ omega - omega)),
    )
