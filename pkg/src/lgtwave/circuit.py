"""Gate-level circuits: VQE vacuum, ancilla-encoded SVD blocks, Trotterized wave packets.

Circuits are Z2-only.  Angle conventions: Rz(a) = exp(-i a Z / 2) and
P(a) = diag(1, exp(i a)).  Gates are stored in time order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import BareMeson, CoefficientTable, build_bare_meson
from .model import Group, LatticeSpec, QubitLayout, build_hamiltonian, layout_for, vacuum_state
from .model import OperatorSum, enumerate_physical_basis

GATE_KINDS = ("h", "x", "rz", "rx", "ry", "cx", "p")
ORDERING_POLICY = "descending |C_mn|, ties by (m, n); both-halved branches adjacent, direct path first"


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if (self.kind == "cx") != (len(self.qubits) == 2):
            raise ValueError(f"wrong operand count for {self.kind}")
        if self.kind == "cx" and self.qubits[0] == self.qubits[1]:
            raise ValueError("CNOT control equals target")
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError("gate angle must be finite")

    def line(self) -> str:
        ops = " ".join(str(q) for q in self.qubits)
        return f"{self.kind} {ops}" + (f" {self.angle!r}" if self.angle is not None else "")


def H(q): return Gate("h", (q,))
def X(q): return Gate("x", (q,))
def CX(c, t): return Gate("cx", (c, t))
def RZ(q, a): return Gate("rz", (q,), float(a))
def P(q, a): return Gate("p", (q,), float(a))


@dataclass(frozen=True)
class Circuit:
    layout: QubitLayout
    gates: tuple[Gate, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = self.layout.n_qubits
        for g in self.gates:
            if any(not 0 <= q < n for q in g.qubits):
                raise ValueError(f"gate {g} outside a {n}-qubit layout")

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.layout != self.layout:
            raise ValueError("layout mismatch")
        return Circuit(self.layout, self.gates + other.gates, {**self.metadata, **other.metadata})

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return dict(sorted(out.items()))

    @property
    def cnot_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == "cx")

    def to_gate_list(self) -> str:
        return "".join(g.line() + "\n" for g in self.gates)

    def to_qasm(self) -> str:
        names = {"h": "h", "x": "x", "rz": "rz", "rx": "rx", "ry": "ry", "cx": "cx", "p": "u1"}
        lines = ["OPENQASM 2.0;", 'include "qelib1.inc";',
                 "// qubits: " + " ".join(self.layout.labels()),
                 f"qreg q[{self.layout.n_qubits}];", f"creg c[{self.layout.n_qubits}];"]
        for g in self.gates:
            arg = f"({g.angle!r})" if g.angle is not None else ""
            ops = ",".join(f"q[{q}]" for q in g.qubits)
            lines.append(f"{names[g.kind]}{arg} {ops};")
        lines.append("measure q -> c;")
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> str:
        meta = dict(self.metadata)
        meta["counts"] = self.counts()
        meta["cnot_total"] = self.cnot_count
        meta["n_qubits"] = self.layout.n_qubits
        meta["qubit_labels"] = self.layout.labels()
        return json.dumps(meta, indent=2, sort_keys=True, default=str)


def _require_z2(spec: LatticeSpec):
    if spec.group is not Group.Z2:
        raise ValueError("circuit synthesis covers the Z2 theory only")


def _require_efficient(spec: LatticeSpec):
    if not spec.efficient_jw:
        raise ValueError("arc-following JW strings need N = 2 mod 4")


# --------------------------------------------------------------------------
# Ground state

@dataclass(frozen=True)
class GsParams:
    theta_h: float
    theta_eps: float
    theta_m: float = 0.0
    n_layers: int = 1

    def __post_init__(self):
        for a in (self.theta_h, self.theta_eps, self.theta_m):
            if not math.isfinite(a):
                raise ValueError("angles must be finite")

    @property
    def theta_eps_mod_2pi(self) -> float:
        return self.theta_eps % (2 * math.pi)


def _prepare_vacuum(spec: LatticeSpec, layout: QubitLayout) -> list[Gate]:
    s = vacuum_state(spec)
    gates = [X(layout.fermion(n)) for n in range(spec.n_sites) if s.fermion_occ[n]]
    gates += [X(layout.link(n)) for n in range(spec.n_sites) if s.link_vals[n] == -1]
    return gates


def hopping_block(layout: QubitLayout, n: int, theta: float) -> list[Gate]:
    """exp(i theta (X_a Xl Y_b - Y_a Xl X_b) / 4) on link n (a = n, b = n + 1), 6 CNOTs.

    A phase gate on b maps the pair to X Xl X + Y Xl Y; CNOT(a, b) turns that
    into X_a Xl (1 - Z_b); Hadamards on a and the link make it diagonal.
    """
    N = layout.n_sites
    a, b, l = layout.fermion(n), layout.fermion((n + 1) % N), layout.link(n)
    phi = theta / 4
    return [
        P(b, -math.pi / 2), CX(a, b), H(a), H(l),
        CX(l, a), RZ(a, -2 * phi), CX(b, a), RZ(a, 2 * phi), CX(b, a), CX(l, a),
        H(a), H(l), CX(a, b), P(b, math.pi / 2),
    ]


def gs_circuit(spec: LatticeSpec, params: GsParams, *, ancilla: bool = False, prepare: bool = True) -> Circuit:
    """Hopping, mass then electric layers (time order) on the strong-coupling vacuum.

    Mass layer: exp(i theta_m m_f (-1)^n n_n).  Electric layer:
    exp(i theta_eps (epsilon / 2) E_n), i.e. Rz(-epsilon theta_eps) per link.
    """
    _require_z2(spec)
    _require_efficient(spec)
    layout = layout_for(spec, ancilla)
    N = spec.n_sites
    gates = _prepare_vacuum(spec, layout) if prepare else []
    for _ in range(params.n_layers):
        for n in range(N):
            gates += hopping_block(layout, n, params.theta_h)
        if params.theta_m:
            gates += [P(layout.fermion(n), params.theta_m * spec.m_f * (-1) ** n) for n in range(N)]
        if params.theta_eps:
            gates += [RZ(layout.link(n), -spec.epsilon * params.theta_eps) for n in range(N)]
    meta = dict(kind="ground_state", n_layers=params.n_layers, theta_h=params.theta_h,
                theta_eps=params.theta_eps, theta_eps_mod_2pi=params.theta_eps_mod_2pi,
                theta_m=params.theta_m, layer_order="hopping, mass, electric",
                predicted_cnot=predict_gate_counts(spec, "gs")[1] * params.n_layers)
    return Circuit(layout, tuple(gates), meta)


def gs_layer_generators(spec: LatticeSpec) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Physical-basis matrices: per-link hopping terms, mass and electric diagonals."""
    Hs = build_hamiltonian(spec)
    hop = Hs.part("hopping")
    per_link = []
    for n in range(spec.n_sites):
        terms = tuple(t for t in hop.terms if dict(t.ops).get(("b", n)))
        per_link.append(OperatorSum(terms).to_matrix(spec))
    mass = np.real(np.diag(Hs.part("mass").to_matrix(spec)))
    elec = np.real(np.diag(Hs.part("electric").to_matrix(spec)))
    return per_link, mass, elec


@dataclass(frozen=True)
class VqeReport:
    energy: float
    exact_energy: float
    infidelity: float
    delta_energy: float
    n_evaluations: int
    converged: bool


class GsEvaluator:
    """Fast physical-basis evaluation of the ground-state ansatz."""

    def __init__(self, spec: LatticeSpec):
        from .model import hamiltonian_matrix
        from .spectra import ground_state

        _require_z2(spec)
        self.spec = spec
        self.H = hamiltonian_matrix(spec)
        self.e0, self.omega = ground_state(spec, self.H)
        per_link, self.mass, self.elec = gs_layer_generators(spec)
        self.eig = [np.linalg.eigh(G) for G in per_link]
        basis = enumerate_physical_basis(spec)
        self.start = np.zeros(len(basis), dtype=complex)
        self.start[basis.index(vacuum_state(spec))] = 1

    def state(self, p: GsParams) -> np.ndarray:
        psi = self.start
        for _ in range(p.n_layers):
            for w, V in self.eig:
                psi = V @ (np.exp(1j * p.theta_h * w) * (V.conj().T @ psi))
            psi = np.exp(1j * p.theta_m * self.mass) * psi
            psi = np.exp(0.5j * p.theta_eps * self.elec) * psi
        return psi

    def energy(self, p: GsParams) -> float:
        v = self.state(p)
        return float(np.real(v.conj() @ self.H @ v))

    def report(self, p: GsParams, nfev: int = 0, converged: bool = True) -> VqeReport:
        v = self.state(p)
        e = float(np.real(v.conj() @ self.H @ v))
        return VqeReport(e, self.e0, 1 - abs(np.vdot(self.omega, v)) ** 2, abs(e - self.e0), nfev, converged)


def vqe_ground_state(spec: LatticeSpec, *, grid: int = 12, maxfev: int = 4000) -> tuple[GsParams, VqeReport]:
    """Minimize <H> over (theta_h, theta_eps) with N_GS = 1.

    The optimum is degenerate under (theta_h, phase) -> (-theta_h, -phase); the
    branch with theta_h <= 0 is returned and theta_eps is reduced to one period
    of the electric layer, 2 pi / |epsilon|.
    """
    from scipy.optimize import minimize

    ev = GsEvaluator(spec)
    period = 2 * math.pi / abs(spec.epsilon) if spec.epsilon else 2 * math.pi
    f = lambda x: ev.energy(GsParams(x[0], x[1]))  # noqa: E731
    seeds = [(th, te) for th in np.linspace(-1.0, 1.0, grid) for te in np.linspace(0, period, grid, endpoint=False)]
    x0 = min(seeds, key=f)
    res = minimize(f, x0, method="Nelder-Mead",
                   options=dict(xatol=1e-10, fatol=1e-13, maxfev=maxfev))
    th, te = float(res.x[0]), float(res.x[1])
    if th > 0:
        th, te = -th, -te
    te %= period
    p = GsParams(th, te)
    return p, ev.report(p, res.nfev, bool(res.success))


# --------------------------------------------------------------------------
# Ancilla-encoded SVD blocks

def _diag_block(layout: QubitLayout, m: int, n: int, jw: tuple[int, ...], alpha: float) -> list[Gate]:
    """exp(-i alpha' |0><0|_m |1><1|_n Z_jw Z_a) with alpha' = 4 alpha; 2l + 4 CNOTs."""
    a = layout.ancilla_index
    qm, qn = layout.fermion(m), layout.fermion(n)
    ladder = [CX(layout.fermion(j), a) for j in jw]
    # |0><0|_m |1><1|_n = (1 + Z_m - Z_n - Z_m Z_n) / 4
    core = [
        RZ(a, 2 * alpha),
        CX(qm, a), RZ(a, 2 * alpha), CX(qm, a),
        CX(qn, a), RZ(a, -2 * alpha),
        CX(qm, a), RZ(a, -2 * alpha), CX(qm, a),
        CX(qn, a),
    ]
    return ladder + core + ladder[::-1]


def branch_fragment(layout: QubitLayout, m: int, n: int, links: tuple[int, ...], jw: tuple[int, ...],
                    coeff: complex, theta: float) -> list[Gate]:
    """exp(-i theta (c A |1><0|_a + h.c.)) for A = sigma^-_m sigma^+_n Z_jw X_links."""
    if coeff == 0:
        return []
    a = layout.ancilla_index
    phi = float(np.angle(coeff))
    mag = abs(coeff)
    basis_in = [RZ(a, -phi), H(a)]
    basis_out = [H(a), RZ(a, phi)]
    if m == n:
        # n_m = (1 - Z_m) / 2
        body = [RZ(a, theta * mag), CX(layout.fermion(m), a), RZ(a, -theta * mag), CX(layout.fermion(m), a)]
        return basis_in + body + basis_out
    K = [CX(a, layout.fermion(m)), CX(a, layout.fermion(n))] + [CX(a, layout.link(l)) for l in links]
    body = _diag_block(layout, m, n, jw, theta * mag / 4)
    return K + basis_in + body + basis_out + K[::-1]


def svd_block(meson: BareMeson, coeff: complex, theta: float, layout: QubitLayout) -> list[Gate]:
    """Gate fragment for exp(-i theta Theta_mn) on a layout with an ancilla."""
    if layout.ancilla_index is None:
        raise ValueError("SVD blocks need an ancilla qubit")
    out: list[Gate] = []
    for b in meson.branches:
        out += branch_fragment(layout, meson.m, meson.n, b.links, b.jw_sites, coeff * b.weight, theta)
    return out


def block_cnots(meson: BareMeson) -> int:
    if meson.m == meson.n:
        return 2
    return sum(4 * b.length + 8 for b in meson.branches)


def _summands(spec: LatticeSpec, table: CoefficientTable, theta_c: float):
    kept = table.surviving(theta_c)
    if not kept:
        raise ValueError(f"no coefficients survive theta_c={theta_c}")
    return [(build_bare_meson(spec, m, n), c) for m, n, c in kept]


def wp_circuit(spec: LatticeSpec, table: CoefficientTable, n_trotter: int, theta_c: float, *,
               gs: GsParams | None = None) -> Circuit:
    """Second-order Trotterized exp(-i (pi/2) sum Theta_mn) over |C_mn| >= theta_c.

    Each step is a forward sweep followed by its mirror, both at angle
    (pi/2) / (2 n_trotter).  With ``gs`` the ground-state circuit is prepended.
    """
    _require_z2(spec)
    _require_efficient(spec)
    if n_trotter < 1:
        raise ValueError("n_trotter must be >= 1")
    layout = layout_for(spec, ancilla=True)
    summands = _summands(spec, table, theta_c)
    theta = (math.pi / 2) / n_trotter / 2
    fwd: list[Gate] = []
    for meson, c in summands:
        fwd += svd_block(meson, c, theta, layout)
    bwd: list[Gate] = []
    for meson, c in reversed(summands):
        bwd += svd_block(meson, c, theta, layout)
    gates: list[Gate] = []
    if gs is not None:
        gates += list(gs_circuit(spec, gs, ancilla=True).gates)
    for _ in range(n_trotter):
        gates += fwd + bwd
    per_sweep = sum(block_cnots(mz) for mz, _ in summands)
    meta = dict(kind="wave_packet", n_trotter=n_trotter, n_order=2, theta_c=theta_c,
                ordering=ORDERING_POLICY, n_summands=len(summands),
                summands=[(mz.m, mz.n, mz.wrapping.value, abs(c)) for mz, c in summands],
                cnot_per_sweep=per_sweep, predicted_cnot=per_sweep * 2 * n_trotter
                + (6 * spec.n_sites * gs.n_layers if gs is not None else 0),
                includes_ground_state=gs is not None)
    return Circuit(layout, tuple(gates), meta)


def predict_gate_counts(spec: LatticeSpec, mode: str, n_trotter: int = 1) -> tuple[int, int]:
    """(qubits, CNOTs) in closed form for mode gs, full or one_meson_truncated."""
    if not spec.efficient_jw:
        raise ValueError("closed-form counts assume N = 2 mod 4")
    N = spec.n_sites
    if mode == "gs":
        return 2 * N, 6 * N
    if mode == "full":
        return 2 * N + 1, (N ** 3 + 10 * N ** 2 + 2 * N) * 2 * n_trotter
    if mode == "one_meson_truncated":
        return 2 * N + 1, 26 * N * 2 * n_trotter
    raise ValueError(f"unknown mode {mode!r}")
