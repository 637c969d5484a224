"""Statevector execution, shot sampling, symmetry filtering and a toy noise channel.

Qubit 0 is the most significant bit of every amplitude index and the leftmost
character of every bitstring, so a bitstring reads f0 b0 f1 b1 ... a.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate
from .model import LatticeSpec, decode_bits, enumerate_physical_basis, qubit_index, satisfies_gauss

NORM_TOL = 1e-10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"x": _X, "y": _Y, "z": _Z}


def gate_matrix(g: Gate) -> np.ndarray:
    """2x2 (single-qubit) or 4x4 (CNOT, control first) defining matrix."""
    a = g.angle
    if g.kind == "h":
        return _H
    if g.kind == "x":
        return _X
    if g.kind == "rz":
        return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    if g.kind == "rx":
        c, s = np.cos(a / 2), np.sin(a / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    if g.kind == "ry":
        c, s = np.cos(a / 2), np.sin(a / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if g.kind == "p":
        return np.diag([1, np.exp(1j * a)])
    if g.kind == "cx":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = _X
        return m
    raise KeyError(g.kind)


@dataclass
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        a = np.zeros(2 ** n_qubits, dtype=complex)
        a[0] = 1
        return cls(a, n_qubits)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        a = np.zeros(2 ** n_qubits, dtype=complex)
        a[index] = 1
        return cls(a, n_qubits)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.n_qubits)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _apply_1q(psi: np.ndarray, n: int, q: int, M: np.ndarray) -> np.ndarray:
    t = psi.reshape(2 ** q, 2, 2 ** (n - q - 1))
    return np.einsum("ab,ibj->iaj", M, t).reshape(-1)


def _apply_cx(psi: np.ndarray, n: int, c: int, t: int) -> np.ndarray:
    v = psi.reshape((2,) * n).copy()
    sel = [slice(None)] * n
    sel[c] = 1
    sub = v[tuple(sel)]
    ax = t if t < c else t - 1
    v[tuple(sel)] = np.flip(sub, axis=ax)
    return v.reshape(-1)


def apply_gate(psi: np.ndarray, n: int, g: Gate) -> np.ndarray:
    if g.kind == "cx":
        return _apply_cx(psi, n, g.qubits[0], g.qubits[1])
    if g.kind in PAULIS:
        return _apply_1q(psi, n, g.qubits[0], PAULIS[g.kind])
    return _apply_1q(psi, n, g.qubits[0], gate_matrix(g))


def run(circuit: Circuit, initial: StateVector | None = None, *, check_norm: bool = True) -> StateVector:
    n = circuit.layout.n_qubits
    state = StateVector.zero(n) if initial is None else initial
    if state.n_qubits != n:
        raise ValueError(f"state has {state.n_qubits} qubits, circuit needs {n}")
    psi = state.amplitudes.astype(complex, copy=True)
    for g in circuit.gates:
        psi = apply_gate(psi, n, g)
    if check_norm and abs(np.linalg.norm(psi) - 1) > NORM_TOL:
        raise FloatingPointError("state norm drifted during evolution")
    return StateVector(psi, n)


def circuit_unitary(gates, n_qubits: int) -> np.ndarray:
    """Dense unitary of a gate sequence (small registers only)."""
    dim = 2 ** n_qubits
    U = np.eye(dim, dtype=complex)
    cols = []
    for j in range(dim):
        psi = U[:, j]
        for g in gates:
            psi = apply_gate(psi, n_qubits, g)
        cols.append(psi)
    return np.column_stack(cols)


# --------------------------------------------------------------------------
# Physical-basis embedding

def embed(spec: LatticeSpec, vec: np.ndarray, ancilla: int | None = None) -> StateVector:
    """Physical-basis vector as a register state (ancilla bit appended if given)."""
    basis = enumerate_physical_basis(spec)
    n = spec.n_sites * (1 + spec.link_qubits) + (ancilla is not None)
    a = np.zeros(2 ** n, dtype=complex)
    for amp, s in zip(vec, basis):
        a[qubit_index(spec, s, ancilla)] = amp
    return StateVector(a, n)


def restrict(spec: LatticeSpec, state: StateVector, ancilla: int | None = None) -> np.ndarray:
    """Physical-basis amplitudes of a register state (optionally at fixed ancilla)."""
    basis = enumerate_physical_basis(spec)
    return np.array([state.amplitudes[qubit_index(spec, s, ancilla)] for s in basis])


def physical_mask(spec: LatticeSpec, ancilla: bool) -> np.ndarray:
    """Boolean mask over register indices that encode Gauss-law states (any ancilla)."""
    n = spec.n_sites * (1 + spec.link_qubits) + int(ancilla)
    mask = np.zeros(2 ** n, dtype=bool)
    for s in enumerate_physical_basis(spec):
        if ancilla:
            mask[qubit_index(spec, s, 0)] = True
            mask[qubit_index(spec, s, 1)] = True
        else:
            mask[qubit_index(spec, s)] = True
    return mask


def leakage(spec: LatticeSpec, state: StateVector, ancilla: bool) -> float:
    return float(state.probabilities[~physical_mask(spec, ancilla)].sum())


# --------------------------------------------------------------------------
# Sampling and mitigation

@dataclass(frozen=True)
class ShotRecord:
    bitstrings: tuple[str, ...]
    seed: int | None
    n_qubits: int

    @property
    def n_shots(self) -> int:
        return len(self.bitstrings)

    def to_csv(self) -> str:
        return "shot_index,bitstring\n" + "".join(f"{i},{b}\n" for i, b in enumerate(self.bitstrings))


def read_shots(text: str, seed: int | None = None) -> ShotRecord:
    """Parse a shot CSV (``#`` header lines ignored)."""
    bits = []
    for line in text.splitlines():
        if not line or line.startswith("#") or line.startswith("shot_index"):
            continue
        bits.append(line.split(",")[1].strip())
    if not bits:
        raise ValueError("shot file holds no records")
    n = len(bits[0])
    if any(len(b) != n or set(b) - {"0", "1"} for b in bits):
        raise ValueError("malformed bitstrings")
    return ShotRecord(tuple(bits), seed, n)


def _bitstrings(indices: np.ndarray, n: int) -> tuple[str, ...]:
    return tuple(format(int(i), f"0{n}b") for i in indices)


def sample(state: StateVector, n_shots: int, seed: int | None) -> ShotRecord:
    p = state.probabilities
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(p), size=n_shots, p=p)
    return ShotRecord(_bitstrings(idx, state.n_qubits), seed, state.n_qubits)


@dataclass(frozen=True)
class MitigationResult:
    probabilities: np.ndarray  # over physical labels, sums to 1
    counts: np.ndarray
    n_shots: int
    n_physical: int
    n_ancilla1: int


def classify_events(spec: LatticeSpec, records: ShotRecord) -> tuple[np.ndarray, np.ndarray]:
    """Per shot: physical label (-1 if Gauss-violating) and ancilla bit (-1 if absent)."""
    index = {s: i for i, s in enumerate(enumerate_physical_basis(spec))}
    labels = np.full(records.n_shots, -1)
    anc = np.full(records.n_shots, -1)
    cache: dict[str, tuple[int, int]] = {}
    for i, b in enumerate(records.bitstrings):
        if b not in cache:
            s, a = decode_bits(spec, b)
            lab = -1
            if s is not None and sum(s.fermion_occ) == spec.n_sites // 2 and satisfies_gauss(spec, s):
                lab = index.get(s, -1)
            cache[b] = (lab, -1 if a is None else a)
        labels[i], anc[i] = cache[b]
    return labels, anc


def mitigate(records: ShotRecord, spec: LatticeSpec, *, require_ancilla: bool = True) -> MitigationResult:
    """Keep Gauss-law events (and ancilla = 1 when present); renormalize."""
    labels, anc = classify_events(spec, records)
    phys = labels >= 0
    keep = phys & (anc == 1) if require_ancilla and (anc >= 0).any() else phys
    if not keep.any():
        raise ValueError("no events survive symmetry filtering")
    L = len(enumerate_physical_basis(spec))
    counts = np.bincount(labels[keep], minlength=L)
    return MitigationResult(counts / counts.sum(), counts, records.n_shots, int(phys.sum()),
                            int((phys & (anc == 1)).sum()))


# --------------------------------------------------------------------------
# Noise

@dataclass(frozen=True)
class DepolarizingChannel:
    """Random Pauli after each gate on its operands, sampled per shot."""

    circuit: Circuit
    p_1q: float
    p_2q: float
    seed: int | None

    def __post_init__(self):
        for p in (self.p_1q, self.p_2q):
            if not 0 <= p < 1:
                raise ValueError("error probabilities must lie in [0, 1)")

    def sample(self, n_shots: int, initial: StateVector | None = None) -> ShotRecord:
        if self.p_1q == 0 and self.p_2q == 0:
            return sample(run(self.circuit, initial), n_shots, self.seed)
        rng = np.random.default_rng(self.seed)
        n = self.circuit.layout.n_qubits
        gates = self.circuit.gates
        ideal = None
        out = []
        for _ in range(n_shots):
            faults = []
            for i, g in enumerate(gates):
                p = self.p_2q if len(g.qubits) == 2 else self.p_1q
                if p > 0 and rng.random() < p:
                    if len(g.qubits) == 1:
                        paulis = [(rng.choice(["x", "y", "z"]),)]
                    else:
                        # uniformly one of the 15 non-identity two-qubit Paulis
                        k = rng.integers(1, 16)
                        paulis = [("ixyz"[k // 4], "ixyz"[k % 4])]
                    faults.append((i, g.qubits, paulis[0]))
            if not faults:
                if ideal is None:
                    ideal = run(self.circuit, None if initial is None else initial.copy()).probabilities
                p = ideal
            else:
                psi = (StateVector.zero(n) if initial is None else initial).amplitudes.astype(complex)
                fi = 0
                for i, g in enumerate(gates):
                    psi = apply_gate(psi, n, g)
                    while fi < len(faults) and faults[fi][0] == i:
                        _, qs, ps = faults[fi]
                        for q, name in zip(qs, ps):
                            if name != "i":
                                psi = _apply_1q(psi, n, q, PAULIS[name])
                        fi += 1
                p = np.abs(psi) ** 2
            idx = rng.choice(len(p), p=p / p.sum())
            out.append(format(int(idx), f"0{n}b"))
        return ShotRecord(tuple(out), self.seed, n)


def flip_bits(records: ShotRecord, p: float, seed: int | None) -> ShotRecord:
    """Readout-style noise: flip every bit independently with probability p."""
    if not 0 <= p <= 1:
        raise ValueError("flip probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    arr = np.array([[c == "1" for c in b] for b in records.bitstrings], dtype=bool)
    arr ^= rng.random(arr.shape) < p
    return ShotRecord(tuple("".join("1" if x else "0" for x in row) for row in arr), records.seed, records.n_qubits)


def depolarize(circuit: Circuit, p_1q: float, p_2q: float, seed: int | None) -> DepolarizingChannel:
    return DepolarizingChannel(circuit, p_1q, p_2q, seed)
