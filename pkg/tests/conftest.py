import math
from functools import reduce

import numpy as np
import pytest

from lgtwave.ansatz import WavePacketSpec, build_cmn, optimize_all
from lgtwave.circuit import Gate, vqe_ground_state, wp_circuit
from lgtwave.model import Group, LatticeSpec, hamiltonian_matrix, layout_for
from lgtwave.simulate import restrict, run
from lgtwave.spectra import ground_state

BENCH = LatticeSpec(Group.Z2, 6, 1.0, -0.3)
U1_BENCH = LatticeSpec(Group.U1, 6, 1.0, 1.0, 1)


@pytest.fixture(scope="session")
def z2():
    return BENCH


@pytest.fixture(scope="session")
def u1():
    return U1_BENCH


@pytest.fixture(scope="session")
def z2_H():
    return hamiltonian_matrix(BENCH)


@pytest.fixture(scope="session")
def z2_vacuum(z2_H):
    return ground_state(BENCH, z2_H)


@pytest.fixture(scope="session")
def z2_params():
    return optimize_all(BENCH)


@pytest.fixture(scope="session")
def u1_params():
    return optimize_all(U1_BENCH)


@pytest.fixture(scope="session")
def z2_gs():
    return vqe_ground_state(BENCH)


@pytest.fixture(scope="session")
def table_pi6(z2_params):
    return build_cmn(BENCH, WavePacketSpec(math.pi / 6, 3.0, 0.0), z2_params)


@pytest.fixture(scope="session")
def table_pi10(z2_params):
    return build_cmn(BENCH, WavePacketSpec(math.pi / 10, 3.0, 0.0), z2_params)


@pytest.fixture(scope="session")
def trunc_circuit(z2_gs, table_pi6):
    """Benchmark wave-packet circuit: sigma = pi/6, theta_c = 0.1, one Trotter step, VQE vacuum prepended."""
    return wp_circuit(BENCH, table_pi6, 1, 0.1, gs=z2_gs[0])


@pytest.fixture(scope="session")
def trunc_state(trunc_circuit):
    return run(trunc_circuit)


@pytest.fixture(scope="session")
def trunc_probs(trunc_state):
    """Ancilla-1 physical-label probabilities of the truncated state, normalized."""
    p = np.abs(restrict(BENCH, trunc_state, 1)) ** 2
    return p / p.sum()


def random_state(dim, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


PAULI = {"X": np.array([[0, 1], [1, 0]]), "Z": np.diag([1, -1]),
         "create": np.array([[0, 0], [1, 0]]), "destroy": np.array([[0, 1], [0, 0]])}


def branch_theta(spec, m, n, branch, coeff):
    """Dense c A |1><0|_a + h.c. on the branch's support qubits (ancilla last)."""
    lay = layout_for(spec, ancilla=True)
    roles = {lay.fermion(m): "create", lay.fermion(n): "destroy"}
    if m == n:
        roles = {lay.fermion(m): "num"}
    roles.update({lay.fermion(j): "Z" for j in branch.jw_sites})
    roles.update({lay.link(l): "X" for l in branch.links})
    qubits = sorted(roles) + [lay.ancilla_index]
    mats = []
    for q in qubits[:-1]:
        mats.append(np.diag([0, 1]) if roles[q] == "num" else PAULI[roles[q]])
    A = reduce(np.kron, mats) * branch.weight
    T = coeff * np.kron(A, PAULI["create"])
    return T + T.conj().T, qubits


def remap_gates(gates, qubits):
    pos = {q: i for i, q in enumerate(qubits)}
    return [Gate(g.kind, tuple(pos[q] for q in g.qubits), g.angle) for g in gates]


# acceptance lines collected during the run, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
