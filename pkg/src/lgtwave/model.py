"""Lattice, Hilbert space and Hamiltonian for 1+1D Z2 / U(1) gauge theories.

One flavor of staggered fermions on ``N`` sites with periodic boundary
conditions.  Fermion site ``n`` and the link leaving it (``n -> n+1``) are the
two local degrees of freedom; fermionic operators are Jordan-Wigner mapped so
that qubit value 1 means "occupied".

Link conventions
----------------
Z2 links store the electric eigenvalue ``E = +1`` (spin up, qubit 0) or
``E = -1`` (spin down, qubit 1).  U(1) links store the integer flux
``l in [-cutoff, cutoff]``.  The link operator called ``U`` throughout is the
one that makes ``xi^dag_n U_n xi_{n+1}`` commute with the Gauss operators
below; for U(1) it shifts ``l -> l - 1``.
"""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class Group(str, Enum):
    Z2 = "Z2"
    U1 = "U1"


@dataclass(frozen=True)
class LatticeSpec:
    group: Group
    n_sites: int
    m_f: float = 1.0
    epsilon: float = -0.3
    cutoff: int = 1

    def __post_init__(self):
        object.__setattr__(self, "group", Group(self.group))
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError(f"n_sites must be a positive even integer, got {self.n_sites}")
        if self.m_f < 0:
            raise ValueError("m_f must be non-negative")
        if self.group is Group.U1 and self.cutoff < 1:
            raise ValueError("U1 cutoff must be >= 1")

    @property
    def link_dim(self) -> int:
        return 2 if self.group is Group.Z2 else 2 * self.cutoff + 1

    @property
    def link_qubits(self) -> int:
        return 1 if self.group is Group.Z2 else math.ceil(math.log2(self.link_dim))

    @property
    def efficient_jw(self) -> bool:
        """True when JW strings may follow the shorter arc (Q = N/2 odd)."""
        return self.n_sites % 4 == 2

    @property
    def gauss_value(self) -> int:
        return 1 if self.group is Group.Z2 else 0

    def link_values(self) -> tuple[int, ...]:
        if self.group is Group.Z2:
            return (-1, 1)
        return tuple(range(-self.cutoff, self.cutoff + 1))

    def vacuum_link(self) -> int:
        """Electric eigenvalue of the strong-coupling vacuum link."""
        if self.group is Group.U1:
            return 0
        return 1 if self.epsilon <= 0 else -1

    def replace(self, **kw) -> "LatticeSpec":
        d = dict(group=self.group, n_sites=self.n_sites, m_f=self.m_f,
                 epsilon=self.epsilon, cutoff=self.cutoff)
        d.update(kw)
        return LatticeSpec(**d)


def read_spec(path: str | Path) -> LatticeSpec:
    """Parse a ``key = value`` lattice config file."""
    return spec_from_mapping(read_config(path))


def read_config(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[run]\n" + Path(path).read_text())
    return dict(parser["run"])


def spec_from_mapping(cfg: dict) -> LatticeSpec:
    return LatticeSpec(
        group=Group(str(cfg.get("group", "Z2")).upper()),
        n_sites=int(cfg.get("n_sites", 6)),
        m_f=float(cfg.get("m_f", 1.0)),
        epsilon=float(cfg.get("epsilon", -0.3)),
        cutoff=int(cfg.get("cutoff", 1)),
    )


@dataclass(frozen=True, order=True)
class BasisState:
    fermion_occ: tuple[int, ...]
    link_vals: tuple[int, ...]

    @property
    def charge(self) -> int:
        return sum(self.fermion_occ)


def satisfies_gauss(spec: LatticeSpec, s: BasisState) -> bool:
    N = spec.n_sites
    for n in range(N):
        odd = n % 2
        if spec.group is Group.Z2:
            g = s.link_vals[n] * s.link_vals[n - 1] * (-1) ** (s.fermion_occ[n] - odd)
        else:
            g = s.link_vals[n] - s.link_vals[n - 1] + s.fermion_occ[n] - odd
        if g != spec.gauss_value:
            return False
    return True


def _golden_table(spec: LatticeSpec) -> str | None:
    if spec.n_sites != 6:
        return None
    if spec.group is Group.Z2:
        return "z2_n6.csv"
    if spec.cutoff == 1:
        return "u1_n6_cutoff1.csv"
    return None


def read_basis_csv(spec: LatticeSpec, text: str) -> list[BasisState]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in sorted(rows, key=lambda r: int(r["label"])):
        occ = tuple(int(r[f"f_{n}"]) for n in range(spec.n_sites))
        raw = [int(r[f"b_{n}"]) for n in range(spec.n_sites)]
        links = tuple(1 - 2 * b for b in raw) if spec.group is Group.Z2 else tuple(raw)
        out.append(BasisState(occ, links))
    return out


def enumerate_physical_basis(spec: LatticeSpec) -> list[BasisState]:
    """All Gauss-law states with Q = N/2, in label order.

    Labels follow the published tables for the 6-site theories and canonical
    order (fermion occupation as a big-endian integer, then links) otherwise.
    """
    return list(_physical_basis(spec))


def _physical_basis(spec: LatticeSpec) -> tuple[BasisState, ...]:
    return _basis_cache(spec.group, spec.n_sites, spec.cutoff if spec.group is Group.U1 else 0)


_BASIS: dict = {}


def _basis_cache(group, n_sites, cutoff):
    key = (group, n_sites, cutoff)
    if key in _BASIS:
        return _BASIS[key]
    spec = LatticeSpec(group, n_sites, cutoff=max(cutoff, 1))
    N = n_sites
    states = []
    for occ in itertools.product((0, 1), repeat=N):
        if sum(occ) != N // 2:
            continue
        for link0 in spec.link_values():
            # Gauss law fixes every link once link 0 is chosen
            links = [link0]
            for n in range(1, N):
                odd = n % 2
                if group is Group.Z2:
                    links.append(links[-1] * (1 if occ[n] == odd else -1))
                else:
                    links.append(links[-1] - occ[n] + odd)
            s = BasisState(occ, tuple(links))
            if all(abs(v) <= spec.cutoff for v in links) or group is Group.Z2:
                if satisfies_gauss(spec, s):
                    states.append(s)
    states.sort(key=lambda s: (int("".join(map(str, s.fermion_occ)), 2), s.link_vals))
    table = _golden_table(spec)
    if table is not None:
        golden = read_basis_csv(spec, resources.files("lgtwave.data").joinpath(table).read_text())
        if sorted(golden) != sorted(states):
            raise RuntimeError(f"bundled table {table} disagrees with Gauss-law enumeration")
        states = golden
    _BASIS[key] = tuple(states)
    return _BASIS[key]


def basis_index(spec: LatticeSpec) -> dict[BasisState, int]:
    return {s: i for i, s in enumerate(_physical_basis(spec))}


def basis_csv(spec: LatticeSpec) -> str:
    """Basis table in the layout label,f_0,b_0,...  (Z2 links as bits)."""
    N = spec.n_sites
    buf = io.StringIO()
    buf.write("label," + ",".join(f"f_{n},b_{n}" for n in range(N)) + "\n")
    for i, s in enumerate(_physical_basis(spec)):
        cells = [str(i)]
        for n in range(N):
            b = (1 - s.link_vals[n]) // 2 if spec.group is Group.Z2 else s.link_vals[n]
            cells += [str(s.fermion_occ[n]), str(b)]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def vacuum_state(spec: LatticeSpec) -> BasisState:
    """Strong-coupling vacuum: odd sites filled, all links at minimal energy."""
    N = spec.n_sites
    return BasisState(tuple(n % 2 for n in range(N)), (spec.vacuum_link(),) * N)


# --------------------------------------------------------------------------
# Qubit layout

@dataclass(frozen=True)
class QubitLayout:
    n_sites: int
    link_qubits: int = 1
    ancilla: bool = False

    @property
    def stride(self) -> int:
        return 1 + self.link_qubits

    def fermion(self, n: int) -> int:
        return n * self.stride

    def link(self, n: int, bit: int = 0) -> int:
        return n * self.stride + 1 + bit

    @property
    def ancilla_index(self) -> int | None:
        return self.n_sites * self.stride if self.ancilla else None

    @property
    def n_qubits(self) -> int:
        return self.n_sites * self.stride + int(self.ancilla)

    def labels(self) -> list[str]:
        out = []
        for n in range(self.n_sites):
            out.append(f"f{n}")
            out += [f"b{n}"] if self.link_qubits == 1 else [f"b{n}_{j}" for j in range(self.link_qubits)]
        if self.ancilla:
            out.append("a")
        return out


def layout_for(spec: LatticeSpec, ancilla: bool = False) -> QubitLayout:
    return QubitLayout(spec.n_sites, spec.link_qubits, ancilla)


def encode_link(spec: LatticeSpec, value: int) -> list[int]:
    """Qubit bits (big-endian) of a link value."""
    if spec.group is Group.Z2:
        return [(1 - value) // 2]
    v = value + spec.cutoff
    return [(v >> (spec.link_qubits - 1 - j)) & 1 for j in range(spec.link_qubits)]


def qubit_index(spec: LatticeSpec, s: BasisState, ancilla: int | None = None) -> int:
    """Computational-basis index of a basis state, qubit 0 most significant."""
    bits = []
    for n in range(spec.n_sites):
        bits.append(s.fermion_occ[n])
        bits += encode_link(spec, s.link_vals[n])
    if ancilla is not None:
        bits.append(ancilla)
    return int("".join(map(str, bits)), 2)


def decode_bits(spec: LatticeSpec, bits: str) -> tuple[BasisState | None, int | None]:
    """Inverse of :func:`qubit_index` on a bitstring; None for unused link codes."""
    L = spec.link_qubits
    N = spec.n_sites
    occ, links = [], []
    pos = 0
    for _ in range(N):
        occ.append(int(bits[pos]))
        code = int(bits[pos + 1:pos + 1 + L], 2)
        pos += 1 + L
        if spec.group is Group.Z2:
            links.append(1 - 2 * code)
        else:
            if code > 2 * spec.cutoff:
                return None, None
            links.append(code - spec.cutoff)
    anc = int(bits[pos]) if len(bits) > pos else None
    return BasisState(tuple(occ), tuple(links)), anc


# --------------------------------------------------------------------------
# Operators

_FERMION_DAG = {"I": "I", "X": "X", "Y": "Y", "Z": "Z", "+": "-", "-": "+", "N": "N"}
_LINK_DAG = {"I": "I", "U": "Ud", "Ud": "U", "E": "E", "E2": "E2"}


def _apply_fermion(name: str, v: int) -> tuple[complex, int]:
    # qubit 1 = occupied; sigma^- = |1><0| creates, sigma^+ = |0><1| annihilates
    if name == "I":
        return 1, v
    if name == "X":
        return 1, 1 - v
    if name == "Y":
        return (1j if v == 0 else -1j), 1 - v
    if name == "Z":
        return 1 - 2 * v, v
    if name == "N":
        return v, v
    if name == "-":
        return (1, 1) if v == 0 else (0, v)
    if name == "+":
        return (1, 0) if v == 1 else (0, v)
    raise KeyError(name)


def _apply_link(spec: LatticeSpec, name: str, e: int) -> tuple[complex, int]:
    if name == "I":
        return 1, e
    if name == "E":
        return e, e
    if name == "E2":
        return e * e, e
    if spec.group is Group.Z2:
        return 1, -e
    new = e - 1 if name == "U" else e + 1
    if abs(new) > spec.cutoff:
        return 0, e
    return 1, new


# A term maps (register, index) -> tuple of local operator names, leftmost
# factor first.  Registers: "f" fermion qubit, "b" link.
Key = tuple[str, int]


@dataclass(frozen=True)
class Term:
    coeff: complex
    ops: tuple[tuple[Key, tuple[str, ...]], ...]
    tag: str = ""

    def dagger(self) -> "Term":
        ops = []
        for key, names in self.ops:
            table = _FERMION_DAG if key[0] == "f" else _LINK_DAG
            ops.append((key, tuple(table[x] for x in reversed(names))))
        return Term(complex(np.conj(self.coeff)), tuple(ops), self.tag)


def _term(coeff, tag="", **sites) -> Term:
    return Term(complex(coeff), tuple(sorted(sites.items())), tag)


def make_term(coeff: complex, ops: dict[Key, str | tuple[str, ...]], tag: str = "") -> Term:
    norm = []
    for key, names in ops.items():
        if isinstance(names, str):
            names = (names,)
        names = tuple(x for x in names if x != "I")
        if names:
            norm.append((key, names))
    return Term(complex(coeff), tuple(sorted(norm)), tag)


@dataclass(frozen=True)
class OperatorSum:
    terms: tuple[Term, ...] = ()

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        return OperatorSum(self.terms + other.terms)

    def __mul__(self, other):
        if isinstance(other, OperatorSum):
            out = []
            for a in self.terms:
                for b in other.terms:
                    ops = dict(a.ops)
                    for key, names in b.ops:
                        ops[key] = ops.get(key, ()) + names
                    out.append(Term(a.coeff * b.coeff, tuple(sorted(ops.items())), a.tag or b.tag))
            return OperatorSum(tuple(out))
        return OperatorSum(tuple(Term(t.coeff * other, t.ops, t.tag) for t in self.terms))

    __rmul__ = __mul__

    def dagger(self) -> "OperatorSum":
        return OperatorSum(tuple(t.dagger() for t in self.terms))

    def part(self, tag: str) -> "OperatorSum":
        return OperatorSum(tuple(t for t in self.terms if t.tag == tag))

    @property
    def tags(self) -> list[str]:
        return sorted({t.tag for t in self.terms})

    def simplify(self, tol: float = 1e-14) -> dict:
        acc: dict = {}
        for t in self.terms:
            acc[t.ops] = acc.get(t.ops, 0) + t.coeff
        return {k: v for k, v in acc.items() if abs(v) > tol}

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        a, b = self.simplify(tol), self.dagger().simplify(tol)
        return a.keys() == b.keys() and all(abs(a[k] - b[k]) <= tol for k in a)

    def apply(self, spec: LatticeSpec, s: BasisState):
        """Yield (amplitude, state) for each term acting on a basis state."""
        for t in self.terms:
            amp = t.coeff
            occ = list(s.fermion_occ)
            links = list(s.link_vals)
            for (reg, idx), names in t.ops:
                for name in reversed(names):
                    if reg == "f":
                        c, occ[idx] = _apply_fermion(name, occ[idx])
                    else:
                        c, links[idx] = _apply_link(spec, name, links[idx])
                    amp *= c
                    if amp == 0:
                        break
                if amp == 0:
                    break
            if amp != 0:
                yield amp, BasisState(tuple(occ), tuple(links))

    def to_matrix(self, spec: LatticeSpec, basis=None, strict: bool = False) -> np.ndarray:
        """Dense matrix on the physical basis (P O P).

        With ``strict`` an image outside the physical space raises; this is a
        term-by-term gauge-invariance check.
        """
        basis = _physical_basis(spec) if basis is None else basis
        index = {s: i for i, s in enumerate(basis)}
        M = np.zeros((len(basis), len(basis)), dtype=complex)
        for j, s in enumerate(basis):
            for amp, s2 in self.apply(spec, s):
                i = index.get(s2)
                if i is None:
                    if strict:
                        raise ValueError(f"operator leaves the physical space from {s}")
                    continue
                M[i, j] += amp
        return M

    def to_full_matrix(self, spec: LatticeSpec) -> sp.csr_matrix:
        """Sparse matrix on the full product space (fermion, link) x N.

        Site ordering f_0, b_0, f_1, b_1, ... with the first factor most
        significant; links use their natural dimension (not qubit-encoded).
        Local index of a link value is its position in ``spec.link_values()``
        read from the top for Z2 (E=+1 first) and from -cutoff for U1.
        """
        N = spec.n_sites
        dims = [2, spec.link_dim] * N
        total = None
        for t in self.terms:
            ops = dict(t.ops)
            factors = []
            for n in range(N):
                factors.append(_local_matrix(spec, "f", ops.get(("f", n), ())))
                factors.append(_local_matrix(spec, "b", ops.get(("b", n), ())))
            m = factors[0]
            for f in factors[1:]:
                m = sp.kron(m, f, format="csr")
            m = t.coeff * m
            total = m if total is None else total + m
        if total is None:
            d = int(np.prod(dims))
            return sp.csr_matrix((d, d), dtype=complex)
        return total.tocsr()


def link_local_values(spec: LatticeSpec) -> list[int]:
    if spec.group is Group.Z2:
        return [1, -1]
    return list(range(-spec.cutoff, spec.cutoff + 1))


def _local_matrix(spec: LatticeSpec, reg: str, names: tuple[str, ...]) -> sp.csr_matrix:
    if reg == "f":
        vals = [0, 1]
        fn = _apply_fermion
    else:
        vals = link_local_values(spec)
        fn = lambda name, v: _apply_link(spec, name, v)  # noqa: E731
    d = len(vals)
    M = np.zeros((d, d), dtype=complex)
    for j, v in enumerate(vals):
        amp, w = 1 + 0j, v
        for name in reversed(names):
            c, w = fn(name, w)
            amp *= c
            if amp == 0:
                break
        if amp != 0:
            M[vals.index(w), j] += amp
    return sp.csr_matrix(M)


def full_index(spec: LatticeSpec, s: BasisState) -> int:
    vals = link_local_values(spec)
    idx = 0
    for n in range(spec.n_sites):
        idx = idx * 2 + s.fermion_occ[n]
        idx = idx * spec.link_dim + vals.index(s.link_vals[n])
    return idx


def physical_isometry(spec: LatticeSpec) -> sp.csr_matrix:
    """Columns embed the physical basis into the full product space."""
    basis = _physical_basis(spec)
    dim = (2 * spec.link_dim) ** spec.n_sites
    rows = [full_index(spec, s) for s in basis]
    return sp.csr_matrix((np.ones(len(basis)), (rows, range(len(basis)))), shape=(dim, len(basis)))


# --------------------------------------------------------------------------
# Fermion bilinears

def arc_bilinear(spec: LatticeSpec, m: int, n: int, arc: list[int], coeff: complex = 1.0) -> OperatorSum:
    """sigma^-_m sigma^+_n times sigma^z on the fermion sites listed in ``arc``.

    With ``arc`` the sites strictly between m and n this is exactly
    xi^dag_m xi_n.  With the complementary arc it equals (-1)^(Q+1) xi^dag_m xi_n.
    """
    ops: dict[Key, str] = {("f", m): "-", ("f", n): "+"}
    for j in arc:
        ops[("f", j)] = "Z"
    return OperatorSum((make_term(coeff, ops),))


def fermion_bilinear(spec: LatticeSpec, m: int, n: int) -> OperatorSum:
    """Exact JW image of xi^dag_m xi_n.

    The strings below min(m, n) cancel and the leftover sigma^z on min(m, n)
    is absorbed by that site's ladder operator, leaving
    sigma^-_m sigma^+_n times sigma^z strictly between them.
    """
    if m == n:
        return OperatorSum((make_term(1.0, {("f", m): "N"}),))
    lo, hi = min(m, n), max(m, n)
    return arc_bilinear(spec, m, n, list(range(lo + 1, hi)))


def link_string(spec: LatticeSpec, links: list[int], name: str) -> OperatorSum:
    return OperatorSum((make_term(1.0, {("b", l): name for l in links}),))


# --------------------------------------------------------------------------
# Hamiltonian and symmetries

def build_hamiltonian(spec: LatticeSpec) -> OperatorSum:
    """H = hopping + mass + electric, each term tagged with its part.

    Hopping on link n is -(i/2)(xi^dag_n U_n xi_{n+1} - h.c.).  The phase
    convention makes the staggered free-fermion modes (see ``ansatz``) exact
    eigenmodes; it is related to the real form (1/2)(... + h.c.) by a diagonal
    unitary, so spectra and basis-state probabilities are identical.  The
    boundary link N-1 -> 0 uses the exact JW image, which makes the
    (-1)^(Q+1) factor implicit.
    """
    N = spec.n_sites
    terms: list[Term] = []
    for n in range(N):
        nxt = (n + 1) % N
        f = fermion_bilinear(spec, n, nxt)
        op = f * link_string(spec, [n], "U")
        for t in op.terms:
            t2 = Term(-0.5j * t.coeff, t.ops, "hopping")
            terms += [t2, t2.dagger()]
    for n in range(N):
        terms.append(make_term(spec.m_f * (-1) ** n, {("f", n): "N"}, "mass"))
    fname = "E" if spec.group is Group.Z2 else "E2"
    for n in range(N):
        terms.append(make_term(spec.epsilon, {("b", n): fname}, "electric"))
    return OperatorSum(tuple(terms))


def gauss_operator(spec: LatticeSpec, n: int) -> OperatorSum:
    N = spec.n_sites
    odd = n % 2
    prev = (n - 1) % N
    if spec.group is Group.Z2:
        # E_n E_{n-1} (-1)^(n_n - odd) ; (-1)^(n_n) = Z_n
        return OperatorSum((make_term((-1) ** odd, {("b", n): "E", ("b", prev): "E", ("f", n): "Z"}),))
    return OperatorSum((
        make_term(1.0, {("b", n): "E"}),
        make_term(-1.0, {("b", prev): "E"}),
        make_term(1.0, {("f", n): "N"}),
        make_term(-odd, {}),
    ))


def charge_operator(spec: LatticeSpec) -> OperatorSum:
    return OperatorSum(tuple(make_term(1.0, {("f", n): "N"}) for n in range(spec.n_sites)))


def hamiltonian_matrix(spec: LatticeSpec) -> np.ndarray:
    return build_hamiltonian(spec).to_matrix(spec)


def _translate(spec: LatticeSpec, s: BasisState, shift: int) -> tuple[int, BasisState]:
    """Shift every site and link by ``shift``; fermionic reordering sign."""
    N = spec.n_sites
    occ = [0] * N
    links = [0] * N
    for n in range(N):
        occ[(n + shift) % N] = s.fermion_occ[n]
        links[(n + shift) % N] = s.link_vals[n]
    filled = [n for n in range(N) if s.fermion_occ[n]]
    images = [(n + shift) % N for n in filled]
    # sign of the permutation sorting the images
    inv = sum(1 for i in range(len(images)) for j in range(i + 1, len(images)) if images[i] > images[j])
    return (-1) ** inv, BasisState(tuple(occ), tuple(links))


def translation_operator(spec: LatticeSpec) -> np.ndarray:
    """T2 on the physical basis: xi_n -> xi_{n+2}, link n -> link n+2."""
    basis = _physical_basis(spec)
    index = {s: i for i, s in enumerate(basis)}
    T = np.zeros((len(basis), len(basis)))
    for j, s in enumerate(basis):
        sign, s2 = _translate(spec, s, 2)
        T[index[s2], j] = sign
    return T


def brillouin_zone(n_sites: int) -> np.ndarray:
    """Allowed momenta (2 pi / N) Z  intersected with [-pi/2, pi/2)."""
    js = np.arange(-n_sites // 2, n_sites // 2)
    ks = 2 * np.pi * js / n_sites
    return ks[(ks >= -np.pi / 2 - 1e-12) & (ks < np.pi / 2 - 1e-12)]


def check_momentum(n_sites: int, k: float) -> float:
    ks = brillouin_zone(n_sites)
    i = int(np.argmin(np.abs(ks - k)))
    if abs(ks[i] - k) > 1e-9:
        raise ValueError(f"k={k} is not on the momentum grid {ks}")
    return float(ks[i])


def momentum_projector(spec: LatticeSpec, k: float, T: np.ndarray | None = None) -> np.ndarray:
    """P_k = (2/N) sum_j exp(+2ikj) T2^j on the physical basis."""
    k = check_momentum(spec.n_sites, k)
    T = translation_operator(spec) if T is None else T
    N = spec.n_sites
    P = np.zeros(T.shape, dtype=complex)
    Tj = np.eye(T.shape[0])
    for j in range(N // 2):
        P += np.exp(2j * k * j) * Tj
        Tj = T @ Tj
    return P * (2 / N)
