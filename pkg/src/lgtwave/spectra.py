"""Exact diagonalization on the physical space, momentum sectors and fidelities."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    LatticeSpec,
    OperatorSum,
    brillouin_zone,
    check_momentum,
    enumerate_physical_basis,
    hamiltonian_matrix,
    link_string,
    momentum_projector,
    translation_operator,
)

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-9
VACUUM_OVERLAP_TOL = 1e-8
NORM_TOL = 1e-8


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, over the canonical physical basis
    sector: float | str = "all"

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def vector(self, i: int) -> np.ndarray:
        return self.eigenvectors[:, i]


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Make the first largest-magnitude component real and positive."""
    mags = np.abs(v)
    i = int(np.flatnonzero(mags >= mags.max() - 1e-9)[0])
    return v * (abs(v[i]) / v[i])


def _canonical_cluster(V: np.ndarray) -> np.ndarray:
    """Basis-independent orthonormal frame of span(V).

    Canonical basis vectors are projected onto the subspace in index order and
    Gram-Schmidt orthonormalized, so the frame depends only on the subspace.
    """
    d = V.shape[1]
    if d == 1:
        return _fix_phase(V[:, 0])[:, None]
    P = V @ V.conj().T
    out: list[np.ndarray] = []
    for j in range(P.shape[0]):
        w = P[:, j].copy()
        for u in out:
            w -= (u.conj() @ w) * u
        nrm = np.linalg.norm(w)
        if nrm > 1e-6:
            out.append(_fix_phase(w / nrm))
            if len(out) == d:
                break
    return np.column_stack(out)


def _eigh_canonical(H: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = np.linalg.eigh(H)
    start = 0
    cols = []
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[start] < DEGENERACY_TOL:
            stop += 1
        cols.append(_canonical_cluster(V[:, start:stop]))
        start = stop
    return w, np.column_stack(cols) if cols else V


def sector_basis(spec: LatticeSpec, k: float, T: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal columns spanning range(P_k)."""
    P = momentum_projector(spec, k, T)
    w, V = np.linalg.eigh(P)
    return V[:, w > 0.5]


def diagonalize(H: np.ndarray, sector: float | None = None, *, spec: LatticeSpec | None = None,
                T: np.ndarray | None = None) -> SpectrumResult:
    """Full ascending spectrum of ``H``, optionally inside momentum sector ``sector``.

    Degenerate clusters get a canonical frame and every vector a fixed phase,
    so repeated calls give identical output.
    """
    H = np.asarray(H)
    if np.max(np.abs(H - H.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    if sector is None:
        w, V = _eigh_canonical(H)
        return SpectrumResult(w, V, "all")
    if spec is None:
        raise ValueError("a LatticeSpec is required to resolve a momentum sector")
    k = check_momentum(spec.n_sites, sector)
    B = sector_basis(spec, k, T)
    if B.shape[1] == 0:
        raise ValueError(f"momentum sector k={k} is empty")
    Hk = B.conj().T @ H @ B
    Hk = (Hk + Hk.conj().T) / 2
    w, _ = np.linalg.eigh(Hk)
    # resolve vectors in the full basis so the canonical frame is basis-free
    _, Vk = np.linalg.eigh(Hk)
    V = B @ Vk
    cols = []
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[start] < DEGENERACY_TOL:
            stop += 1
        cols.append(_canonical_cluster(V[:, start:stop]))
        start = stop
    return SpectrumResult(w, np.column_stack(cols), k)


def ground_state(spec: LatticeSpec, H: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Interacting vacuum |Omega> and its energy."""
    H = hamiltonian_matrix(spec) if H is None else H
    res = diagonalize(H)
    return float(res.eigenvalues[0]), res.vector(0)


def momentum_eigenpair(spec: LatticeSpec, k: float, *, H: np.ndarray | None = None,
                       vacuum: np.ndarray | None = None, T: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Lowest state in sector k with no overlap to the interacting vacuum."""
    H = hamiltonian_matrix(spec) if H is None else H
    if vacuum is None:
        _, vacuum = ground_state(spec, H)
    res = diagonalize(H, k, spec=spec, T=T)
    for i in range(len(res)):
        v = res.vector(i)
        if abs(vacuum.conj() @ v) < VACUUM_OVERLAP_TOL:
            return float(res.eigenvalues[i]), v
    raise ValueError(f"no vacuum-orthogonal state in sector k={k}")


def momentum_eigenstate(spec: LatticeSpec, k: float, **kw) -> np.ndarray:
    return momentum_eigenpair(spec, k, **kw)[1]


def mesonic_eigenpair(spec: LatticeSpec, k: float, *, H: np.ndarray | None = None,
                      vacuum: np.ndarray | None = None, T: np.ndarray | None = None,
                      threshold: float = 0.5) -> tuple[float, np.ndarray]:
    """Lowest vacuum-orthogonal state in sector k that is not a winding excitation.

    Winding states (link strings around the whole ring acting on |Omega>) only
    live at k = 0; there they can undercut the lightest meson at weak coupling.
    """
    H = hamiltonian_matrix(spec) if H is None else H
    if vacuum is None:
        _, vacuum = ground_state(spec, H)
    res = diagonalize(H, k, spec=spec, T=T)
    wind = winding_probe(spec, vacuum)
    for i in range(len(res)):
        v = res.vector(i)
        if abs(vacuum.conj() @ v) < VACUUM_OVERLAP_TOL and _span_weight(wind, v) < threshold:
            return float(res.eigenvalues[i]), v
    raise ValueError(f"no mesonic state in sector k={k}")


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 for unit vectors."""
    for v in (a, b):
        if abs(np.linalg.norm(v) - 1) > NORM_TOL:
            raise ValueError("fidelity requires unit-norm states")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


# --------------------------------------------------------------------------
# Classification of the first excited k = 0 state

class Excitation(str, Enum):
    MESONIC = "mesonic"
    NON_MESONIC = "non_mesonic"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class Classification:
    label: Excitation
    winding_overlap: float
    mesonic_overlap: float
    energy_gap: float


def _span_weight(vectors: list[np.ndarray], target: np.ndarray) -> float:
    M = np.column_stack(vectors)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    keep = s > 1e-10 * max(s.max(), 1e-300)
    if not keep.any():
        return 0.0
    return float(np.linalg.norm(U[:, keep].conj().T @ target) ** 2)


def winding_operator(spec: LatticeSpec) -> OperatorSum:
    return link_string(spec, list(range(spec.n_sites)), "U")


def winding_probe(spec: LatticeSpec, omega: np.ndarray) -> list[np.ndarray]:
    """W|Omega> and W^dag|Omega> with the vacuum direction removed."""
    W = winding_operator(spec).to_matrix(spec)
    out = []
    for v in (W @ omega, W.conj().T @ omega):
        out.append(v - (omega.conj() @ v) * omega)
    return out


def classify_k0_excitation(spec: LatticeSpec, *, threshold: float = 0.5, tie_tol: float = 1e-6,
                           H: np.ndarray | None = None) -> Classification:
    """Is the first excited k=0 state a winding (non-mesonic) excitation?

    The state is projected onto span{W|Omega>, W^dag|Omega>} (vacuum part
    removed), W being the link string around the whole ring.  A weight at or
    above ``threshold`` labels it non-mesonic; weights within ``tie_tol`` of
    the threshold are ambiguous.  The overlap with the bare-meson span is
    reported too but does not decide: on small rings that span covers almost
    the whole physical space.
    """
    from .ansatz import mesonic_span  # deferred: ansatz depends on this module

    H = hamiltonian_matrix(spec) if H is None else H
    e0, omega = ground_state(spec, H)
    e1, exc = momentum_eigenpair(spec, 0.0, H=H, vacuum=omega)
    w = _span_weight(winding_probe(spec, omega), exc)
    vecs = [v - (omega.conj() @ v) * omega for v in mesonic_span(spec, omega)]
    m = _span_weight(vecs, exc)
    if abs(w - threshold) <= tie_tol:
        label = Excitation.AMBIGUOUS
    elif w > threshold:
        label = Excitation.NON_MESONIC
    else:
        label = Excitation.MESONIC
    return Classification(label, w, m, e1 - e0)


def sector_spectra(spec: LatticeSpec, H: np.ndarray | None = None) -> dict[float, np.ndarray]:
    H = hamiltonian_matrix(spec) if H is None else H
    T = translation_operator(spec)
    return {float(k): diagonalize(H, k, spec=spec, T=T).eigenvalues for k in brillouin_zone(spec.n_sites)}


def basis_labels(spec: LatticeSpec) -> list[int]:
    return list(range(len(enumerate_physical_basis(spec))))
