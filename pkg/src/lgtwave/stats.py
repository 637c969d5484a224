"""Staggered density, truncation metrics, rms shot error and bootstrap uncertainties."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import LatticeSpec, enumerate_physical_basis
from .simulate import ShotRecord, classify_events

PROB_TOL = 1e-12
DEFAULT_RESAMPLES = 10_000


def occupation_matrix(spec: LatticeSpec) -> np.ndarray:
    """(N, L) matrix A with chi = A @ p + offset for probabilities p over physical labels."""
    basis = enumerate_physical_basis(spec)
    occ = np.array([s.fermion_occ for s in basis], dtype=float).T
    sign = np.array([1.0 if n % 2 == 0 else -1.0 for n in range(spec.n_sites)])
    return sign[:, None] * occ


def _offset(n_sites: int) -> np.ndarray:
    return np.array([0.0 if n % 2 == 0 else 1.0 for n in range(n_sites)])


@dataclass(frozen=True)
class DensityProfile:
    chi: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.chi < -1e-12) or np.any(self.chi > 1 + 1e-12):
            raise ValueError("staggered density outside [0, 1]")

    @property
    def n_sites(self) -> int:
        return len(self.chi)

    def center(self) -> float:
        """Circular mean position."""
        N = self.n_sites
        z = np.sum(self.chi * np.exp(2j * np.pi * np.arange(N) / N))
        return float((np.angle(z) * N / (2 * np.pi)) % N)

    def second_moment(self, center: float | None = None) -> float:
        """Chi-weighted mean squared ring distance from ``center``."""
        N = self.n_sites
        c = self.center() if center is None else center
        d = np.abs(np.arange(N) - c) % N
        d = np.minimum(d, N - d)
        total = self.chi.sum()
        if total <= 0:
            return 0.0
        return float(np.sum(self.chi * d ** 2) / total)

    def to_csv(self) -> str:
        lines = ["site,chi,stderr"]
        for n, c in enumerate(self.chi):
            e = "" if self.stderr is None else f"{self.stderr[n]:.15g}"
            lines.append(f"{n},{c:.15g},{e}")
        return "\n".join(lines) + "\n"


def staggered_density(spec: LatticeSpec, data: np.ndarray, stderr: np.ndarray | None = None) -> DensityProfile:
    """chi_n = <n_n> on even sites, 1 - <n_n> on odd sites.

    ``data`` is either a (complex) physical-basis state or a real probability
    vector over physical labels.  Probability standard errors, if given, are
    propagated linearly.
    """
    data = np.asarray(data)
    p = np.abs(data) ** 2 if np.iscomplexobj(data) else data.astype(float)
    if abs(p.sum() - 1) > 1e-8:
        raise ValueError("probabilities must sum to one")
    A = occupation_matrix(spec)
    if A.shape[1] != len(p):
        raise ValueError(f"expected {A.shape[1]} physical labels, got {len(p)}")
    chi = np.clip(A @ p + _offset(spec.n_sites), 0.0, 1.0)
    err = None if stderr is None else np.sqrt((A ** 2) @ (np.asarray(stderr) ** 2))
    return DensityProfile(chi, err)


def trunc_metrics(psi_trunc: np.ndarray, psi_exact: np.ndarray, H: np.ndarray) -> tuple[float, float]:
    """(F_trunc, delta E_trunc) with delta E relative to |E_exact|."""
    for v in (psi_trunc, psi_exact):
        if abs(np.linalg.norm(v) - 1) > 1e-8:
            raise ValueError("states must be normalized")
    F = float(min(1.0, abs(np.vdot(psi_trunc, psi_exact)) ** 2))
    e_t = float(np.real(np.vdot(psi_trunc, H @ psi_trunc)))
    e_x = float(np.real(np.vdot(psi_exact, H @ psi_exact)))
    if abs(e_x) < 1e-14:
        raise ZeroDivisionError("exact energy vanishes; relative energy error undefined")
    return F, abs(e_t - e_x) / abs(e_x)


def rms_error(p_a: np.ndarray, p_b: np.ndarray) -> float:
    """sqrt(sum_i (p_a^i - p_b^i)^2 / N_H), one term per physical label."""
    p_a, p_b = np.asarray(p_a, dtype=float), np.asarray(p_b, dtype=float)
    if p_a.shape != p_b.shape:
        raise ValueError("probability vectors differ in length")
    return float(np.sqrt(np.mean((p_a - p_b) ** 2)))


def fit_inverse_sqrt(n_shots, errors) -> tuple[float, float]:
    """Least-squares c in err = c / sqrt(n); also the worst relative deviation."""
    x = 1 / np.sqrt(np.asarray(n_shots, dtype=float))
    y = np.asarray(errors, dtype=float)
    c = float(x @ y / (x @ x))
    return c, float(np.max(np.abs(y - c * x) / (c * x)))


# --------------------------------------------------------------------------
# Bootstrap

@dataclass(frozen=True)
class BootstrapReport:
    n_resamples: int
    seed: int | None
    prob_mean: np.ndarray
    prob_std: np.ndarray
    plug_in: np.ndarray
    n_events: int
    n_kept: int
    chi: DensityProfile | None = None

    def to_csv(self) -> str:
        lines = ["label,probability,stderr"]
        for i, (p, s) in enumerate(zip(self.plug_in, self.prob_std)):
            lines.append(f"{i},{p:.15g},{s:.15g}")
        return "\n".join(lines) + "\n"


def bootstrap_labels(labels: np.ndarray, n_labels: int, *, keep: np.ndarray | None = None,
                     n_resamples: int = DEFAULT_RESAMPLES, seed: int | None = None,
                     chunk: int = 2000) -> tuple[np.ndarray, np.ndarray, int]:
    """Resample events with replacement; per resample drop ``~keep`` and renormalize.

    Returns the mean and standard deviation (ddof=1) of the label frequencies
    over resamples with at least one kept event, and how many such resamples
    there were.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n == 0:
        raise ValueError("no events to bootstrap")
    keep = np.ones(n, dtype=bool) if keep is None else np.asarray(keep, dtype=bool)
    rng = np.random.default_rng(seed)
    s1 = np.zeros(n_labels)
    s2 = np.zeros(n_labels)
    valid = 0
    done = 0
    while done < n_resamples:
        r = min(chunk, n_resamples - done)
        idx = rng.integers(0, n, size=(r, n))
        w = keep[idx]
        keys = (np.arange(r)[:, None] * n_labels + labels[idx])[w]
        counts = np.bincount(keys, minlength=r * n_labels).reshape(r, n_labels).astype(float)
        tot = counts.sum(axis=1)
        ok = tot > 0
        freq = counts[ok] / tot[ok, None]
        s1 += freq.sum(axis=0)
        s2 += (freq ** 2).sum(axis=0)
        valid += int(ok.sum())
        done += r
    if valid < 2:
        raise ValueError("too few usable resamples")
    mean = s1 / valid
    var = np.maximum(s2 / valid - mean ** 2, 0.0) * valid / (valid - 1)
    return mean, np.sqrt(var), valid


def bootstrap(records: ShotRecord, spec: LatticeSpec, *, n_resamples: int = DEFAULT_RESAMPLES,
              seed: int | None = None) -> BootstrapReport:
    """Bootstrap the physical events of a shot record.

    Gauss-violating shots are discarded first.  When an ancilla is present
    each resample keeps only its ancilla-1 events before renormalizing.
    """
    labels, anc = classify_events(spec, records)
    phys = labels >= 0
    if not phys.any():
        raise ValueError("no physical events to bootstrap")
    lab = labels[phys]
    keep = anc[phys] == 1 if (anc >= 0).any() else None
    L = len(enumerate_physical_basis(spec))
    mean, std, _ = bootstrap_labels(lab, L, keep=keep, n_resamples=n_resamples, seed=seed)
    kept = lab if keep is None else lab[keep]
    if len(kept) == 0:
        raise ValueError("no ancilla-1 events among the physical shots")
    plug = np.bincount(kept, minlength=L) / len(kept)
    chi = staggered_density(spec, plug, std)
    return BootstrapReport(n_resamples, seed, mean, std, plug, int(phys.sum()), int(len(kept)), chi)


def shot_error_curve(reference: np.ndarray, sampler, n_shots_list, seeds) -> np.ndarray:
    """Seed-averaged rms error of ``sampler(n_shots, seed)`` against ``reference``."""
    out = []
    for n in n_shots_list:
        out.append(np.mean([rms_error(sampler(n, s), reference) for s in seeds]))
    return np.array(out)


def normalized(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    s = p.sum()
    if s <= 0 or not math.isfinite(s):
        raise ValueError("cannot normalize an empty distribution")
    return p / s
