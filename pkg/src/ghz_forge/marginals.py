"""Density-matrix toolkit: partial traces, von Neumann entropy via cyclic
Jacobi, Wootters concurrence / entanglement of formation, and the
Smolin / Streltsov / bipartite-cut comparison bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import _entropy_of, binary_entropy, mask_sites
from .states import PureState

HERMITIAN_TOL = 1e-10
JACOBI_OFF_TOL = 1e-12


@dataclass
class DensityMatrix:
    dim: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"entries must be {self.dim}x{self.dim}")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValueError("matrix is not Hermitian within tolerance")
        if abs(np.trace(m).real - 1.0) > HERMITIAN_TOL:
            raise ValueError(f"trace is {np.trace(m).real!r}, expected 1")
        if np.min(_eigvals_hermitian_matrix(m)) < -HERMITIAN_TOL:
            raise ValueError("matrix has a negative eigenvalue")
        self.entries = m


# ---------------------------------------------------------------------------
# cyclic Jacobi on the embedded real-symmetric form


def _jacobi_real(sym):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps."""
    a = np.array(sym, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(200):
        off = math.sqrt(np.sum(np.square(a - np.diag(np.diag(a)))))
        if off < JACOBI_OFF_TOL:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < JACOBI_OFF_TOL / (n * n):
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    return np.diag(a).copy(), v


def _embed(h):
    """Complex Hermitian d x d -> real symmetric 2d x 2d with doubled spectrum."""
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def _unembed(s, d):
    a = 0.5 * (s[:d, :d] + s[d:, d:])
    b = 0.5 * (s[d:, :d] - s[:d, d:])
    return a + 1j * b


def _eigvals_hermitian_matrix(h):
    d = h.shape[0]
    vals, _ = _jacobi_real(_embed(h))
    vals = np.sort(vals)
    return 0.5 * (vals[0::2] + vals[1::2])  # spectrum appears twice


def eigenvalues_hermitian(rho) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix (ascending), via cyclic Jacobi."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian within tolerance")
    return _eigvals_hermitian_matrix(m)


def _sqrtm_psd(h):
    d = h.shape[0]
    vals, vecs = _jacobi_real(_embed(h))
    vals = np.clip(vals, 0.0, None)
    s = (vecs * np.sqrt(vals)) @ vecs.T
    return _unembed(s, d)


def von_neumann(rho) -> float:
    vals = np.clip(eigenvalues_hermitian(rho), 0.0, None)
    return _entropy_of(vals)


# ---------------------------------------------------------------------------
# partial trace


def reduced_density(psi: PureState, keep) -> DensityMatrix:
    """Partial trace of |psi><psi| keeping the sites in the given mask."""
    if isinstance(keep, int):
        sites = mask_sites(keep, psi.k)
    else:
        sites = sorted(keep)
    if not sites or len(sites) >= psi.k:
        raise ValueError("keep must name a proper nonempty subset of sites")
    if any(not 0 <= j < psi.k for j in sites):
        raise ValueError("site index out of range")
    others = [j for j in range(psi.k) if j not in sites]
    dims = [psi.dims[j] for j in sites]
    dim = math.prod(dims)

    def flat(idx):
        v = 0
        for j, d in zip(sites, dims):
            v = v * d + idx[j]
        return v

    groups = {}
    for idx, a in psi.amps.items():
        env = tuple(idx[j] for j in others)
        groups.setdefault(env, []).append((flat(idx), a))
    rho = np.zeros((dim, dim), dtype=complex)
    for pairs in groups.values():
        for r, ar in pairs:
            for c, ac in pairs:
                rho[r, c] += ar * np.conj(ac)
    return DensityMatrix(dim, rho)


# ---------------------------------------------------------------------------
# Wootters concurrence and entanglement of formation

_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_SY, _SY)


def concurrence(rho: DensityMatrix) -> float:
    """Two-qubit concurrence max(0, l1 - l2 - l3 - l4) from the spin-flipped product."""
    if rho.dim != 4:
        raise ValueError("concurrence is defined for two-qubit states (dim 4)")
    m = rho.entries
    tilde = _YY @ m.conj() @ _YY
    root = _sqrtm_psd(m)
    prod = root @ tilde @ root  # Hermitian PSD, same spectrum as m @ tilde
    lam = np.sqrt(np.clip(_eigvals_hermitian_matrix(prod), 0.0, None))[::-1]
    return max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))


def eof(rho: DensityMatrix) -> float:
    c = concurrence(rho)
    return binary_entropy(0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - c * c))))


# ---------------------------------------------------------------------------
# discussion-section bounds


def _single_site_entropies(psi):
    return [von_neumann(reduced_density(psi, [j])) for j in range(psi.k)]


def smolin_bound(psi: PureState) -> float:
    """Simultaneous GHZ/EPR distillation bound with E_F standing in for E_C.

    Evaluates the parametric expression at t = 0, t = 1 and the crossing
    point of the last minimum, over all assignments of the three roles.
    """
    if psi.k != 3:
        raise ValueError("the bound is defined for tripartite states")
    if any(d != 2 for d in psi.dims):
        raise ValueError("requires qubit sites: Wootters' formula is two-qubit only")
    h_site = _single_site_entropies(psi)
    e_pair = {}
    for a, b in itertools.combinations(range(3), 2):
        e_pair[(a, b)] = e_pair[(b, a)] = eof(reduced_density(psi, [a, b]))

    best = 0.0
    for a, b, c in itertools.permutations(range(3)):
        e_ab, e_ac = e_pair[(a, b)], e_pair[(a, c)]
        rate_ab = min(h_site[a], h_site[b]) - e_ab
        rate_ac = min(h_site[a], h_site[c]) - e_ac
        ts = [0.0, 1.0]
        if e_ab + e_ac > 1e-12:
            ts.append(e_ac / (e_ab + e_ac))
        for t in ts:
            val = t * rate_ab + (1.0 - t) * rate_ac + min(t * e_ab, (1.0 - t) * e_ac)
            best = max(best, val)
    return best


def streltsov_bound(psi: PureState) -> float:
    """Combing/merging bound: best assignment of min{H_A/(k-1), H_others}."""
    if psi.k < 3:
        raise ValueError("needs at least three parties")
    h_site = _single_site_entropies(psi)
    best = 0.0
    for a in range(psi.k):
        others = [h_site[j] for j in range(psi.k) if j != a]
        best = max(best, min([h_site[a] / (psi.k - 1)] + others))
    return best


def cut_upper_bound(psi: PureState) -> float:
    """Smallest single-site marginal entropy: an upper bound on the GHZ rate."""
    return min(_single_site_entropies(psi))
