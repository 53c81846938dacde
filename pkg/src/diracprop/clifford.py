"""Clifford (Dirac) matrix representations and the free Dirac symbol.

Representations are built by tensor-product doubling from 2x2 Pauli seeds.
The matrix order is whatever the recursion produces; validity is checked by
the anticommutation relations, never by a dimension formula.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import qmc

MAX_DIMENSION = 12

# Pauli matrices in the labelling used throughout the package:
# a1 = sigma_x, a2 = diag(1, -1), a3 = [[0, -i], [i, 0]].
PAULI_1 = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_2 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_3 = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI = (PAULI_1, PAULI_2, PAULI_3)


class CapacityError(ValueError):
    """Requested representation exceeds desk-scale matrix sizes."""


@dataclass(frozen=True, eq=False)
class CliffordRep:
    """Hermitian matrices alpha_0..alpha_d with alpha_j alpha_k + alpha_k alpha_j = 2 delta_jk I."""

    d: int
    alphas: tuple  # tuple of (n, n) complex arrays

    @property
    def n(self) -> int:
        return self.alphas[0].shape[0]

    def stack(self) -> np.ndarray:
        """All matrices as one array of shape (d + 1, n, n)."""
        return np.stack(self.alphas)

    def anticommutator_error(self) -> float:
        eye = np.eye(self.n)
        err = 0.0
        for j, a in enumerate(self.alphas):
            for k, b in enumerate(self.alphas):
                target = 2.0 * eye if j == k else 0.0 * eye
                err = max(err, np.abs(a @ b + b @ a - target).max())
        return float(err)

    def hermiticity_error(self) -> float:
        return float(max(np.abs(a - a.conj().T).max() for a in self.alphas))

    def validate(self, tol: float = 1e-14) -> None:
        n = self.n
        if n & (n - 1):
            raise ValueError(f"matrix order {n} is not a power of two")
        if len(self.alphas) != self.d + 1:
            raise ValueError("need exactly d + 1 matrices")
        if self.hermiticity_error() > tol:
            raise ValueError("alpha matrices are not Hermitian")
        if self.anticommutator_error() > tol:
            raise ValueError("anticommutation relations violated")

    def conjugated(self, unitary: np.ndarray) -> "CliffordRep":
        """The equivalent representation U alpha_j U^dagger."""
        u = np.asarray(unitary, dtype=complex)
        return CliffordRep(self.d, tuple(u @ a @ u.conj().T for a in self.alphas))

    def __hash__(self):
        return hash((self.d, self.stack().tobytes()))

    def __eq__(self, other):
        return (isinstance(other, CliffordRep) and self.d == other.d
                and np.array_equal(self.stack(), other.stack()))


def _double(gens: Sequence[np.ndarray]) -> list:
    s = gens[0].shape[0]
    eye = np.eye(s, dtype=complex)
    out = [np.kron(g, PAULI_1) for g in gens]
    out.append(np.kron(eye, PAULI_3))
    out.append(np.kron(eye, PAULI_2))
    return out


def build_clifford(d: int, variant: str = "standard") -> CliffordRep:
    """Return d + 1 anticommuting Hermitian matrices.

    ``variant="dirac"`` (d = 3 only) gives alpha_0 = diag(I, -I) and
    alpha_j = offdiag(a_j, a_j).
    """
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    if d > MAX_DIMENSION:
        raise CapacityError(f"d={d} exceeds the supported maximum {MAX_DIMENSION}")
    if variant == "dirac":
        if d != 3:
            raise ValueError("the Dirac variant exists only for d=3")
        z = np.zeros((2, 2), dtype=complex)
        eye = np.eye(2, dtype=complex)
        alphas = [np.block([[eye, z], [z, -eye]])]
        alphas += [np.block([[z, a], [a, z]]) for a in PAULI]
        rep = CliffordRep(3, tuple(alphas))
        rep.validate()
        return rep
    if variant != "standard":
        raise ValueError(f"unknown variant {variant!r}")
    if d == 1:
        gens = [PAULI_2, PAULI_1]
    else:
        gens = [PAULI_3, PAULI_1, PAULI_2]
        while len(gens) < d + 1:
            gens = _double(gens)
    rep = CliffordRep(int(d), tuple(np.array(g) for g in gens[: d + 1]))
    rep.validate()
    return rep


@dataclass(frozen=True)
class DiracSymbolValue:
    matrix: np.ndarray
    xi: np.ndarray


def symbol_matrices(rep: CliffordRep, xi: np.ndarray) -> np.ndarray:
    """sigma(xi) = alpha_0 + sum_j xi_j alpha_j, vectorized over leading axes of ``xi``."""
    xi = np.asarray(xi, dtype=float)
    a = rep.stack()
    return a[0] + np.tensordot(xi, a[1:], axes=([-1], [0]))


def dirac_symbol(rep: CliffordRep, xi) -> DiracSymbolValue:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (rep.d,):
        raise ValueError(f"xi must have shape ({rep.d},)")
    return DiracSymbolValue(symbol_matrices(rep, xi), xi)


def free_half_propagator(rep: CliffordRep, xi: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t sigma(xi)) = cos(t<xi>) I - i sin(t<xi>) sigma(xi) / <xi>."""
    xi = np.asarray(xi, dtype=float)
    jb = np.sqrt(1.0 + np.sum(xi * xi, axis=-1))
    sig = symbol_matrices(rep, xi)
    eye = np.eye(rep.n)
    c = np.cos(t * jb)[..., None, None]
    s = (np.sin(t * jb) / jb)[..., None, None]
    return c * eye - 1j * s * sig


@dataclass
class GrowthReport:
    """Sup over samples of |d^a_eta (sigma(xi+eta) - sigma(xi))|_max / <eta>, per order |a|."""

    ratios: dict
    sample_count: int


def symbol_growth_check(rep: CliffordRep, sample_count: int = 256, max_order: int = 2,
                        box: float = 10.0, symbol=None, step: float = 1e-3) -> GrowthReport:
    """Probe the symbol growth condition with k = 1.

    Samples (xi, eta) from an unscrambled Sobol sequence over [-box, box]^(2d).
    Derivatives are central differences of ``symbol`` (default: the Dirac
    symbol of ``rep``), so the check also applies to non-Dirac multipliers.
    """
    d = rep.d
    sym = symbol if symbol is not None else (lambda z: symbol_matrices(rep, z))
    m = int(np.ceil(np.log2(max(sample_count, 2))))
    pts = qmc.Sobol(2 * d, scramble=False).random_base2(m)[:sample_count]
    pts = box * (2.0 * pts - 1.0)
    xi, eta = pts[:, :d], pts[:, d:]
    jb = np.sqrt(1.0 + np.sum(eta**2, axis=-1))

    def diff(e):
        return sym(xi + e) - sym(xi)

    ratios = {}
    unit = np.eye(d)
    for order in range(max_order + 1):
        vals = []
        for idx in np.ndindex(*(d,) * order):
            # nested central differences in the eta directions listed in idx
            terms = [(1.0, np.zeros(d))]
            for j in idx:
                terms = [(w * s / (2 * step), off + s * step * unit[j])
                         for w, off in terms for s in (1.0, -1.0)]
            acc = sum(w * diff(eta + off) for w, off in terms)
            vals.append(np.abs(acc).max(axis=(-2, -1)) / jb)
        ratios[order] = float(np.max(vals))
    return GrowthReport(ratios, sample_count)


def monomial_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random permutation-times-phase unitary; preserves the max-component modulus."""
    perm = rng.permutation(n)
    phases = np.exp(2j * np.pi * rng.random(n))
    u = np.zeros((n, n), dtype=complex)
    u[np.arange(n), perm] = phases
    return u
