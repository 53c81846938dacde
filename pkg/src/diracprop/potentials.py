"""Potential families V(t, x) = c(t) v(x) B and their smooth/rough splitting.

``v`` is a scalar profile with exact gradient and Hessian, ``c`` a bounded
time modulation and ``B`` a constant Hermitian coupling (identity by
default). Only this tensor-product form is supported.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .gabor import Window
from .phase_space import PhaseSpaceGrid, SpinorField
from .spaces import NormSpec, gauss_legendre_unit, modulation_norm

KINDS = ("zero", "stark", "harmonic", "bounded_rough", "custom")
MODULATIONS = ("none", "cos")


class HypothesisError(ValueError):
    """The potential is outside the class required by the requested construction."""


@dataclass(frozen=True)
class Profile:
    """Scalar profile with derivative oracles; all callables act on points (..., d)."""

    value: Callable
    gradient: Callable
    hessian: Callable


def _stark_profile(E: np.ndarray) -> Profile:
    return Profile(
        value=lambda x: np.asarray(x, float) @ E,
        gradient=lambda x: np.broadcast_to(E, np.shape(x)).copy(),
        hessian=lambda x: np.zeros(np.shape(x) + (len(E),)),
    )


def _harmonic_profile(omega: float, d: int) -> Profile:
    w2 = omega * omega
    return Profile(
        value=lambda x: 0.5 * w2 * np.sum(np.asarray(x, float) ** 2, axis=-1),
        gradient=lambda x: w2 * np.asarray(x, float),
        hessian=lambda x: np.broadcast_to(w2 * np.eye(d), np.shape(x) + (d,)).copy(),
    )


def _sine_profile(amplitude: float, k: float, d: int) -> Profile:
    def hess(x):
        x = np.asarray(x, float)
        diag = -amplitude * k * k * np.sin(k * x)
        return diag[..., :, None] * np.eye(d)

    return Profile(
        value=lambda x: amplitude * np.sum(np.sin(k * np.asarray(x, float)), axis=-1),
        gradient=lambda x: amplitude * k * np.cos(k * np.asarray(x, float)),
        hessian=hess,
    )


def _zero_profile(d: int) -> Profile:
    return Profile(
        value=lambda x: np.zeros(np.shape(x)[:-1]),
        gradient=lambda x: np.zeros(np.shape(x)),
        hessian=lambda x: np.zeros(np.shape(x) + (d,)),
    )


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """V(t, x) = c(t) v(x) B.

    params: stark ``E`` (length-d sequence), harmonic ``omega``,
    bounded_rough ``amplitude`` and ``wavenumber`` (profile A sum_a sin(k x_a)),
    custom ``profile`` (a :class:`Profile`).
    """

    kind: str
    d: int = 1
    params: dict = field(default_factory=dict)
    modulation: str = "none"
    modulation_frequency: float = 1.0
    modulation_bound: float = 1.0
    coupling: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.modulation not in MODULATIONS and not callable(self.modulation):
            raise ValueError(f"unknown modulation {self.modulation!r}")
        if self.coupling is not None:
            b = np.asarray(self.coupling, dtype=complex)
            if np.abs(b - b.conj().T).max() > 1e-14:
                raise ValueError("coupling matrix must be Hermitian")
            object.__setattr__(self, "coupling", b)
            if self.kind == "harmonic" and not self.is_scalar:
                raise HypothesisError("harmonic potentials must be scalar (Q I_n)")
        if self.modulation == "cos" and self.modulation_bound < 1.0:
            raise ValueError("cos modulation exceeds the declared bound")

    # -- profile ---------------------------------------------------------
    @property
    def profile(self) -> Profile:
        p, d = self.params, self.d
        if self.kind == "zero":
            return _zero_profile(d)
        if self.kind == "stark":
            E = np.asarray(p.get("E", [1.0] * d), dtype=float).reshape(d)
            return _stark_profile(E)
        if self.kind == "harmonic":
            return _harmonic_profile(float(p.get("omega", 1.0)), d)
        if self.kind == "bounded_rough":
            return _sine_profile(float(p.get("amplitude", 1.0)), float(p.get("wavenumber", 1.0)), d)
        return p["profile"]

    @property
    def is_scalar(self) -> bool:
        if self.coupling is None:
            return True
        b = self.coupling
        return bool(np.abs(b - b[0, 0] * np.eye(len(b))).max() == 0 and b[0, 0] == 1)

    @property
    def is_time_independent(self) -> bool:
        return self.modulation == "none"

    def coupling_matrix(self, n: int) -> np.ndarray:
        if self.coupling is None:
            return np.eye(n, dtype=complex)
        if self.coupling.shape != (n, n):
            raise ValueError(f"coupling has shape {self.coupling.shape}, spinors have n={n}")
        return self.coupling

    # -- time modulation -------------------------------------------------
    def c(self, t):
        t = np.asarray(t, dtype=float)
        if self.modulation == "none":
            return np.ones_like(t)
        if self.modulation == "cos":
            return np.cos(self.modulation_frequency * t)
        return np.asarray(self.modulation(t), dtype=float)

    def c_integral(self, t, s=0.0):
        """int_s^t c(tau) d tau (closed form where available, else Gauss-Legendre)."""
        if self.modulation == "none":
            return np.asarray(t, float) - s
        if self.modulation == "cos":
            nu = self.modulation_frequency
            return (np.sin(nu * np.asarray(t, float)) - np.sin(nu * s)) / nu
        t = float(t)
        pieces = max(1, int(np.ceil(abs(t - s))))
        th, w = gauss_legendre_unit(8)
        edges = np.linspace(s, t, pieces + 1)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            total += (b - a) * np.sum(w * self.c(a + th * (b - a)))
        return total

    def check_modulation_bound(self, horizon: float, samples: int = 1001) -> None:
        ts = np.linspace(-horizon, horizon, samples)
        if np.abs(self.c(ts)).max() > self.modulation_bound + 1e-12:
            raise HypothesisError("time modulation exceeds its declared bound")

    # -- values ----------------------------------------------------------
    def scalar(self, t, x):
        return self.c(t) * self.profile.value(x)

    def evaluate(self, t, x, n: int = 2) -> np.ndarray:
        """V(t, x) as an (..., n, n) Hermitian matrix."""
        s = np.asarray(self.scalar(t, np.asarray(x, dtype=float)))
        return s[..., None, None] * self.coupling_matrix(n)


def evaluate(V: PotentialSpec, t: float, x, n: int = 2) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return V.evaluate(t, x, n)


# ---------------------------------------------------------------------------
# smooth / rough splitting


def mollified_profile(profile: Profile, delta: float, d: int, nodes: Optional[int] = None) -> Profile:
    """Gaussian mollification (standard deviation ``delta``) by tensor Gauss-Hermite quadrature.

    With the default node count, a Fourier mode e^{i k x} is mollified to
    rounding accuracy while |k| delta <= 3 (d = 1); beyond that the
    quadrature error grows (about 1e-8 at |k| delta = 4.5).
    """
    if nodes is None:
        nodes = 24 if d == 1 else 12
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / np.sqrt(2.0 * np.pi)
    grids = np.meshgrid(*([z] * d), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()

    def smooth(fn):
        def out(x):
            x = np.asarray(x, float)
            acc = 0.0
            for zi, wi in zip(Z, W):
                acc = acc + wi * fn(x - delta * zi)
            return acc
        return out

    return Profile(smooth(profile.value), smooth(profile.gradient), smooth(profile.hessian))


@dataclass(frozen=True, eq=False)
class PotentialSplit:
    """V = V1 + V2 with V1 smooth (exact derivative oracles) and V2 sampled on the lattice."""

    spec: PotentialSpec
    grid: PhaseSpaceGrid
    order: int
    delta: float
    smooth: Profile
    rough_samples: np.ndarray  # (K,) scalar profile v2 = v - v1 on the lattice

    @property
    def has_rough(self) -> bool:
        return bool(np.any(self.rough_samples != 0))

    def V1(self, t, x, n: int = 2) -> np.ndarray:
        return (self.spec.c(t) * self.smooth.value(x))[..., None, None] * self.spec.coupling_matrix(n)

    def V2(self, t, n: int = 2) -> np.ndarray:
        """V2(t, x_k) for every lattice point, shape (K, n, n)."""
        return (self.spec.c(t) * self.rough_samples)[:, None, None] * self.spec.coupling_matrix(n)

    def reconstruction_error(self, t: float, n: int = 2) -> float:
        pts = self.grid.points
        full = self.spec.evaluate(t, pts, n)
        return float(np.abs(full - self.V1(t, pts, n) - self.V2(t, n)).max())

    def rough_norm(self, g: Window, rho: float = 0.0) -> float:
        """Discrete M^{inf,1}_{0,|rho|} norm of V2(t)/c(t), max-entry modulus on C^{n x n}."""
        scale = 1.0 if self.spec.coupling is None else float(np.abs(self.spec.coupling).max())
        f = SpinorField.from_flat(self.grid, self.rough_samples[:, None].astype(complex))
        spec = NormSpec(np.inf, 1.0, 0.0, abs(rho), flavor="modulation")
        return scale * modulation_norm(f, g, spec)


POLYNOMIAL_KINDS = ("zero", "stark", "harmonic")


def decompose(V: PotentialSpec, grid: PhaseSpaceGrid, k: int = 1, delta: float = 0.5) -> PotentialSplit:
    """Split V into a part with bounded derivatives of order >= k plus a bounded rough part."""
    if k not in (1, 2):
        raise ValueError("derivative order must be 1 or 2")
    if grid.d != V.d:
        raise ValueError("potential and grid dimensions differ")
    if k == 2 and not V.is_scalar:
        raise HypothesisError("second-order splitting needs a scalar potential V = Q I_n")
    if k == 1 and V.kind == "harmonic":
        raise HypothesisError("harmonic potentials have unbounded first derivatives")
    if V.kind in POLYNOMIAL_KINDS:
        return PotentialSplit(V, grid, k, 0.0, V.profile, np.zeros(grid.size))
    if not delta > 0:
        raise ValueError("mollification width must be positive")
    smooth = mollified_profile(V.profile, delta, V.d)
    pts = grid.points
    rough = V.profile.value(pts) - smooth.value(pts)
    return PotentialSplit(V, grid, k, float(delta), smooth, np.asarray(rough, dtype=float))


def gradient_flow(Q: PotentialSpec, t: float, s: float, x) -> np.ndarray:
    """int_s^t grad_x Q(tau, x) d tau."""
    if not Q.is_scalar:
        raise HypothesisError("frequency flow needs a scalar potential V = Q I_n")
    x = np.asarray(x, dtype=float)
    return Q.c_integral(t, s) * Q.profile.gradient(x)
