"""Weighted modulation / Wiener amalgam norms and the related dilation checks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .gabor import Window, analysis
from .phase_space import PhaseSpaceGrid, SpinorField, forward_fourier_array, peetre_weight

FLAVORS = ("modulation", "wiener")


def parse_exponent(p) -> float:
    if isinstance(p, str):
        p = p.strip().lower()
        if p in ("inf", "infinity", "oo"):
            return np.inf
        p = float(p)
    p = float(p)
    if not (p >= 1.0):
        raise ValueError(f"Lebesgue exponent must lie in [1, inf], got {p}")
    return p


def format_exponent(p: float) -> str:
    return "inf" if np.isinf(p) else f"{p:g}"


@dataclass(frozen=True)
class NormSpec:
    """Exponents (p, q), weights <x>^r <xi>^rho, nesting flavor.

    ``spinor`` selects the pointwise modulus on C^n: "max" (max of component
    moduli) or "euclidean".
    """

    p: float
    q: float
    r: float = 0.0
    rho: float = 0.0
    flavor: str = "wiener"
    spinor: str = "max"

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        object.__setattr__(self, "q", parse_exponent(self.q))
        if self.flavor not in FLAVORS:
            raise ValueError(f"flavor must be one of {FLAVORS}")
        if self.spinor not in ("max", "euclidean"):
            raise ValueError("spinor modulus must be 'max' or 'euclidean'")

    def label(self) -> str:
        return (f"{self.flavor}({format_exponent(self.p)},{format_exponent(self.q)};"
                f"r={self.r:g},rho={self.rho:g})")


ENDPOINT_PAIRS = ((1.0, 1.0), (1.0, np.inf), (np.inf, 1.0), (np.inf, np.inf))


def lp(a: np.ndarray, p: float, cell: float, axis: int) -> np.ndarray:
    if np.isinf(p):
        return a.max(axis=axis)
    if p == 1.0:
        return a.sum(axis=axis) * cell
    return (np.sum(a**p, axis=axis) * cell) ** (1.0 / p)


def coefficient_modulus(coeffs: np.ndarray, spinor: str = "max") -> np.ndarray:
    a = np.abs(coeffs)
    if spinor == "max":
        return a.max(axis=-1)
    return np.sqrt(np.sum(a * a, axis=-1))


def mixed_norm(grid: PhaseSpaceGrid, modulus: np.ndarray, spec: NormSpec) -> np.ndarray:
    """Weighted mixed norm of |V_g f| given as (..., K, M)."""
    w = (peetre_weight(grid.points, spec.r)[:, None]
         * peetre_weight(grid.frequencies, spec.rho)[None, :])
    a = modulus * w
    if spec.flavor == "modulation":
        inner = lp(a, spec.p, grid.cell, axis=-2)
        return lp(inner, spec.q, grid.xi_cell, axis=-1)
    inner = lp(a, spec.q, grid.xi_cell, axis=-1)
    return lp(inner, spec.p, grid.cell, axis=-1)


def norms_of(grid: PhaseSpaceGrid, g: Window, flat: np.ndarray,
             specs: Sequence[NormSpec]) -> np.ndarray:
    """All requested norms of a batch of fields ``flat`` (..., K, n) -> (..., len(specs))."""
    coeffs = analysis(grid, g, flat)
    cache = {}
    out = []
    for s in specs:
        if s.spinor not in cache:
            cache[s.spinor] = coefficient_modulus(coeffs, s.spinor)
        out.append(mixed_norm(grid, cache[s.spinor], s))
    return np.stack(out, axis=-1)


def _norm(f: SpinorField, g: Window, s: NormSpec) -> float:
    if f.grid != g.grid:
        raise ValueError("field and window live on different grids")
    coeffs = analysis(f.grid, g, f.flat)
    if not np.all(np.isfinite(coeffs)):
        raise FloatingPointError("non-finite STFT coefficients")
    return float(mixed_norm(f.grid, coefficient_modulus(coeffs, s.spinor), s))


def modulation_norm(f: SpinorField, g: Window, s: NormSpec) -> float:
    """|| || <x>^r <xi>^rho |V_g f|  ||_{L^p_x} ||_{L^q_xi}."""
    if s.flavor != "modulation":
        raise ValueError("modulation_norm needs a modulation-flavored NormSpec")
    return _norm(f, g, s)


def wiener_norm(f: SpinorField, g: Window, s: NormSpec) -> float:
    """|| || <x>^r <xi>^rho |V_g f|  ||_{L^q_xi} ||_{L^p_x}."""
    if s.flavor != "wiener":
        raise ValueError("wiener_norm needs a wiener-flavored NormSpec")
    return _norm(f, g, s)


# ---------------------------------------------------------------------------
# translation, dilation, resampling


def translate(f: SpinorField, shift_points) -> SpinorField:
    """T_a f for a lattice-aligned a given in lattice steps per axis (cyclic)."""
    steps = np.atleast_1d(np.asarray(shift_points, dtype=int))
    vals = np.roll(f.values, tuple(steps), axis=tuple(range(f.grid.d)))
    return SpinorField(f.grid, vals)


def trig_interpolate(f: SpinorField, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of f at arbitrary points (P, d) -> (P, n).

    The unpaired Nyquist mode is split symmetrically so real data stays real.
    """
    grid = f.grid
    fh = forward_fourier_array(grid, f.values).reshape(grid.size, f.n)
    xi = grid.frequencies
    nyq = np.isclose(np.abs(xi), grid.N // 2 * grid.dxi)
    # each Nyquist coordinate contributes cos() instead of a one-sided exponential
    phase = np.ones((len(points), grid.size), dtype=complex)
    for a in range(grid.d):
        pa = points[:, a:a + 1]
        phase *= np.where(nyq[None, :, a], np.cos(pa * xi[None, :, a]),
                          np.exp(1j * pa * xi[None, :, a]))
    return phase @ fh * grid.xi_cell


def dilate(f: SpinorField, theta: float) -> SpinorField:
    """D_theta f(x) = f(theta x), resampled on the same lattice."""
    vals = trig_interpolate(f, theta * f.grid.points)
    return SpinorField.from_flat(f.grid, vals)


@dataclass
class DilationTable:
    thetas: list
    ratios: list
    translation_ratio: float

    @property
    def sup(self) -> float:
        return max(self.ratios)


def dilation_bound_check(f: SpinorField, g: Window, thetas: Iterable[float],
                         translation_steps=None) -> DilationTable:
    """||D_theta f|| / ||f|| in M^{inf,1}, plus the ratio for one lattice translation."""
    thetas = [float(t) for t in thetas]
    for t in thetas:
        if not (0.0 < t <= 1.0):
            raise ValueError(f"theta must lie in (0, 1], got {t}")
    spec = NormSpec(np.inf, 1.0, flavor="modulation")
    base = modulation_norm(f, g, spec)
    ratios = [modulation_norm(dilate(f, t) if t != 1.0 else f, g, spec) / base for t in thetas]
    if translation_steps is None:
        translation_steps = [f.grid.N // 8] * f.grid.d
    tr = modulation_norm(translate(f, translation_steps), g, spec) / base
    return DilationTable(thetas, ratios, tr)


# ---------------------------------------------------------------------------
# Taylor averages

_GL_CACHE = {}


def gauss_legendre_unit(nodes: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if nodes not in _GL_CACHE:
        z, w = np.polynomial.legendre.leggauss(nodes)
        _GL_CACHE[nodes] = (0.5 * (z + 1.0), 0.5 * w)
    return _GL_CACHE[nodes]


def taylor_average(f: Callable, x, y, weight: str = "1-theta", nodes: int = 8):
    """int_0^1 f(x + theta (y - x)) w(theta) d theta with w = 1 - theta (default) or 1.

    ``f`` maps points (..., d) to values (..., *); x and y broadcast. With
    the default 8 nodes the rule is exact for polynomial integrands of degree
    <= 15.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    th, w = gauss_legendre_unit(nodes)
    if weight == "1-theta":
        w = w * (1.0 - th)
    elif weight != "1":
        raise ValueError("weight must be '1-theta' or '1'")
    acc = 0.0
    for t, wt in zip(th, w):
        acc = acc + wt * np.asarray(f(x + t * (y - x)))
    return acc
