"""Periodized lattices, Fourier transforms and weights.

Conventions: ``F f(xi) = (2 pi)^-d \\int f(x) e^{-i x.xi} dx`` and
``F^-1 h(x) = \\int h(xi) e^{i x.xi} dxi``. Integrals over R^d are replaced by
torus quadratures on ``x_k = -L + k h`` (h = 2L/N) and ``xi_m = m pi / L``
(m = -N/2 .. N/2-1). Spatial arrays have shape ``(N,)*d + (n,)``;
frequency arrays use the same layout with the m-ordering above.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

BOUNDARY_TOLERANCE = 1e-8


class BoundaryMassError(ValueError):
    """Field does not decay at the edge of the periodized box."""


@dataclass(frozen=True)
class PhaseSpaceGrid:
    d: int
    points_per_axis: int
    box_half_width: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.points_per_axis < 2 or self.points_per_axis % 2:
            raise ValueError("points_per_axis must be a positive even integer")
        if not self.box_half_width > 0:
            raise ValueError("box_half_width must be positive")

    @property
    def N(self) -> int:
        return self.points_per_axis

    @property
    def L(self) -> float:
        return float(self.box_half_width)

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def dxi(self) -> float:
        return np.pi / self.L

    @property
    def size(self) -> int:
        """Number of lattice points, N^d."""
        return self.N ** self.d

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def cell(self) -> float:
        return self.h ** self.d

    @property
    def xi_cell(self) -> float:
        return self.dxi ** self.d

    @cached_property
    def x_axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def xi_axis(self) -> np.ndarray:
        return self.dxi * np.arange(-self.N // 2, self.N // 2)

    @cached_property
    def points(self) -> np.ndarray:
        """Spatial lattice, shape (N^d, d), C-ordered like the field arrays."""
        mesh = np.meshgrid(*([self.x_axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Frequency lattice, shape (N^d, d)."""
        mesh = np.meshgrid(*([self.xi_axis] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @cached_property
    def _lattice_sign(self) -> np.ndarray:
        # e^{i L xi_m} = (-1)^m, per axis
        m = np.arange(-self.N // 2, self.N // 2)
        s1 = np.where(m % 2 == 0, 1.0, -1.0)
        out = np.ones(self.shape)
        for ax in range(self.d):
            shp = [1] * self.d
            shp[ax] = self.N
            out = out * s1.reshape(shp)
        return out

    def refined(self, k: int = 1) -> "PhaseSpaceGrid":
        return PhaseSpaceGrid(self.d, self.N * 2**k, self.L)


@dataclass(frozen=True, eq=False)
class SpinorField:
    """C^n-valued samples on the spatial lattice (or on the frequency lattice)."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape[:-1] != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite entries")
        object.__setattr__(self, "values", v.astype(complex, copy=False))

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(self.grid.size, self.n)

    @classmethod
    def from_flat(cls, grid: PhaseSpaceGrid, flat: np.ndarray) -> "SpinorField":
        flat = np.asarray(flat)
        return cls(grid, flat.reshape(grid.shape + (flat.shape[-1],)))

    def l2_norm(self) -> float:
        return l2_norm(self.grid, self.values)

    def __add__(self, other: "SpinorField") -> "SpinorField":
        return SpinorField(self.grid, self.values + other.values)

    def __sub__(self, other: "SpinorField") -> "SpinorField":
        return SpinorField(self.grid, self.values - other.values)

    def __mul__(self, c) -> "SpinorField":
        return SpinorField(self.grid, c * self.values)

    __rmul__ = __mul__


def l2_norm(grid: PhaseSpaceGrid, values: np.ndarray) -> float:
    """Quadrature L^2 norm (Euclidean modulus on C^n)."""
    return float(np.sqrt(grid.cell * np.sum(np.abs(values) ** 2)))


def relative_l2(grid: PhaseSpaceGrid, a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||."""
    return l2_norm(grid, np.asarray(a) - np.asarray(b)) / l2_norm(grid, b)


def _axes(grid: PhaseSpaceGrid, values: np.ndarray) -> tuple:
    # spatial axes sit just before the trailing spinor axis
    nd = values.ndim
    return tuple(range(nd - 1 - grid.d, nd - 1))


def forward_fourier(f: SpinorField) -> SpinorField:
    """Samples of f-hat on the frequency lattice."""
    return SpinorField(f.grid, forward_fourier_array(f.grid, f.values))


def inverse_fourier(fh: SpinorField) -> SpinorField:
    return SpinorField(fh.grid, inverse_fourier_array(fh.grid, fh.values))


def forward_fourier_array(grid: PhaseSpaceGrid, values: np.ndarray) -> np.ndarray:
    axes = _axes(grid, values)
    out = sfft.fftshift(sfft.fftn(values, axes=axes), axes=axes)
    sign = grid._lattice_sign.reshape(grid.shape + (1,))
    return out * sign * (grid.h / (2.0 * np.pi)) ** grid.d


def inverse_fourier_array(grid: PhaseSpaceGrid, values: np.ndarray) -> np.ndarray:
    axes = _axes(grid, values)
    sign = grid._lattice_sign.reshape(grid.shape + (1,))
    out = sfft.ifftn(sfft.ifftshift(values * sign, axes=axes), axes=axes)
    return out * (grid.size * grid.xi_cell)


def apply_multiplier(grid: PhaseSpaceGrid, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Apply a matrix Fourier multiplier, ``symbol`` of shape (N^d, n, n) on the xi lattice."""
    fh = forward_fourier_array(grid, values)
    lead = fh.shape[: fh.ndim - 1 - grid.d]
    flat = fh.reshape(lead + (grid.size, fh.shape[-1]))
    flat = matvec(symbol, flat)
    return inverse_fourier_array(grid, flat.reshape(fh.shape))


def matvec(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Batched ``mat @ vec`` over trailing axes, broadcasting the rest.

    A single (n, n) matrix goes through one matmul; batches of matrices are
    written as explicit component sums, which beat einsum for the tiny spinor
    dimensions used here.
    """
    if mat.ndim == 2:
        return vec @ mat.T
    n = mat.shape[-1]
    out = mat[..., 0] * vec[..., :1]
    for j in range(1, n):
        out = out + mat[..., j] * vec[..., j:j + 1]
    return out


def peetre_weight(x, r: float):
    """<x>^r = (1 + |x|^2)^(r/2); ``x`` has its vector index last."""
    x = np.asarray(x, dtype=float)
    return (1.0 + np.sum(x * x, axis=-1)) ** (0.5 * r)


def boundary_mass(grid: PhaseSpaceGrid, values: np.ndarray) -> float:
    """max |f| on the outermost lattice layer relative to max |f|."""
    a = np.abs(np.asarray(values)).max(axis=-1)
    a = a.reshape(a.shape[: a.ndim - grid.d] + grid.shape)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = 0.0
    for ax in range(grid.d):
        axis = a.ndim - grid.d + ax
        edge = max(edge, np.take(a, 0, axis=axis).max(), np.take(a, -1, axis=axis).max())
    return float(edge / peak)


def check_boundary(grid: PhaseSpaceGrid, values: np.ndarray, tol: float = BOUNDARY_TOLERANCE) -> None:
    m = boundary_mass(grid, values)
    if m > tol:
        raise BoundaryMassError(f"relative boundary mass {m:.3e} exceeds {tol:.1e}; enlarge the box")
