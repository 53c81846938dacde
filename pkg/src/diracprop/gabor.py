"""Short-time Fourier transform on the periodized lattice.

``V_g f(x, xi) = \\int conj(g(y - x)) f(y) e^{-i y.xi} dy`` is sampled on every
phase-space point (x_k, xi_m). Internally the transform is computed per x_k
as an FFT over the *offset* y - x_k, which gives the "localized" coefficients
``C(x, xi) = e^{i x.xi} V_g f(x, xi)``. Synthesis (the adjoint, and every
parametrix) consumes localized coefficients, which makes the discrete
inversion formula exact on the torus.

Offsets are indexed in standard FFT order: offset index l_a in 0..N-1 on each
axis stands for the minimum-image displacement h * (l_a or l_a - N).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .phase_space import PhaseSpaceGrid, SpinorField


class InvalidWindowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PacketGeometry:
    """Index tables relating lattice points and periodic offsets."""

    grid: PhaseSpaceGrid
    offsets: np.ndarray  # (N^d, d) minimum-image displacement of each offset index
    idx_add: np.ndarray  # (K, K): flat index of x_k + offset_l
    idx_sub: np.ndarray  # (K, K): offset index of y_j - x_k
    local_phase: np.ndarray  # (K, M): e^{i x_k . xi_m}
    offset_sign: np.ndarray  # (N^d,): (-1)^(sum of offset indices); turns FFT order into centered order


@lru_cache(maxsize=8)
def packet_geometry(grid: PhaseSpaceGrid) -> PacketGeometry:
    N, d = grid.N, grid.d
    multi = np.array(np.unravel_index(np.arange(grid.size), grid.shape)).T  # (K, d)
    signed = np.where(multi < N // 2, multi, multi - N)
    offsets = grid.h * signed.astype(float)
    add = (multi[:, None, :] + multi[None, :, :]) % N
    sub = (multi[None, :, :] - multi[:, None, :]) % N
    idx_add = np.ravel_multi_index(tuple(np.moveaxis(add, -1, 0)), grid.shape)
    idx_sub = np.ravel_multi_index(tuple(np.moveaxis(sub, -1, 0)), grid.shape)
    local_phase = np.exp(1j * grid.points @ grid.frequencies.T)
    sign = np.where(multi.sum(axis=-1) % 2 == 0, 1.0, -1.0)
    return PacketGeometry(grid, offsets, idx_add, idx_sub, local_phase, sign)


@dataclass(frozen=True, eq=False)
class Window:
    """Window samples on the offset lattice, with their gradient."""

    grid: PhaseSpaceGrid
    samples: np.ndarray  # (N^d,) complex, offset order
    gradient: np.ndarray  # (N^d, d)
    l2_norm: float
    name: str = "custom"

    def __post_init__(self):
        if not np.any(self.samples != 0):
            raise InvalidWindowError("window is identically zero")

    def normalized(self) -> "Window":
        c = 1.0 / self.l2_norm
        return Window(self.grid, self.samples * c, self.gradient * c, 1.0, self.name)


def _quadrature_norm(grid: PhaseSpaceGrid, samples: np.ndarray) -> float:
    return float(np.sqrt(grid.cell * np.sum(np.abs(samples) ** 2)))


def spectral_gradient(grid: PhaseSpaceGrid, samples: np.ndarray) -> np.ndarray:
    """Gradient of offset-ordered samples via the trigonometric interpolant."""
    arr = samples.reshape(grid.shape)
    k = 2.0 * np.pi * np.fft.fftfreq(grid.N, grid.h)
    k[grid.N // 2] = 0.0  # drop the unpaired Nyquist mode for odd derivatives
    spec = np.fft.fftn(arr)
    out = []
    for ax in range(grid.d):
        shp = [1] * grid.d
        shp[ax] = grid.N
        out.append(np.fft.ifftn(1j * k.reshape(shp) * spec).ravel())
    return np.stack(out, axis=-1)


def gaussian_window(grid: PhaseSpaceGrid, width: float = 1.0, normalize: bool = True) -> Window:
    """exp(-|x|^2 / (2 width^2)), L^2-normalized by the lattice quadrature."""
    if not width > 0:
        raise InvalidWindowError("window width must be positive")
    off = packet_geometry(grid).offsets
    g = np.exp(-np.sum(off**2, axis=-1) / (2.0 * width**2)).astype(complex)
    grad = -(off / width**2) * g[:, None]
    w = Window(grid, g, grad, _quadrature_norm(grid, g), name=f"gauss:{width:g}")
    return w.normalized() if normalize else w


def window_from_function(grid: PhaseSpaceGrid, func: Callable, grad: Optional[Callable] = None,
                         normalize: bool = True, name: str = "custom") -> Window:
    """Window from a profile evaluated at offsets, shape (K, d) -> (K,)."""
    off = packet_geometry(grid).offsets
    g = np.asarray(func(off), dtype=complex)
    gr = np.asarray(grad(off), dtype=complex) if grad is not None else spectral_gradient(grid, g)
    w = Window(grid, g, gr, _quadrature_norm(grid, g), name=name)
    return w.normalized() if normalize else w


@dataclass(frozen=True, eq=False)
class StftCoefficients:
    """V_g f on the phase-space lattice: ``values[k, m, c]`` for (x_k, xi_m), component c."""

    grid: PhaseSpaceGrid
    window: str
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("STFT coefficients contain non-finite entries")

    @property
    def n(self) -> int:
        return self.values.shape[-1]


# ---------------------------------------------------------------------------
# core analysis / synthesis on flat arrays (..., K, n)


def _to_lattice_axes(grid: PhaseSpaceGrid, arr: np.ndarray) -> tuple:
    # (..., K, K2, n) -> (..., K, N, ..., N, n)
    lead = arr.shape[:-2]
    return arr.reshape(lead + grid.shape + arr.shape[-1:]), tuple(
        range(len(lead), len(lead) + grid.d))


def _batched(flat: np.ndarray) -> tuple:
    lead = flat.shape[:-2]
    return np.ascontiguousarray(flat, dtype=complex).reshape((-1,) + flat.shape[-2:]), lead


def analysis(grid: PhaseSpaceGrid, window: Window, flat: np.ndarray,
             shift: Optional[np.ndarray] = None) -> np.ndarray:
    """Localized coefficients ``e^{i x.zeta} V_g f(x, zeta)`` at zeta = xi_m - shift(x_k).

    ``flat`` has shape (..., K, n); ``shift`` is (K, d) or None. Returns
    (..., K, M, n), frequency index in centered order.
    """
    geo = packet_geometry(grid)
    # the (-1)^l factor makes the plain FFT come out in centered frequency order
    wconj = (np.conj(window.samples) * geo.offset_sign)[None, :]
    if shift is not None:
        wconj = wconj * np.exp(1j * shift @ geo.offsets.T)
    wconj = np.ascontiguousarray(np.broadcast_to(wconj, (grid.size, grid.size)))
    src, lead = _batched(flat)
    a = np.empty((src.shape[0], grid.size, grid.size, src.shape[-1]), dtype=complex)
    _kernels.gather_windowed(src, geo.idx_add, wconj, a)
    a, axes = _to_lattice_axes(grid, a)
    c = sfft.fftn(a, axes=axes, overwrite_x=True)
    return c.reshape(lead + (grid.size, grid.size, flat.shape[-1])) * grid.cell


def synthesis(grid: PhaseSpaceGrid, coeffs: np.ndarray, terms: Sequence,
              shift: Optional[np.ndarray] = None) -> np.ndarray:
    """Sum over (x_k, xi_m) of ``e^{i delta.(xi_m - shift_k)} W(k, delta) coeffs[k, m]``.

    delta = y_j - x_k (minimum image). ``terms`` is a list of
    ``(weight, matrix)`` with weight broadcastable to (K, K_offset) and matrix
    an (n, n) array or None; the kernel is sum(weight * matrix). The
    d-bar-xi quadrature weight is folded into the inverse FFT.
    """
    geo = packet_geometry(grid)
    K, n = grid.size, coeffs.shape[-1]
    arr, axes = _to_lattice_axes(grid, coeffs)
    b = sfft.ifftn(arr, axes=axes)  # centered input order is undone by the (-1)^l weights
    lead = coeffs.shape[:-3]
    b = np.ascontiguousarray(b).reshape((-1, K, K, n))
    weights = np.empty((len(terms), K, K), dtype=complex)
    mats = np.zeros((len(terms), n, n), dtype=complex)
    has_mat = np.zeros(len(terms), dtype=bool)
    for i, (weight, mat) in enumerate(terms):
        weights[i] = np.broadcast_to(weight, (K, K)) * geo.offset_sign[None, :]
        if mat is not None:
            mats[i] = mat
            has_mat[i] = True
    if shift is not None:
        flow, use_flow = np.exp(-1j * shift @ geo.offsets.T), True
    else:
        flow, use_flow = np.ones((1, 1), dtype=complex), False
    out = np.zeros((b.shape[0], K, n), dtype=complex)
    _kernels.kernel_scatter_sum(b, geo.idx_add, weights, mats, has_mat, flow, use_flow, out)
    return out.reshape(lead + (K, n))


# ---------------------------------------------------------------------------
# public operations


def _require_same_grid(f: SpinorField, g: Window) -> None:
    if f.grid != g.grid:
        raise ValueError("field and window live on different grids")


def stft(f: SpinorField, g: Window) -> StftCoefficients:
    _require_same_grid(f, g)
    geo = packet_geometry(f.grid)
    loc = analysis(f.grid, g, f.flat)
    vals = np.conj(geo.local_phase)[..., None] * loc
    return StftCoefficients(f.grid, g.name, vals)


def stft_values(grid: PhaseSpaceGrid, g: Window, flat: np.ndarray) -> np.ndarray:
    """|V_g f| is all the norms need; the localized phase does not change it."""
    return analysis(grid, g, flat)


def adjoint_stft(F: StftCoefficients, g: Window) -> SpinorField:
    grid = F.grid
    geo = packet_geometry(grid)
    loc = geo.local_phase[..., None] * F.values
    out = synthesis(grid, loc, [(g.samples[None, :], None)])
    return SpinorField.from_flat(grid, out)


def stft_at(f: SpinorField, g: Window, k_index, xi) -> np.ndarray:
    """Direct evaluation of the defining sum at lattice x_k and arbitrary xi.

    ``k_index`` (P,) integers, ``xi`` (P, d). Returns (P, n).
    """
    _require_same_grid(f, g)
    grid = f.grid
    geo = packet_geometry(grid)
    k_index = np.atleast_1d(k_index)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    y = grid.points
    out = np.empty((len(k_index), f.n), dtype=complex)
    for p, (k, z) in enumerate(zip(k_index, xi)):
        win = np.conj(g.samples[geo.idx_sub[k]])
        out[p] = grid.cell * (win * np.exp(-1j * y @ z)) @ f.flat
    return out


def inversion_residual(f: SpinorField, g: Window) -> float:
    """Relative L^2 error of ||g||^-2 V_g^* V_g f against f (requires ||g|| = 1)."""
    if abs(g.l2_norm - 1.0) > 1e-12:
        raise InvalidWindowError("inversion residual needs an L^2-normalized window")
    back = adjoint_stft(stft(f, g), g)
    return (back - f).l2_norm() / f.l2_norm()
