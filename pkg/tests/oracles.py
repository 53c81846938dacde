"""Independent, slow reference computations used by the tests."""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from diracprop.clifford import CliffordRep, symbol_matrices
from diracprop.phase_space import PhaseSpaceGrid


def min_image(grid: PhaseSpaceGrid, dx: np.ndarray) -> np.ndarray:
    """Periodic displacement in [-L, L)."""
    period = 2.0 * grid.L
    return (dx + grid.L) % period - grid.L


def direct_stft(grid: PhaseSpaceGrid, window_fn, flat: np.ndarray, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """V_g f(x, xi) = h^d sum_y f(y) conj(g(y - x)) e^{-i y.xi} with a minimum-image window.

    ``window_fn`` maps displacements (K, d) to (K,); ``x`` and ``xi`` are single points.
    """
    y = grid.points
    g = window_fn(min_image(grid, y - x[None, :]))
    return grid.cell * (np.conj(g) * np.exp(-1j * y @ xi))[None, :] @ flat


def direct_fourier(grid: PhaseSpaceGrid, flat: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """(2 pi)^-d h^d sum_y f(y) e^{-i y.xi} at arbitrary frequencies xi (P, d)."""
    phase = np.exp(-1j * np.asarray(xi) @ grid.points.T)
    return (grid.h / (2.0 * np.pi)) ** grid.d * phase @ flat


def expm_propagator(rep: CliffordRep, xi: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t sigma(xi)) by scipy's dense matrix exponential, one frequency at a time."""
    sig = symbol_matrices(rep, np.atleast_2d(xi))
    return np.stack([expm(-1j * t * s) for s in sig])


def gaussian(width: float = 1.0):
    return lambda z: np.exp(-np.sum(z * z, axis=-1) / (2.0 * width**2))
