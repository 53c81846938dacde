"""Volterra/Picard assembly of the propagator and an independent split-step oracle.

With v(t) = K(t,0) u0 + i int_0^t K(t,s) v(s) ds discretized by the trapezoid
rule, the propagator is U(t) u0 = U(t,0) u0 + i int_0^t U(t,s) v(s) ds. Because
both K(t,s) and U(t,s) factor through the analysis half Z(s) of the
parametrix, the time integrals are running sums of Z-space arrays.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordRep, free_half_propagator, symbol_matrices
from .parametrix import ParametrixFamily
from .phase_space import PhaseSpaceGrid, apply_multiplier, check_boundary, matvec
from .potentials import PotentialSpec

log = logging.getLogger(__name__)

FLOOR_TOLERANCE = 1e-14


class PicardNonConvergence(RuntimeError):
    def __init__(self, message: str, history: list):
        super().__init__(message)
        self.history = list(history)


class FloorReachedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class TimeMesh:
    """Uniform nodes t_j = sign * j * T / M, j = 0..M."""

    horizon: float
    steps: int
    direction: int = 1

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.steps < 1:
            raise ValueError("need at least one step")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")

    @property
    def step(self) -> float:
        """Signed step."""
        return self.direction * self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.steps + 1)

    def mirrored(self) -> "TimeMesh":
        return TimeMesh(self.horizon, self.steps, -self.direction)

    def refined(self, k: int = 1) -> "TimeMesh":
        return TimeMesh(self.horizon, self.steps * 2**k, self.direction)


@dataclass
class PicardState:
    """Auxiliary density v at every mesh node, for a batch of initial data.

    ``v`` has shape (M + 1, ..., K, n); ``residuals`` is the history of
    max-over-nodes relative L^2 updates.
    """

    mesh: TimeMesh
    v: np.ndarray
    iterations: int = 0
    residuals: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else np.inf


def _rel(grid: PhaseSpaceGrid, a: np.ndarray, ref_norm: np.ndarray) -> np.ndarray:
    # relative L^2 per batch member; a has shape (..., K, n)
    num = np.sqrt(grid.cell * np.sum(np.abs(a) ** 2, axis=(-2, -1)))
    return num / ref_norm


def _trapezoid_sums(family: ParametrixFamily, mesh: TimeMesh, v: np.ndarray):
    """Yield (i, S_i) with S_i = trapezoid approximation of int_0^{t_i} Z(s) ds."""
    ts = mesh.nodes
    dt = mesh.step
    prev = family.analysis(v[0], ts[0])
    S = np.zeros_like(prev)
    yield 0, S
    for i in range(1, len(ts)):
        cur = family.analysis(v[i], ts[i])
        prev += cur
        prev *= 0.5 * dt
        S += prev
        prev = cur
        yield i, S


def picard_solve(u0: np.ndarray, mesh: TimeMesh, family: ParametrixFamily, tol: float = 1e-8,
                 max_iter: int = 12, kernel_scale: float = 1.0) -> PicardState:
    """Fixed point of the trapezoid-discretized Volterra equation, by Picard iteration.

    ``u0`` is a flat field (K, n) or a batch (..., K, n). ``kernel_scale``
    multiplies K (0 gives the zero-kernel problem).
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if tol < FLOOR_TOLERANCE:
        warnings.warn(f"tolerance {tol:g} is below the rounding floor {FLOOR_TOLERANCE:g}",
                      FloorReachedWarning)
    grid = family.grid
    u0 = np.asarray(u0, dtype=complex)
    check_boundary(grid, u0)
    ts = mesh.nodes
    ref = np.sqrt(grid.cell * np.sum(np.abs(u0) ** 2, axis=(-2, -1)))
    if np.any(ref == 0):
        raise ValueError("initial data must be nonzero")
    Z0 = family.analysis(u0, 0.0)
    b = np.stack([kernel_scale * family.ksynth(Z0, t) for t in ts])
    state = PicardState(mesh, b.copy())
    if kernel_scale == 0.0:
        state.residuals.append(0.0)
        state.iterations = 1
        return state
    for it in range(1, max_iter + 1):
        new = np.empty_like(state.v)
        for i, S in _trapezoid_sums(family, mesh, state.v):
            new[i] = b[i] + 1j * kernel_scale * family.ksynth(S, ts[i])
        res = float(np.max(_rel(grid, new - state.v, ref)))
        state.v = new
        state.iterations = it
        state.residuals.append(res)
        log.debug("picard iteration %d: residual %.3e", it, res)
        if len(state.residuals) > 1 and res > state.residuals[-2]:
            log.warning("picard residual increased at iteration %d (%.3e > %.3e)",
                        it, res, state.residuals[-2])
        if res <= tol:
            return state
    raise PicardNonConvergence(
        f"Picard iteration did not reach {tol:g} in {max_iter} iterations "
        f"(last residual {state.residual:.3e})", state.residuals)


def assemble_solution(u0: np.ndarray, state: PicardState, family: ParametrixFamily) -> np.ndarray:
    """U(t_i) u0 for every mesh node, shape (M + 1, ..., K, n)."""
    u0 = np.asarray(u0, dtype=complex)
    ts = state.mesh.nodes
    Z0 = family.analysis(u0, 0.0)
    out = np.empty_like(state.v)
    for i, S in _trapezoid_sums(family, state.mesh, state.v):
        out[i] = u0 if i == 0 else family.usynth(Z0 + 1j * S, ts[i])
    return out


def propagate(u0: np.ndarray, mesh: TimeMesh, family: ParametrixFamily, tol: float = 1e-8,
              max_iter: int = 12) -> tuple:
    """Convenience: Picard solve followed by assembly. Returns (trajectory, state)."""
    state = picard_solve(u0, mesh, family, tol, max_iter)
    return assemble_solution(u0, state, family), state


# ---------------------------------------------------------------------------
# reference solver


def _potential_step(V: PotentialSpec, grid: PhaseSpaceGrid, n: int, t: float, tau: float) -> np.ndarray:
    """exp(-i tau V(t, x_k)) as (K, n, n) or a scalar phase (K, 1, 1)."""
    s = np.asarray(V.scalar(t, grid.points), dtype=float)
    if V.is_scalar:
        return np.exp(-1j * tau * s)[:, None, None]
    lam, W = np.linalg.eigh(V.coupling_matrix(n))
    e = np.exp(-1j * tau * s[:, None] * lam[None, :])  # (K, n)
    return (W[None] * e[:, None, :]) @ W.conj().T[None]


def reference_split_step(u0: np.ndarray, V: PotentialSpec, mesh: TimeMesh, rep: CliffordRep,
                         grid: PhaseSpaceGrid, substeps: int = 1) -> np.ndarray:
    """Strang splitting with midpoint-in-time potential; returns (M + 1, ..., K, n)."""
    u0 = np.asarray(u0, dtype=complex)
    check_boundary(grid, u0)
    n = rep.n
    dt = mesh.step / substeps
    kinetic = free_half_propagator(rep, grid.frequencies, dt)
    shape = u0.shape
    out = np.empty((mesh.steps + 1,) + shape, dtype=complex)
    out[0] = u0
    u = u0
    t = 0.0
    for i in range(mesh.steps):
        for _ in range(substeps):
            half = _potential_step(V, grid, n, t + 0.5 * dt, 0.5 * dt)
            u = matvec(half, u) if half.shape[-1] > 1 else half[..., 0] * u
            spatial = u.reshape(shape[:-2] + grid.shape + (n,))
            u = apply_multiplier(grid, spatial, kinetic).reshape(shape)
            u = matvec(half, u) if half.shape[-1] > 1 else half[..., 0] * u
            t += dt
        out[i + 1] = u
    return out


def free_solution(u0: np.ndarray, rep: CliffordRep, grid: PhaseSpaceGrid, times) -> np.ndarray:
    """Closed-form free propagator exp(-i t sigma(D)) applied to u0 at each time."""
    u0 = np.asarray(u0, dtype=complex)
    shape = u0.shape
    spatial = u0.reshape(shape[:-2] + grid.shape + (shape[-1],))
    return np.stack([apply_multiplier(grid, spatial, free_half_propagator(rep, grid.frequencies, t))
                     .reshape(shape) for t in times])


def residual_check(traj: np.ndarray, V: PotentialSpec, mesh: TimeMesh, rep: CliffordRep,
                   grid: PhaseSpaceGrid) -> float:
    """max over interior nodes of ||i d_t u - (sigma(D) + V) u|| / ||u|| (centered differences)."""
    traj = np.asarray(traj)
    if traj.shape[0] < 3:
        raise ValueError("need at least three nodes for centered differences")
    n = rep.n
    sig = symbol_matrices(rep, grid.frequencies)
    dt = mesh.step
    ts = mesh.nodes
    worst = 0.0
    for i in range(1, traj.shape[0] - 1):
        u = traj[i]
        shape = u.shape
        dudt = 1j * (traj[i + 1] - traj[i - 1]) / (2.0 * dt)
        Du = apply_multiplier(grid, u.reshape(shape[:-2] + grid.shape + (n,)), sig).reshape(shape)
        Vu = matvec(V.evaluate(ts[i], grid.points, n), u)
        r = dudt - Du - Vu
        num = np.sqrt(np.sum(np.abs(r) ** 2, axis=(-2, -1)))
        den = np.sqrt(np.sum(np.abs(u) ** 2, axis=(-2, -1)))
        worst = max(worst, float(np.max(num / den)))
    return worst
