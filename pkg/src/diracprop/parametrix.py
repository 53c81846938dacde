"""Wave-packet parametrices U1 (smooth/rough potentials) and U2 (frequency flow).

Every operator here has the form

    Op f(y) = sum_{k, m} e^{i (y - x_k).zeta_k(t)} W(x_k, y - x_k) Phi(t, s; x_k, xi_m) C_s(x_k, xi_m)

with localized coefficients ``C_s = e^{i x.zeta} V_g f(x, zeta)`` taken at the
flowed frequency ``zeta_k(s)`` and a phase matrix that factorizes as
``Phi(t, s) = P(t) P(s)^dagger``. This splits every operator into an analysis
half ``Z = P(s)^dagger C_s`` that depends only on the source time and a
synthesis half that depends only on the target time, which is what makes the
Volterra solver cheap: time integrals are accumulated in Z-space.

Kernel weights multiply the phase-propagated coefficients from the left.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .clifford import CliffordRep, free_half_propagator, symbol_matrices
from .gabor import Window, analysis, packet_geometry, synthesis
from .phase_space import PhaseSpaceGrid, SpinorField, check_boundary, matvec
from .potentials import HypothesisError, PotentialSpec, PotentialSplit
from .spaces import taylor_average

MAGNUS_STEP = 2.0**-8
_CHECKPOINT_EVERY = 16


def _dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def matmul_small(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched a @ b for tiny matrices, as explicit component sums."""
    n = a.shape[-1]
    out = a[..., :, :1] * b[..., :1, :]
    for j in range(1, n):
        out = out + a[..., :, j:j + 1] * b[..., j:j + 1, :]
    return out


def expm_hermitian(H: np.ndarray) -> np.ndarray:
    """exp(-i H) for a batch of Hermitian matrices (..., n, n).

    Order 2 uses exp(-i(a + B)) = e^{-ia} (cos b - i sin(b)/b B) with B
    traceless and B^2 = b^2 I; larger orders go through eigh.
    """
    n = H.shape[-1]
    if n != 2:
        lam, vec = np.linalg.eigh(H)
        return (vec * np.exp(-1j * lam)[..., None, :]) @ _dagger(vec)
    a = 0.5 * (H[..., 0, 0] + H[..., 1, 1]).real
    d = 0.5 * (H[..., 0, 0] - H[..., 1, 1]).real
    o = H[..., 0, 1]
    b = np.sqrt(d * d + np.abs(o) ** 2)
    c = np.cos(b)
    sn = np.sinc(b / np.pi)
    out = np.empty(H.shape, dtype=complex)
    out[..., 0, 0] = c - 1j * sn * d
    out[..., 1, 1] = c + 1j * sn * d
    out[..., 0, 1] = -1j * sn * o
    out[..., 1, 0] = -1j * sn * np.conj(o)
    return np.exp(-1j * a)[..., None, None] * out


# ---------------------------------------------------------------------------
# phase models: P(t) with Phi(t, s) = P(t) P(s)^dagger


def _apply_full(P: np.ndarray, Z: np.ndarray, adjoint: bool) -> np.ndarray:
    src = np.ascontiguousarray(Z, dtype=complex)
    lead = src.shape[:-3]
    src = src.reshape((-1,) + src.shape[-3:])
    out = np.empty_like(src)
    _kernels.apply_full_phase(np.ascontiguousarray(P), src, adjoint, out)
    return out.reshape(lead + out.shape[1:])


class ScalarPhase:
    """P(t) = exp(-i C(t) v1(x)) exp(-i t sigma(xi)) for V1 = c(t) v1(x) I_n."""

    def __init__(self, rep: CliffordRep, grid: PhaseSpaceGrid, spec: PotentialSpec, v_lattice: np.ndarray):
        self.rep, self.grid, self.spec = rep, grid, spec
        self.v = np.asarray(v_lattice, dtype=float)
        self._free = {}

    def shift(self, t: float) -> Optional[np.ndarray]:
        return None

    def _free_half(self, t: float) -> np.ndarray:
        if t not in self._free:
            self._free[t] = free_half_propagator(self.rep, self.grid.frequencies, t)
        return self._free[t]

    def apply(self, t: float, Z: np.ndarray, adjoint: bool = False) -> np.ndarray:
        C = float(self.spec.c_integral(t))
        px = np.exp((1j if adjoint else -1j) * C * self.v)
        E = self._free_half(-t if adjoint else t)
        src = np.ascontiguousarray(Z, dtype=complex)
        lead = src.shape[:-3]
        src = src.reshape((-1,) + src.shape[-3:])
        out = np.empty_like(src)
        _kernels.apply_separable_phase(E, px, src, out)
        return out.reshape(lead + out.shape[1:])

    def matrix(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * float(self.spec.c_integral(t)) * self.v)
        return phase[:, None, None, None] * self._free_half(t)[None]


class ConstantMatrixPhase:
    """P(t) = exp(-i t (sigma(xi) + v1(x) B)) for a time-independent matrix potential."""

    def __init__(self, rep: CliffordRep, grid: PhaseSpaceGrid, coupling: np.ndarray, v_lattice: np.ndarray):
        H = symbol_matrices(rep, grid.frequencies)[None] + v_lattice[:, None, None, None] * coupling
        self.evals, self.evecs = np.linalg.eigh(H)
        self._memo = {}

    def shift(self, t: float) -> Optional[np.ndarray]:
        return None

    def matrix(self, t: float) -> np.ndarray:
        if t not in self._memo:
            e = np.exp(-1j * t * self.evals)
            self._memo[t] = matmul_small(self.evecs * e[..., None, :], _dagger(self.evecs))
        return self._memo[t]

    def apply(self, t: float, Z: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return _apply_full(self.matrix(t), Z, adjoint)


class FlowedPhase:
    """Time-ordered P(t) for H(t) = sigma(xi - F_x(t)) + Q(t, x), F_x(t) = int_0^t grad Q.

    The scalar part of H commutes with everything and is integrated exactly;
    the matrix part is propagated by the fourth-order Magnus integrator with
    Gauss-Legendre nodes on the fixed grid tau_j = j * MAGNUS_STEP (marching
    away from 0 in the sign of t), followed by one partial step to t. The
    result for a given t therefore does not depend on the order of requests.
    """

    def __init__(self, rep: CliffordRep, grid: PhaseSpaceGrid, spec: PotentialSpec):
        if not spec.is_scalar:
            raise HypothesisError("the frequency-flow parametrix needs a scalar potential V = Q I_n")
        self.rep, self.grid, self.spec = rep, grid, spec
        pts = grid.points
        self.v = np.asarray(spec.profile.value(pts), dtype=float)
        self.grad = np.asarray(spec.profile.gradient(pts), dtype=float)  # (K, d)
        alphas = rep.stack()
        self.S = symbol_matrices(rep, grid.frequencies)  # (M, n, n)
        self.T = np.tensordot(self.grad, alphas[1:], axes=([-1], [0]))  # (K, n, n)
        self.comm = matmul_small(self.S[None], self.T[:, None]) - matmul_small(self.T[:, None], self.S[None])  # (K, M, n, n)
        eye = np.eye(rep.n, dtype=complex)
        self._cache = {0: np.broadcast_to(eye, (grid.size, grid.size, rep.n, rep.n)).copy()}
        self._memo = {}

    def shift(self, t: float) -> np.ndarray:
        return float(self.spec.c_integral(t)) * self.grad

    def _step(self, a: float, b: float) -> np.ndarray:
        """Magnus-4 propagator of the matrix part from tau=a to tau=b."""
        h = b - a
        r = np.sqrt(3.0) / 6.0
        c1 = float(self.spec.c_integral(a + (0.5 - r) * h))
        c2 = float(self.spec.c_integral(a + (0.5 + r) * h))
        # i Omega = (h/2)(sigma_1 + sigma_2) - i (sqrt3/12) h^2 [sigma_2, sigma_1]
        # with sigma_j = S - c_j T and [sigma_2, sigma_1] = (c2 - c1) [S, T]
        herm = (h * (self.S[None] - 0.5 * (c1 + c2) * self.T[:, None])
                - 1j * (np.sqrt(3.0) / 12.0) * h * h * (c2 - c1) * self.comm)
        return expm_hermitian(herm)

    def _grid_matrix(self, j: int) -> np.ndarray:
        """Matrix part at tau = j * MAGNUS_STEP (j may be negative)."""
        sgn = 1 if j >= 0 else -1
        base = (abs(j) // _CHECKPOINT_EVERY) * _CHECKPOINT_EVERY
        start = max(i for i in range(0, base + 1, _CHECKPOINT_EVERY) if sgn * i in self._cache)
        P = self._cache[sgn * start]
        for i in range(start, abs(j)):
            P = matmul_small(self._step(sgn * i * MAGNUS_STEP, sgn * (i + 1) * MAGNUS_STEP), P)
            if (i + 1) % _CHECKPOINT_EVERY == 0:
                self._cache[sgn * (i + 1)] = P
        return P

    def matrix_part(self, t: float) -> np.ndarray:
        if t not in self._memo:
            j = int(np.trunc(t / MAGNUS_STEP))
            P = self._grid_matrix(j)
            a = j * MAGNUS_STEP
            self._memo[t] = P if t == a else matmul_small(self._step(a, t), P)
        return self._memo[t]

    def matrix(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * float(self.spec.c_integral(t)) * self.v)
        return phase[:, None, None, None] * self.matrix_part(t)

    def apply(self, t: float, Z: np.ndarray, adjoint: bool = False) -> np.ndarray:
        return _apply_full(self.matrix(t), Z, adjoint)


# ---------------------------------------------------------------------------
# parametrix families


@dataclass(eq=False)
class ParametrixFamily:
    """U(t, s) and the defect kernel K(t, s) of one parametrix, split into halves.

    ``kind`` is "U1" (split potential, static frequencies) or "U2" (scalar
    potential, flowed frequencies). ``kernel_path`` selects how the potential
    remainders are evaluated: "taylor" (integral form of the Taylor
    remainder; default) or "direct" (difference of potential values).
    """

    kind: str
    rep: CliffordRep
    grid: PhaseSpaceGrid
    window: Window
    spec: PotentialSpec
    phase: object
    split: Optional[PotentialSplit] = None
    kernel_path: str = "taylor"
    _tables: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.rep.n

    @property
    def coupling(self) -> Optional[np.ndarray]:
        return None if self.spec.is_scalar else self.spec.coupling_matrix(self.n)

    # -- halves ----------------------------------------------------------
    def analysis(self, flat: np.ndarray, s: float) -> np.ndarray:
        """Z = P(s)^dagger e^{i x.zeta} V_g f(x, zeta(s)), shape (..., K, M, n)."""
        C = analysis(self.grid, self.window, flat, shift=self.phase.shift(s))
        return self.phase.apply(s, C, adjoint=True)

    def propagate(self, Z: np.ndarray, t: float) -> np.ndarray:
        return self.phase.apply(t, Z)

    def usynth(self, Z: np.ndarray, t: float) -> np.ndarray:
        PZ = self.propagate(Z, t)
        return synthesis(self.grid, PZ, [(self.window.samples[None, :], None)], shift=self.phase.shift(t))

    def ksynth(self, Z: np.ndarray, t: float, parts: tuple = ("sigma", "potential")) -> np.ndarray:
        PZ = self.propagate(Z, t)
        terms = []
        if "sigma" in parts:
            terms += self.sigma_terms()
        if "potential" in parts:
            terms += self.potential_terms(t)
        if not terms:
            return np.zeros(Z.shape[:-3] + (self.grid.size, self.n), dtype=complex)
        return synthesis(self.grid, PZ, terms, shift=self.phase.shift(t))

    # -- kernel weights --------------------------------------------------
    def sigma_terms(self) -> list:
        """-R_sigma(delta) = i sum_j alpha_j d_j g(delta), as synthesis terms."""
        a = self.rep.stack()
        return [(1j * self.window.gradient[None, :, j], a[j + 1]) for j in range(self.grid.d)]

    def potential_terms(self, t: float) -> list:
        c = float(self.spec.c(t))
        if c == 0.0:
            return []
        if self.kind == "U1":
            w = self._table("V1") + self._table("V2")
            return [(-c * w, self.coupling)] if np.any(w) else []
        w = self._table("V")
        return [(-c * w, None)] if np.any(w) else []

    def _table(self, name: str) -> np.ndarray:
        """Time-independent (K, K_offset) weight tables (without c(t) and sign)."""
        key = (name, self.kernel_path)
        if key in self._tables:
            return self._tables[key]
        grid = self.grid
        geo = packet_geometry(grid)
        x = grid.points[:, None, :]
        delta = geo.offsets[None, :, :]
        g = self.window.samples[None, :]
        if name == "V2":
            rough = self.split.rough_samples if self.split is not None else np.zeros(grid.size)
            w = g * rough[geo.idx_add]
        elif name == "V1":
            prof = self.split.smooth
            if self.kernel_path == "direct":
                w = g * (prof.value(x + delta) - prof.value(x))
            else:
                avg = taylor_average(prof.gradient, x, x + delta, weight="1")  # (K, K, d)
                w = g * np.sum(delta * avg, axis=-1)
        elif name == "V":
            prof = self.spec.profile
            if self.kernel_path == "direct":
                w = g * (prof.value(x + delta) - prof.value(x) - np.sum(prof.gradient(x) * delta, axis=-1))
            else:
                avg = taylor_average(prof.hessian, x, x + delta, weight="1-theta")  # (K, K, d, d)
                dd = np.broadcast_to(delta, avg.shape[:-1])
                w = g * np.einsum("kla,klab,klb->kl", dd, avg, dd)
        else:
            raise KeyError(name)
        self._tables[key] = np.asarray(w, dtype=complex)
        return self._tables[key]


def parametrix_U1(rep: CliffordRep, grid: PhaseSpaceGrid, window: Window, split: PotentialSplit,
                  kernel_path: str = "taylor") -> ParametrixFamily:
    """Parametrix with static frequencies for V = V1 + V2 (first-order hypotheses)."""
    _check_window(window, grid)
    spec = split.spec
    v1 = np.asarray(split.smooth.value(grid.points), dtype=float)
    if spec.is_scalar:
        phase = ScalarPhase(rep, grid, spec, v1)
    elif spec.is_time_independent:
        phase = ConstantMatrixPhase(rep, grid, spec.coupling_matrix(rep.n), v1)
    else:
        raise HypothesisError("matrix-valued potentials must be time-independent "
                              "(the phase integral would need time ordering)")
    return ParametrixFamily("U1", rep, grid, window, spec, phase, split, kernel_path)


def parametrix_U2(rep: CliffordRep, grid: PhaseSpaceGrid, window: Window, Q: PotentialSpec,
                  kernel_path: str = "taylor") -> ParametrixFamily:
    """Parametrix with flowed frequencies for a scalar potential Q (second-order hypotheses)."""
    _check_window(window, grid)
    if not Q.is_scalar:
        raise HypothesisError("the frequency-flow parametrix needs a scalar potential V = Q I_n")
    if Q.d != grid.d:
        raise ValueError("potential and grid dimensions differ")
    grad = np.asarray(Q.profile.gradient(grid.points))
    if not np.any(grad):
        # no flow: the generator is a commuting sum and the phase has a closed form
        phase = ScalarPhase(rep, grid, Q, np.asarray(Q.profile.value(grid.points), dtype=float))
    else:
        phase = FlowedPhase(rep, grid, Q)
    return ParametrixFamily("U2", rep, grid, window, Q, phase, None, kernel_path)


def _check_window(window: Window, grid: PhaseSpaceGrid) -> None:
    if window.grid != grid:
        raise ValueError("window lives on a different grid")
    if abs(window.l2_norm - 1.0) > 1e-12:
        raise ValueError("parametrices need an L^2-normalized window")


# ---------------------------------------------------------------------------
# context and per-operator entry points


@dataclass(eq=False)
class ParametrixContext:
    """A parametrix family frozen at a time pair (t, s)."""

    family: ParametrixFamily
    t: float
    s: float

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.family.grid

    def phase_matrix(self) -> np.ndarray:
        """Phi(t, s) on the phase-space lattice, shape (K, M, n, n)."""
        ph = self.family.phase
        return matmul_small(ph.matrix(self.t), _dagger(ph.matrix(self.s)))

    def coefficients(self, f: SpinorField) -> np.ndarray:
        check_boundary(self.grid, f.values)
        return self.family.analysis(f.flat, self.s)


def build_context(family: ParametrixFamily, t: float, s: float) -> ParametrixContext:
    return ParametrixContext(family, float(t), float(s))


def _field(ctx: ParametrixContext, flat: np.ndarray) -> SpinorField:
    return SpinorField.from_flat(ctx.grid, flat)


def apply_U1(ctx: ParametrixContext, f: SpinorField) -> SpinorField:
    Z = ctx.coefficients(f)
    return _field(ctx, ctx.family.usynth(Z, ctx.t))


apply_U2 = apply_U1


def apply_Ksigma(ctx: ParametrixContext, f: SpinorField) -> SpinorField:
    Z = ctx.coefficients(f)
    return _field(ctx, ctx.family.ksynth(Z, ctx.t, parts=("sigma",)))


apply_Ksigma_prime = apply_Ksigma


def _potential_part(ctx: ParametrixContext, f: SpinorField, name: str) -> SpinorField:
    fam = ctx.family
    Z = ctx.coefficients(f)
    c = float(fam.spec.c(ctx.t))
    w = fam._table(name)
    PZ = fam.propagate(Z, ctx.t)
    out = synthesis(ctx.grid, PZ, [(-c * w, fam.coupling if fam.kind == "U1" else None)],
                    shift=fam.phase.shift(ctx.t))
    return _field(ctx, out)


def apply_KV1(ctx: ParametrixContext, f: SpinorField) -> SpinorField:
    if ctx.family.kind != "U1":
        raise ValueError("K_V1 belongs to the static-frequency parametrix")
    return _potential_part(ctx, f, "V1")


def apply_KV2(ctx: ParametrixContext, f: SpinorField) -> SpinorField:
    """K_V2 f = -V2(t, .) U1(t, s) f (the rough part factors out of the phase-space sum)."""
    fam = ctx.family
    if fam.kind != "U1":
        raise ValueError("K_V2 belongs to the static-frequency parametrix")
    u = apply_U1(ctx, f).flat
    V2 = fam.split.V2(ctx.t, fam.n)
    return _field(ctx, -matvec(V2, u))


def apply_KV2_direct(ctx: ParametrixContext, f: SpinorField) -> SpinorField:
    """K_V2 by the phase-space quadrature with R_V2 = V2(t, y) g(y - x)."""
    return _potential_part(ctx, f, "V2")


def apply_KV(ctx: ParametrixContext, f: SpinorField) -> SpinorField:
    if ctx.family.kind != "U2":
        raise ValueError("K_V belongs to the frequency-flow parametrix")
    return _potential_part(ctx, f, "V")


def apply_K(ctx: ParametrixContext, f: SpinorField) -> SpinorField:
    """The full defect kernel K(t, s) f."""
    Z = ctx.coefficients(f)
    return _field(ctx, ctx.family.ksynth(Z, ctx.t))


# ---------------------------------------------------------------------------
# remainder R_sigma


def remainder_Rsigma(ctx: ParametrixContext, delta_index, xi=None, method: str = "closed",
                     symbol: Optional[Callable] = None) -> np.ndarray:
    """R_sigma(y - x, xi) for lattice offsets y - x given by offset index.

    ``closed``: -i sum_j alpha_j (d_j g)(y - x), valid for the Dirac symbol
    (independent of xi). ``quadrature``: the defining frequency integral
    ``int e^{i (y-x).eta} (sigma(eta + xi) - sigma(xi)) g^(eta) d eta`` on the
    frequency lattice, for any matrix symbol (default: the Dirac symbol).
    Returns (P, n, n).
    """
    fam = ctx.family
    grid, rep, win = fam.grid, fam.rep, fam.window
    idx = np.atleast_1d(np.asarray(delta_index))
    if method == "closed":
        a = rep.stack()[1:]
        return -1j * np.tensordot(win.gradient[idx], a, axes=([-1], [0]))
    if method != "quadrature":
        raise ValueError("method must be 'closed' or 'quadrature'")
    sym = symbol if symbol is not None else (lambda z: symbol_matrices(rep, z))
    off = packet_geometry(grid).offsets
    eta = grid.frequencies
    ghat = (grid.cell / (2.0 * np.pi) ** grid.d) * np.exp(-1j * eta @ off.T) @ win.samples  # (M,)
    xi = np.zeros((len(idx), grid.d)) if xi is None else np.broadcast_to(
        np.asarray(xi, dtype=float), (len(idx), grid.d))
    out = np.empty((len(idx), rep.n, rep.n), dtype=complex)
    for p, (l, z) in enumerate(zip(idx, xi)):
        diff = sym(eta + z) - sym(z)[None]
        wgt = np.exp(1j * eta @ off[l]) * ghat * grid.xi_cell
        out[p] = np.tensordot(wgt, diff, axes=(0, 0))
    return out
