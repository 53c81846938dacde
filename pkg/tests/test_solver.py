import warnings

import numpy as np
import pytest

from diracprop.clifford import build_clifford
from diracprop.gabor import gaussian_window
from diracprop.parametrix import parametrix_U1, parametrix_U2
from diracprop.phase_space import PhaseSpaceGrid, l2_norm, relative_l2
from diracprop.potentials import PotentialSpec, decompose
from diracprop.solver import (FloorReachedWarning, PicardNonConvergence, TimeMesh, assemble_solution,
                              free_solution, picard_solve, propagate, reference_split_step, residual_check)

GRID = PhaseSpaceGrid(1, 64, 10.0)
WIN = gaussian_window(GRID)
REP = build_clifford(1)
X = GRID.points[:, 0]
U0 = np.stack([np.exp(-(X - 0.5) ** 2 / 2 + 1j * X), 0.5 * np.exp(-X**2 / 2)], axis=-1)


def _family(kind="stark"):
    return parametrix_U1(REP, GRID, WIN, decompose(PotentialSpec(kind), GRID, 1))


def _max_rel(a, b):
    return max(relative_l2(GRID, x, y) for x, y in zip(a, b))


def test_time_mesh():
    m = TimeMesh(0.5, 4)
    assert np.allclose(m.nodes, [0, 0.125, 0.25, 0.375, 0.5])
    assert np.allclose(m.mirrored().nodes, -m.nodes)
    assert m.refined(2).steps == 16 and m.refined(2).step == pytest.approx(0.5 / 16)
    for bad in [(0.0, 4), (0.5, 0), (0.5, 4, 0)]:
        with pytest.raises(ValueError):
            TimeMesh(*bad)


def test_zero_kernel_gives_bare_parametrix():
    fam = _family()
    state = picard_solve(U0, TimeMesh(0.5, 4), fam, kernel_scale=0.0)
    assert state.iterations == 1 and not np.any(state.v)
    traj = assemble_solution(U0, state, fam)
    assert np.array_equal(traj[0], U0)
    assert np.abs(traj[-1] - fam.usynth(fam.analysis(U0, 0.0), 0.5)).max() <= 1e-15


def test_picard_converges_geometrically():
    state = picard_solve(U0, TimeMesh(0.5, 8), _family(), tol=1e-10)
    r = state.residuals
    assert r[-1] <= 1e-10 and len(r) <= 12
    assert all(b < 0.1 * a for a, b in zip(r, r[1:]))


def test_non_convergence_and_floor_warning():
    with pytest.raises(PicardNonConvergence) as exc:
        picard_solve(U0, TimeMesh(0.5, 4), _family(), tol=1e-8, max_iter=1)
    assert len(exc.value.history) == 1
    with pytest.warns(FloorReachedWarning):
        with pytest.raises(PicardNonConvergence):
            picard_solve(U0, TimeMesh(0.5, 4), _family(), tol=1e-16, max_iter=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        picard_solve(U0, TimeMesh(0.5, 4), _family(), tol=1e-8)


def test_invalid_initial_data():
    with pytest.raises(ValueError):
        picard_solve(np.zeros_like(U0), TimeMesh(0.5, 4), _family())
    with pytest.raises(ValueError):
        picard_solve(U0, TimeMesh(0.5, 4), _family(), tol=0.0)


@pytest.mark.parametrize("direction", [1, -1])
def test_free_propagation_in_both_directions(direction):
    mesh = TimeMesh(0.5, 8, direction)
    errs = []
    for m in (mesh, mesh.refined(1)):
        traj, _ = propagate(U0, m, _family("zero"), tol=1e-10)
        errs.append(_max_rel(traj, free_solution(U0, REP, GRID, m.nodes)))
    assert errs[0] <= 1e-3
    assert errs[1] < errs[0] / 3  # second order in the time step


def test_batch_matches_individual_solves():
    batch = np.stack([U0, np.conj(U0[::-1])])
    mesh = TimeMesh(0.25, 4)
    traj, _ = propagate(batch, mesh, _family(), tol=1e-12)
    for b in range(2):
        single, _ = propagate(batch[b], mesh, _family(), tol=1e-12)
        assert np.abs(traj[:, b] - single).max() <= 1e-10


def test_harmonic_solution_against_split_step():
    fam = parametrix_U2(REP, GRID, WIN, PotentialSpec("harmonic"))
    mesh = TimeMesh(0.25, 8)
    traj, _ = propagate(U0, mesh, fam, tol=1e-10)
    ref = reference_split_step(U0, PotentialSpec("harmonic"), mesh, REP, GRID, substeps=8)
    assert _max_rel(traj, ref) <= 1e-3


@pytest.mark.parametrize("kind", ["zero", "stark", "harmonic"])
def test_split_step_is_unitary_and_reversible(kind):
    V = PotentialSpec(kind)
    mesh = TimeMesh(0.5, 10)
    fwd = reference_split_step(U0, V, mesh, REP, GRID)
    norms = [l2_norm(GRID, u) for u in fwd]
    assert np.ptp(norms) <= 1e-12 * norms[0]
    back = reference_split_step(fwd[-1], V, TimeMesh(0.5, 10, -1), REP, GRID)
    # time-independent potential: Strang splitting is symmetric
    assert relative_l2(GRID, back[-1], U0) <= 1e-12


def test_split_step_without_potential_is_exact():
    mesh = TimeMesh(0.5, 3)
    ref = reference_split_step(U0, PotentialSpec("zero"), mesh, REP, GRID)
    assert _max_rel(ref, free_solution(U0, REP, GRID, mesh.nodes)) <= 1e-13


def test_residual_check_is_second_order():
    V = PotentialSpec("stark")
    res = []
    for steps in (8, 16):
        mesh = TimeMesh(0.5, steps)
        res.append(residual_check(reference_split_step(U0, V, mesh, REP, GRID, 8), V, mesh, REP, GRID))
    assert 3.0 < res[0] / res[1] < 5.0
    with pytest.raises(ValueError):
        residual_check(np.stack([U0, U0]), V, TimeMesh(0.5, 1), REP, GRID)
