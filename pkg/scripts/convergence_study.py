"""Convergence of the assembled propagator against independent reference solutions.

For each potential the Picard/Volterra propagator at time T is compared with
the split-step solver (or the closed-form free propagator) under joint
refinement of the spatial grid and the time mesh. The observed order is
log2 of the error ratio between consecutive levels.

    python scripts/convergence_study.py --levels 3 --out out/convergence.csv
"""
import argparse
import csv
import math
import time
from pathlib import Path

import numpy as np

from diracprop.clifford import build_clifford
from diracprop.gabor import gaussian_window
from diracprop.parametrix import parametrix_U1, parametrix_U2
from diracprop.phase_space import PhaseSpaceGrid, relative_l2
from diracprop.potentials import PotentialSpec, decompose
from diracprop.solver import TimeMesh, free_solution, propagate, reference_split_step

CASES = {
    "free": (PotentialSpec("zero"), "U1"),
    "stark": (PotentialSpec("stark"), "U1"),
    "rough": (PotentialSpec("bounded_rough", params={"wavenumber": 2.0}, modulation="cos"), "U1"),
    "harmonic": (PotentialSpec("harmonic"), "U2"),
    "harmonic-cos": (PotentialSpec("harmonic", modulation="cos"), "U2"),
}


def initial_packet(grid):
    x = grid.points[:, 0]
    return np.stack([np.exp(-(x - 0.5) ** 2 / 2 + 1j * x), 0.5 * np.exp(-x**2 / 2)], axis=-1)


def error_at(V, pipeline, N, M, T, L):
    rep = build_clifford(1)
    grid = PhaseSpaceGrid(1, N, L)
    win = gaussian_window(grid)
    u0 = initial_packet(grid)
    mesh = TimeMesh(T, M)
    fam = (parametrix_U1(rep, grid, win, decompose(V, grid, 1)) if pipeline == "U1"
           else parametrix_U2(rep, grid, win, V))
    traj, state = propagate(u0, mesh, fam, tol=1e-10, max_iter=20)
    ref = (free_solution(u0, rep, grid, mesh.nodes) if V.kind == "zero"
           else reference_split_step(u0, V, mesh, rep, grid, substeps=8))
    return relative_l2(grid, traj[-1], ref[-1]), state.iterations


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cases", nargs="+", choices=sorted(CASES), default=["free", "stark", "harmonic"])
    ap.add_argument("--levels", type=int, default=3, help="number of joint refinements")
    ap.add_argument("--N", type=int, default=64, help="points at the coarsest level")
    ap.add_argument("--M", type=int, default=8, help="time steps at the coarsest level")
    ap.add_argument("--T", type=float, default=0.25)
    ap.add_argument("--L", type=float, default=12.0)
    ap.add_argument("--out", type=Path, default=None, help="optional CSV output")
    args = ap.parse_args(argv)

    rows = []
    print(f"{'case':<14} {'N':>5} {'M':>4} {'error':>10} {'order':>6} {'picard':>6} {'seconds':>8}")
    for name in args.cases:
        V, pipeline = CASES[name]
        prev = None
        for level in range(args.levels):
            N, M = args.N * 2**level, args.M * 2**level
            start = time.perf_counter()
            err, iters = error_at(V, pipeline, N, M, args.T, args.L)
            order = math.log2(prev / err) if prev else float("nan")
            prev = err
            rows.append((name, N, M, err, order, iters))
            print(f"{name:<14} {N:5d} {M:4d} {err:10.3e} {order:6.2f} {iters:6d} "
                  f"{time.perf_counter() - start:8.1f}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["case", "N", "M", "error", "order", "picard_iterations"])
            w.writerows([(c, N, M, repr(e), repr(o), i) for c, N, M, e, o, i in rows])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
