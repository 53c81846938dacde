"""Boundedness sweep: sup norm ratios of both pipelines at two refinement levels.

Runs the first-order pipeline for the Stark potential and for the rough
bounded potential at several split widths, and the second-order pipeline for
the harmonic potentials, then prints one summary line per case and writes the
reports to ``--out``.

    python scripts/run_boundedness.py --out out/boundedness
    python scripts/run_boundedness.py --quick      # N = 64, 4 fields
"""
import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path

from diracprop.harness import (ExperimentConfig, default_norms, drift, emit_report, run_theorem1_experiment,
                               run_theorem2_experiment)


def cases(base: ExperimentConfig, deltas):
    yield "stark", run_theorem1_experiment, replace(base, potential_kind="stark")
    for delta in deltas:
        yield (f"rough-delta{delta:g}", run_theorem1_experiment,
               replace(base, potential_kind="bounded_rough", potential_params={"wavenumber": 2.0},
                       potential_modulation="cos", split_delta=delta))
    second = replace(base, potential_kind="harmonic", norms=default_norms(rhos=(0.0,)))
    yield "harmonic", run_theorem2_experiment, second
    yield "harmonic-cos", run_theorem2_experiment, replace(second, potential_modulation="cos")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("out/boundedness"))
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.25, 0.5, 1.0])
    ap.add_argument("--quick", action="store_true", help="small grid and family for a smoke run")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)

    base = ExperimentConfig(seed=args.seed)
    if args.quick:
        base = replace(base, points_per_axis=64, steps=4, family_size=4)
    failures = 0
    print(f"{'case':<18} {'max sup ratio':>14} {'max drift':>10} {'seconds':>8}  status")
    for name, runner, cfg in cases(base, args.deltas):
        start = time.perf_counter()
        coarse, fine = runner(cfg), runner(cfg.refined(1))
        for k, rep in enumerate((coarse, fine)):
            emit_report(rep, args.out / f"{name}_refine{k}.csv")
            emit_report(rep, args.out / f"{name}_refine{k}.gp", fmt="plot-script")
        worst = max(drift(coarse, fine).values())
        ok = coarse.all_finite() and fine.all_finite() and worst < cfg.drift_limit
        failures += not ok
        print(f"{name:<18} {max(fine.sup_ratios().values()):14.4f} {worst:10.2e} "
              f"{time.perf_counter() - start:8.1f}  {'PASS' if ok else 'FAIL'}")
    return 2 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
