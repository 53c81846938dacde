"""Experiment configuration, initial-data family, boundedness experiments and reports."""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .clifford import CliffordRep, build_clifford
from .gabor import Window, gaussian_window
from .parametrix import ParametrixFamily, parametrix_U1, parametrix_U2
from .phase_space import PhaseSpaceGrid, check_boundary
from .potentials import HypothesisError, PotentialSpec, decompose
from .solver import TimeMesh, assemble_solution, picard_solve
from .spaces import ENDPOINT_PAIRS, NormSpec, format_exponent, norms_of, parse_exponent

log = logging.getLogger(__name__)

REPORT_HEADER = ("t", "flavor", "p", "q", "r", "rho", "norm_u0", "norm_ut", "ratio")
FAMILY_SIZE = 20


# ---------------------------------------------------------------------------
# configuration


def default_norms(rhos: Sequence[float] = (0.0, 1.0), flavor: str = "wiener") -> tuple:
    """All four endpoint (p, q) pairs for (r, rho) in {(0,0), (1,0)} plus (0,1) when allowed."""
    weights = [(0.0, 0.0), (1.0, 0.0)] + ([(0.0, 1.0)] if 1.0 in rhos else [])
    return tuple(NormSpec(p, q, r, rho, flavor) for r, rho in weights for p, q in ENDPOINT_PAIRS)


def _format_norm(s: NormSpec) -> str:
    return f"{s.flavor}:{format_exponent(s.p)}:{format_exponent(s.q)}:{s.r:g}:{s.rho:g}"


def _parse_norm(text: str, spinor: str) -> NormSpec:
    parts = text.strip().split(":")
    if len(parts) != 5:
        raise ValueError(f"norm entry {text!r} must be flavor:p:q:r:rho")
    flavor, p, q, r, rho = parts
    return NormSpec(parse_exponent(p), parse_exponent(q), float(r), float(rho), flavor, spinor)


def _format_float(x: float) -> str:
    return repr(float(x))


# dotted key -> attribute name; ``output.dir`` is excluded from the semantic hash
_KEYS = {
    "grid.dimension": "dimension",
    "grid.points_per_axis": "points_per_axis",
    "grid.box_half_width": "box_half_width",
    "clifford.variant": "clifford_variant",
    "window.width": "window_width",
    "potential.kind": "potential_kind",
    "potential.modulation": "potential_modulation",
    "potential.modulation_frequency": "modulation_frequency",
    "potential.coupling": "potential_coupling",
    "split.delta": "split_delta",
    "time.horizon": "horizon",
    "time.steps": "steps",
    "norms": "norms",
    "norm.spinor": "norm_spinor",
    "family.size": "family_size",
    "field.index": "field_index",
    "picard.tol": "picard_tol",
    "picard.max_iter": "picard_max_iter",
    "pipeline": "pipeline",
    "seed": "seed",
    "refine": "refine",
    "acceptance.drift_limit": "drift_limit",
    "solve.substeps": "substeps",
    "output.dir": "output_dir",
}
_NON_SEMANTIC = {"output_dir"}


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 1
    points_per_axis: int = 128
    box_half_width: float = 4.0 * math.pi
    clifford_variant: str = "standard"
    window_width: float = 1.0
    potential_kind: str = "stark"
    potential_params: tuple = ()  # sorted (name, value) pairs; vector values as tuples
    potential_modulation: str = "none"
    modulation_frequency: float = 1.0
    potential_coupling: Optional[tuple] = None  # rows of complex numbers
    split_delta: float = 0.5
    horizon: float = 0.5
    steps: int = 8
    norms: tuple = field(default_factory=default_norms)
    norm_spinor: str = "max"
    family_size: int = FAMILY_SIZE
    field_index: int = 0
    picard_tol: float = 1e-8
    picard_max_iter: int = 12
    pipeline: str = "U1"
    seed: int = 0
    refine: int = 0
    drift_limit: float = 0.25
    substeps: int = 8
    output_dir: str = "out"

    def __post_init__(self):
        if self.pipeline not in ("U1", "U2"):
            raise ValueError("pipeline must be U1 or U2")
        if self.refine < 0:
            raise ValueError("refine must be >= 0")
        object.__setattr__(self, "potential_params", tuple(sorted(
            (k, tuple(v) if isinstance(v, (list, tuple, np.ndarray)) else float(v))
            for k, v in dict(self.potential_params).items())))
        object.__setattr__(self, "norms", tuple(
            replace(s, spinor=self.norm_spinor) for s in self.norms))

    # -- derived objects --------------------------------------------------
    @property
    def effective_points(self) -> int:
        return self.points_per_axis * 2**self.refine

    @property
    def effective_steps(self) -> int:
        return self.steps * 2**self.refine

    def refined(self, k: int = 1) -> "ExperimentConfig":
        return replace(self, refine=self.refine + k)

    def grid(self) -> PhaseSpaceGrid:
        return PhaseSpaceGrid(self.dimension, self.effective_points, self.box_half_width)

    def clifford(self) -> CliffordRep:
        return build_clifford(self.dimension, self.clifford_variant)

    def window(self, grid: Optional[PhaseSpaceGrid] = None) -> Window:
        return gaussian_window(grid or self.grid(), self.window_width)

    def potential(self) -> PotentialSpec:
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.potential_params}
        coupling = None if self.potential_coupling is None else np.array(self.potential_coupling, dtype=complex)
        return PotentialSpec(self.potential_kind, self.dimension, params, self.potential_modulation,
                             self.modulation_frequency, 1.0, coupling)

    def mesh(self, direction: int = 1) -> TimeMesh:
        return TimeMesh(self.horizon, self.effective_steps, direction)

    # -- serialization ---------------------------------------------------
    def to_items(self) -> list:
        items = []
        for key, attr in _KEYS.items():
            val = getattr(self, attr)
            if attr == "norms":
                text = ", ".join(_format_norm(s) for s in val)
            elif attr == "potential_coupling":
                if val is None:
                    continue
                text = "; ".join(",".join(_format_complex(z) for z in row) for row in val)
            elif isinstance(val, float):
                text = _format_float(val)
            else:
                text = str(val)
            items.append((key, text))
        for name, val in self.potential_params:
            # a trailing comma marks a one-element vector
            text = (",".join(_format_float(v) for v in val) + ("," if len(val) == 1 else "")
                    if isinstance(val, tuple) else _format_float(val))
            items.append((f"potential.params.{name}", text))
        return sorted(items)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            raw[key] = val
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs, params = {}, {}
        spinor = raw.get("norm.spinor", "max")
        for key, val in raw.items():
            if key.startswith("potential.params."):
                vals = tuple(float(v) for v in val.split(",") if v.strip())
                params[key[len("potential.params."):]] = vals if "," in val else vals[0]
                continue
            if key not in _KEYS:
                raise ValueError(f"unknown config key {key!r}")
            attr = _KEYS[key]
            if attr == "norms":
                kwargs[attr] = tuple(_parse_norm(s, spinor) for s in val.split(",") if s.strip())
            elif attr == "potential_coupling":
                kwargs[attr] = tuple(tuple(complex(z.replace(" ", "")) for z in row.split(","))
                                     for row in val.split(";"))
            elif types[attr] in ("int", int):
                kwargs[attr] = int(val)
            elif types[attr] in ("float", float):
                kwargs[attr] = float(val)
            else:
                kwargs[attr] = val
        if params:
            kwargs["potential_params"] = params
        return cls(**kwargs)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    def config_hash(self) -> str:
        semantic = [(k, v) for k, v in self.to_items() if _KEYS.get(k) not in _NON_SEMANTIC]
        blob = "\n".join(f"{k}={v}" for k, v in semantic).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _format_complex(z: complex) -> str:
    z = complex(z)
    return repr(z.real) if z.imag == 0 else repr(z).strip("()")


# ---------------------------------------------------------------------------
# initial data


@dataclass(frozen=True)
class FieldSpec:
    """Analytic scalar profile times a fixed spinor direction."""

    kind: str  # gaussian | hermite | tent
    center: tuple
    frequency: tuple
    order: int = 0
    width: float = 1.0

    def profile(self, x: np.ndarray) -> np.ndarray:
        y = x - np.asarray(self.center)
        if self.kind == "gaussian":
            base = np.exp(-np.sum(y * y, axis=-1) / (2.0 * self.width**2))
        elif self.kind == "hermite":
            h = np.polynomial.hermite.hermval(y[:, 0], [0] * self.order + [1])
            norm = 1.0 / math.sqrt(2.0**self.order * math.factorial(self.order))
            base = norm * h * np.exp(-np.sum(y * y, axis=-1) / 2.0)
        elif self.kind == "tent":
            base = np.prod(np.clip(1.0 - np.abs(y) / self.width, 0.0, None), axis=-1)
        else:
            raise ValueError(f"unknown field kind {self.kind!r}")
        return base * np.exp(1j * (x @ np.asarray(self.frequency)))

    def label(self) -> str:
        c = ",".join(f"{v:g}" for v in self.center)
        w = ",".join(f"{v:g}" for v in self.frequency)
        extra = f"{self.order}" if self.kind == "hermite" else ""
        return f"{self.kind}{extra}@({c};{w})"


def family_specs(d: int, seed: int, size: int = FAMILY_SIZE) -> list:
    """Deterministic test family: 5 Gaussians, 3 Hermite functions, 2 tents, then variants."""
    zero = (0.0,) * d

    def vec(a):
        return (float(a),) + (0.0,) * (d - 1)

    base = [FieldSpec("gaussian", vec(cx), vec(cxi)) for cx, cxi in
            ((0, 0), (-2, 1), (2, -1), (-1, -2), (1, 2))]
    base += [FieldSpec("hermite", zero, zero, order=k) for k in range(3)]
    base += [FieldSpec("tent", vec(c), zero, width=1.5) for c in (-1.0, 1.0)]
    rng = np.random.default_rng(seed)
    out = list(base)
    i = 0
    while len(out) < size:
        b = base[i % len(base)]
        shift = rng.uniform(-2.0, 2.0, size=d)
        mod = rng.uniform(-2.0, 2.0, size=d)
        out.append(replace(b, center=tuple(np.asarray(b.center) + shift),
                           frequency=tuple(np.asarray(b.frequency) + mod)))
        i += 1
    return out[:size]


def initial_family(grid: PhaseSpaceGrid, n: int, seed: int = 0, size: int = FAMILY_SIZE) -> tuple:
    """(fields (size, K, n), labels). Each profile gets a seeded unit spinor direction."""
    specs = family_specs(grid.d, seed, size)
    rng = np.random.default_rng([seed, 1])
    out = np.empty((len(specs), grid.size, n), dtype=complex)
    for i, s in enumerate(specs):
        direction = rng.normal(size=n) + 1j * rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        out[i] = s.profile(grid.points)[:, None] * direction[None, :]
        check_boundary(grid, out[i])
    return out, [s.label() for s in specs]


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class NormRow:
    t: float
    spec: NormSpec
    norm_u0: float
    norm_ut: float

    @property
    def ratio(self) -> float:
        return self.norm_ut / self.norm_u0

    def cells(self) -> list:
        s = self.spec
        return [_format_float(self.t), s.flavor, format_exponent(s.p), format_exponent(s.q),
                f"{s.r:g}", f"{s.rho:g}", _format_float(self.norm_u0), _format_float(self.norm_ut),
                _format_float(self.ratio)]


def _spec_key(s: NormSpec) -> tuple:
    return (s.p, s.q, s.flavor, s.r, s.rho)


@dataclass
class NormReport:
    """Rows of (t, norm, ||u0||, ||U(t)u0||) where the test field is the one with the largest ratio."""

    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def sorted(self) -> "NormReport":
        rows = sorted(self.rows, key=lambda r: (r.t,) + _spec_key(r.spec))
        return NormReport(rows, dict(self.metadata))

    def validate(self) -> None:
        for r in self.rows:
            if not (np.isfinite(r.ratio) and r.ratio > 0):
                raise FloatingPointError(f"invalid ratio {r.ratio} at t={r.t} for {r.spec.label()}")

    def sup_ratios(self) -> dict:
        out = {}
        for r in self.rows:
            out[r.spec] = max(out.get(r.spec, 0.0), r.ratio)
        return out

    def all_finite(self) -> bool:
        return all(np.isfinite(r.ratio) and r.ratio > 0 for r in self.rows)


def drift(coarse: NormReport, fine: NormReport) -> dict:
    """Relative change of the sup ratio per norm between two refinements."""
    a, b = coarse.sup_ratios(), fine.sup_ratios()
    return {s: abs(b[s] - a[s]) / a[s] for s in a if s in b}


def report_to_csv(report: NormReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(REPORT_HEADER)
    for r in report.sorted().rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_report_csv(path) -> NormReport:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != REPORT_HEADER:
            raise ValueError(f"unexpected header {header}")
        rows = []
        for cells in reader:
            t, flavor, p, q, r, rho, n0, nt, _ = cells
            rows.append(NormRow(float(t), NormSpec(parse_exponent(p), parse_exponent(q), float(r),
                                                   float(rho), flavor), float(n0), float(nt)))
    return NormReport(rows, {"source": str(path)})


def plot_script(report: NormReport, csv_name: str) -> str:
    """gnuplot commands drawing ratio(t), one curve per norm."""
    specs = sorted({r.spec for r in report.rows}, key=_spec_key)
    lines = [
        "set datafile separator ','",
        "set key outside right",
        "set xlabel 't'",
        "set ylabel 'norm ratio'",
        "set logscale y",
    ]
    curves = []
    for s in specs:
        cond = (f'strcol(2) eq "{s.flavor}" && strcol(3) eq "{format_exponent(s.p)}" && '
                f'strcol(4) eq "{format_exponent(s.q)}" && $5 == {s.r:g} && $6 == {s.rho:g}')
        curves.append(f"'{csv_name}' skip 1 using 1:(({cond}) ? $9 : 1/0) "
                      f"with linespoints title '{s.label()}'")
    if curves:
        lines.append("plot " + ", \\\n     ".join(curves))
    return "\n".join(lines) + "\n"


def emit_report(report: NormReport, path, fmt: str = "csv") -> Path:
    """Write ``report`` as CSV or as a gnuplot script keyed to ``<path stem>.csv``."""
    path = Path(path)
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "plot-script":
        text = plot_script(report, path.with_suffix(".csv").name)
    else:
        raise ValueError("format must be 'csv' or 'plot-script'")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------------
# experiments


def build_family(cfg: ExperimentConfig, rep: Optional[CliffordRep] = None,
                 grid: Optional[PhaseSpaceGrid] = None) -> ParametrixFamily:
    grid = grid or cfg.grid()
    rep = rep or cfg.clifford()
    win = cfg.window(grid)
    V = cfg.potential()
    V.check_modulation_bound(cfg.horizon)
    if cfg.pipeline == "U1":
        return parametrix_U1(rep, grid, win, decompose(V, grid, 1, cfg.split_delta))
    return parametrix_U2(rep, grid, win, V)


def propagate_family(cfg: ExperimentConfig, fam: ParametrixFamily, u0: np.ndarray,
                     direction: int, batch: int = 5) -> tuple:
    """Trajectories (M + 1, F, K, n) and Picard iteration counts for a batch of fields."""
    mesh = cfg.mesh(direction)
    trajs, iters = [], []
    for lo in range(0, len(u0), batch):
        chunk = u0[lo:lo + batch]
        try:
            state = picard_solve(chunk, mesh, fam, cfg.picard_tol, cfg.picard_max_iter)
        except Exception as exc:
            raise RuntimeError(f"propagation failed for fields {lo}..{lo + len(chunk) - 1} "
                               f"(direction {direction:+d}): {exc}") from exc
        trajs.append(assemble_solution(chunk, state, fam))
        iters.append(state.iterations)
    return np.concatenate(trajs, axis=1), iters


def norm_report(cfg: ExperimentConfig, fam: ParametrixFamily, u0: np.ndarray,
                specs: Sequence[NormSpec]) -> NormReport:
    grid, win = fam.grid, fam.window
    base = norms_of(grid, win, u0, specs)  # (F, S)
    rows = [NormRow(0.0, s, float(base[0, j]), float(base[0, j])) for j, s in enumerate(specs)]
    iterations = {}
    for direction in (1, -1):
        traj, iters = propagate_family(cfg, fam, u0, direction)
        iterations[direction] = max(iters)
        for i, t in enumerate(cfg.mesh(direction).nodes[1:], start=1):
            vals = norms_of(grid, win, traj[i], specs)  # (F, S)
            ratios = vals / base
            for j, s in enumerate(specs):
                f = int(np.argmax(ratios[:, j]))
                rows.append(NormRow(float(t), s, float(base[f, j]), float(vals[f, j])))
    meta = {
        "config_hash": cfg.config_hash(),
        "grid": f"d={grid.d},N={grid.N},L={grid.L!r}",
        "steps": cfg.effective_steps,
        "refine": cfg.refine,
        "pipeline": fam.kind,
        "potential": cfg.potential_kind,
        "picard_iterations": iterations,
    }
    report = NormReport(rows, meta).sorted()
    report.validate()
    return report


def run_theorem1_experiment(cfg: ExperimentConfig, rep: Optional[CliffordRep] = None,
                            u0: Optional[np.ndarray] = None) -> NormReport:
    """Sup-over-family norm ratios of the first-order pipeline on (-T, T)."""
    cfg = replace(cfg, pipeline="U1")
    grid = cfg.grid()
    rep = rep or cfg.clifford()
    fam = build_family(cfg, rep, grid)
    if u0 is None:
        u0, _ = initial_family(grid, rep.n, cfg.seed, cfg.family_size)
    return norm_report(cfg, fam, u0, cfg.norms)


def run_theorem2_experiment(cfg: ExperimentConfig, rep: Optional[CliffordRep] = None,
                            u0: Optional[np.ndarray] = None) -> NormReport:
    """As the first-order experiment, with the frequency-flow pipeline and rho = 0 only."""
    if any(s.rho != 0 for s in cfg.norms):
        raise HypothesisError("the second-order (theorem2) experiment is stated for rho = 0 only")
    cfg = replace(cfg, pipeline="U2")
    grid = cfg.grid()
    rep = rep or cfg.clifford()
    fam = build_family(cfg, rep, grid)
    if u0 is None:
        u0, _ = initial_family(grid, rep.n, cfg.seed, cfg.family_size)
    return norm_report(cfg, fam, u0, cfg.norms)
