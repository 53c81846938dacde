from dataclasses import replace

import numpy as np
import pytest

from diracprop.clifford import monomial_unitary
from diracprop.harness import (REPORT_HEADER, ExperimentConfig, NormReport, NormRow, default_norms, drift,
                               emit_report, family_specs, initial_family, read_report_csv, report_to_csv,
                               run_theorem1_experiment, run_theorem2_experiment)
from diracprop.potentials import HypothesisError
from diracprop.spaces import ENDPOINT_PAIRS, NormSpec

SMALL = ExperimentConfig(points_per_axis=64, steps=4, family_size=4)


def test_config_text_round_trip():
    cfg = ExperimentConfig(potential_kind="bounded_rough", potential_params={"wavenumber": 2.0, "E": [0.5]},
                           potential_modulation="cos", norms=default_norms(rhos=(0.0,)), seed=7,
                           norm_spinor="euclidean")
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()


def test_config_coupling_round_trip():
    cfg = ExperimentConfig(potential_coupling=((1.0, 0.3 - 0.2j), (0.3 + 0.2j, -1.0)))
    back = ExperimentConfig.from_text(cfg.to_text())
    assert back == cfg
    assert np.allclose(back.potential().coupling_matrix(2), [[1, 0.3 - 0.2j], [0.3 + 0.2j, -1]])


def test_config_parsing_comments_and_errors():
    cfg = ExperimentConfig.from_text("# comment\ngrid.points_per_axis = 32  # inline\n\ntime.steps=3\n")
    assert cfg.points_per_axis == 32 and cfg.steps == 3
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("grid.nonsense = 1\n")
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("time.steps\n")
    with pytest.raises(ValueError):
        ExperimentConfig.from_text("norms = wiener:1:1:0\n")
    with pytest.raises(ValueError):
        ExperimentConfig(pipeline="U3")


def test_hash_tracks_semantic_fields_only():
    base = ExperimentConfig()
    assert replace(base, output_dir="elsewhere").config_hash() == base.config_hash()
    for change in [dict(seed=1), dict(steps=9), dict(window_width=0.5), dict(potential_kind="harmonic"),
                   dict(potential_params={"E": [2.0]})]:
        assert replace(base, **change).config_hash() != base.config_hash()


def test_refinement_doubles_points_and_steps():
    cfg = ExperimentConfig(points_per_axis=64, steps=4).refined(2)
    assert cfg.effective_points == 256 and cfg.effective_steps == 16
    assert cfg.grid().N == 256 and cfg.mesh().steps == 16


def test_default_norm_sets():
    assert len(default_norms()) == 12
    assert len(default_norms(rhos=(0.0,))) == 8
    assert all(s.rho == 0 for s in default_norms(rhos=(0.0,)))
    assert {(s.p, s.q) for s in default_norms()} == set(ENDPOINT_PAIRS)


def test_family_is_deterministic_and_boundary_safe():
    a = family_specs(1, 3)
    assert len(a) == 20 and a == family_specs(1, 3) and a != family_specs(1, 4)
    grid = SMALL.grid()
    f1, labels = initial_family(grid, 2, seed=3)
    f2, _ = initial_family(grid, 2, seed=3)
    assert f1.shape == (20, grid.size, 2) and np.array_equal(f1, f2)
    assert len(set(labels)) == 20


def _row(t, p, q, n0, nt):
    return NormRow(t, NormSpec(p, q), n0, nt)


def test_csv_format(tmp_path):
    empty = report_to_csv(NormReport())
    assert empty == ",".join(REPORT_HEADER) + "\r\n"
    rep = NormReport([_row(0.5, np.inf, 1.0, 2.0, 3.0), _row(-0.5, 1.0, np.inf, 1.0, 1.5),
                      _row(0.0, 2.0, 2.0, 1.0, 1.0)])
    text = report_to_csv(rep)
    lines = text.split("\r\n")
    assert len(lines) == 5 and lines[-1] == ""
    assert lines[0] == "t,flavor,p,q,r,rho,norm_u0,norm_ut,ratio"
    assert lines[1].startswith("-0.5,wiener,1,inf,0,0,")
    assert lines[3] == "0.5,wiener,inf,1,0,0,2.0,3.0,1.5"
    path = emit_report(rep, tmp_path / "r.csv")
    assert path.read_bytes() == text.encode()
    back = read_report_csv(path)
    assert report_to_csv(back) == text


def test_plot_script_refers_to_csv(tmp_path):
    rep = NormReport([_row(0.5, np.inf, 1.0, 2.0, 3.0)])
    path = emit_report(rep, tmp_path / "r.gp", fmt="plot-script")
    assert "'r.csv'" in path.read_text()
    with pytest.raises(ValueError):
        emit_report(rep, tmp_path / "r.txt", fmt="xml")


def test_drift_of_sup_ratios():
    a = NormReport([_row(0.1, 1.0, 1.0, 1.0, 2.0), _row(0.2, 1.0, 1.0, 1.0, 1.0)])
    b = NormReport([_row(0.1, 1.0, 1.0, 1.0, 2.5)])
    assert drift(a, b) == {NormSpec(1.0, 1.0): pytest.approx(0.25)}


def test_free_propagation_preserves_euclidean_l2_type_norm():
    # with the euclidean spinor modulus the (2,2) norm is a multiple of the L^2 norm,
    # which the free flow conserves
    cfg = replace(SMALL, potential_kind="zero", norm_spinor="euclidean",
                  norms=(NormSpec(2.0, 2.0), NormSpec(1.0, 1.0)), points_per_axis=128, steps=8)
    report = run_theorem1_experiment(cfg)
    l2 = [r.ratio for r in report.rows if r.spec.p == 2.0]
    assert max(abs(x - 1.0) for x in l2) <= 1e-4


def test_report_rows_and_determinism():
    a = run_theorem1_experiment(SMALL)
    b = run_theorem1_experiment(SMALL)
    assert report_to_csv(a) == report_to_csv(b)
    assert len(a.rows) == 12 * (2 * SMALL.steps + 1)
    assert all(r.ratio == 1.0 for r in a.rows if r.t == 0.0)
    assert a.all_finite() and a.metadata["config_hash"] == SMALL.config_hash()


def test_second_order_experiment_requires_unweighted_frequencies():
    with pytest.raises(HypothesisError):
        run_theorem2_experiment(replace(SMALL, potential_kind="harmonic"))
    rep = run_theorem2_experiment(replace(SMALL, potential_kind="harmonic", norms=default_norms(rhos=(0.0,))))
    assert rep.all_finite() and rep.metadata["pipeline"] == "U2"


def test_first_order_experiment_rejects_quadratic_potential():
    with pytest.raises(HypothesisError):
        run_theorem1_experiment(replace(SMALL, potential_kind="harmonic"))


def test_ratios_do_not_depend_on_clifford_representation():
    cfg = ExperimentConfig(dimension=3, points_per_axis=8, box_half_width=7.0, clifford_variant="dirac",
                           steps=2, horizon=0.25, potential_kind="stark")
    rep = cfg.clifford()
    U = monomial_unitary(rep.n, np.random.default_rng(3))
    grid = cfg.grid()
    rng = np.random.default_rng(0)
    env = np.exp(-np.sum(grid.points**2, axis=-1) / (2 * 0.7**2))
    u0 = env[None, :, None] * (rng.normal(size=(2, 1, rep.n)) + 1j * rng.normal(size=(2, 1, rep.n)))
    a = run_theorem1_experiment(cfg, rep, u0)
    b = run_theorem1_experiment(cfg, rep.conjugated(U), u0 @ U.T)
    assert max(abs(x.ratio - y.ratio) for x, y in zip(a.rows, b.rows)) <= 1e-10
