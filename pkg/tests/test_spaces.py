import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diracprop.gabor import gaussian_window
from diracprop.harness import initial_family
from diracprop.phase_space import PhaseSpaceGrid, SpinorField
from diracprop.spaces import (ENDPOINT_PAIRS, NormSpec, dilate, dilation_bound_check, format_exponent, lp,
                              mixed_norm, modulation_norm, norms_of, parse_exponent, taylor_average,
                              translate, trig_interpolate, wiener_norm)

GRID = PhaseSpaceGrid(1, 64, 10.0)
WIN = gaussian_window(GRID)


def _field(seed, grid=GRID):
    rng = np.random.default_rng(seed)
    x = grid.points[:, 0]
    c = rng.uniform(-2, 2)
    k = rng.uniform(-2, 2)
    amp = rng.normal(size=2) + 1j * rng.normal(size=2)
    return SpinorField.from_flat(grid, np.exp(-(x - c) ** 2 / 2 + 1j * k * x)[:, None] * amp)


def test_exponent_parsing():
    assert parse_exponent("inf") == np.inf and parse_exponent("2") == 2.0
    assert format_exponent(np.inf) == "inf" and format_exponent(1.0) == "1"
    with pytest.raises(ValueError):
        parse_exponent(0.5)
    with pytest.raises(ValueError):
        NormSpec(1, 1, flavor="besov")
    with pytest.raises(ValueError):
        NormSpec(1, 1, spinor="frobenius")


def test_lp_discretization():
    a = np.array([[1.0, 2.0, 3.0]])
    assert lp(a, np.inf, 0.5, axis=-1)[0] == 3.0  # no cell weight for the sup
    assert lp(a, 1.0, 0.5, axis=-1)[0] == 3.0
    assert lp(a, 2.0, 0.5, axis=-1)[0] == pytest.approx(np.sqrt(7.0))


@pytest.mark.parametrize("p", [1.0, 2.0, np.inf])
@pytest.mark.parametrize("r,rho", [(0, 0), (1, 0), (0, 1), (2, 1)])
def test_nesting_identity_for_equal_exponents(p, r, rho):
    f = _field(3)
    m = modulation_norm(f, WIN, NormSpec(p, p, r, rho, "modulation"))
    w = wiener_norm(f, WIN, NormSpec(p, p, r, rho, "wiener"))
    # identical summands; only the summation order differs
    assert m == pytest.approx(w, rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.sampled_from(ENDPOINT_PAIRS),
       st.sampled_from(["modulation", "wiener"]))
def test_triangle_inequality(s1, s2, pq, flavor):
    spec = NormSpec(pq[0], pq[1], 1.0, 1.0, flavor)
    f, g = _field(s1), _field(s2)
    lhs = float(norms_of(GRID, WIN, (f + g).flat, [spec])[0])
    rhs = float(norms_of(GRID, WIN, f.flat, [spec])[0] + norms_of(GRID, WIN, g.flat, [spec])[0])
    assert lhs <= rhs + 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3),
       st.sampled_from(ENDPOINT_PAIRS))
def test_homogeneity(seed, c, pq):
    spec = NormSpec(pq[0], pq[1], 1.0, 0.0)
    f = _field(seed)
    a = wiener_norm(f * c, WIN, spec)
    b = abs(c) * wiener_norm(f, WIN, spec)
    assert abs(a - b) <= 1e-12 * b


@pytest.mark.parametrize("steps", [1, 5, -9])
def test_lattice_translation_invariance(steps):
    f = _field(4)
    spec = NormSpec(np.inf, 1.0, flavor="modulation")
    a = modulation_norm(translate(f, [steps]), WIN, spec)
    assert a == pytest.approx(modulation_norm(f, WIN, spec), rel=1e-8)


def test_spinor_modulus_options():
    f = _field(5)
    mx = wiener_norm(f, WIN, NormSpec(2, 2))
    eu = wiener_norm(f, WIN, NormSpec(2, 2, spinor="euclidean"))
    assert mx <= eu <= np.sqrt(2) * mx
    # Moyal identity with the plain d xi measure: ||V_g f||_{L^2} = (2 pi)^{d/2} ||g|| ||f||
    assert eu == pytest.approx(np.sqrt(2 * np.pi) * f.l2_norm(), rel=1e-10)


def test_weight_increases_norm():
    f = _field(6)
    base = wiener_norm(f, WIN, NormSpec(1, 1))
    assert wiener_norm(f, WIN, NormSpec(1, 1, r=1)) > base
    assert wiener_norm(f, WIN, NormSpec(1, 1, rho=1)) > base


def test_mixed_norm_shapes():
    mod = np.ones((3, GRID.size, GRID.size))
    out = mixed_norm(GRID, mod, NormSpec(1, np.inf))
    assert out.shape == (3,)
    assert out[0] == pytest.approx(GRID.size * GRID.cell)


def test_window_equivalence_constant_is_grid_stable():
    ratios = []
    for N in (64, 128):
        grid = PhaseSpaceGrid(1, N, 12.0)
        fields, _ = initial_family(grid, 2, seed=0, size=20)
        a = norms_of(grid, gaussian_window(grid, 1.0), fields, [NormSpec(p, q) for p, q in ENDPOINT_PAIRS])
        b = norms_of(grid, gaussian_window(grid, 0.5), fields, [NormSpec(p, q) for p, q in ENDPOINT_PAIRS])
        r = a / b
        ratios.append(max(r.max(), 1.0 / r.min()))
    assert all(np.isfinite(ratios))
    assert abs(ratios[1] - ratios[0]) / ratios[0] < 0.05


def test_trig_interpolation_is_exact_on_lattice_and_for_band_limited_data():
    f = _field(7)
    assert np.abs(trig_interpolate(f, GRID.points) - f.flat).max() <= 1e-12
    grid = PhaseSpaceGrid(1, 16, np.pi)
    x = grid.points[:, 0]
    g = SpinorField.from_flat(grid, np.cos(3 * x)[:, None])
    y = np.linspace(-3, 3, 11)[:, None]
    assert np.abs(trig_interpolate(g, y)[:, 0] - np.cos(3 * y[:, 0])).max() <= 1e-12


def test_dilation_of_gaussian():
    grid = PhaseSpaceGrid(1, 128, 12.0)
    x = grid.points[:, 0]
    f = SpinorField.from_flat(grid, np.exp(-4 * x**2)[:, None])
    d = dilate(f, 0.5)
    assert np.abs(d.flat[:, 0] - np.exp(-x**2)).max() <= 1e-8


def test_dilation_table_rejects_bad_theta():
    with pytest.raises(ValueError):
        dilation_bound_check(_field(1), WIN, [1.5])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.sampled_from(["1", "1-theta"]))
def test_taylor_average_exact_for_polynomials(coef, weight):
    f = lambda z: np.polyval(coef, z[..., 0])
    x, y = np.array([0.3]), np.array([-1.1])
    s = np.linspace(0, 1, 20001)
    w = np.ones_like(s) if weight == "1" else 1 - s
    vals = np.polyval(coef, x[0] + s * (y[0] - x[0])) * w
    ref = np.trapezoid(vals, s) if hasattr(np, "trapezoid") else np.trapz(vals, s)
    assert taylor_average(f, x, y, weight) == pytest.approx(ref, abs=1e-7)
