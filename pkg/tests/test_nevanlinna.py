import math

import numpy as np
import pytest
from scipy.special import i0, i0e

from valdist import parse, zero_product
from valdist.nevanlinna import (
    ConvergenceError,
    GridSet,
    GrowthSeries,
    admissibility_index,
    area_p_integral,
    characteristic,
    circle_p_integral,
    count_zeros,
    counting_N,
    deficiency,
    density_upper,
    disc_grid,
    growth_series,
    hyper_order,
    korenblum_probe,
    log_circle_p_integral,
    log_density_upper,
    max_modulus,
    plane_grid,
    positive_part_mean,
    proximity,
    tail_stat,
    trace_max_curve,
)

SIN = "(exp(i*z) - exp(-i*z))/(2i)"


def test_proximity_examples():
    assert proximity(parse("z"), 4) == pytest.approx(math.log(4), abs=1e-10)
    assert proximity(parse("exp(z)"), 10) == pytest.approx(10 / math.pi, rel=1e-10)
    assert proximity(parse("0.5"), 3) == 0.0


def test_proximity_convergence_error_carries_estimates():
    # a very oscillatory integrand with a tiny node budget
    with pytest.raises(ConvergenceError) as err:
        positive_part_mean(lambda t: np.sin(5000 * t) + 0.1, 16, tol=1e-14, max_nodes=64)
    assert len(err.value.estimates) == 2


def test_count_zeros_examples():
    assert count_zeros(parse("z^2"), 0, 2) == 2
    assert count_zeros(parse(SIN), 0, 10) == 7
    assert count_zeros(parse("exp(z)"), 0, 7.3) == 0
    # winding route for a zero-free function that is not recognised structurally
    assert count_zeros(parse("exp(z) + 0*z"), 0, 3) == 0


def test_count_zeros_handles_poles():
    f = parse("(z - 0.5)*(z - 3)/(z + 1)^2")
    assert count_zeros(f, 0, 2) == 1
    assert count_zeros(f, math.inf, 2) == 2
    assert count_zeros(f, 0, 4) == 2


def test_count_zeros_random_polynomials():
    rng = np.random.default_rng(7)
    for _ in range(30):
        deg = int(rng.integers(1, 7))
        roots = rng.uniform(-3, 3, deg) + 1j * rng.uniform(-3, 3, deg)
        f = zero_product(roots)
        r = float(rng.uniform(0.5, 4.0))
        want = int(np.sum(np.abs(roots) < r))
        assert count_zeros(f, 0, r) == want


def test_counting_function_examples():
    assert counting_N(parse("z^2"), 0, 2) == pytest.approx(2 * math.log(2), abs=1e-10)
    r = 10.0
    want = math.log(r) + sum(math.log(r / abs(2 * math.pi * k)) for k in (-1, 1))
    assert counting_N(parse("exp(z) - 1"), 0, r) == pytest.approx(want, abs=1e-8)
    assert counting_N(parse("exp(z)"), 0, 50) == 0.0


def test_counting_poles_of_gamma():
    # poles at 0, -1, -2, -3 inside |z| < 3.5
    f = parse("gamma(z)")
    r = 3.5
    want = math.log(r) + sum(math.log(r / k) for k in (1, 2, 3))
    assert counting_N(f, math.inf, r) == pytest.approx(want, abs=1e-8)


def test_max_modulus_examples():
    lm, th = max_modulus(parse("exp(z)"), 3)
    assert lm == pytest.approx(3.0, abs=1e-12) and abs(th) < 1e-6
    lm, th = max_modulus(parse("exp((1-z)^(-2))", "disc"), 0.5)
    assert lm == pytest.approx(4.0, abs=1e-10) and abs(th) < 1e-6
    assert max_modulus(parse("z"), 2) == (pytest.approx(math.log(2)), 0.0)
    lm, th = max_modulus(parse("exp(-z^2)"), 2)
    assert lm == pytest.approx(4.0) and th == pytest.approx(math.pi / 2, abs=1e-6)


def test_trace_max_curve_examples():
    grid = [1.0, 2.0, 3.0]
    _, th, flags = trace_max_curve(parse("exp(z)"), grid)
    assert np.allclose(th, 0, atol=1e-6) and not flags.any()
    _, th, _ = trace_max_curve(parse("z"), grid)
    assert np.all(th == 0)
    _, th, flags = trace_max_curve(parse("exp(-z^2)"), grid)
    assert np.allclose(th, math.pi / 2, atol=1e-6) and not flags.any()


@pytest.mark.parametrize("r", [3.0, 4.0, 5.0])
def test_double_exponential_characteristic_window(r):
    T = characteristic(parse("exp(exp(z))"), r)
    assert 0.1 <= T * math.sqrt(r) / math.exp(r) <= 1.2


def test_circle_integrals():
    assert circle_p_integral(parse("3"), 2, 1.5) == pytest.approx(2 * math.pi * 3 ** 1.5, rel=1e-12)
    # Bessel series oracle
    i0_series = sum((2.5 ** k / math.factorial(k)) ** 2 for k in range(60))
    assert i0_series == pytest.approx(i0(5.0), rel=1e-14)
    assert circle_p_integral(parse("exp(z)"), 5, 1) == pytest.approx(2 * math.pi * i0_series, rel=1e-10)
    h = parse("(1-z)^(-2)", "disc")
    for r in (0.9, 0.99, 0.999):
        # closed form: int dt / |1 - r e^{it}|^2 = 2 pi / (1 - r^2)
        val = circle_p_integral(h, r, 1)
        assert val == pytest.approx(2 * math.pi / (1 - r * r), rel=1e-9)
        assert math.pi <= (1 - r) * val <= 2 * math.pi


def test_circle_integral_log_form_survives_overflow():
    lv = log_circle_p_integral(parse("exp(exp(z))"), 7.0, 1.0)
    assert math.isfinite(lv) and lv > math.exp(7) * 0.9


@pytest.mark.parametrize("c", [1e6, 1e9])
def test_circle_integral_sharp_peak(c):
    # |e^{c z}| on |z| = 1 peaks in a window of width ~ c^{-1/2}; exact log 2 pi I0(kappa c)
    for kappa in (1.0, 0.5):
        want = math.log(2 * math.pi * i0e(kappa * c)) + kappa * c
        got = log_circle_p_integral(parse(f"exp({c:g}*z)"), 1.0, kappa)
        assert got == pytest.approx(want, rel=1e-12)


def test_area_integral():
    assert area_p_integral(parse("2"), 1.5, 1) == pytest.approx(math.pi * 1.5 ** 2 * 2, rel=1e-10)
    # |z|^2 over the disc of radius r: 2 pi r^4 / 4
    assert area_p_integral(parse("z"), 0.8, 2) == pytest.approx(math.pi * 0.8 ** 4 / 2, rel=1e-8)


def test_deficiency_examples():
    grid = plane_grid(10.0, 14, 1.15)
    rep0 = deficiency(parse("exp(z)"), 0, grid)
    assert rep0.liminf_trimmed == pytest.approx(1.0, abs=0.05)
    rep1 = deficiency(parse("exp(z)"), 1, grid)
    assert rep1.liminf_trimmed == pytest.approx(0.0, abs=0.05)
    repinf = deficiency(parse("exp(z)"), math.inf, grid)
    assert repinf.liminf == pytest.approx(1.0, abs=1e-12)
    for rep in (rep0, rep1, repinf):
        assert np.all(rep.ratios >= -1e-12) and np.all(rep.ratios <= 1 + 1e-8)
    with pytest.raises(ValueError):
        deficiency(parse("3"), 0, grid)


@pytest.mark.parametrize("text,a", [("exp(z)", 1), (SIN, 0.5), ("z^3 - z + 2", 1)])
def test_first_main_theorem_consistency(text, a):
    f = parse(text)
    for r in (2.0, 5.0, 9.0):
        lhs = proximity(f, r, a=a) + counting_N(f, a, r)
        assert abs(lhs - characteristic(f, r)) <= 5.0


@pytest.mark.parametrize("r", [1.0, 3.0, 6.0])
def test_subadditivity_of_proximity(r):
    f, g = parse("exp(z) + z"), parse("z^2 - 1")
    assert proximity(f * g, r) <= proximity(f, r) + proximity(g, r) + 1e-8


@pytest.mark.parametrize("text", ["exp(z)", "z^4 + 1", "exp(z^2) - z"])
def test_characteristic_max_modulus_bracket(text):
    f = parse(text)
    for r in (1.5, 3.0):
        T, logM = characteristic(f, r), max_modulus(f, r)[0]
        assert T <= logM + 1e-8
        assert logM <= 3 * characteristic(f, 2 * r) + 1e-8


def test_growth_series_invariants_and_csv_round_trip():
    s = growth_series(parse("exp(z) + z"), plane_grid(1.0, 8, 1.3))
    assert np.allclose(s.T, s.m + s.N)
    assert np.all(np.diff(s.T) >= -1e-8) and np.all(np.diff(s.logM) >= -1e-8)
    text = s.to_csv()
    assert text.splitlines()[0] == "r,m,N,T,logM,argmax_theta"
    back = GrowthSeries.from_csv(text)
    assert np.array_equal(back.T, s.T) and np.array_equal(back.r, s.r)


def test_admissibility_and_korenblum():
    grid = disc_grid(8, 28)
    res = admissibility_index(parse("exp((1-z)^(-2))", "disc"), grid)
    assert res.admissible and res.increasing
    res = admissibility_index(parse("3", "disc"), grid)
    assert not res.admissible
    assert korenblum_probe(parse("3", "disc"), 0, grid) == pytest.approx(3.0)
    # (1-r^2)^2 / |1-z|^2 peaks on the positive axis at (1+r)^2
    assert korenblum_probe(parse("(1-z)^(-2)", "disc"), 2, grid) == pytest.approx((1 + grid[-1]) ** 2, rel=1e-12)


def test_density_upper_examples():
    r = disc_grid(4, 40)
    eps = 2.0 ** -5
    assert density_upper(GridSet(r, r >= 1 - eps)) == pytest.approx(1.0)
    assert density_upper(GridSet(r, np.zeros(r.size, bool))) == 0.0
    with pytest.raises(ValueError):
        GridSet(r, np.zeros(3, bool))
    text = GridSet(r, r > 0.9).to_csv()
    assert text.startswith("r,flag\n")
    back = GridSet.from_csv(text)
    assert np.array_equal(back.mask, r > 0.9)


def test_log_density():
    r = plane_grid(1.0, 60, 1.15)
    assert log_density_upper(GridSet(r, np.ones(r.size, bool), "plane")) == pytest.approx(1.0, abs=0.05)
    assert log_density_upper(GridSet(r, np.zeros(r.size, bool), "plane")) == 0.0


def test_hyper_order_examples():
    ee = growth_series(parse("exp(exp(z))"), np.linspace(20, 40, 9))
    est = hyper_order(ee)
    assert est.value == pytest.approx(1.0, abs=0.1) and not est.low_confidence
    ez = growth_series(parse("exp(z)"), plane_grid(5.0, 12))
    assert hyper_order(ez).value == pytest.approx(0.0, abs=0.05)
    poly = growth_series(parse("z^3 + 1"), plane_grid(5.0, 12))
    est = hyper_order(poly)
    assert est.value == 0.0 and est.low_confidence


def test_tail_stat_trimming():
    v = np.array([9, 9, 9, 5, 4, 0.1, 3, 2, 6.0])
    assert tail_stat(v, "min", 0.0) == (2.0, 2.0)
    full, trimmed = tail_stat(v, "min", 0.34)
    assert full == 2.0 and trimmed == 3.0
