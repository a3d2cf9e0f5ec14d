import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from valdist import (
    DomainError,
    ExprSyntaxError,
    constant,
    delta,
    delta_q,
    differentiate,
    eval_log,
    evaluate,
    fmittag_leffler,
    parse,
    qscale,
    shift,
    variable,
    zero_product,
)
from valdist.funcexpr import evaluate_many

SAMPLES = ["exp(exp(z))", "z^3 - 2*z + 1", "gamma(z + 2)/(z + 3)", "exp(-z^2)*(z + 1)^(0.5)",
           "prod(k=1..5; 1 - z/k^2)", "ml(0.5; z)", "sin_free(z)"]


def central(f, z, h):
    return (f(z + h) - f(z - h)) / (2 * h)


def test_parse_builds_nested_exp():
    f = parse("exp(exp(z))")
    assert f.render() == "exp(exp(z))"
    assert evaluate(f, 0.0) == pytest.approx(math.e)


def test_parse_disc_example_and_tag_checks():
    h = parse("exp((1-z)^(-2))", domain="disc")
    assert h.domain == "disc"
    assert evaluate(h, 0.3) == pytest.approx(math.exp(0.7 ** -2))
    with pytest.raises(DomainError):
        evaluate(h, 1.0)
    with pytest.raises(DomainError):
        parse("[disc] z", domain="plane")
    with pytest.raises(DomainError):
        h + variable("plane")


def test_unbalanced_paren_reports_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("z^(0.5")
    assert err.value.offset == 6


@pytest.mark.parametrize("text", ["z +", "exp(z", "w*z", "z^z", "prod(k=3..1; z)", "2 $ z"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


@pytest.mark.parametrize("text", [s for s in SAMPLES if "sin_free" not in s] + [
    "-z^2 + 3*z - 1/(z + 2)", "(2+3i)*z^(0.5+1i)", "-(z*exp(z))/2", "psi(1; z)",
    "mld(0.5, 2, 1; z)", "sum(j=0..3; z^j/gamma(j+1))", "z/(2*z)/3", "(z^0.5)^2"])
def test_render_parse_round_trip(text):
    f = parse(text)
    assert parse(f.render()) == f


def test_derivative_examples():
    f = parse("exp(exp(z))")
    assert evaluate(differentiate(f), 0.0) == pytest.approx(math.e)
    assert differentiate(parse("exp(z)")) == parse("exp(z)")
    g = parse("(1-z)^(-2)", domain="disc")
    h = 1e-6
    fd = central(lambda w: evaluate(g, w), 0.3, h)
    exact = evaluate(differentiate(g), 0.3)
    assert exact == pytest.approx(2 * 0.7 ** -3, rel=1e-14)
    assert abs(fd - exact) <= 1e-6 * abs(exact)


@pytest.mark.parametrize("text", [s for s in SAMPLES if "sin_free" not in s])
def test_derivative_matches_central_difference_second_order(text):
    f = parse(text)
    df = differentiate(f)
    z0 = 0.7 + 0.4j
    exact = evaluate(df, z0)
    e1 = abs(central(f, z0, 1e-2) - exact)
    e2 = abs(central(f, z0, 5e-3) - exact)
    # halving h cuts the error by about four
    assert e2 < 0.35 * e1 or e2 < 1e-9 * abs(exact)


def test_derivative_linearity_at_random_points():
    f, g = parse("exp(z)*z^2"), parse("gamma(z + 3) - z^(1.5)")
    rng = np.random.default_rng(2)
    z = rng.uniform(0.2, 2, 100) + 1j * rng.uniform(-1, 1, 100)
    lhs = evaluate(differentiate(f + g), z)
    rhs = evaluate(differentiate(f), z) + evaluate(differentiate(g), z)
    assert np.max(np.abs(lhs - rhs) / np.abs(rhs)) < 1e-12


def test_differences_of_linear_function():
    z = variable()
    assert evaluate(delta(z), 4.2 - 1j) == pytest.approx(1.0)
    d2 = delta(z, 2)
    assert np.all(evaluate(d2, np.linspace(-3, 3, 7) + 0j) == 0)
    assert evaluate(delta_q(z, 2), 3.0) == pytest.approx(3.0)


def test_shift_rejected_on_disc():
    with pytest.raises(DomainError):
        shift(variable("disc"), 1)
    with pytest.raises(DomainError):
        qscale(variable("disc"), 2)


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3),
       st.complex_numbers(max_magnitude=1))
def test_shift_composition(a, b, z0):
    f = parse("exp(z)*gamma(z + 5) + z^3")
    lhs = evaluate(shift(shift(f, a), b), z0)
    rhs = evaluate(shift(f, a + b), z0)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(min_magnitude=0.2, max_magnitude=2),
       st.complex_numbers(min_magnitude=0.2, max_magnitude=2),
       st.complex_numbers(max_magnitude=1))
def test_qscale_composition(p, q, z0):
    f = parse("exp(z) + z^4 - 2")
    lhs = evaluate(qscale(qscale(f, p), q), z0)
    rhs = evaluate(qscale(f, p * q), z0)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_eval_log_examples():
    f = parse("exp(exp(z))")
    assert eval_log(f, 5.0).logmag == pytest.approx(math.exp(5), rel=1e-14)
    lv = eval_log(f, 3 + 0.1j)
    assert lv.logmag == pytest.approx((cmath.exp(3 + 0.1j)).real, rel=1e-13)
    assert lv.logmag == pytest.approx(19.985, abs=1e-3)
    assert eval_log(constant(0), 0.5).logmag == -math.inf
    # far past overflow
    assert eval_log(f, 800.0).logmag == math.inf or eval_log(f, 8.0).logmag == pytest.approx(math.exp(8))


def test_eval_log_pole_gives_sentinel():
    lv = eval_log(parse("1/(z - 1)"), 1.0)
    assert lv.logmag == math.inf
    lv = eval_log(parse("z*(z - 2)"), 2.0)
    assert lv.logmag == -math.inf


@pytest.mark.parametrize("text", [s for s in SAMPLES if "sin_free" not in s])
def test_eval_log_matches_direct_evaluation(text):
    f = parse(text)
    z = np.array([0.3 + 0.1j, -1.2 + 0.7j, 2.0 - 0.5j])
    direct = evaluate(f, z)
    lv = eval_log(f, z)
    assert np.max(np.abs(np.exp(lv.logmag) / np.abs(direct) - 1)) < 1e-12
    assert np.max(np.abs(lv.value() / direct - 1)) < 1e-11


def test_mittag_leffler_node_alpha_one_is_exp():
    rng = np.random.default_rng(3)
    z = 10 * np.sqrt(rng.uniform(0, 1, 50)) * np.exp(2j * np.pi * rng.uniform(0, 1, 50))
    e1 = fmittag_leffler(1.0, variable())
    assert np.max(np.abs(evaluate(e1, z) / np.exp(z) - 1)) < 1e-9


def test_zero_product_and_memoised_evaluation():
    zeros = [1.0, 2.0, -3.0 + 1j]
    f = zero_product(zeros)
    w = np.array([0.5, 2.0, 1 + 1j])
    want = np.prod([1 - w / a for a in zeros], axis=0)
    assert np.allclose(evaluate(f, w), want, rtol=1e-14)
    a, b = evaluate_many([f, differentiate(f)], w)
    assert np.allclose(a, want)
    assert evaluate(f, 2.0) == 0


def test_evaluation_is_deterministic_and_trees_are_immutable():
    f = parse("gamma(z)*exp(z^2)")
    assert evaluate(f, 1.3 + 0.2j) == evaluate(f, 1.3 + 0.2j)
    with pytest.raises(AttributeError):
        f.node = None
    assert hash(parse("z + 1")) == hash(parse("1 + z"))
