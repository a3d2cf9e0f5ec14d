import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from valdist import eval_log, evaluate, parse
from valdist.nevanlinna import characteristic
from valdist.reduction import identity_residual, reduce_base, reduced_coefficients
from valdist.solvers import (
    delta_to_shift,
    equation_residual,
    integrate_ray,
    integrate_rays,
    iterate_lattice,
    ode_base,
    shift_to_delta,
    solution_growth,
)

FREI_A = [parse("exp(2*z)"), parse("-(2*exp(z)+1)")]


def test_exponential_ray_exact():
    theta = 0.7
    sol = integrate_ray([-1.0], theta, 10.0, [1.0], richardson=True)
    assert abs(sol.log_abs_f()[-1] - 10 * math.cos(theta)) < 1e-8
    assert sol.richardson_delta < 10 * 1e-10
    assert not sol.truncated


def test_sine_grows_like_sinh_on_imaginary_axis():
    sol = integrate_ray([1.0, 0.0], math.pi / 2, 20.0, [0.0, 1.0])
    r = sol.r[-1]
    assert abs(sol.log_abs_f()[-1] - math.log(math.sinh(r))) < 1e-8
    assert abs(sol.log_abs_f()[-1] - (r - math.log(2))) < 1e-12 + 1e-16 * r + 1e-8


def test_double_exponential_solution():
    sol = integrate_ray(FREI_A, 0.0, 3.0, [math.e, math.e])
    assert abs(sol.log_abs_f()[-1] / math.exp(3) - 1) < 1e-6


def test_renormalised_state_norm():
    sol = integrate_ray(FREI_A, 0.3, 3.0, [math.e, math.e])
    norms = np.linalg.norm(sol.state, axis=1)
    assert np.all((norms >= 0.5) & (norms <= 2.0))
    assert sol.logscale[-1] > 10


@pytest.mark.parametrize("theta", [0.0, 1.0, 2.5, -2.0])
def test_matches_closed_form_second_solution(theta):
    f2 = parse("exp(z)*exp(exp(z))")
    r = np.linspace(0.25, 3.0, 12)
    want = eval_log(f2, r * np.exp(1j * theta)).logmag
    # f2(0) = e and f2'(0) = 2e
    sol = integrate_ray(FREI_A, theta, 3.0, [math.e, 2 * math.e], r_out=r)
    assert np.allclose(sol.log_abs_f(), want, rtol=1e-6, atol=1e-9)


def test_superposition():
    r = np.linspace(0.5, 2.5, 5)
    thetas = [0.2, 1.9]
    ic1, ic2 = np.array([1.0, 0.5j]), np.array([-0.3, 2.0])
    s1 = integrate_rays(FREI_A, thetas, r, ic1, tol=1e-11)
    s2 = integrate_rays(FREI_A, thetas, r, ic2, tol=1e-11)
    s3 = integrate_rays(FREI_A, thetas, r, ic1 + ic2, tol=1e-11)

    def vals(s):
        return s.state[:, 0] * np.exp(s.logscale)

    for a, b, c in zip(s1, s2, s3):
        assert np.allclose(vals(a) + vals(b), vals(c), rtol=1e-7)


def test_zero_initial_state_rejected():
    with pytest.raises(ValueError, match="identically zero"):
        integrate_ray(FREI_A, 0.0, 1.0, [0.0, 0.0])


def test_truncation_at_coefficient_pole():
    r = np.linspace(0.1, 2.0, 20)
    sol = integrate_ray([parse("-1/(1-z)")], 0.0, 2.0, [1.0], r_out=r, tol=1e-8)
    assert sol.truncated and 0.99 < sol.r_trunc <= 1.0
    logs = sol.log_abs_f()
    ok = r < 0.99
    assert np.allclose(logs[ok], -np.log(1 - r[ok]), rtol=1e-7)
    assert np.all(np.isnan(logs[r > 1]))


def test_solution_growth_exponential():
    g = solution_growth([-1.0], [10.0, 20.0, 40.0], [1.0])
    assert np.allclose(g.T / (g.r / math.pi), 1.0, atol=0.02)
    assert np.all(g.N == 0)
    assert np.allclose(g.logM, g.r, rtol=1e-8)


def test_solution_growth_matches_closed_form():
    grid = np.array([2.0, 3.0])
    g = solution_growth(FREI_A, grid, [math.e, math.e])
    want = [characteristic(parse("exp(exp(z))"), r) for r in grid]
    assert np.allclose(g.T, want, rtol=1e-2)


def test_ode_base_values():
    c, s = ode_base([1.0, 0.0])
    z = np.array([1 + 1j, -0.5 + 2j])
    assert np.allclose(evaluate(c, z), np.cos(z), rtol=1e-10)
    assert np.allclose(evaluate(s, z), np.sin(z), rtol=1e-10)
    assert np.allclose(evaluate(s.derivative(), z), np.cos(z), rtol=1e-10)
    assert np.allclose(evaluate(s.derivative(2), z), -np.sin(z), rtol=1e-10)


@pytest.mark.parametrize("A,p", [
    (["z", "exp(z)", "1"], 1),
    (["z", "exp(z)", "1"], 0),
    (["z", "exp(z)", "1"], 2),
    (["1+z^2", "0.5"], 1),
])
def test_identity_on_numeric_base(A, p):
    A = [parse(a) for a in A]
    base = ode_base(A)
    t = reduce_base(base)
    reduced_coefficients(A, t)
    assert identity_residual(A, t, p).max_residual < 1e-8


def test_equation_residual_examples():
    ok = equation_residual(FREI_A, "derivative", parse("exp(exp(z))"))
    assert ok.max_residual < 1e-9 and len(ok.samples) == 120
    assert equation_residual(FREI_A, "derivative", parse("exp(z)*exp(exp(z))")).max_residual < 1e-9
    # z*exp(exp(z)) is not a solution: z f'' - ... leaves -(1/z)-sized terms
    bad = equation_residual(FREI_A, "derivative", parse("z*exp(exp(z))"))
    assert bad.max_residual > 0.1
    triv = equation_residual(FREI_A, "derivative", parse("0"))
    assert triv.trivial and triv.max_residual == 0


def test_equation_residual_disc_example():
    h = "(1-z)^(-2)"
    A = [parse(f"4*exp(2*{h})/(1-z)^6", "disc"),
         parse(f"-4*exp({h})/(1-z)^3 - 2/(1-z)^3 - 3/(1-z)", "disc")]
    rng = np.random.default_rng(3)
    pts = 0.5 * np.sqrt(rng.random(100)) * np.exp(2j * np.pi * rng.random(100))
    for f in (f"exp(exp({h}))", f"exp({h})*exp(exp({h}))"):
        assert equation_residual(A, "derivative", parse(f, "disc"), pts).max_residual < 1e-8


def test_delta_to_shift_example():
    A1, A0 = parse("z^2"), parse("exp(z)")
    B0, B1 = delta_to_shift([A0, A1])
    z = np.array([0.3, 1 + 2j])
    assert np.allclose(evaluate(B1, z), z ** 2 - 2)
    assert np.allclose(evaluate(B0, z), 1 - z ** 2 + np.exp(z))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=5))
def test_shift_delta_involution(A):
    back = shift_to_delta(delta_to_shift(A))
    assert np.allclose(back, A, atol=1e-9)
    fwd = delta_to_shift(shift_to_delta(A))
    assert np.allclose(fwd, A, atol=1e-9)


def test_lattice_linear_function():
    B = delta_to_shift([0.0, 0.0])
    z0 = 0.5 + 0.25j
    sol = iterate_lattice(B, "shift", z0, 20, [z0, z0 + 1])
    assert np.allclose(sol.values(), sol.points, rtol=1e-14)
    assert sol.max_residual < 1e-15


def test_lattice_gamma_recurrence():
    sol = iterate_lattice([parse("-z")], "shift", 1.0, 60, [1.0])
    want = [math.lgamma(k + 1) for k in range(61)]
    assert np.allclose(sol.logmag, want, rtol=0, atol=1e-10 * max(want))
    assert sol.max_residual < 1e-10


def test_lattice_q_kind():
    sol = iterate_lattice([-2.0], "qshift", 1.0, 30, [1.0], q=2.0)
    assert np.allclose(sol.logmag, np.arange(31) * math.log(2))


def test_lattice_vanishing_leading_coefficient():
    with pytest.raises(ValueError, match=r"z = \(3"):
        iterate_lattice([parse("-z"), parse("z-3")], "shift", 1.0, 5, [1.0])
