import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from mbsarah.theory import (TheoryInputs, check_condition_13, complexity_multi_loop, complexity_single_loop,
                            feasible_gamma, report, rho_m)


def exact_lhs(L, mu, n, b, b_H, gamma, m):
    L, mu, gamma = Fraction(L), Fraction(mu), Fraction(gamma)
    return L ** 2 * gamma ** 2 / (mu ** 2 * b * b_H ** 2) * Fraction(n - b, n - 1) * m - (1 - L * gamma / (mu * b_H))


def test_worked_example():
    t = TheoryInputs(L=1, mu=1, n=101, b=1, b_H=10, gamma=1, m=5)
    lhs, holds = check_condition_13(t)
    assert exact_lhs(1, 1, 101, 1, 10, 1, 5) == Fraction(-85, 100)
    assert lhs == pytest.approx(-0.85, abs=1e-15)
    assert holds


@pytest.mark.parametrize("L, mu, b_H, gamma", [(1.0, 1.0, 10, 1.0), (4.0, 0.5, 3, 1.0), (2.0, 1.0, 1, 0.25)])
def test_full_batch_boundary(L, mu, b_H, gamma):
    lhs, holds = check_condition_13(TheoryInputs(L, mu, 20, 20, b_H, gamma, 7))
    assert lhs == -(1 - L * gamma / (mu * b_H))
    assert holds == (gamma <= mu * b_H / L)


@pytest.mark.parametrize("m, b", [(1, 1), (5, 3), (40, 10)])
def test_gamma_at_critical_value_fails(m, b):
    L, mu, b_H, n = 2.0, 0.5, 8, 50
    gamma = mu * b_H / L
    lhs, holds = check_condition_13(TheoryInputs(L, mu, n, b, b_H, gamma, m))
    assert lhs == pytest.approx(m / b * (n - b) / (n - 1), rel=1e-14)
    assert lhs > 0 and not holds


def test_condition_needs_n_two():
    with pytest.raises(ValueError):
        check_condition_13(TheoryInputs(1, 1, 1, 1, 1, 1, 1))


@given(st.floats(1, 100), st.floats(0.01, 1), st.integers(2, 1000), st.integers(1, 50), st.floats(0.01, 10),
       st.integers(1, 500), st.data())
def test_lhs_matches_exact_and_is_reproducible(L, mu_frac, n, b_H, gamma, m, data):
    mu = L * mu_frac
    b = data.draw(st.integers(1, n))
    t = TheoryInputs(L, mu, n, b, b_H, gamma, m)
    lhs, _ = check_condition_13(t)
    assert check_condition_13(t)[0] == lhs
    assert lhs == pytest.approx(float(exact_lhs(L, mu, n, b, b_H, gamma, m)), rel=1e-9, abs=1e-9)


@given(st.floats(1, 100), st.floats(1e-3, 1), st.integers(2, 10_000), st.integers(1, 100), st.data())
def test_feasible_gamma_exists(L, mu_frac, n, b_H, data):
    mu = L * mu_frac
    b = data.draw(st.integers(1, n))
    g = feasible_gamma(L, mu, n, b, b_H, m=1)
    assert g > 0
    assert check_condition_13(TheoryInputs(L, mu, n, b, b_H, g, 1))[1]


def test_rho_examples():
    assert rho_m(TheoryInputs(1, 1, 10, 1, 10, 1.0, 99)) == pytest.approx(0.1, rel=1e-15)
    assert rho_m(TheoryInputs(1, 1, 1000, 1, 40, 0.1, 399)) == pytest.approx(1.0, rel=1e-15)
    assert rho_m(TheoryInputs(1, 1, 10, 1, 1, 1.0, 0)) == 1.0
    rep = report(TheoryInputs(1, 1, 1000, 1, 40, 0.1, 399))
    assert not rep.linear_rate_valid


def test_single_loop_complexity():
    t = TheoryInputs(1, 1, 100, 1, 1, 1.0, 10, epsilon=0.01)
    assert complexity_single_loop(t) == 300
    looser = TheoryInputs(1, 1, 100, 1, 1, 1.0, 10, epsilon=0.02)
    assert complexity_single_loop(looser) <= complexity_single_loop(t)
    doubled = TheoryInputs(1, 1, 100, 1, 2, 1.0, 10, epsilon=0.01)
    assert complexity_single_loop(doubled) - 100 == 2 * (complexity_single_loop(t) - 100)
    # with the optimality gap supplied: m = ceil(2 mu b_H gap / (gamma eps))
    assert complexity_single_loop(t, gap=0.5) == 300


def test_multi_loop_complexity():
    t = TheoryInputs(1, 1, 100, 1, 1, 1.0, 10, epsilon=0.1)
    assert complexity_multi_loop(t) == pytest.approx(110 * math.log(10), rel=1e-14)
    assert complexity_multi_loop(t) == pytest.approx(253.284, abs=1e-3)
    a = complexity_multi_loop(TheoryInputs(1, 1, 100, 1, 1, 1.0, 10, epsilon=0.5))
    b = complexity_multi_loop(TheoryInputs(1, 1, 100, 1, 1, 1.0, 10, epsilon=0.25))
    assert b > a
    with pytest.raises(ValueError):
        complexity_multi_loop(TheoryInputs(1, 1, 100, 1, 1, 1.0, 10, epsilon=1.0))


def test_multi_loop_tiny_epsilon_scaling():
    eps = 1e-8
    f = lambda e: complexity_multi_loop(TheoryInputs(1, 1, 100, 1, 1, 1.0, 10, epsilon=e))
    # strip the log factor; the remaining n + 1/eps term scales as 1/eps
    ratio = (f(eps / 10) / math.log(10 / eps)) / (f(eps) / math.log(1 / eps))
    assert ratio == pytest.approx(10, rel=0.05)


def test_report_text():
    rep = report(TheoryInputs(1, 1, 101, 1, 10, 1.0, 5, epsilon=0.5))
    text = rep.to_text()
    assert "condition_13_lhs = -0.85" in text
    assert "condition_13_holds = true" in text
    assert "gamma_exceeds_epsilon = true" in text
    assert rep.condition_13_holds == (rep.condition_13_lhs <= 0)
    assert rep.linear_rate_valid == (rep.rho_m < 1)
