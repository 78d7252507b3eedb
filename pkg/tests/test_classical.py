import math

import pytest

from core.classical import (
    ACTION_SUM,
    action_identity_check,
    action_invariance_check,
    action_sum,
    five_term_check,
    l_form_point,
    period_check,
    quasiclassical_gamma_check,
    quasiclassical_ratio,
    rogers_reflection_check,
    solve_stationary,
    stationary_phase_check,
    y_orbit,
)
from core.errors import ConvergenceError, DomainError
from core.report import Lcg
from core.qdilog import euler_E


def test_orbit_unit_point():
    orbit = y_orbit(1, 1)
    assert orbit.x == pytest.approx((1, 1, 2, 3, 2, 1, 1))


def test_orbit_closed_forms():
    orbit = y_orbit(2, 3)
    assert orbit.x[2:5] == pytest.approx((2, 1, 1), abs=1e-14)
    assert orbit.closed_form_residual() < 1e-14


def test_orbit_rejects_non_positive():
    with pytest.raises(DomainError):
        y_orbit(0, 1)
    with pytest.raises(DomainError):
        y_orbit(1, -2)


def test_period_five_on_random_sample():
    rng = Lcg(7)
    for _ in range(100):
        orbit = y_orbit(rng.uniform(0.01, 50), rng.uniform(0.01, 50))
        assert orbit.period_residual() < 1e-12 * max(orbit.u, orbit.v, 1)


def test_period_check():
    report = period_check(samples=1000, seed=0)
    assert report.passed


@pytest.mark.parametrize("form,u,v", [
    ("R-form", 1, 1),
    ("L-form", 0.5, 0.5),
    ("Y-form", 2, 3),
    ("R-form", 0.01, 40),
    ("L-form", 0.9, 0.05),
])
def test_five_term_forms(form, u, v):
    assert five_term_check(form, u, v).residual < 1e-12


def test_five_term_forms_are_consistent():
    u, v = 2.0, 3.0
    r = five_term_check("R-form", u, v).details["signed_residual"]
    y = five_term_check("Y-form", u, v).details["signed_residual"]
    x, w = l_form_point(u, v)
    l_res = five_term_check("L-form", x, w).details["signed_residual"]
    assert r == pytest.approx(y, abs=1e-13)
    assert abs(l_res) < 1e-12


def test_five_term_domain():
    with pytest.raises(DomainError):
        five_term_check("L-form", 1.2, 0.5)
    with pytest.raises(DomainError):
        five_term_check("R-form", -1, 1)
    with pytest.raises(ValueError):
        five_term_check("Q-form", 1, 1)


def test_stationary_solution_matches_orbit():
    p, trail = solve_stationary(0.0, 0.0)
    assert [math.exp(t) for t in p] == pytest.approx([2, 3, 2], abs=1e-12)
    assert trail[-1] < 1e-13


def test_stationary_solver_reports_trail():
    with pytest.raises(ConvergenceError) as info:
        solve_stationary(0.0, 0.0, tol=0.0, max_iter=3)
    assert "残差轨迹" in str(info.value)


@pytest.mark.parametrize("p1,p2", [(0.0, 0.0), (math.log(2), math.log(3)), (-1.5, 2.2)])
def test_stationary_phase_action_sum(p1, p2):
    report = stationary_phase_check(p1, p2)
    assert report.passed, report.details
    assert report.details["action_sum"] == pytest.approx(-math.pi ** 2 / 2, abs=1e-10)
    assert report.provenance["dictionary"]["p3"] == "x3"


def test_action_sum_on_orbit():
    assert action_sum(y_orbit(0.4, 7.0).x[:5]) == pytest.approx(ACTION_SUM, abs=1e-10)


def test_sampled_identities():
    assert action_invariance_check(samples=20, seed=3).passed
    assert action_identity_check(samples=20, seed=3).passed
    assert rogers_reflection_check(samples=20, seed=3).passed


def test_quasiclassical_ratio_at_zero():
    # z = 0：2πiτ·log γ(0) = −πβτ，趋向 E(1) = −π²/12
    tau = 0.05
    rho = quasiclassical_ratio(0.0, tau)
    beta = math.pi / 12 * (tau + 1 / tau)
    assert rho == pytest.approx(-math.pi * beta * tau / euler_E(1.0).real, rel=1e-8)


def test_quasiclassical_convergence():
    report = quasiclassical_gamma_check(0.5, (0.2, 0.1, 0.05))
    errors = report.details["errors"]
    assert errors[0] > errors[1] > errors[2]
    assert report.details["fitted_order"] >= 0.5
    assert report.passed


def test_quasiclassical_needs_decreasing_sequence():
    with pytest.raises(ValueError):
        quasiclassical_gamma_check(0.5, (0.05, 0.1))
