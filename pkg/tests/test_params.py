import cmath
import math

import pytest

from core.errors import ParameterError
from core.params import invariant_residuals, make_params, params_check


def test_tau_one_constants():
    p = make_params(1)
    assert p.omega == pytest.approx(0.5j)
    assert p.omega_prime == pytest.approx(0.5j)
    assert p.omega_dprime == pytest.approx(1j)
    assert p.q == pytest.approx(-1)
    assert p.beta == pytest.approx(math.pi / 6)
    assert p.alpha == pytest.approx(3 * math.pi / 4)
    assert p.c == pytest.approx(cmath.exp(-5j * math.pi / 12))


def test_real_tau_gives_real_alpha_beta():
    p = make_params(0.7)
    assert p.is_real
    assert p.beta.imag == 0.0
    assert p.alpha.imag == 0.0
    assert p.omega.real == pytest.approx(0.0, abs=1e-16)


@pytest.mark.parametrize("tau", [0.5, 1, 2, 0.7 + 0.3j, cmath.exp(1j * math.pi / 6), 2j])
def test_invariants(tau):
    res = invariant_residuals(make_params(tau))
    assert max(res.values()) < 1e-12


def test_c1_c2_product():
    p = make_params(1.3)
    assert -p.c1 * p.c2 == pytest.approx(p.c ** 2, abs=1e-14)


@pytest.mark.parametrize("tau", [0, -1, -2 + 0j, -1 - 1j])
def test_rejects_bad_tau(tau):
    with pytest.raises(ParameterError):
        make_params(tau)


def test_dual():
    p = make_params(2)
    d = p.dual()
    assert d.tau == pytest.approx(0.5)
    # ω 与 ω′ 互换
    assert d.omega == pytest.approx(p.omega_prime)
    assert d.omega_prime == pytest.approx(p.omega)
    assert d.beta == pytest.approx(p.beta)


def test_alpha_readings_recorded():
    readings = make_params(1).alpha_readings()
    assert readings["adopted"] == pytest.approx(3 * math.pi / 4)
    assert readings["middle_member_literal"].imag != 0


def test_params_check_passes():
    report = params_check(make_params(0.5))
    assert report.passed
    assert report.suite == "params"
