import cmath
import math

import numpy as np
import pytest

from core.errors import AmplificationError, GridMismatchError
from core.operator_grid import (
    GammaTableCache,
    Grid,
    GridApplier,
    GridFunction,
    TEST_VECTORS,
    apply,
    compose,
    conjugation_check,
    default_test_set,
    fourier,
    fourier_calibration_check,
    g_cubed_check,
    intertwining_check,
    inverse_fourier,
    operator,
    quantum_y_operators,
    refinement_study,
    s5_identity_check,
    scalar,
    theta_commutation_check,
    theta_of,
    unitarity_check,
    volkov_operator_check,
    y_relation_grid_check,
)
from core.params import make_params
from core.qdilog import GammaEvaluator, gamma

SMALL = Grid(512, 24)
MEDIUM = Grid(1024, 24)


@pytest.fixture(scope="module")
def params():
    return make_params(1.0)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(1000, 24)
    with pytest.raises(ValueError):
        Grid(512, 0)
    g = Grid.parse("2048x24")
    assert (g.n_points, g.length) == (2048, 24.0)
    with pytest.raises(ValueError):
        Grid.parse("2048")
    assert Grid(512, 24).refined().n_points == 1024


def test_grid_for_tau_scales_length():
    assert Grid.for_tau(1).length == 24.0
    assert Grid.for_tau(4).length == pytest.approx(48.0)
    assert Grid.for_tau(0.25).length == pytest.approx(48.0)


def test_grid_function_mismatch():
    f = GridFunction.from_callable(SMALL, TEST_VECTORS["gaussian"])
    g = GridFunction.from_callable(MEDIUM, TEST_VECTORS["gaussian"])
    with pytest.raises(GridMismatchError):
        f + g
    with pytest.raises(GridMismatchError):
        GridFunction(SMALL, np.zeros(3))


def test_gaussian_self_dual():
    z = SMALL.points
    g = np.exp(-np.pi * z * z)
    np.testing.assert_allclose(fourier(g, SMALL), g, atol=1e-12)


def test_fourier_of_shifted_gaussian():
    z = SMALL.points
    f = np.exp(-np.pi * (z - 1) ** 2)
    expected = np.exp(-np.pi * z * z - 2j * np.pi * z)
    np.testing.assert_allclose(fourier(f, SMALL), expected, atol=1e-12)


def test_inverse_fourier_round_trip():
    f = TEST_VECTORS["modulated_gaussian"](SMALL.points)
    np.testing.assert_allclose(inverse_fourier(fourier(f, SMALL), SMALL), f, atol=1e-12)


def test_fourier_calibration(params):
    report = fourier_calibration_check(params, SMALL)
    assert report.passed, report.details


def test_compose_cancels_inverse_pairs(params):
    S = operator("S", params)
    assert compose(S, S.inverse()).kind == "scalar"
    h = compose(operator("U", params), S, S.inverse(), operator("V", params))
    assert [f.kind for f in h.factors] == ["U", "V"]
    assert (S ** -2).factors == (operator("Sinv", params), operator("Sinv", params))


def test_unknown_operator(params):
    with pytest.raises(ValueError):
        operator("W", params)


def test_scalar_apply(params):
    f = GridFunction.from_callable(SMALL, TEST_VECTORS["gaussian"])
    out = apply(scalar(2.0), f)
    np.testing.assert_allclose(out.values, 2 * f.values)


def test_u_is_multiplication(params):
    f = GridFunction.from_callable(SMALL, TEST_VECTORS["gaussian"])
    out = apply(operator("U", params), f)
    np.testing.assert_allclose(out.values, f.values * np.exp(-1j * np.pi * SMALL.points / params.omega))


def test_v_shifts_argument(params):
    # V f(z) = f(z + 2ω′) = f(z + i)
    f = GridFunction.from_callable(SMALL, TEST_VECTORS["gaussian"])
    out = apply(operator("V", params), f)
    z = SMALL.points
    expected = np.exp(-np.pi * (z + 2 * params.omega_prime) ** 2)
    assert np.max(np.abs(out.values - expected)) / np.max(np.abs(expected)) < 1e-5


def test_v_amplification_guard(params):
    # 噪声估计 = floor·峰值·max e^{2πk}，频带 |k| < 3，与结果量级之比约 1e-5
    g = GridFunction.from_callable(SMALL, TEST_VECTORS["gaussian"])
    with pytest.raises(AmplificationError):
        GridApplier(params, SMALL, amplification_limit=1e-12).apply(operator("V", params), g)


def test_shifted_spectrum_keeps_connected_band(params):
    ap = GridApplier(params, SMALL)
    z = SMALL.points
    spectrum = ap.shifted_spectrum(np.exp(-np.pi * z * z), 1)
    kept = np.flatnonzero(spectrum)
    assert np.all(np.diff(kept) == 1)
    # e^{−πk²} > 1e-12 只在 |k| < 3 内
    assert np.all(np.abs(z[kept]) < 3)


def test_shifted_symbol_matches_gamma(params):
    ap = GridApplier(params, SMALL)
    ev = GammaEvaluator(params)
    z = SMALL.points
    for n in (1, -1):
        values = ap.symbol("K", n)
        for j in (150, 230, 300, 360):
            expected = gamma(z[j] + 2 * n * params.omega_prime, ev).value
            assert abs(values[j] - expected) < 1e-9 * max(1.0, abs(expected))


def test_symbol_singular_points(params):
    # τ = 1：γ(z − i) 在 z = 0 有极点，γ(z + i) 在 z = 0 为零
    ap = GridApplier(params, SMALL)
    origin = SMALL.n_points // 2
    assert SMALL.points[origin] == 0
    below = ap.symbol("K", -1)
    assert np.isnan(below[origin])
    assert np.count_nonzero(np.isnan(below)) == 1
    assert abs(ap.symbol("K", 1)[origin]) < 1e-12
    assert np.isnan(ap.symbol("Kinv", 1)[origin])


def test_empty_cache_is_used(params):
    cache = GammaTableCache()
    ap = GridApplier(params, SMALL, cache=cache)
    assert ap.cache is cache
    plus, minus = ap.gamma_tables
    assert len(plus) == len(minus) == SMALL.n_points
    assert len(cache) == 1


def test_gamma_table_cache_is_shared(params):
    cache = GammaTableCache()
    a = GridApplier(params, SMALL, cache=cache)
    b = GridApplier(params, SMALL, cache=cache)
    assert a.gamma_tables[0] is b.gamma_tables[0]
    assert len(cache) == 1


def test_quantum_y_operators_shape(params):
    X = quantum_y_operators(params)
    assert [x.kind for x in X[:2]] == ["U", "V"]
    assert len(X) == 5


def test_theta_target_validation(params):
    f = GridFunction.from_callable(SMALL, TEST_VECTORS["gaussian"])
    with pytest.raises(ValueError):
        apply(theta_of("X7", params), f)


def test_unitarity(params):
    report = unitarity_check(params, MEDIUM)
    assert report.passed, report.details


def test_g_cubed(params):
    assert g_cubed_check(params, MEDIUM).passed


def test_s5_identity_medium_grid(params):
    report = s5_identity_check(params, MEDIUM)
    assert report.residual < 1e-3
    for phase in report.details["fitted_phase"].values():
        assert abs(cmath.phase(cmath.exp(1j * (phase - 3 * math.pi / 4)))) < 1e-4


def test_intertwining(params):
    assert intertwining_check(params, MEDIUM).residual < 1e-5


def test_theta_commutation(params):
    assert theta_commutation_check(params, MEDIUM).residual < 1e-5


def test_y_relation_on_grid(params):
    report = y_relation_grid_check(params, MEDIUM)
    assert report.residual < 1e-5, report.details


def test_conjugation_first_step(params):
    report = conjugation_check(params, MEDIUM, 1, with_relations=False)
    assert report.residual < 1e-5, report.details


@pytest.mark.parametrize("i", [4, 5])
def test_conjugation_through_singular_points(params, i):
    report = conjugation_check(params, MEDIUM, i, with_relations=False)
    assert report.residual < 1e-5, report.details


def test_conjugation_index_range(params):
    with pytest.raises(ValueError):
        conjugation_check(params, MEDIUM, 6)


def test_volkov_operator_medium_grid(params):
    report = volkov_operator_check(params, MEDIUM)
    assert report.residual < 1e-3, report.details


@pytest.mark.slow
def test_pentagon_acceptance(params):
    grid = Grid(2048, 24)
    test_set = default_test_set(grid)
    s5 = s5_identity_check(params, grid, test_set)
    assert s5.passed, s5.details
    assert volkov_operator_check(params, grid, test_set).passed
    assert g_cubed_check(params, grid, test_set).passed
    assert fourier_calibration_check(params, grid).passed


@pytest.mark.slow
@pytest.mark.parametrize("i", [1, 2, 3, 4, 5])
def test_conjugation_wraps_around(params, i):
    report = conjugation_check(params, Grid(2048, 24), i)
    assert report.residual < 1e-5, report.details


@pytest.mark.slow
@pytest.mark.parametrize("check", [fourier_calibration_check, g_cubed_check, s5_identity_check, volkov_operator_check])
def test_refinement_decreases(params, check):
    report = refinement_study(check, params, Grid(2048, 24))
    assert report.passed, report.details
