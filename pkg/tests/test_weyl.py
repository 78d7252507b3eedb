import pytest

from core.errors import DomainError, RootOfUnityError, WeylMismatchError
from core.report import Lcg
from core.weyl import (
    ZERO_FLOOR,
    WeylElement,
    commuting_orbit,
    e_of,
    max_discrepancy,
    pentagon_formal_check,
    quantum_y_elements,
    schutzenberger_check,
    volkov_formal_check,
    weyl_inverse,
    weyl_mul,
    y_periodicity_check,
    y_recurrence,
    y_relation_check,
)

FORMAL_Q = [0.3, 0.3 + 0.2j]


def test_commutation_relation():
    q = 0.3 + 0.2j
    U, V = WeylElement.generators(q)
    # UV = q²VU
    assert max_discrepancy(U * V, (q * q) * (V * U)) < 1e-15


def test_product_rule():
    q = 0.4
    x = WeylElement.monomial(q, 1, 2)
    y = WeylElement.monomial(q, 3, 1)
    prod = weyl_mul(x, y)
    assert prod.coefficient(4, 3) == pytest.approx(q ** (-2 * 2 * 3))


def test_normal_ordering_idempotent():
    q = 0.3
    U, V = WeylElement.generators(q)
    x = (V * U + U * V * V) * 2.5
    assert x.normal_ordered().coeffs == x.coeffs


def test_truncation_drops_high_degree():
    q = 0.5
    U, V = WeylElement.generators(q, max_degree=3)
    x = U ** 4
    assert x.coeffs == {}


def test_mismatched_elements():
    U1, _ = WeylElement.generators(0.3)
    U2, _ = WeylElement.generators(0.4)
    with pytest.raises(WeylMismatchError):
        U1 + U2


def test_inverse_of_one_plus_u():
    q = 0.3
    U, _ = WeylElement.generators(q, max_degree=8)
    inv = weyl_inverse(1 + U)
    # Σ (−U)^k
    for k in range(9):
        assert inv.coefficient(k, 0) == pytest.approx((-1) ** k)
    assert max_discrepancy(inv * (1 + U), WeylElement.scalar(q, 1, 8), 8) < 1e-12


def test_inverse_errors():
    q = 0.3
    U, V = WeylElement.generators(q)
    with pytest.raises(DomainError):
        weyl_inverse(WeylElement(q))
    with pytest.raises(DomainError):
        weyl_inverse(U + V)


def test_negative_power():
    q = 0.3 + 0.1j
    U, V = WeylElement.generators(q)
    x = U * V
    assert max_discrepancy(x ** -1 * x, WeylElement.scalar(q, 1)) < 1e-14


def test_e_of_requires_positive():
    q = 0.3
    U, _ = WeylElement.generators(q)
    with pytest.raises(DomainError):
        e_of(1 + U, 4)


@pytest.mark.parametrize("q", FORMAL_Q)
def test_schutzenberger(q):
    report = schutzenberger_check(q, 6)
    assert report.passed
    assert report.residual < 1e-12


@pytest.mark.parametrize("q", FORMAL_Q)
def test_pentagon(q):
    assert pentagon_formal_check(q, 6).residual < 1e-12


def test_pentagon_fails_for_wrong_order():
    q = 0.3
    U, V = WeylElement.generators(q, 6)
    lhs = e_of(V, 6) * e_of(U, 6)
    rhs = e_of(U, 6) * e_of(V, 6)
    assert max_discrepancy(lhs, rhs, 6) > 1e-3


@pytest.mark.parametrize("q", FORMAL_Q)
def test_volkov_formal(q):
    report = volkov_formal_check(q, 6)
    assert report.passed, report.residual
    assert report.identity == "Eq. (20)"


def test_volkov_formal_rejects_root_of_unity():
    with pytest.raises(RootOfUnityError):
        volkov_formal_check(1j, 4)


@pytest.mark.parametrize("q", FORMAL_Q)
def test_y_relation_exact(q):
    report = y_relation_check(q)
    assert report.residual < 1e-14


def test_y_closed_forms_follow_recurrence():
    q = 0.3 + 0.2j
    U, V = WeylElement.generators(q, 16)
    seq = y_recurrence([U, V], 3)
    closed = quantum_y_elements(q, 16)
    for i in range(2, 5):
        assert max_discrepancy(seq[i], closed[i], 8) < 1e-12


@pytest.mark.parametrize("q", FORMAL_Q)
def test_y_periodicity(q):
    report = y_periodicity_check(q)
    assert report.passed
    assert all(r < 1e-12 for r in report.details.values()), report.details


def test_commuting_orbit_classical_limit():
    x = commuting_orbit(2.0, 3.0)
    assert [v.real for v in x] == pytest.approx([2.0, 3.0, 2.0, 1.0, 1.0])


def test_commuting_limit_of_elements():
    q = 0.9
    X = quantum_y_elements(q, 6)
    u, v = 1.3, 0.7
    for elem, value in zip(X, commuting_orbit(u, v, q)):
        assert elem.evaluate_commuting(u, v) == pytest.approx(value)


def random_element(rng, q, max_degree):
    coeffs = {}
    for _ in range(3):
        a = int(rng.uniform(-2, 3))
        b = int(rng.uniform(-2, 3))
        if abs(a) + abs(b) <= 3:
            coeffs[(a, b)] = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
    return WeylElement(q, coeffs, max_degree)


@pytest.mark.parametrize("q", FORMAL_Q)
def test_weyl_mul_associative(q):
    rng = Lcg(11)
    for _ in range(10):
        x, y, z = (random_element(rng, q, 20) for _ in range(3))
        left = weyl_mul(weyl_mul(x, y), z)
        right = weyl_mul(x, weyl_mul(y, z))
        assert max_discrepancy(left, right) < 1e-25


def test_discrepancy_ignores_noise_below_floor():
    q = 0.3
    one = WeylElement.scalar(q, 1)
    noisy = one + WeylElement.monomial(q, 1, 0, ZERO_FLOOR * 1e-20)
    assert max_discrepancy(noisy, one) < 1e-15
    genuine = one + WeylElement.monomial(q, 1, 0, 1e-30)
    assert max_discrepancy(genuine, one) == pytest.approx(1.0)


@pytest.mark.slow
def test_volkov_formal_higher_order():
    report = volkov_formal_check(0.3 + 0.2j, 7, max_degree=12)
    assert report.passed, report.residual
    assert report.provenance["max_degree"] == 12
