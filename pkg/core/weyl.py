import time
from dataclasses import dataclass, field

import mpmath

from core.errors import DomainError, RootOfUnityError, WeylMismatchError
from core.logger import get_module_logger
from core.qdilog import q_exponential_coefficients
from core.report import VerificationReport

DEFAULT_MAX_DEGREE = 12
COEFF_TOLERANCE = 1e-12
# 正规序系数按 q^{−k²/2} 增长，而 e(x) 的系数按 q^{n²} 衰减，双精度不足以逐系数比较
WORKING_DPS = 80
# 相对最大系数低于此值的系数按0处理
ZERO_FLOOR = 1e-40

# 独立的 mpmath 上下文，精度不受其它线程里 workdps 的影响
MP = mpmath.MPContext()
MP.dps = WORKING_DPS
_ROUNDOFF = MP.mpf(10) ** (10 - WORKING_DPS)


@dataclass(frozen=True)
class WeylElement:
    """
    Weyl 对 UV = q²VU 上的截断 Laurent 多项式

    coeffs 以 (a, b) -> 系数 存储正规序单项式 U^a V^b，只保留 |a| + |b| ≤ max_degree 的项。
    系数是 WORKING_DPS 位的 mpmath 复数，q 本身保留为 complex。
    """
    q: complex
    coeffs: dict = field(default_factory=dict)
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        object.__setattr__(self, "q", complex(self.q))
        clean = {}
        for (a, b), c in self.coeffs.items():
            if c != 0 and abs(a) + abs(b) <= self.max_degree:
                clean[(int(a), int(b))] = MP.mpc(c)
        object.__setattr__(self, "coeffs", clean)

    @property
    def q_mp(self):
        return MP.mpc(self.q)

    @classmethod
    def monomial(cls, q, a, b, coeff=1.0, max_degree=DEFAULT_MAX_DEGREE):
        return cls(q, {(a, b): coeff}, max_degree)

    @classmethod
    def scalar(cls, q, value, max_degree=DEFAULT_MAX_DEGREE):
        return cls(q, {(0, 0): value}, max_degree)

    @classmethod
    def generators(cls, q, max_degree=DEFAULT_MAX_DEGREE):
        """
        返回 (U, V)
        """
        return cls.monomial(q, 1, 0, max_degree=max_degree), cls.monomial(q, 0, 1, max_degree=max_degree)

    def _like(self, coeffs):
        return WeylElement(self.q, coeffs, self.max_degree)

    def _check(self, other):
        if not isinstance(other, WeylElement):
            return
        if other.q != self.q or other.max_degree != self.max_degree:
            raise WeylMismatchError(
                f"参数不一致：q = {self.q} / {other.q}，max_degree = {self.max_degree} / {other.max_degree}"
            )

    def _coerce(self, other):
        if isinstance(other, WeylElement):
            self._check(other)
            return other
        return self._like({(0, 0): other})

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return self._like(out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, WeylElement):
            return weyl_mul(self, other)
        return self._like({k: c * other for k, c in self.coeffs.items()})

    def __rmul__(self, other):
        if isinstance(other, WeylElement):
            return weyl_mul(other, self)
        return self._like({k: other * c for k, c in self.coeffs.items()})

    def __pow__(self, n):
        if n < 0:
            return weyl_inverse(self) ** (-n)
        out = self._like({(0, 0): 1})
        for _ in range(n):
            out = weyl_mul(out, self)
        return out

    def coefficient(self, a, b):
        return complex(self.coeffs.get((a, b), 0))

    def normal_ordered(self):
        """
        正规序是存储形式本身，重复正规化为恒等
        """
        return self._like(dict(self.coeffs))

    def is_positive(self):
        """
        所有单项式 a ≥ 0、b ≥ 0 且不含常数项
        """
        return all(a >= 0 and b >= 0 and a + b >= 1 for a, b in self.coeffs)

    def evaluate_commuting(self, u, v):
        """
        把 U、V 换成可交换的数值 u、v
        """
        return sum(complex(c) * u ** a * v ** b for (a, b), c in self.coeffs.items())

    def __repr__(self):
        terms = " + ".join(f"({complex(c):.4g})U^{a}V^{b}" for (a, b), c in sorted(self.coeffs.items()))
        return f"WeylElement[{terms or '0'}]"


def weyl_mul(x, y):
    """
    正规序乘法：U^a V^b · U^c V^d = q^{−2bc} U^{a+c} V^{b+d}
    """
    x._check(y)
    q2 = x.q_mp ** 2
    phases = {}
    out = {}
    D = x.max_degree
    for (a, b), cx in x.coeffs.items():
        for (c, d), cy in y.coeffs.items():
            key = (a + c, b + d)
            if abs(key[0]) + abs(key[1]) > D:
                continue
            k = -b * c
            if k not in phases:
                phases[k] = q2 ** k
            out[key] = out.get(key, 0) + cx * cy * phases[k]
    return x._like(out)


def _monomial_inverse(q, a, b, coeff, max_degree):
    # (c U^a V^b)^{-1} = c^{-1} q^{-2ab} U^{-a} V^{-b}
    return WeylElement(q, {(-a, -b): MP.mpc(q) ** (-2 * a * b) / MP.mpc(coeff)}, max_degree)


def weyl_inverse(x):
    """
    截断几何级数求逆

    把 x 写成 m(1 + n)，m 取带符号次数 a + b 最小的单项式，n = m⁻¹x − 1 的每一项次数必须 ≥ 1，
    于是 x⁻¹ = Σ (−n)^k m⁻¹。

    Raises:
        DomainError: x 为 0 或首项结构不可逆
    """
    if not x.coeffs:
        raise DomainError("0 不可逆")
    lowest = min(a + b for a, b in x.coeffs)
    leading = [k for k in x.coeffs if k[0] + k[1] == lowest]
    if len(leading) != 1:
        raise DomainError(f"最低次数 {lowest} 上有多个单项式 {leading}，无法取首项求逆")
    a, b = leading[0]
    m_inv = _monomial_inverse(x.q, a, b, x.coeffs[(a, b)], x.max_degree)
    n = weyl_mul(m_inv, x) - 1
    # m⁻¹m 的舍入残差
    n = x._like({k: c for k, c in n.coeffs.items() if k[0] + k[1] >= 1 or abs(c) > _ROUNDOFF})
    if any(i + j < 1 for i, j in n.coeffs):
        raise DomainError("m⁻¹x − 1 含非正次数项，几何级数不收敛")
    acc = x._like({(0, 0): 1})
    power = acc
    for _ in range(x.max_degree):
        power = weyl_mul(power, -n)
        if not power.coeffs:
            break
        acc = acc + power
    return weyl_mul(acc, m_inv)


def e_of(x, order):
    """
    Eq. (1) 的部分和，x^n 在代数中计算

    Args:
        x: 严格正的 WeylElement
        order: 级数截断阶

    Raises:
        DomainError: x 非严格正，级数不会截断
    """
    if not x.is_positive():
        raise DomainError("e(x) 的自变量必须严格正（a, b ≥ 0 且无常数项）")
    coeffs = q_exponential_coefficients(x.q, order, ctx=MP)
    acc = x._like({(0, 0): 1})
    power = acc
    for n in range(1, order + 1):
        power = weyl_mul(power, x)
        if not power.coeffs:
            break
        acc = acc + coeffs[n] * power
    return acc


def quantum_y_elements(q, max_degree=DEFAULT_MAX_DEGREE):
    """
    Eq. (19) 的闭式解 X₁..X₅，乘积顺序照原式

    Returns:
        [X1, X2, X3, X4, X5]
    """
    U, V = WeylElement.generators(q, max_degree)
    U_inv = _monomial_inverse(complex(q), 1, 0, 1, max_degree)
    V_inv = _monomial_inverse(complex(q), 0, 1, 1, max_degree)
    X3 = U_inv * (1 + q * V)
    X4 = U_inv * (U + V + 1 / MP.mpc(q)) * V_inv
    X5 = (1 + q * U) * V_inv
    return [U, V, X3, X4, X5]


def max_discrepancy(x, y, degree=None):
    """
    逐系数相对差的最大值，两边相等的系数直接跳过

    两边都不超过 ZERO_FLOOR·最大系数的单项式按0处理，以整体尺度衡量

    Args:
        degree: 只比较 |a| + |b| ≤ degree 的单项式
    """
    x._check(y)
    keys = set(x.coeffs) | set(y.coeffs)
    if degree is not None:
        keys = {k for k in keys if abs(k[0]) + abs(k[1]) <= degree}
    zero = MP.mpc(0)
    scale = max([abs(x.coeffs.get(k, zero)) for k in keys] + [abs(y.coeffs.get(k, zero)) for k in keys] + [MP.mpf(0)])
    floor = ZERO_FLOOR * scale
    worst = MP.mpf(0)
    for k in keys:
        l, r = x.coeffs.get(k, zero), y.coeffs.get(k, zero)
        if l == r:
            continue
        denom = max(abs(l), abs(r), floor)
        worst = max(worst, abs(l - r) / denom)
    return float(worst)


def y_recurrence(elements, steps):
    """
    由 X_{i+2} = X_i⁻¹(1 + qX_{i+1}) 继续递推 steps 步
    """
    seq = list(elements)
    for _ in range(steps):
        x_i, x_next = seq[-2], seq[-1]
        seq.append(weyl_inverse(x_i) * (1 + x_i.q * x_next))
    return seq


def _report(identity, q, residual, start, tolerance=COEFF_TOLERANCE, details=None, provenance=None):
    return VerificationReport(
        suite="formal",
        identity=identity,
        params={"q": [complex(q).real, complex(q).imag]},
        residual=residual,
        tolerance=tolerance,
        provenance=provenance or {},
        details=details or {},
        wall_time=time.time() - start,
    )


def _check_q(q):
    q = complex(q)
    if abs(abs(q) - 1) < 1e-12:
        raise RootOfUnityError(f"|q| = 1 时 e(x) 的系数分母可能为0：q = {q}")
    return q


def schutzenberger_check(q, order):
    """
    Eq. (5)：e(U)e(V) = e(U + V)
    """
    start = time.time()
    q = _check_q(q)
    D = max(order, 2)
    U, V = WeylElement.generators(q, D)
    lhs = e_of(U, order) * e_of(V, order)
    rhs = e_of(U + V, order)
    res = max_discrepancy(lhs, rhs, order)
    return _report("Eq. (5)", q, res, start, details={"order": order},
                   provenance={"method": "truncated Weyl algebra", "max_degree": D})


def pentagon_formal_check(q, order):
    """
    Eq. (7)：e(V)e(U) = e(U)e(q⁻¹UV)e(V)
    """
    start = time.time()
    q = _check_q(q)
    D = max(order, 2)
    U, V = WeylElement.generators(q, D)
    lhs = e_of(V, order) * e_of(U, order)
    rhs = e_of(U, order) * e_of((U * V) * (1 / MP.mpc(q)), order) * e_of(V, order)
    res = max_discrepancy(lhs, rhs, order)
    return _report("Eq. (7)", q, res, start, details={"order": order},
                   provenance={"method": "truncated Weyl algebra", "max_degree": D})


def volkov_formal_check(q, order, max_degree=None, logger=None):
    """
    Eq. (20)：e(X₁)e(X₂) = e(X₅⁻¹)e(X₄⁻¹)e(X₃⁻¹)

    X_i⁻¹ 都落在 a, b ≥ 0 的正锥里，所以两边截断到 order 阶是精确的。
    """
    logger = get_module_logger(logger)
    start = time.time()
    q = _check_q(q)
    if abs(q) >= 1:
        raise DomainError(f"Volkov 形式检查要求 |q| < 1，当前 |q| = {abs(q):.4g}")
    if order < 0:
        raise ValueError("order 必须非负")
    D = max(order, 2)
    if max_degree is not None and max_degree < D:
        logger.warning(f"截断阶 {max_degree} 不足以容纳 {order} 阶的逆级数，改用 {D}")
    elif max_degree is not None:
        D = max_degree
    X1, X2, X3, X4, X5 = quantum_y_elements(q, D)
    inv3, inv4, inv5 = weyl_inverse(X3), weyl_inverse(X4), weyl_inverse(X5)
    lhs = e_of(X1, order) * e_of(X2, order)
    rhs = e_of(inv5, order) * e_of(inv4, order) * e_of(inv3, order)
    res = max_discrepancy(lhs, rhs, order)
    logger.debug(f"Eq. (20) q = {q} order = {order}：最大系数差 {res:.3e}")
    return _report("Eq. (20)", q, res, start,
                   details={"order": order, "lhs_terms": len(lhs.coeffs), "rhs_terms": len(rhs.coeffs)},
                   provenance={"method": "truncated Weyl algebra", "max_degree": D})


def y_relation_check(q, max_degree=DEFAULT_MAX_DEGREE):
    """
    Eq. (17) 对 i = 1, 2, 3 在代数中逐系数成立
    """
    start = time.time()
    q = complex(q)
    X = quantum_y_elements(q, max_degree)
    residuals = {}
    for i in range(3):
        lhs = X[i] * X[i + 2]
        rhs = 1 + q * X[i + 1]
        residuals[f"i={i + 1}"] = max_discrepancy(lhs, rhs)
    return _report("Eq. (17)", q, max(residuals.values()), start, details=residuals,
                   provenance={"method": "truncated Weyl algebra", "max_degree": max_degree})


def y_periodicity_check(q, max_degree=16):
    """
    从 X₁、X₂ 出发递推五步回到 X₆ = X₁、X₇ = X₂

    递推中的逆是无穷级数，只比较 |a| + |b| ≤ max_degree // 2 的系数
    """
    start = time.time()
    q = complex(q)
    U, V = WeylElement.generators(q, max_degree)
    seq = y_recurrence([U, V], 5)
    closed = quantum_y_elements(q, max_degree)
    degree = max_degree // 2
    residuals = {f"X{i + 1}": max_discrepancy(seq[i], closed[i], degree) for i in range(2, 5)}
    residuals["X6=X1"] = max_discrepancy(seq[5], U, degree)
    residuals["X7=X2"] = max_discrepancy(seq[6], V, degree)
    return _report("Eq. (17) period 5", q, max(residuals.values()), start, details=residuals,
                   provenance={"method": "recurrence", "max_degree": max_degree, "compared_degree": degree})


def commuting_orbit(u, v, q=1.0):
    """
    把 U、V 换成可交换数值后的 X₁..X₅，q → 1 时退化为经典 Y-系统轨道
    """
    q = complex(q)
    return [
        complex(u),
        complex(v),
        (1 + q * v) / u,
        (1 / q + u + v) / (u * v),
        (1 + q * u) / v,
    ]
