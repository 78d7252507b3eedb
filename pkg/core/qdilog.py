import cmath
import math
import time
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate, special

from core.errors import (
    BranchCutError,
    ConvergenceError,
    DomainError,
    ExtrapolationError,
    ParameterError,
    PoleProximityError,
    RootOfUnityError,
)
from core.logger import get_module_logger
from core.report import VerificationReport

PI2_6 = math.pi ** 2 / 6
_EPS = np.finfo(float).eps
# 截断尾项的目标量级 e^{-39} ~ 1e-17
_TAIL_EXPONENT = 39.0
_CHUNK = 256


@dataclass(frozen=True)
class DilogValue:
    value: complex
    est_error: float

    def __post_init__(self):
        if not (self.est_error >= 0 and math.isfinite(self.est_error)):
            raise ValueError(f"est_error 必须为有限非负数：{self.est_error}")


class GammaEvaluator:
    """
    γ(z) 的积分表示（Eq. (24)）求值器

    积分路径取直线 Im t = δ（从上方绕过 t = 0），在 |Re t| ≤ T 截断。
    默认 δ 取最近非原点极点距离的一半，此时被积函数在路径两侧 δ 宽的带内解析，
    梯形公式指数收敛。Re z < 0 时 δ 收缩（见 offset_for），整条带都直接求积，
    反演公式 Eq. (28) 只作为独立检查使用。method="adaptive" 时改用 scipy 的自适应 quad_vec。
    """

    def __init__(self, params, contour_offset=None, truncation=None, panel_tolerance=1e-13,
                 margin=None, pole_radius=1e-10, method="trapezoid", logger=None):
        self.params = params
        self.logger = get_module_logger(logger)
        self.pole_gap = min(abs((math.pi / params.omega).imag), abs((math.pi / params.omega_prime).imag))
        self.contour_offset = 0.5 * self.pole_gap if contour_offset is None else float(contour_offset)
        if not 0 < self.contour_offset < self.pole_gap:
            raise ParameterError(
                f"contour_offset δ = {self.contour_offset} 必须位于 (0, {self.pole_gap}) 内"
            )
        self.truncation = truncation
        self.panel_tolerance = panel_tolerance
        self.margin = 0.2 * params.strip_height if margin is None else float(margin)
        self.pole_radius = pole_radius
        if method not in ("trapezoid", "adaptive"):
            raise ValueError(f"未知的求积方法：{method}")
        self.method = method

    # ------------------------------------------------------------------
    # 条带内直接求积
    # ------------------------------------------------------------------
    def in_strip(self, z):
        return abs(complex(z).imag) <= self.params.strip_height - self.margin

    def _integrand(self, t, zs):
        p = self.params
        t = t[np.newaxis, :]
        zs = zs[:, np.newaxis]
        return -0.25 * np.exp(1j * t * zs) / (t * np.sin(p.omega * t) * np.sin(p.omega_prime * t))

    def offset_for(self, zs):
        """
        Re z < 0 时 |e^{itz}| = e^{δ|Re z|} 沿路径增长，δ 收缩到 1/|Re z| 以内
        """
        most_negative = -float(np.min(zs.real))
        if most_negative * self.contour_offset <= 1:
            return self.contour_offset
        return 1 / most_negative

    def _nodes(self, zs):
        p = self.params
        rate = p.omega.imag + p.omega_prime.imag - float(np.max(np.abs(zs.imag)))
        if rate <= 0:
            raise ConvergenceError(f"Im z 超出积分收敛带：rate = {rate}")
        T = self.truncation or _TAIL_EXPONENT / rate
        delta = self.offset_for(zs)
        h = 2 * math.pi * delta / (_TAIL_EXPONENT + delta * float(np.max(np.abs(zs.real))))
        k = int(math.ceil(T / h))
        if k > 200000:
            raise ConvergenceError(f"所需节点过多（{2 * k + 1}），无法达到精度")
        return np.arange(-k, k + 1) * h + 1j * delta, h, T, rate

    def _direct_trapezoid(self, zs):
        t, h, T, rate = self._nodes(zs)
        g = self._integrand(t, zs)
        full = h * g.sum(axis=1)
        # 偶数下标节点构成步长 2h 的梯形公式
        mid = (len(t) - 1) // 2
        coarse = 2 * h * g[:, mid % 2::2].sum(axis=1)
        scale = h * np.abs(g).sum(axis=1)
        diff = np.abs(full - coarse)
        # 指数收敛：err(h) ≈ err(2h)^2 / scale
        err = np.minimum(diff, diff ** 2 / np.maximum(scale, 1e-300)) + 4 * _EPS * scale
        err = err + scale * math.exp(-rate * T)
        self.logger.debug(f"梯形求积：{len(t)} 个节点，h = {h:.4g}，T = {T:.4g}")
        return full, err

    def _direct_adaptive(self, zs):
        p = self.params
        rate = p.omega.imag + p.omega_prime.imag - float(np.max(np.abs(zs.imag)))
        T = self.truncation or _TAIL_EXPONENT / rate
        delta = self.offset_for(zs)
        n = len(zs)

        def f(s):
            g = self._integrand(np.array([s + 1j * delta]), zs)[:, 0]
            return np.concatenate([g.real, g.imag])

        res, err = integrate.quad_vec(f, -T, T, epsabs=self.panel_tolerance, epsrel=self.panel_tolerance,
                                      points=[0.0], limit=2000)
        return res[:n] + 1j * res[n:], np.full(n, float(err))

    def direct_log(self, zs):
        """
        条带内直接计算 log γ(z)；按 Re z 排序分块，每块取各自的 δ

        Args:
            zs: 复数数组

        Returns:
            (values, errors) 两个数组
        """
        zs = np.atleast_1d(np.asarray(zs, dtype=complex))
        values = np.empty(len(zs), dtype=complex)
        errors = np.empty(len(zs))
        order = np.argsort(zs.real, kind="stable")
        for start in range(0, len(zs), _CHUNK):
            idx = order[start:start + _CHUNK]
            if self.method == "trapezoid":
                v, e = self._direct_trapezoid(zs[idx])
            else:
                v, e = self._direct_adaptive(zs[idx])
            values[idx] = v
            errors[idx] = e
        return values, errors

    # ------------------------------------------------------------------
    # 极点与延拓
    # ------------------------------------------------------------------
    def nearest_pole(self, z, depth=6):
        p = self.params
        best = None
        for m in range(depth):
            for n in range(depth):
                pole = -p.omega_dprime - 2 * m * p.omega - 2 * n * p.omega_prime
                d = abs(z - pole)
                if best is None or d < best[1]:
                    best = (pole, d)
        return best

    def check_pole(self, z):
        pole, d = self.nearest_pole(z)
        if d < self.pole_radius:
            raise PoleProximityError(f"z = {z} 距离极点 {pole} 仅 {d:.3e}", pole=pole)

    def _shift_step(self):
        """
        向条带平移的步长：优先 ω′ 方向（Eq. (27)），步长越过条带时改用 ω 方向的对偶方程
        """
        p = self.params
        if p.omega_prime.imag <= p.strip_height - self.margin:
            return "omega_prime", p.omega_prime, p.omega
        return "omega", p.omega, p.omega_prime

    def evaluate(self, z, _depth=0):
        """
        γ(z)：条带内直接求积，条带外用函数方程延拓

        Returns:
            (value, est_error, shifts)
        """
        z = complex(z)
        if _depth > 400:
            raise ConvergenceError(f"z = {z} 的延拓步数过多")
        if self.in_strip(z):
            v, e = self.direct_log(np.array([z]))
            val = cmath.exp(v[0])
            return val, abs(val) * e[0], 0

        name, half, other = self._shift_step()
        if z.imag > 0:
            # γ(z) = γ(z − 2ω′)(1 + e^{−iπ(z−ω′)/ω})
            factor = 1 + cmath.exp(-1j * math.pi * (z - half) / other)
            val, err, shifts = self.evaluate(z - 2 * half, _depth + 1)
            out = val * factor
            return out, err * abs(factor) + abs(out) * 4 * _EPS, shifts + 1

        # γ(z) = γ(z + 2ω′) / (1 + e^{−iπ(z+ω′)/ω})
        factor = 1 + cmath.exp(-1j * math.pi * (z + half) / other)
        if abs(factor) < 1e-300:
            raise PoleProximityError(f"z = {z} 处于 γ 的极点上")
        val, err, shifts = self.evaluate(z + 2 * half, _depth + 1)
        out = val / factor
        cond = 1 / abs(factor)
        return out, err * cond + abs(out) * 4 * _EPS * max(1.0, cond), shifts + 1


def gamma(z, ev):
    """
    modular quantum dilogarithm γ(z)

    Args:
        z: 复数
        ev: GammaEvaluator

    Returns:
        DilogValue
    """
    ev.check_pole(complex(z))
    value, err, shifts = ev.evaluate(z)
    if shifts:
        ev.logger.debug(f"γ({z}) 经过 {shifts} 次函数方程平移")
    return DilogValue(complex(value), float(err))


def log_gamma(z, ev):
    """
    Eq. (24) 指数部分本身（连续分支），仅限条带内
    """
    z = complex(z)
    if not ev.in_strip(z):
        raise DomainError(f"log_gamma 只在条带 |Im z| < {ev.params.strip_height - ev.margin:.4g} 内定义")
    v, e = ev.direct_log(np.array([z]))
    return DilogValue(complex(v[0]), float(e[0]))


def gamma_array(zs, ev):
    """
    批量计算 γ(z)，实轴网格走向量化路径

    Returns:
        (values, errors)
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    p = ev.params
    values = np.empty(len(zs), dtype=complex)
    errors = np.empty(len(zs))
    strip = np.abs(zs.imag) <= p.strip_height - ev.margin
    if strip.any():
        v, e = ev.direct_log(zs[strip])
        values[strip] = np.exp(v)
        errors[strip] = np.abs(values[strip]) * e
    for idx in np.flatnonzero(~strip):
        r = gamma(zs[idx], ev)
        values[idx] = r.value
        errors[idx] = r.est_error
    return values, errors


def gamma_mp(z, params, dps=30, offset=None):
    """
    扩展精度（mpmath）求 Eq. (24)，作为高精度基准

    Args:
        z: 条带内的复数
        params: ModularParameter
        dps: 有效数字位数
    """
    with mpmath.workdps(dps):
        w = mpmath.mpc(params.omega)
        wp = mpmath.mpc(params.omega_prime)
        zz = mpmath.mpc(z)
        gap = min(abs(mpmath.im(mpmath.pi / w)), abs(mpmath.im(mpmath.pi / wp)))
        delta = gap / 2 if offset is None else mpmath.mpf(offset)
        rate = mpmath.im(w) + mpmath.im(wp) - abs(mpmath.im(zz))
        T = (dps * mpmath.log(10) + 10) / rate

        def f(s):
            t = s + 1j * delta
            return mpmath.exp(1j * t * zz) / (t * mpmath.sin(w * t) * mpmath.sin(wp * t))

        pts = mpmath.linspace(-T, T, 41)
        val = -mpmath.quad(f, pts) / 4
        return complex(mpmath.exp(val))


# ----------------------------------------------------------------------
# Θ(u)
# ----------------------------------------------------------------------
def z_of_u(u, params):
    """
    Θ 与 γ 的变量对应：z(u) = −(ω/(iπ))·Log u（主值分支）
    """
    u = complex(u)
    if u.imag == 0 and u.real < 0:
        raise BranchCutError(f"u = {u} 位于主值对数的割线上")
    return -(params.omega / (1j * math.pi)) * cmath.log(u)


def theta(u, params, ev=None):
    """
    Θ(u) = γ(z(u))（Eq. (26)）
    """
    u = complex(u)
    if u == 0:
        return DilogValue(1 + 0j, 0.0)
    ev = ev or GammaEvaluator(params)
    return gamma(z_of_u(u, params), ev)


def theta_product(u, params, tol=None):
    """
    Θ(u) 的无穷乘积形式 ∏(1+q^{2n+1}u)/∏(1+q̃^{2n+1}ũ)，仅 Im τ > 0

    截断由 mpmath.qp 控制（丢弃因子偏离 1 小于工作精度）
    """
    tau = params.tau
    if tau.imag <= 0:
        raise ParameterError(f"乘积形式要求 Im τ > 0，当前 τ = {tau}")
    u = complex(u)
    if u == 0:
        return DilogValue(1 + 0j, 0.0)
    u_tilde = cmath.exp(cmath.log(u) / tau)
    q = mpmath.mpc(params.q)
    qt = mpmath.mpc(params.q_tilde)
    num = mpmath.qp(-q * mpmath.mpc(u), q * q)
    den = mpmath.qp(-qt * mpmath.mpc(u_tilde), qt * qt)
    value = complex(num / den)
    est = (tol if tol is not None else 8 * _EPS) * abs(value)
    return DilogValue(value, float(est))


def theta_relation_check(params, u=0.5, ev=None, tolerance=1e-8):
    """
    Eq. (31)：Θ(qu)/Θ(q⁻¹u) = 1/(1+u)
    """
    start = time.time()
    ev = ev or GammaEvaluator(params)
    lhs = theta(params.q * u, params, ev).value / theta(u / params.q, params, ev).value
    rhs = 1 / (1 + u)
    return VerificationReport(
        suite="theta",
        identity="Eq. (31)",
        params=params.echo(),
        residual=abs(lhs - rhs),
        tolerance=tolerance,
        provenance={"method": ev.method, "u": u},
        details={"lhs": lhs, "rhs": rhs},
        wall_time=time.time() - start,
    )


def theta_cross_check(params, n_points=20, z_range=(-1.5, 1.5), ev=None, tolerance=1e-8):
    """
    Im τ > 0 时乘积形式与积分形式的 Θ 互相核对

    取 u = e^{−iπz/ω}，z 为实数；|z| 需足够小使 Log u 停在主值分支
    """
    start = time.time()
    ev = ev or GammaEvaluator(params)
    zs = np.linspace(z_range[0], z_range[1], n_points)
    worst = 0.0
    worst_u = None
    for z in zs:
        u = cmath.exp(-1j * math.pi * z / params.omega)
        a = theta(u, params, ev).value
        b = theta_product(u, params).value
        r = abs(a - b) / max(1.0, abs(b))
        if r > worst:
            worst, worst_u = r, u
    return VerificationReport(
        suite="theta",
        identity="Eq. (26) product form",
        params=params.echo(),
        residual=worst,
        tolerance=tolerance,
        provenance={"method": ev.method, "product": "mpmath.qp", "n_points": n_points},
        details={"worst_u": worst_u},
        wall_time=time.time() - start,
    )


# ----------------------------------------------------------------------
# 紧致 q-指数 e(x)
# ----------------------------------------------------------------------
def q_exponential_coefficients(q, order, ctx=None):
    """
    Eq. (1) 的系数 q^{n(n−1)/2}/∏_{k=1}^{n}(q^{−k} − q^{k})，n = 0..order

    Args:
        ctx: mpmath 上下文；给出时系数按该上下文的精度计算
    """
    if order < 0:
        raise ValueError("order 必须非负")
    q = complex(q) if ctx is None else ctx.mpc(q)
    coeffs = [q ** 0]
    for n in range(1, order + 1):
        den = q ** (-n) - q ** n
        if abs(q ** (2 * n) - 1) < 1e-14:
            raise RootOfUnityError(f"q^{2 * n} = 1，Eq. (1) 的分母为0")
        coeffs.append(coeffs[-1] * q ** (n - 1) / den)
    return coeffs


def q_exponential(x, q, order):
    """
    Eq. (1) 截到 x^order 的部分和
    """
    coeffs = q_exponential_coefficients(q, order)
    x = complex(x)
    acc = 0j
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


def q_exponential_product(x, q, tol=1e-17, max_terms=100000):
    """
    Eq. (2) 乘积形式 ∏(1+q^{2n+1}x)，|q| < 1
    """
    q = complex(q)
    if abs(q) >= 1:
        raise DomainError("乘积形式要求 |q| < 1")
    x = complex(x)
    acc = 1 + 0j
    term = q * x
    q2 = q * q
    for _ in range(max_terms):
        if abs(term) < tol:
            return acc
        acc *= 1 + term
        term *= q2
    raise ConvergenceError("q-乘积未在给定项数内收敛")


def q_exponential_exp(x, q, order):
    """
    指数形式 exp Σ x^n(−1)^n / (n(q^n − q^{−n}))
    """
    q = complex(q)
    x = complex(x)
    s = 0j
    for n in range(1, order + 1):
        den = n * (q ** n - q ** (-n))
        if abs(den) < 1e-300:
            raise RootOfUnityError(f"q^{2 * n} = 1")
        s += x ** n * (-1) ** n / den
    return cmath.exp(s)


# ----------------------------------------------------------------------
# Euler / Rogers 双对数
# ----------------------------------------------------------------------
def euler_dilog(u):
    """
    Li₂(u)，割线 [1, ∞)；Li₂(u) = spence(1 − u)
    """
    arr = np.asarray(u, dtype=complex)
    out = special.spence(1 - arr)
    if np.ndim(u) == 0:
        return complex(out)
    return out


def euler_E(u):
    """
    E(u) = Li₂(−u)
    """
    arr = np.asarray(u, dtype=complex)
    out = special.spence(1 + arr)
    if np.ndim(u) == 0:
        return complex(out)
    return out


def rogers_L(x):
    """
    Rogers 双对数 L(x) = Li₂(x) + ½ ln x ln(1−x)，0 ≤ x ≤ 1
    """
    x = float(x)
    if not 0 <= x <= 1:
        raise DomainError(f"L(x) 只在 [0,1] 上定义，x = {x}")
    if x == 0:
        return 0.0
    if x == 1:
        return PI2_6
    return euler_dilog(x).real + 0.5 * math.log(x) * math.log1p(-x)


def rogers_R(u):
    """
    R(u) = L(u/(1+u))，u ≥ 0
    """
    u = float(u)
    if u < 0:
        raise DomainError(f"R(u) 只在 u ≥ 0 上定义，u = {u}")
    if math.isinf(u):
        return PI2_6
    return rogers_L(u / (1 + u))


# ----------------------------------------------------------------------
# 零点与极点
# ----------------------------------------------------------------------
def _richardson(samples, order=2):
    """
    Richardson 外推：偏移逐次减半，r(ε) = r₀ + a₁ε + a₂ε² + …，逐层消去前 order 阶
    """
    table = list(samples)
    for j in range(1, order + 1):
        w = 2 ** j
        table = [(w * table[k + 1] - table[k]) / (w - 1) for k in range(len(table) - 1)]
    return table


def residue_check(params, ev=None, base_offset=1e-3, levels=6, tolerance=1e-6, stability=1e-5):
    """
    零点与极点：γ(z) ≈ c₁(z − ω″)（z → ω″），γ(z) ≈ c₂/(z + ω″)（z → −ω″）

    在逐次减半的偏移上取值并外推，拟合 c₁、c₂ 与 params.c1、params.c2 比较
    """
    start = time.time()
    ev = ev or GammaEvaluator(params)
    p = params
    direction = cmath.exp(0.25j * math.pi)
    offsets = [base_offset * 0.5 ** k * direction for k in range(levels)]
    r1 = [gamma(p.omega_dprime + e, ev).value / e for e in offsets]
    r2 = [gamma(-p.omega_dprime + e, ev).value * e for e in offsets]
    ex1 = _richardson(r1)
    ex2 = _richardson(r2)
    for name, ex in (("c1", ex1), ("c2", ex2)):
        drift = abs(ex[-1] - ex[-2]) / abs(ex[-1])
        if drift > stability:
            raise ExtrapolationError(f"{name} 外推不稳定，相对漂移 {drift:.3e}")
    c1_fit, c2_fit = ex1[-1], ex2[-1]
    rel1 = abs(c1_fit / p.c1 - 1)
    rel2 = abs(c2_fit / p.c2 - 1)
    prod = abs(-c1_fit * c2_fit - p.c ** 2)
    return VerificationReport(
        suite="gamma-properties",
        identity="Eq. (mt)",
        params=p.echo(),
        residual=max(rel1, rel2),
        tolerance=tolerance,
        provenance={"method": "Richardson", "order": 2, "offsets": [abs(o) for o in offsets]},
        details={"c1_fit": c1_fit, "c2_fit": c2_fit, "c1_rel": rel1, "c2_rel": rel2, "c_squared_residual": prod},
        wall_time=time.time() - start,
    )


# ----------------------------------------------------------------------
# 性质 1–5
# ----------------------------------------------------------------------
DEFAULT_SAMPLE_SPEC = {
    "z_min": -5.0,
    "z_max": 5.0,
    "n_points": 201,
    "asymptotic_z": [1.0, 2.0, 3.0, 4.0, 5.0],
    "tolerance": 1e-8,
    "asymptotic_tolerance": 1e-6,
}


def _report(identity, params, residual, tolerance, start, details=None, provenance=None):
    return VerificationReport(
        suite="gamma-properties",
        identity=identity,
        params=params.echo(),
        residual=residual,
        tolerance=tolerance,
        provenance=provenance or {},
        details=details or {},
        wall_time=time.time() - start,
    )


def property_suite(params, sample_spec=None, ev=None):
    """
    逐条检查函数方程、反演、幺正性与渐近，失败只记录在报告中，不抛出

    Returns:
        VerificationReport 列表
    """
    spec = dict(DEFAULT_SAMPLE_SPEC)
    spec.update(sample_spec or {})
    ev = ev or GammaEvaluator(params)
    p = params
    tol = spec["tolerance"]
    zs = np.linspace(spec["z_min"], spec["z_max"], spec["n_points"])
    prov = {"method": ev.method, "contour_offset": ev.contour_offset, "n_points": len(zs)}
    reports = []

    # 1. 函数方程 Eq. (27) 及其 ω ↔ ω′ 对偶；右端量级可达 e^{2π√τ|z|}，取相对残差
    for identity, half, other in (("Eq. (27)", p.omega_prime, p.omega), ("Eq. (27) dual", p.omega, p.omega_prime)):
        start = time.time()
        up, _ = gamma_array(zs + half, ev)
        down, _ = gamma_array(zs - half, ev)
        rhs = 1 + np.exp(-1j * np.pi * zs / other)
        res = np.max(np.abs(up / (down * rhs) - 1))
        reports.append(_report(identity, p, res, tol, start, provenance=prov))

    # 2. 反演公式 Eq. (28)，两侧都直接求积
    start = time.time()
    plus, _ = gamma_array(zs, ev)
    minus, _ = gamma_array(-zs, ev)
    rhs = np.exp(1j * p.beta + 1j * np.pi * zs ** 2)
    res = np.max(np.abs(plus * minus / rhs - 1))
    reports.append(_report("Eq. (28)", p, res, tol, start, provenance=prov))

    start = time.time()
    g0 = gamma(0.0, ev)
    res = abs(g0.value - cmath.exp(0.5j * p.beta))
    reports.append(_report("Eq. (28) at z = 0", p, res, min(tol, 1e-10), start,
                           details={"gamma0": g0.value, "est_error": g0.est_error}, provenance=prov))

    # 3. 幺正性（实 τ，实 z）
    if p.is_real:
        start = time.time()
        res = np.max(np.abs(np.abs(plus) - 1))
        reports.append(_report("unitarity", p, res, tol, start, provenance=prov))

    # 4. Re z → ∞ 时 γ → 1
    start = time.time()
    az = spec["asymptotic_z"]
    dev = [abs(gamma(z, ev).value - 1) for z in az]
    monotone = all(dev[k + 1] <= dev[k] * 1.0001 + 1e-15 for k in range(len(dev) - 1))
    res = dev[-1] if monotone else math.inf
    reports.append(_report("Eq. (asymp)", p, res, spec["asymptotic_tolerance"], start,
                           details={"z": az, "deviation": dev, "monotone": monotone}, provenance=prov))

    return reports
