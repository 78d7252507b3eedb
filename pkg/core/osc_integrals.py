import cmath
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from core.errors import ConvergenceError, DomainError
from core.logger import get_module_logger
from core.qdilog import GammaEvaluator, gamma
from core.report import VerificationReport

TAIL_METHODS = ("asymptotic_subtraction", "contour_tilt")
# 射线截断处被积函数衰减到 e^{-30}
_RAY_EXPONENT = 30.0


@dataclass(frozen=True)
class OscillatorySpec:
    """
    振荡积分的数值策略

    split_point 为 None 时自动取 max(3|ω″| + |x|, 使 γ 偏离渐近式小于 e^{-32} 的位置)；
    contour_height 为 None 时取 Im ω″ / 2（"+i0" 的有限高度实现）。
    """
    split_point: float = None
    tail_method: str = "asymptotic_subtraction"
    tilt_angle: float = math.pi / 8
    quad_tolerance: float = 1e-11
    contour_height: float = None

    def __post_init__(self):
        if self.tail_method not in TAIL_METHODS:
            raise ValueError(f"未知的尾部处理方法：{self.tail_method}，可选 {TAIL_METHODS}")
        if not 0 < self.tilt_angle <= math.pi / 4:
            raise ValueError(f"tilt_angle 必须位于 (0, π/4]：{self.tilt_angle}")
        if self.split_point is not None and not (0 < self.split_point < math.inf):
            raise ValueError(f"split_point 必须为有限正数：{self.split_point}")
        if self.quad_tolerance <= 0:
            raise ValueError("quad_tolerance 必须为正")

    def with_method(self, method):
        return OscillatorySpec(self.split_point, method, self.tilt_angle, self.quad_tolerance, self.contour_height)


@dataclass(frozen=True)
class LineIntegral:
    value: complex
    est_error: float
    split_point: float
    contour_height: float
    method: str


def asymptotic_decay(params):
    """
    |γ(z) − 1| 在 Re z → +∞ 时的指数衰减率
    """
    return min((1j * math.pi / params.omega).real, (1j * math.pi / params.omega_prime).real)


class OscillatoryIntegrator:
    """
    直线 Im σ = η 上 ∫ N(σ) e^{−2πiYσ} dσ 的分区求积

    中间段 [−A, A] 用 quad_vec；右尾 N → 1，左尾 N 由反演公式给出的 chirp 或指数渐近式代替。
    """

    def __init__(self, params, spec=None, ev=None, logger=None):
        self.params = params
        self.spec = spec or OscillatorySpec()
        self.logger = get_module_logger(logger)
        self.ev = ev or GammaEvaluator(params, logger=self.logger)
        self.decay = asymptotic_decay(params)

    def default_height(self):
        return self.params.strip_height / 2 if self.spec.contour_height is None else self.spec.contour_height

    def split_point(self, scale):
        if self.spec.split_point is not None:
            return self.spec.split_point
        return max(3 * abs(self.params.omega_dprime) + scale, 32.0 / self.decay + scale)

    # ------------------------------------------------------------------
    def _quad(self, f, a, b):
        def split(s):
            v = f(s)
            return np.array([v.real, v.imag])

        tol = self.spec.quad_tolerance
        res, err = integrate.quad_vec(split, a, b, epsabs=tol, epsrel=tol, limit=4000)
        return complex(res[0], res[1]), float(err)

    def integrate(self, amplitude, Y, eta, A, left_tail):
        """
        Args:
            amplitude: σ -> N(σ)
            Y: 频率（可为复数，需 Im Y ≤ 0）
            eta: 积分线高度
            A: 分段点
            left_tail: ("chirp", c0) 表示 N ≈ e^{iβ}e^{iπ(σ−iη+c0)²}；
                       ("exp", prefactor, shift) 表示 N ≈ prefactor·e^{−2πi·shift·σ}
        """
        Y = complex(Y)
        if Y == 0:
            raise DomainError("频率 Y = 0 时右尾不收敛")
        if Y.imag > 0:
            raise DomainError(f"Im Y > 0 时右尾指数增长：Y = {Y}")

        def integrand(s):
            sigma = s + 1j * eta
            return amplitude(sigma) * cmath.exp(-2j * math.pi * Y * sigma)

        central, central_err = self._quad(integrand, -A, A)
        if self.spec.tail_method == "asymptotic_subtraction":
            right, left = self._analytic_tails(Y, eta, A, left_tail)
            remainder = math.exp(-self.decay * (A - self._tail_offset(left_tail)))
            scale = max(abs(central), abs(right), abs(left), 1.0)
            est = central_err + remainder * scale
        else:
            (right, e_r), (left, e_l) = self._tilted_tails(amplitude, Y, eta, A, left_tail)
            est = central_err + e_r + e_l
        value = central + right + left
        self.logger.debug(
            f"振荡积分 A = {A:.3g} η = {eta:.3g}：中间段 {central:.6g}，右尾 {right:.3g}，左尾 {left:.3g}"
        )
        return LineIntegral(value, est, A, eta, self.spec.tail_method)

    def _tail_offset(self, left_tail):
        if left_tail[0] == "chirp":
            return abs(left_tail[1].real)
        return abs(left_tail[2].real)

    def _analytic_tails(self, Y, eta, A, left_tail):
        p = self.params
        sigma_r = A + 1j * eta
        right = cmath.exp(-2j * math.pi * Y * sigma_r) / (2j * math.pi * Y)
        if left_tail[0] == "chirp":
            c0 = left_tail[1]
            # e^{iπ(s+c0)²}e^{−2πiY(s+iη)} 配方后为 Fresnel 积分
            pref = cmath.exp(1j * p.beta + 1j * math.pi * (c0 * c0 - (c0 - Y) ** 2) + 2 * math.pi * Y * eta)
            B = -A + c0 - Y
            fresnel = 0.5 * cmath.exp(0.25j * math.pi) * complex(
                special.erfc(-cmath.exp(-0.25j * math.pi) * math.sqrt(math.pi) * B)
            )
            left = pref * fresnel
        else:
            prefactor, shift = left_tail[1], left_tail[2]
            mu = -2j * math.pi * (shift + Y)
            if mu.real <= 0:
                raise DomainError(f"左尾指数不衰减：Re μ = {mu.real:.3g}")
            left = prefactor * cmath.exp(mu * (-A + 1j * eta)) / mu
        return right, left

    def _ray(self, f, start, direction, length):
        def g(r):
            return f(start + r * direction) * direction

        return self._quad(g, 0.0, length)

    def _tilted_tails(self, amplitude, Y, eta, A, left_tail):
        theta = self.spec.tilt_angle

        def f(sigma):
            return amplitude(sigma) * cmath.exp(-2j * math.pi * Y * sigma)

        kappa = -2j * math.pi * Y
        rights = [1, cmath.exp(1j * theta), cmath.exp(-1j * theta)]
        d_r = min(rights, key=lambda d: (kappa * d).real)
        rate = -(kappa * d_r).real
        if rate <= 0:
            raise ConvergenceError("右侧射线上被积函数不衰减")
        right = self._ray(f, A + 1j * eta, d_r, _RAY_EXPONENT / rate)

        lefts = [-1, cmath.exp(1j * (math.pi + theta)), cmath.exp(1j * (math.pi - theta))]
        if left_tail[0] == "chirp":
            c0 = left_tail[1]
            d_l = lefts[1]
            a = math.pi * math.sin(2 * theta)
            # σ = −A + iη + r·d 时 chirp 指数的一次项系数
            b = max(0.0, (2j * math.pi * d_l * (c0 - A) + kappa * d_l).real)
            length = (b + math.sqrt(b * b + 4 * a * _RAY_EXPONENT)) / (2 * a)
        else:
            mu = -2j * math.pi * (left_tail[2] + Y)
            d_l = min(lefts, key=lambda d: (mu * d).real)
            rate = -(mu * d_l).real
            if rate <= 0:
                raise ConvergenceError("左侧射线上被积函数不衰减")
            length = _RAY_EXPONENT / rate
        value, err = self._ray(f, -A + 1j * eta, d_l, length)
        return right, (-value, err)


def _report(suite, identity, params, lhs, rhs, est, tolerance, start, provenance, details=None):
    residual = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    data = {"lhs": lhs, "rhs": rhs, "lhs_est_error": est}
    data.update(details or {})
    return VerificationReport(
        suite=suite,
        identity=identity,
        params=params.echo(),
        residual=residual,
        tolerance=tolerance,
        provenance=provenance,
        details=data,
        wall_time=time.time() - start,
    )


def ftd_lhs(x, params, spec=None, ev=None, logger=None):
    """
    ∫ γ(t − ω″ + i0) e^{−2πixt} dt
    """
    x = float(x)
    if x == 0:
        raise DomainError("x = 0 时 Fourier 右尾只条件收敛于发散边界项")
    integ = OscillatoryIntegrator(params, spec, ev, logger)
    eta = integ.default_height()
    A = integ.split_point(abs(x))
    p = params

    def amplitude(sigma):
        return gamma(sigma - p.omega_dprime, integ.ev).value

    return integ.integrate(amplitude, x, eta, A, ("chirp", 1j * eta - p.omega_dprime))


def ftd_check(x, params, spec=None, ev=None, tolerance=1e-6, logger=None):
    """
    Eq. (FTD)：∫ γ(t − ω″ + i0) e^{−2πixt} dt = c / γ(x + ω″ − i0)
    """
    start = time.time()
    ev = ev or GammaEvaluator(params, logger=logger)
    spec = spec or OscillatorySpec()
    lhs = ftd_lhs(x, params, spec, ev, logger)
    rhs = params.c / gamma(x + params.omega_dprime, ev).value
    return _report("integrals", "Eq. (FTD)", params, lhs.value, rhs, lhs.est_error, tolerance, start,
                   {"tail_method": lhs.method, "split_point": lhs.split_point, "contour_height": lhs.contour_height},
                   {"x": x})


def shc_lhs(x, params, spec=None, ev=None, logger=None):
    """
    ∫ γ(t) e^{−2πixt} dt，积分线为实轴
    """
    x = float(x)
    if x == 0:
        raise DomainError("x = 0 时 Fourier 右尾只条件收敛于发散边界项")
    spec = spec or OscillatorySpec()
    integ = OscillatoryIntegrator(params, spec, ev, logger)
    eta = 0.0 if spec.contour_height is None else spec.contour_height
    A = integ.split_point(abs(x))

    def amplitude(sigma):
        return gamma(sigma, integ.ev).value

    return integ.integrate(amplitude, x, eta, A, ("chirp", 1j * eta))


def shc_check(x, params, spec=None, ev=None, tolerance=1e-6, logger=None):
    """
    Eq. (ShC)：∫ γ(t) e^{−2πixt} dt = c·e^{2πixω″} / γ(x + ω″ − i0)
    """
    start = time.time()
    ev = ev or GammaEvaluator(params, logger=logger)
    spec = spec or OscillatorySpec()
    lhs = shc_lhs(x, params, spec, ev, logger)
    p = params
    rhs = p.c * cmath.exp(2j * math.pi * x * p.omega_dprime) / gamma(x + p.omega_dprime, ev).value
    return _report("integrals", "Eq. (ShC)", params, lhs.value, rhs, lhs.est_error, tolerance, start,
                   {"tail_method": lhs.method, "split_point": lhs.split_point, "contour_height": lhs.contour_height},
                   {"x": x})


def mir_lhs(X, Y, params, spec=None, ev=None, eta=None, logger=None):
    """
    ∫ γ(t − ω″ + i0) / γ(X + t) · e^{−2πiYt} dt，X、Y 可为复数（解析延拓）
    """
    integ = OscillatoryIntegrator(params, spec, ev, logger)
    eta = integ.default_height() if eta is None else eta
    p = params
    X = complex(X)
    if not 0 < eta < (p.omega_dprime - X).imag:
        raise DomainError(f"积分线 η = {eta} 无法分隔 γ(t − ω″) 的极点与 1/γ(X + t) 的极点")
    A = integ.split_point(abs(X.real))
    left = ("exp", cmath.exp(1j * math.pi * (p.omega_dprime ** 2 - X * X)), p.omega_dprime + X)

    def amplitude(sigma):
        return gamma(sigma - p.omega_dprime, integ.ev).value / gamma(X + sigma, integ.ev).value

    return integ.integrate(amplitude, Y, eta, A, left)


def mir_rhs(X, Y, params, ev):
    """
    c·γ(X + Y) / (γ(X)·γ(Y + ω″ − i0))
    """
    p = params
    return p.c * gamma(X + Y, ev).value / (gamma(X, ev).value * gamma(Y + p.omega_dprime, ev).value)


def mir_check(x, y, params, spec=None, ev=None, tolerance=1e-5, logger=None):
    """
    Eq. (MIR)，指数取 e^{−2πiyt}；y 限定在收敛窗口 0 < y < |ω″| 内
    """
    start = time.time()
    window = abs(params.omega_dprime)
    if not 0 < y < window:
        raise DomainError(f"y = {y} 不在 MIR 收敛窗口 (0, {window:.4g}) 内")
    ev = ev or GammaEvaluator(params, logger=logger)
    spec = spec or OscillatorySpec()
    lhs = mir_lhs(x, y, params, spec, ev, logger=logger)
    rhs = mir_rhs(x, y, params, ev)
    return _report("integrals", "Eq. (MIR)", params, lhs.value, rhs, lhs.est_error, tolerance, start,
                   {"tail_method": lhs.method, "split_point": lhs.split_point, "contour_height": lhs.contour_height,
                    "assumption": f"y window (0, {window:.6g}) inferred from integrand asymptotics",
                    "exponent": "e^{-2 pi i y t}"},
                   {"x": x, "y": y})


def tail_agreement_check(kind, params, x, y=None, spec=None, ev=None, logger=None):
    """
    两种尾部处理方法在同一实例上的一致性，容差为两者误差估计之和
    """
    start = time.time()
    spec = spec or OscillatorySpec()
    ev = ev or GammaEvaluator(params, logger=logger)
    runs = {}
    for method in TAIL_METHODS:
        s = spec.with_method(method)
        if kind == "FTD":
            runs[method] = ftd_lhs(x, params, s, ev, logger)
        elif kind == "ShC":
            runs[method] = shc_lhs(x, params, s, ev, logger)
        elif kind == "MIR":
            runs[method] = mir_lhs(x, y, params, s, ev, logger=logger)
        else:
            raise ValueError(f"未知的积分恒等式：{kind}")
    a, b = runs[TAIL_METHODS[0]], runs[TAIL_METHODS[1]]
    return VerificationReport(
        suite="integrals",
        identity=f"Eq. ({kind}) tail methods",
        params=params.echo(),
        residual=abs(a.value - b.value),
        tolerance=a.est_error + b.est_error + 1e-9 * max(abs(a.value), 1.0),
        provenance={"methods": list(TAIL_METHODS), "tilt_angle": spec.tilt_angle},
        details={"x": x, "y": y, "asymptotic_subtraction": a.value, "contour_tilt": b.value},
        wall_time=time.time() - start,
    )


# ----------------------------------------------------------------------
# S⁵(x, y) 核的逐步约化
# ----------------------------------------------------------------------
KERNEL_SAMPLE_T = 0.37
KERNEL_SAMPLE_S = 0.21


def i_epsilon(a, eps, params, ev):
    """
    I_ε(a) = γ(a − ω″ + iε) / (γ(a + ω″ − iε)·γ(−ω″ + iε))
    """
    p = params
    w = p.omega_dprime
    return gamma(a - w + 1j * eps, ev).value / (gamma(a + w - 1j * eps, ev).value * gamma(-w + 1j * eps, ev).value)


def i_epsilon_small(a, eps, params):
    """
    c·I_ε(a) 的小 ε 主项 2πε / ((1 − e^{−iπa/ω})(1 − e^{−iπa/ω′}))
    """
    p = params
    den = (1 - cmath.exp(-1j * math.pi * a / p.omega)) * (1 - cmath.exp(-1j * math.pi * a / p.omega_prime))
    return 2 * math.pi * eps / den


def kernel_last_line(x, y, eps, params, ev):
    """
    c⁴·(γ(x)/γ(y))·e^{2πi((x−y)ω″ − ω″²)}·I_ε(x − y)
    """
    p = params
    a = x - y
    w = p.omega_dprime
    phase = cmath.exp(2j * math.pi * (a * w - w * w))
    return p.c ** 4 * gamma(x, ev).value / gamma(y, ev).value * phase * i_epsilon(a, eps, p, ev)


def kernel_reduction_steps(x, y, params, spec=None, ev=None, epsilons=(1e-3, 5e-4), tolerance=1e-4,
                           lorentz_tolerance=0.2, logger=None):
    """
    按约化顺序逐步验证，每一步一个报告

    第1、2步是 ShC 实例，第3、4步是解析延拓后的 MIR 实例（复参数），
    最后检查 ε → 0 时末行的线性衰减与小 ε 主项。
    """
    logger = get_module_logger(logger)
    if x == y:
        raise DomainError("x = y 时末行是 δ 型奇异，约化检查要求 x ≠ y")
    p = params
    ev = ev or GammaEvaluator(params, logger=logger)
    spec = spec or OscillatorySpec()
    kappa = p.strip_height
    t0, s0 = KERNEL_SAMPLE_T, KERNEL_SAMPLE_S
    reports = []

    for label, arg in (("step 1", x + t0), ("step 2", t0 + s0)):
        r = shc_check(arg, p, spec, ev, tolerance, logger)
        r.identity = f"kernel {label}: Eq. (ShC)"
        r.suite = "kernel"
        reports.append(r)

    eps3 = 0.2 * kappa
    eps4 = 0.2 * kappa
    a = x - y
    instances = (
        ("step 3", t0, y - p.omega_dprime + 1j * eps3, None),
        ("step 4", a + p.omega_dprime - 1j * eps4, -2 * p.omega_dprime + 2j * eps4, eps4 / 2),
    )
    for label, X, Y, eta in instances:
        start = time.time()
        lhs = mir_lhs(X, Y, p, spec, ev, eta=eta, logger=logger)
        rhs = mir_rhs(X, Y, p, ev)
        r = _report("kernel", f"kernel {label}: Eq. (MIR) continued", p, lhs.value, rhs, lhs.est_error,
                    tolerance, start, {"tail_method": lhs.method, "contour_height": lhs.contour_height},
                    {"X": X, "Y": Y})
        reports.append(r)

    start = time.time()
    values = [kernel_last_line(x, y, e, p, ev) for e in epsilons]
    scaled = [p.c * i_epsilon(a, e, p, ev) for e in epsilons]
    predicted = [i_epsilon_small(a, e, p) for e in epsilons]
    halving = abs(values[1] / values[0]) / (epsilons[1] / epsilons[0])
    small_eps = max(abs(s / q - 1) for s, q in zip(scaled, predicted))
    lorentz = [abs(s) / (e / (2 * math.pi * a * a)) for s, e in zip(scaled, epsilons)]
    residual = max(abs(halving - 1) / 0.05, small_eps / 0.05)
    if abs(a) <= 0.05:
        residual = max(residual, abs(lorentz[-1] - 1) / lorentz_tolerance)
    reports.append(VerificationReport(
        suite="kernel",
        identity="kernel last line: I(a) vanishes for a != 0",
        params=p.echo(),
        residual=residual,
        tolerance=1.0,
        provenance={"epsilons": list(epsilons), "criteria": "halving within 5%, small-eps form within 5%"},
        details={"a": a, "values": values, "c_I": scaled, "small_eps_form": predicted,
                 "halving_ratio": halving, "lorentzian_ratio": lorentz},
        wall_time=time.time() - start,
    ))
    for r in reports:
        if not r.passed:
            logger.warning(f"核约化 {r.identity} 未通过：残差 {r.residual:.3e}")
    return reports


def pentagon_kernel_reduction(x, y, params, spec=None, ev=None, logger=None, steps=None, **kwargs):
    """
    汇总各约化步骤：残差为各步 残差/容差 的最大值，容差为1

    steps 为已算好的 kernel_reduction_steps 结果时直接汇总
    """
    start = time.time()
    if steps is None:
        steps = kernel_reduction_steps(x, y, params, spec, ev, logger=logger, **kwargs)
    normalized = {r.identity: r.residual / r.tolerance for r in steps}
    failed = [r.identity for r in steps if not r.passed]
    return VerificationReport(
        suite="kernel",
        identity="S^5 kernel reduction",
        params=params.echo(),
        residual=max(normalized.values()),
        tolerance=1.0,
        provenance={"steps": [r.identity for r in steps]},
        details={"normalized_residuals": normalized, "failed_steps": failed},
        wall_time=time.time() - start,
    )
