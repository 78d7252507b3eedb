import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import special

from core.errors import ConvergenceError, DomainError
from core.logger import get_module_logger
from core.params import make_params
from core.qdilog import GammaEvaluator, euler_E, log_gamma, rogers_L, rogers_R
from core.report import Lcg, VerificationReport

FIVE_TERM_FORMS = ("L-form", "R-form", "Y-form")
ACTION_SUM = -math.pi ** 2 / 2
# x_i = e^{p_i}，三个驻相方程正好是 i = 2, 3, 4 的递推
STATIONARY_DICTIONARY = {"p1": "x1", "p2": "x2", "p3": "x3", "p4": "x4", "p5": "x5"}


@dataclass(frozen=True)
class YOrbit:
    u: float
    v: float
    x: tuple

    def closed_forms(self):
        u, v = self.u, self.v
        return (u, v, (1 + v) / u, (1 + u + v) / (u * v), (1 + u) / v)

    def closed_form_residual(self):
        return max(abs(a - b) / max(1.0, abs(b)) for a, b in zip(self.x[:5], self.closed_forms()))

    def period_residual(self):
        return max(abs(self.x[5] - self.u), abs(self.x[6] - self.v))


def y_orbit(u, v):
    """
    Eq. (14) 的轨道 x₁..x₇，x_{i+2} = (1 + x_{i+1}) / x_i

    Raises:
        DomainError: u 或 v 不为正
    """
    u, v = float(u), float(v)
    if not (u > 0 and v > 0):
        raise DomainError(f"Y-系统要求 u, v > 0：u = {u}, v = {v}")
    x = [u, v]
    for _ in range(5):
        x.append((1 + x[-1]) / x[-2])
    return YOrbit(u, v, tuple(x))


def l_form_point(u, v):
    """
    R(u) = L(u/(1+u)) 诱导的变量替换，把 R 形式的点映到 L 形式
    """
    return u / (1 + u), v / (1 + v)


def _five_term_residual(form, u, v):
    if form == "L-form":
        x, y = float(u), float(v)
        if not (0 < x < 1 and 0 < y < 1):
            raise DomainError(f"L 形式要求 x, y ∈ (0, 1)：x = {x}, y = {y}")
        d = 1 - x * y
        return (rogers_L(x) + rogers_L(y) - rogers_L(x * (1 - y) / d)
                - rogers_L(x * y) - rogers_L(y * (1 - x) / d))
    if form == "R-form":
        if not (u > 0 and v > 0):
            raise DomainError(f"R 形式要求 u, v > 0：u = {u}, v = {v}")
        return (rogers_R(u) + rogers_R(v) - rogers_R(v / (1 + u))
                - rogers_R(u * v / (1 + u + v)) - rogers_R(u / (1 + v)))
    if form == "Y-form":
        x = y_orbit(u, v).x
        return (rogers_R(x[0]) + rogers_R(x[1]) - rogers_R(1 / x[4])
                - rogers_R(1 / x[3]) - rogers_R(1 / x[2]))
    raise ValueError(f"未知的五项关系形式：{form}，可选 {FIVE_TERM_FORMS}")


def five_term_check(form, u, v, tolerance=1e-12):
    """
    五项关系（Eq. (8) / (12) / (16)）的残差
    """
    start = time.time()
    identity = {"L-form": "Eq. (8)", "R-form": "Eq. (12)", "Y-form": "Eq. (16)"}.get(form)
    residual = _five_term_residual(form, u, v)
    return VerificationReport(
        suite="classical",
        identity=identity or form,
        params={"u": u, "v": v},
        residual=abs(residual),
        tolerance=tolerance,
        provenance={"form": form, "dilog": "scipy.special.spence"},
        details={"signed_residual": residual},
        wall_time=time.time() - start,
    )


def period_check(samples=1000, seed=0, tolerance=1e-12):
    """
    随机正 (u, v) 上验证 x₆ = x₁、x₇ = x₂ 以及闭式解
    """
    start = time.time()
    rng = Lcg(seed)
    worst = 0.0
    worst_point = None
    for _ in range(samples):
        u, v = rng.uniforms(2, 0.05, 20.0)
        orbit = y_orbit(u, v)
        r = max(orbit.period_residual() / max(u, v, 1.0), orbit.closed_form_residual())
        if r > worst:
            worst, worst_point = r, (u, v)
    return VerificationReport(
        suite="classical",
        identity="Eq. (14) period 5",
        params={"samples": samples, "seed": seed},
        residual=worst,
        tolerance=tolerance,
        provenance={"sampler": "LCG", "range": [0.05, 20.0]},
        details={"worst_point": worst_point},
        wall_time=time.time() - start,
    )


def _softplus(p):
    return np.logaddexp(0.0, p)


def solve_stationary(p1, p2, tol=1e-13, max_iter=100, logger=None):
    """
    阻尼 Newton 求解驻相方程组，初值 p₃ = p₄ = p₅ = 0

    ln(1+e^{p₃}) = p₂+p₄，ln(1+e^{p₄}) = p₃+p₅，ln(1+e^{p₅}) = p₄+p₁

    Raises:
        ConvergenceError: 迭代不收敛，异常信息中带迭代轨迹
    """
    logger = get_module_logger(logger)
    p = np.zeros(3)

    def residual(x):
        p3, p4, p5 = x
        return np.array([
            _softplus(p3) - p2 - p4,
            _softplus(p4) - p3 - p5,
            _softplus(p5) - p4 - p1,
        ])

    trail = []
    F = residual(p)
    for _ in range(max_iter):
        norm = float(np.max(np.abs(F)))
        trail.append(norm)
        if norm < tol:
            return p, trail
        s = special.expit(p)
        J = np.array([
            [s[0], -1.0, 0.0],
            [-1.0, s[1], -1.0],
            [0.0, -1.0, s[2]],
        ])
        step = np.linalg.solve(J, -F)
        lam = 1.0
        while True:
            candidate = p + lam * step
            F_new = residual(candidate)
            if np.max(np.abs(F_new)) < norm or lam < 1e-6:
                break
            lam *= 0.5
        if lam < 1.0:
            logger.debug(f"驻相方程 Newton 阻尼步长 {lam}")
        p, F = candidate, F_new
    raise ConvergenceError(f"驻相方程 Newton 迭代未收敛，残差轨迹 {trail[-5:]}")


def action_sum(xs):
    """
    Σ (E(x_i) + ½ ln x_i ln(1 + x_i))
    """
    xs = np.asarray(xs, dtype=float)
    return float(np.sum(euler_E(xs).real + 0.5 * np.log(xs) * np.log1p(xs)))


def stationary_phase_check(p1, p2, tolerance=1e-10, logger=None):
    """
    驻相解与 Y-系统轨道一致，并且作用量之和为 −π²/2
    """
    start = time.time()
    sol, trail = solve_stationary(p1, p2, logger=logger)
    orbit = y_orbit(math.exp(p1), math.exp(p2))
    xs = [math.exp(p1), math.exp(p2)] + [math.exp(t) for t in sol]
    orbit_residual = max(abs(a - b) / max(1.0, abs(b)) for a, b in zip(xs, orbit.x[:5]))
    total = action_sum(xs)
    return VerificationReport(
        suite="classical",
        identity="action sum",
        params={"p1": p1, "p2": p2},
        residual=max(abs(total - ACTION_SUM), orbit_residual),
        tolerance=tolerance,
        provenance={"solver": "damped Newton", "initial": [0.0, 0.0, 0.0], "dictionary": STATIONARY_DICTIONARY},
        details={"x": xs, "action_sum": total, "orbit_residual": orbit_residual, "iterations": len(trail)},
        wall_time=time.time() - start,
    )


def _sampled_report(identity, samples, seed, residual, tolerance, start, provenance):
    return VerificationReport(
        suite="classical",
        identity=identity,
        params={"samples": samples, "seed": seed},
        residual=residual,
        tolerance=tolerance,
        provenance=provenance,
        wall_time=time.time() - start,
    )


def action_invariance_check(samples=20, seed=0, tolerance=1e-10):
    """
    随机轨道上作用量之和恒为 −π²/2（不经过驻相求解）
    """
    start = time.time()
    rng = Lcg(seed)
    worst = 0.0
    for _ in range(samples):
        orbit = y_orbit(*rng.uniforms(2, 0.1, 10.0))
        worst = max(worst, abs(action_sum(orbit.x[:5]) - ACTION_SUM))
    return _sampled_report("action sum invariance", samples, seed, worst, tolerance, start,
                           {"sampler": "LCG", "range": [0.1, 10.0]})


def action_identity_check(samples=20, seed=0, tolerance=1e-12):
    """
    R(x) = −E(x) − ½ ln x ln(1 + x)，x > 0
    """
    start = time.time()
    rng = Lcg(seed)
    worst = 0.0
    for _ in range(samples):
        x = 10 ** rng.uniform(-2.0, 2.0)
        rhs = -euler_E(x).real - 0.5 * math.log(x) * math.log1p(x)
        worst = max(worst, abs(rogers_R(x) - rhs))
    return _sampled_report("R(x) = -E(x) - ln x ln(1+x)/2", samples, seed, worst, tolerance, start,
                           {"sampler": "LCG", "range": [0.01, 100.0]})


def rogers_reflection_check(samples=20, seed=0, tolerance=1e-12):
    """
    R(x) + R(1/x) = π²/6
    """
    start = time.time()
    rng = Lcg(seed)
    worst = 0.0
    for _ in range(samples):
        x = 10 ** rng.uniform(-2.0, 2.0)
        worst = max(worst, abs(rogers_R(x) + rogers_R(1 / x) - math.pi ** 2 / 6))
    return _sampled_report("R(x) + R(1/x) = pi^2/6", samples, seed, worst, tolerance, start,
                           {"sampler": "LCG", "range": [0.01, 100.0]})


def quasiclassical_ratio(z, tau, evaluator_options=None):
    """
    ρ(τ) = 2πiτ·log γ(z) / E(e^{−iπz/ω})
    """
    params = make_params(tau)
    ev = GammaEvaluator(params, **(evaluator_options or {}))
    lg = log_gamma(z, ev).value
    u = np.exp(-1j * np.pi * z / params.omega)
    return 2j * np.pi * params.tau * lg / euler_E(u)


def quasiclassical_gamma_check(z, tau_sequence=(0.2, 0.1, 0.05), min_order=0.5, tolerance=1e-2,
                               evaluator_options=None, logger=None):
    """
    Eq. (30)：τ → 0 时 ρ → 1

    判据：|ρ − 1| 随 τ 单调下降，双对数拟合的阶 ≥ min_order，最后一点 |ρ − 1| ≤ tolerance。
    modular 情形首阶修正项为0，实测阶约为2。
    """
    logger = get_module_logger(logger)
    start = time.time()
    taus = [float(t) for t in tau_sequence]
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ValueError(f"τ 序列必须严格递减：{taus}")
    rhos = [quasiclassical_ratio(z, t, evaluator_options) for t in taus]
    errors = [abs(r - 1) for r in rhos]
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    if len(taus) >= 2 and min(errors) > 0:
        order = float(np.polyfit(np.log(taus), np.log(errors), 1)[0])
    else:
        order = math.inf
    ok = monotone and order >= min_order
    if not ok:
        logger.warning(f"准经典比值收敛异常：误差 {errors}，拟合阶 {order:.3g}")
    ratios = [errors[k] / errors[k + 1] for k in range(len(errors) - 1) if errors[k + 1] > 0]
    return VerificationReport(
        suite="classical",
        identity="Eq. (30)",
        params={"z": z, "tau_sequence": taus},
        residual=errors[-1] if ok else math.inf,
        tolerance=tolerance,
        provenance={"method": "log_gamma quadrature", "fit": "log-log least squares"},
        details={"rho": rhos, "errors": errors, "fitted_order": order, "successive_ratios": ratios,
                 "monotone": monotone},
        wall_time=time.time() - start,
    )
