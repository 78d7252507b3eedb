import cmath
import math
import time
from dataclasses import dataclass

from core.errors import ParameterError
from core.report import VerificationReport


@dataclass(frozen=True)
class ModularParameter:
    """
    模参数 τ 及其导出常数，构造后不可变，可在线程间共享
    """
    tau: complex
    omega: complex
    omega_prime: complex
    omega_dprime: complex
    q: complex
    q_tilde: complex
    beta: complex
    alpha: complex
    c: complex
    c1: complex
    c2: complex

    @property
    def is_real(self):
        return abs(self.tau.imag) == 0.0 and self.tau.real > 0

    @property
    def strip_height(self):
        """
        直接求值条带的半宽：|Im z| < Im ω″
        """
        return self.omega_dprime.imag

    def dual(self):
        """
        τ -> 1/τ 的对偶参数
        """
        return make_params(1 / self.tau)

    def alpha_readings(self):
        """
        Eq. (43) 的两种读法：实数 3β+π/4（采用）以及中间式中带 i 的读法
        """
        s = self.tau + 1 / self.tau + 1
        return {
            "adopted": self.alpha,
            "middle_member_literal": 1j * math.pi / 4 * s,
            "note": "中间式的 i 视为排印错误，采用 α = 3β + π/4",
        }

    def echo(self):
        """
        报告中回显的参数（JSON友好）
        """
        return {
            "tau": [self.tau.real, self.tau.imag],
            "alpha": [self.alpha.real, self.alpha.imag],
            "beta": [self.beta.real, self.beta.imag],
        }


def make_params(tau):
    """
    由 τ 构造全部导出常数

    Args:
        tau: 复数，Re τ > 0 或 Im τ > 0

    Returns:
        ModularParameter
    """
    tau = complex(tau)
    if tau == 0:
        raise ParameterError("τ 不能为 0")
    if tau.imag == 0 and tau.real < 0:
        raise ParameterError(f"τ = {tau} 位于负实轴，√τ 的分支未定义")
    if not (tau.real > 0 or tau.imag > 0):
        raise ParameterError(f"τ = {tau} 需满足 Re τ > 0 或 Im τ > 0")

    sqrt_tau = cmath.sqrt(tau)
    omega = 1j / (2 * sqrt_tau)
    omega_prime = 1j * sqrt_tau / 2
    omega_dprime = omega + omega_prime
    q = cmath.exp(1j * math.pi * tau)
    q_tilde = cmath.exp(-1j * math.pi / tau)
    beta = math.pi / 12 * (tau + 1 / tau)
    alpha = 3 * beta + math.pi / 4
    c = cmath.exp(-1j * math.pi / 12 * (tau + 1 / tau) - 1j * math.pi / 4)
    c1 = 2j * math.pi * c
    c2 = -c / (2j * math.pi)

    # 实 τ 时 β、α 严格为实数，去掉舍入带来的虚部
    if tau.imag == 0:
        beta = complex(beta.real, 0.0)
        alpha = complex(alpha.real, 0.0)

    return ModularParameter(
        tau=tau,
        omega=omega,
        omega_prime=omega_prime,
        omega_dprime=omega_dprime,
        q=q,
        q_tilde=q_tilde,
        beta=complex(beta),
        alpha=complex(alpha),
        c=c,
        c1=c1,
        c2=c2,
    )


def invariant_residuals(params):
    """
    参数不变量的残差，供 params 套件和测试使用
    """
    p = params
    s = p.tau + 1 / p.tau
    res = {
        "omega_product": abs(p.omega * p.omega_prime + 0.25),
        "omega_ratio": abs(p.omega_prime / p.omega - p.tau),
        "c_squared": abs(p.c ** 2 - cmath.exp(1j * math.pi * (-s / 6 - 0.5))),
        "c1_c2": abs(p.c ** 2 + p.c1 * p.c2),
        "omega_dprime_squared": abs(p.omega_dprime ** 2 + (s + 2) / 4),
        "alpha_beta": abs(p.alpha - (3 * p.beta + math.pi / 4)),
    }
    if p.is_real:
        res["alpha_real"] = abs(p.alpha.imag)
        res["beta_real"] = abs(p.beta.imag)
        res["omega_imaginary"] = abs(p.omega.real) + abs(p.omega_prime.real)
    return res


def params_check(params, tolerance=1e-12):
    """
    params 套件：所有导出常数的不变量
    """
    start = time.time()
    res = invariant_residuals(params)
    return VerificationReport(
        suite="params",
        identity="modular constants",
        params=params.echo(),
        residual=max(res.values()),
        tolerance=tolerance,
        provenance={"alpha": params.alpha_readings()},
        details=res,
        wall_time=time.time() - start,
    )
