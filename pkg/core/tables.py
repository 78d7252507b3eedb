import csv
import math

import numpy as np

from core.classical import quasiclassical_ratio
from core.errors import DomainError, UsageError
from core.params import make_params
from core.qdilog import (
    DilogValue,
    GammaEvaluator,
    euler_dilog,
    gamma,
    gamma_array,
    rogers_L,
    rogers_R,
    theta,
)

EVAL_FUNCTIONS = ("gamma", "theta", "Li2", "L", "R")
TABLE_FUNCTIONS = ("gamma", "rho", "unitarity")
TABLE_COLUMNS = ("input", "re_value", "im_value", "est_error")
_EPS = np.finfo(float).eps


def _real_point(point, name):
    point = complex(point)
    if point.imag != 0:
        raise DomainError(f"{name}(x) 只接受实数自变量：{point}")
    return point.real


def evaluate_function(name, point, tau=1.0, logger=None):
    """
    eval 子命令：在单点求函数值

    Returns:
        DilogValue
    """
    if name in ("gamma", "theta"):
        params = make_params(tau)
        ev = GammaEvaluator(params, logger=logger)
        if name == "gamma":
            return gamma(point, ev)
        return theta(point, params, ev)
    if name == "Li2":
        value = euler_dilog(complex(point))
        return DilogValue(value, 4 * _EPS * abs(value))
    if name == "L":
        value = rogers_L(_real_point(point, "L"))
        return DilogValue(complex(value), 4 * _EPS * abs(value))
    if name == "R":
        value = rogers_R(_real_point(point, "R"))
        return DilogValue(complex(value), 4 * _EPS * abs(value))
    raise UsageError(f"未知函数：{name}，可选 {EVAL_FUNCTIONS}")


def parse_range(text):
    """
    解析 "start:stop:step"，包含两端点
    """
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"范围格式应为 start:stop:step：{text}") from None
    if not step > 0:
        raise UsageError(f"步长必须为正：{step}")
    if stop < start:
        raise UsageError(f"范围终点小于起点：{text}")
    n = int(round((stop - start) / step)) + 1
    return np.linspace(start, start + (n - 1) * step, n)


def tabulate(name, inputs, tau=1.0, z=0.5, logger=None):
    """
    table 子命令的数据行 (input, Re, Im, est_error)

    gamma：z 取 inputs；rho：τ 取 inputs，值为 |ρ(τ) − 1|；unitarity：||γ(z)| − 1|，要求实 τ
    """
    inputs = np.asarray(inputs, dtype=float)
    if name == "gamma":
        ev = GammaEvaluator(make_params(tau), logger=logger)
        values, errors = gamma_array(inputs, ev)
        return [(x, v.real, v.imag, e) for x, v, e in zip(inputs, values, errors)]
    if name == "unitarity":
        params = make_params(tau)
        if not params.is_real:
            raise DomainError(f"幺正性只对实 τ > 0 成立：τ = {tau}")
        values, errors = gamma_array(inputs, GammaEvaluator(params, logger=logger))
        return [(x, abs(abs(v) - 1), 0.0, e) for x, v, e in zip(inputs, values, errors)]
    if name == "rho":
        if np.any(inputs <= 0):
            raise DomainError("rho 表的输入 τ 必须为正")
        rows = []
        for t in inputs:
            rho = quasiclassical_ratio(z, t)
            rows.append((t, abs(rho - 1), 0.0, math.nan))
        return rows
    raise UsageError(f"未知的表函数：{name}，可选 {TABLE_FUNCTIONS}")


def write_table(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
