class ParameterError(ValueError):
    """τ 不在允许范围内（负实轴或0）"""


class DomainError(ValueError):
    """自变量超出函数或恒等式的定义域"""


class BranchCutError(DomainError):
    """自变量落在主值对数的割线上"""


class PoleProximityError(ArithmeticError):
    """求值点过于靠近 γ(z) 的极点"""

    def __init__(self, message, pole=None):
        super().__init__(message)
        self.pole = pole


class ConvergenceError(ArithmeticError):
    """求积/迭代无法达到给定精度"""


class RootOfUnityError(ArithmeticError):
    """q 为单位根，q-级数分母为0"""


class ExtrapolationError(ArithmeticError):
    """外推序列不稳定"""


class SignConventionError(RuntimeError):
    """启动检查发现 e^{-iπz/ω} 的符号约定不一致"""


class WeylMismatchError(ValueError):
    """两个 Weyl 元素的 q 或截断阶不一致"""


class GridMismatchError(ValueError):
    """网格函数不在同一网格上"""


class AmplificationError(ArithmeticError):
    """复平移的谱乘子会把数值噪声放大到容差以上"""


class UsageError(ValueError):
    """命令行或配置文件用法错误"""
