import importlib

from core.errors import SignConventionError
from core.logger import Logger
from core.params import make_params
from core.qdilog import theta_relation_check

REQUIRED_PACKAGES = ("numpy", "scipy", "mpmath", "yaml", "rich")
SIGN_CHECK_TOLERANCE = 1e-8


class SystemCheck:
    def __init__(self, logger=None):
        self.logger = logger or Logger().get_logger()

    def check_required_packages(self, packages=None):
        """
        检查依赖包是否可导入

        Args:
            packages: 需要检查的包列表，默认为 REQUIRED_PACKAGES
        """
        packages = packages or REQUIRED_PACKAGES
        self.logger.info("检查依赖包...")
        missing = []
        for name in packages:
            try:
                module = importlib.import_module(name)
                self.logger.debug(f"{name} {getattr(module, '__version__', '')} 已安装")
            except ImportError:
                self.logger.error(f"依赖包 {name} 未安装")
                missing.append(name)

        if missing:
            raise ImportError(f"缺少依赖包，请先安装：{missing}")
        self.logger.info("依赖包检查通过")
        return True

    def check_sign_convention(self, tau=1.0, u=0.5):
        """
        用 Eq. (31) 核对 e^{−iπz/ω} 的符号约定，不一致时直接报错，不自动翻转
        """
        self.logger.info("检查 Θ 的符号约定...")
        report = theta_relation_check(make_params(tau), u, tolerance=SIGN_CHECK_TOLERANCE)
        if not report.passed:
            self.logger.error(f"Eq. (31) 残差 {report.residual:.3e}，符号约定不一致")
            raise SignConventionError(
                f"Θ(qu)/Θ(q⁻¹u) ≠ 1/(1+u)：τ = {tau}，u = {u}，残差 {report.residual:.3e}"
            )
        self.logger.info(f"符号约定检查通过（残差 {report.residual:.3e}）")
        return True

    def run_all_checks(self):
        """
        运行所有启动检查
        """
        self.logger.info("开始环境检查...")

        self.check_required_packages()
        self.check_sign_convention()

        self.logger.info("环境检查完成，所有条件均满足")
        return True
