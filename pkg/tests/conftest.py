import pytest

from core.logger import get_module_logger
from core.params import make_params
from core.qdilog import GammaEvaluator


@pytest.fixture(scope="session")
def params1():
    return make_params(1.0)


@pytest.fixture(scope="session")
def ev1(params1):
    return GammaEvaluator(params1)


@pytest.fixture
def logger():
    # 不添加处理器，日志交给 pytest 的 caplog 收集
    return get_module_logger()
