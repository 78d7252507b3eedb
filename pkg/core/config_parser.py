import os
from dataclasses import dataclass, field, replace

import yaml

from core.errors import UsageError
from core.logger import Logger
from core.operator_grid import Grid
from core.verifier import SUITE_NAMES

OUTPUT_FORMATS = ("json", "csv")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

DEFAULTS = {
    "tau_list": [1.0],
    "suites": ["all"],
    "grid": None,
    "tolerances": {},
    "output": None,
    "format": "json",
    "seed": 0,
    "workers": 4,
    "logging": {
        "level": "INFO",
        "log_file": "logs/qdilog-verify.log",
        "console_output": True,
    },
}


def parse_complex(text):
    """
    解析 "a+bi"、"2i"、"0.5" 形式的复数（i 与 j 均可）
    """
    if isinstance(text, (int, float, complex)):
        return complex(text)
    s = str(text).strip().replace(" ", "")
    if not s:
        raise UsageError("空的复数表达式")
    # 虚数单位只出现在末尾，"inf" 保持原样
    if s.endswith("i") and not s.endswith("inf"):
        s = s[:-1] + "j"
    try:
        return complex(s)
    except ValueError:
        raise UsageError(f"无法解析的复数：{text}") from None


def parse_tau_list(value):
    if isinstance(value, (list, tuple)):
        items = value
    else:
        items = [t for t in str(value).split(",") if t.strip()]
    if not items:
        raise UsageError("tau_list 不能为空")
    return [parse_complex(t) for t in items]


def parse_suites(value):
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    suites = [s.strip() for s in items if str(s).strip()]
    if not suites:
        raise UsageError("suites 不能为空")
    unknown = [s for s in suites if s != "all" and s not in SUITE_NAMES]
    if unknown:
        raise UsageError(f"未知的验证套件：{unknown}，可选 {list(SUITE_NAMES)} 或 all")
    if "all" in suites:
        return list(SUITE_NAMES)
    # 去重并保持顺序
    return list(dict.fromkeys(suites))


def parse_tolerances(value):
    """
    容差缩放：单个数字作用于全部套件，或 "suite=scale,..." / YAML 映射
    """
    if value is None or value == {}:
        return {}
    if isinstance(value, dict):
        pairs = list(value.items())
    elif isinstance(value, (int, float)):
        pairs = [("all", value)]
    else:
        text = str(value).strip()
        if "=" not in text:
            pairs = [("all", text)]
        else:
            pairs = []
            for item in text.split(","):
                if "=" not in item:
                    raise UsageError(f"容差项格式应为 suite=scale：{item}")
                name, scale = item.split("=", 1)
                pairs.append((name.strip(), scale))
    result = {}
    for name, scale in pairs:
        if name != "all" and name not in SUITE_NAMES:
            raise UsageError(f"容差中出现未知套件：{name}")
        try:
            scale = float(scale)
        except (TypeError, ValueError):
            raise UsageError(f"容差必须是数字：{name} = {scale}") from None
        if not scale > 0:
            raise UsageError(f"容差必须为正：{name} = {scale}")
        result[name] = scale
    return result


@dataclass
class RunConfig:
    tau_list: list = field(default_factory=lambda: [1 + 0j])
    suites: list = field(default_factory=lambda: list(SUITE_NAMES))
    grid: Grid = None
    tolerances: dict = field(default_factory=dict)
    output: str = None
    format: str = "json"
    seed: int = 0
    workers: int = 4
    log_level: str = "INFO"
    log_file: str = "logs/qdilog-verify.log"
    console_output: bool = True

    def tolerance_scale(self, suite):
        return self.tolerances.get(suite, self.tolerances.get("all", 1.0))

    def grid_for(self, tau):
        """
        未指定网格时按 τ 取默认网格
        """
        return self.grid if self.grid is not None else Grid.for_tau(tau)

    def override(self, **flags):
        """
        命令行参数覆盖配置文件（值为 None 的参数视为未给出）
        """
        given = {k: v for k, v in flags.items() if v is not None}
        return replace(self, **given)


class ConfigParser:
    def __init__(self, config_file, logger=None):
        self.config_file = config_file
        self.logger = logger or Logger().get_logger()
        self.config = None

    def load_config(self):
        """
        加载并解析YAML配置文件，文件不存在时使用默认值
        """
        if not self.config_file or not os.path.exists(self.config_file):
            self.logger.info(f"配置文件 {self.config_file} 不存在，使用默认配置")
            self.config = {}
            return self.config

        self.logger.info(f"加载配置文件：{self.config_file}")
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                self.config = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            self.logger.error(f"配置文件解析失败：{e}")
            raise UsageError(f"配置文件解析失败：{e}") from e
        except OSError as e:
            self.logger.error(f"读取配置文件失败：{e}")
            raise

        if not isinstance(self.config, dict):
            raise UsageError(f"配置文件顶层必须是映射：{self.config_file}")
        self.logger.info("配置文件加载成功")
        return self.config

    def validate_config(self):
        """
        验证配置的有效性并生成 RunConfig

        Raises:
            UsageError: 任意字段非法
        """
        if self.config is None:
            self.load_config()

        unknown = set(self.config) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"配置文件中存在未知字段：{sorted(unknown)}")

        merged = dict(DEFAULTS)
        merged.update({k: v for k, v in self.config.items() if k != "logging"})
        logging_config = dict(DEFAULTS["logging"])
        logging_config.update(self.config.get("logging") or {})

        fmt = str(merged["format"]).lower()
        if fmt not in OUTPUT_FORMATS:
            raise UsageError(f"无效的输出格式：{fmt}，仅支持 {OUTPUT_FORMATS}")
        level = str(logging_config["level"]).upper()
        if level not in LOG_LEVELS:
            raise UsageError(f"无效的日志级别：{level}")
        try:
            seed = int(merged["seed"])
            workers = int(merged["workers"])
        except (TypeError, ValueError):
            raise UsageError("seed 与 workers 必须是整数") from None
        if workers < 1:
            raise UsageError(f"workers 至少为 1：{workers}")

        grid = None
        if merged["grid"]:
            try:
                grid = Grid.parse(str(merged["grid"]))
            except ValueError as e:
                raise UsageError(str(e)) from e

        run_config = RunConfig(
            tau_list=parse_tau_list(merged["tau_list"]),
            suites=parse_suites(merged["suites"]),
            grid=grid,
            tolerances=parse_tolerances(merged["tolerances"]),
            output=merged["output"],
            format=fmt,
            seed=seed,
            workers=workers,
            log_level=level,
            log_file=logging_config["log_file"],
            console_output=bool(logging_config["console_output"]),
        )
        self.logger.debug(f"配置验证通过：{run_config}")
        return run_config

    def get_config(self):
        if self.config is None:
            self.load_config()
        return self.validate_config()
