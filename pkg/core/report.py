import csv
import json
import math
from dataclasses import dataclass, field

from rich.console import Console
from rich.table import Table

REPORT_SCHEMA = 1


def _jsonable(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


@dataclass
class VerificationReport:
    suite: str
    identity: str
    residual: float
    tolerance: float
    params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        if not self.identity:
            raise ValueError("identity 不能为空")
        self.residual = float(self.residual)
        self.tolerance = float(self.tolerance)

    @property
    def passed(self):
        # NaN 残差一律视为失败
        return bool(self.residual <= self.tolerance)

    def to_dict(self, with_time=True):
        data = {
            "suite": self.suite,
            "identity": self.identity,
            "params": _jsonable(self.params),
            "residual": _jsonable(self.residual),
            "tolerance": self.tolerance,
            "passed": self.passed,
            "provenance": _jsonable(self.provenance),
            "details": _jsonable(self.details),
        }
        if with_time:
            data["wall_time"] = self.wall_time
        return data


def summarize(reports):
    passed = sum(1 for r in reports if r.passed)
    return {
        "total": len(reports),
        "passed": passed,
        "failed": len(reports) - passed,
        "schema": REPORT_SCHEMA,
    }


def render_json(reports, with_time=True):
    payload = {
        "schema": REPORT_SCHEMA,
        "reports": [r.to_dict(with_time=with_time) for r in reports],
        "summary": summarize(reports),
    }
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False)


def write_reports(reports, path, fmt="json"):
    """
    写出报告文件

    Args:
        reports: VerificationReport 列表
        path: 输出路径
        fmt: json 或 csv
    """
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as f:
            f.write(render_json(reports))
            f.write("\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["suite", "identity", "tau", "residual", "tolerance", "passed", "wall_time"])
            for r in reports:
                writer.writerow([
                    r.suite, r.identity, json.dumps(_jsonable(r.params.get("tau"))),
                    repr(r.residual), repr(r.tolerance), r.passed, f"{r.wall_time:.3f}",
                ])
    else:
        raise ValueError(f"不支持的输出格式：{fmt}")


def print_summary(reports, console=None):
    """
    以表格形式输出汇总
    """
    console = console or Console()
    table = Table(title="验证结果汇总")
    table.add_column("suite")
    table.add_column("identity")
    table.add_column("τ")
    table.add_column("residual", justify="right")
    table.add_column("tolerance", justify="right")
    table.add_column("status")
    for r in reports:
        tau = r.params.get("tau")
        tau_text = "-" if tau is None else f"{complex(*_jsonable(tau)):.4g}"
        status = "[green]PASS[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.suite, r.identity, tau_text, f"{r.residual:.3e}", f"{r.tolerance:.1e}", status)
    console.print(table)
    s = summarize(reports)
    console.print(f"共 {s['total']} 项，通过 {s['passed']} 项，失败 {s['failed']} 项")


class Lcg:
    """
    线性同余随机数发生器，保证不同实现间样本点可复现
    x_{n+1} = (1664525 * x_n + 1013904223) mod 2^32
    """
    A = 1664525
    C = 1013904223
    M = 2 ** 32

    def __init__(self, seed=0):
        self.state = int(seed) % self.M

    def next_int(self):
        self.state = (self.A * self.state + self.C) % self.M
        return self.state

    def uniform(self, low=0.0, high=1.0):
        return low + (high - low) * self.next_int() / self.M

    def uniforms(self, n, low=0.0, high=1.0):
        return [self.uniform(low, high) for _ in range(n)]
