import cmath
import csv
import json
import logging
import math

import pytest

import verify
from core import verifier
from core.config_parser import RunConfig
from core.errors import DomainError, SignConventionError, UsageError
from core.logger import LOGGER_NAME
from core.report import VerificationReport
from core.system_check import SystemCheck
from core.tables import evaluate_function, parse_range, tabulate, write_table
from core.verifier import Verifier


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    # 日志目录与报告都落在临时目录
    monkeypatch.chdir(tmp_path)
    (tmp_path / "config.yaml").write_text(
        "logging:\n  log_file: logs/test.log\n  console_output: false\n", encoding="utf-8"
    )
    return tmp_path


# ----------------------------------------------------------------------
# eval / table
# ----------------------------------------------------------------------
def test_eval_gamma_at_zero(workdir, capsys):
    assert verify.main(["eval", "gamma", "0", "--tau", "1", "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    value = complex(*payload["value"])
    assert abs(value - cmath.exp(1j * math.pi / 12)) < 1e-10
    assert payload["est_error"] < 1e-10


@pytest.mark.parametrize("name,point,expected", [
    ("L", "1", math.pi ** 2 / 6),
    ("R", "1", math.pi ** 2 / 12),
    ("Li2", "-1", -math.pi ** 2 / 12),
])
def test_eval_dilogarithms(workdir, capsys, name, point, expected):
    assert verify.main(["eval", name, point, "--json"]) == 0
    re, im = json.loads(capsys.readouterr().out)["value"]
    assert re == pytest.approx(expected, abs=1e-14)
    assert abs(im) < 1e-15


def test_eval_plain_output(workdir, capsys):
    assert verify.main(["eval", "R", "2"]) == 0
    assert "R(2) = " in capsys.readouterr().out


def test_eval_domain_error_exit_code(workdir):
    assert verify.main(["eval", "L", "0.5+0.1i"]) == 1


def test_eval_bad_number(workdir):
    assert verify.main(["eval", "gamma", "zero"]) == 2


def test_table_gamma(workdir, capsys):
    out = workdir / "gamma.csv"
    assert verify.main(["table", "gamma", "--range=-3:3:0.05", "--tau", "1", "--out", str(out)]) == 0
    with open(out, encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["input", "re_value", "im_value", "est_error"]
    assert len(rows) == 122
    assert float(rows[1][0]) == pytest.approx(-3.0)
    assert float(rows[-1][0]) == pytest.approx(3.0)
    # 实轴上 |γ| = 1
    assert all(abs(math.hypot(float(r[1]), float(r[2])) - 1) < 1e-10 for r in rows[1:])
    assert "121" in capsys.readouterr().out


def test_table_bad_range(workdir):
    assert verify.main(["table", "gamma", "--range", "1:0:0.1", "--out", "x.csv"]) == 2


def test_table_unwritable(workdir):
    out = workdir / "missing" / "x.csv"
    assert verify.main(["table", "gamma", "--range", "0:1:0.5", "--out", str(out)]) == 3


# ----------------------------------------------------------------------
# verify
# ----------------------------------------------------------------------
def test_verify_params_suite(workdir, capsys):
    code = verify.main(["verify", "--suite", "params", "--tau", "0.5,1,2", "--json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["summary"]["total"] == 3
    assert [r["params"]["tau"][0] for r in payload["reports"]] == [0.5, 1.0, 2.0]


def test_verify_writes_report(workdir):
    out = workdir / "report.json"
    assert verify.main(["verify", "--suite", "params", "--tau", "1", "--out", str(out)]) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["schema"] == 1
    assert payload["reports"][0]["identity"] == "modular constants"


def test_verify_unknown_suite(workdir):
    assert verify.main(["verify", "--suite", "bogus"]) == 2


def test_verify_bad_grid(workdir):
    assert verify.main(["verify", "--suite", "params", "--grid", "1000x24"]) == 2


def test_verify_unwritable_output(workdir):
    out = workdir / "missing" / "report.json"
    assert verify.main(["verify", "--suite", "params", "--tau", "1", "--out", str(out)]) == 3


def test_verify_failed_check_exit_code(workdir, monkeypatch):
    def failing(params, config, log):
        return [VerificationReport(suite="params", identity="always off", residual=1.0, tolerance=1e-12)]

    monkeypatch.setitem(verifier.SUITES, "params", (failing, False))
    assert verify.main(["verify", "--suite", "params", "--tau", "1", "--json"]) == 1


def test_verify_sign_convention_failure(workdir, monkeypatch):
    def broken(self, tau=1.0, u=0.5):
        raise SignConventionError("sign")

    monkeypatch.setattr(SystemCheck, "check_sign_convention", broken)
    assert verify.main(["verify", "--suite", "params"]) == 1


# ----------------------------------------------------------------------
# Verifier
# ----------------------------------------------------------------------
def test_tau_independent_suites_run_once(logger):
    config = RunConfig(tau_list=[0.5, 1.0], suites=["formal", "params"])
    assert Verifier(config, logger).jobs() == [("formal", None), ("params", 0.5), ("params", 1.0)]


def test_exception_becomes_failed_report(logger, monkeypatch):
    def boom(params, config, log):
        raise ArithmeticError("quadrature blew up")

    monkeypatch.setitem(verifier.SUITES, "params", (boom, False))
    reports = Verifier(RunConfig(tau_list=[1.0], suites=["params"]), logger).run()
    assert len(reports) == 1
    assert not reports[0].passed
    assert reports[0].provenance["exception"] == "ArithmeticError"
    assert reports[0].details["error"] == "quadrature blew up"


def test_tolerance_scale_is_applied(logger, monkeypatch):
    def fixed(params, config, log):
        return [VerificationReport(suite="params", identity="fixed", residual=5e-12, tolerance=1e-12)]

    monkeypatch.setitem(verifier.SUITES, "params", (fixed, False))
    config = RunConfig(tau_list=[1.0], suites=["params"], tolerances={"params": 10.0})
    (report,) = Verifier(config, logger).run()
    assert report.tolerance == pytest.approx(1e-11)
    assert report.passed


def test_results_keep_submission_order(logger):
    config = RunConfig(tau_list=[2.0, 0.5, 1.0], suites=["params"], workers=3)
    reports = Verifier(config, logger).run()
    assert [r.params["tau"][0] for r in reports] == [2.0, 0.5, 1.0]


def test_complex_tau_skips_real_only_suites(logger):
    config = RunConfig(tau_list=[cmath.exp(1j * math.pi / 6)], suites=["integrals", "kernel", "pentagon"])
    assert Verifier(config, logger).run() == []


# ----------------------------------------------------------------------
# tables / 启动检查
# ----------------------------------------------------------------------
def test_parse_range():
    assert len(parse_range("-3:3:0.05")) == 121
    assert list(parse_range("0:1:0.5")) == [0.0, 0.5, 1.0]
    for bad in ("0:1", "0:1:0", "1:0:0.1", "a:b:c"):
        with pytest.raises(UsageError):
            parse_range(bad)


def test_evaluate_requires_real_point():
    with pytest.raises(DomainError):
        evaluate_function("R", 1 + 1j)


def test_theta_eval_matches_gamma():
    assert abs(evaluate_function("theta", 1, 1.0).value - evaluate_function("gamma", 0, 1.0).value) < 1e-12


def test_rho_table(tmp_path):
    rows = tabulate("rho", [0.2, 0.1])
    assert [r[0] for r in rows] == [0.2, 0.1]
    assert rows[1][1] < rows[0][1]
    assert math.isnan(rows[0][3])
    path = tmp_path / "rho.csv"
    write_table(rows, str(path))
    assert path.read_text(encoding="utf-8").splitlines()[1].endswith("nan")


def test_unitarity_table_needs_real_tau():
    with pytest.raises(DomainError):
        tabulate("unitarity", [0.0], tau=1 + 0.2j)
    rows = tabulate("unitarity", [-1.0, 0.0, 1.0], tau=0.5)
    assert all(r[1] < 1e-10 for r in rows)


def test_system_check(logger):
    check = SystemCheck(logger)
    assert check.run_all_checks()
    with pytest.raises(ImportError):
        check.check_required_packages(["surely_not_installed_pkg"])


def test_sign_convention_mismatch(logger, monkeypatch):
    def flipped(params, u, tolerance):
        return VerificationReport(suite="theta", identity="Eq. (31)", residual=1.0, tolerance=tolerance)

    monkeypatch.setattr("core.system_check.theta_relation_check", flipped)
    with pytest.raises(SignConventionError):
        SystemCheck(logger).check_sign_convention()


# ----------------------------------------------------------------------
# 日志级别 / 兜底异常 / 可复现
# ----------------------------------------------------------------------
@pytest.fixture
def restore_level():
    logger = logging.getLogger(LOGGER_NAME)
    level = logger.level
    yield logger
    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)


@pytest.mark.parametrize("argv", [
    ["--log-level", "DEBUG", "eval", "R", "2"],
    ["eval", "R", "2", "--log-level", "DEBUG"],
])
def test_log_level_before_or_after_subcommand(workdir, restore_level, argv):
    assert verify.main(argv) == 0
    assert restore_level.level == logging.DEBUG
    assert all(h.level == logging.DEBUG for h in restore_level.handlers)


def test_log_level_after_verify_subcommand(workdir, restore_level):
    assert verify.main(["verify", "--suite", "params", "--tau", "1", "--log-level", "WARNING"]) == 0
    assert restore_level.level == logging.WARNING


def test_reused_handlers_follow_new_level(workdir, restore_level):
    assert verify.main(["eval", "R", "2", "--log-level", "DEBUG"]) == 0
    # 第二次调用复用已有处理器，级别回到 eval 的默认值
    assert verify.main(["eval", "R", "2"]) == 0
    assert restore_level.level == logging.WARNING
    assert all(h.level == logging.WARNING for h in restore_level.handlers)


def test_unexpected_exception_exit_code(workdir, monkeypatch, capsys):
    def broken(args, log):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(verify.COMMANDS, "eval", broken)
    assert verify.main(["eval", "R", "2"]) == 1
    assert "unexpected" in capsys.readouterr().err


def test_verify_reports_are_reproducible(workdir):
    payloads, codes = [], []
    for name in ("first.json", "second.json"):
        out = workdir / name
        code = verify.main(["verify", "--suite", "params,classical", "--tau", "0.5,1", "--seed", "7",
                            "--workers", "2", "--out", str(out)])
        codes.append(code)
        payload = json.loads(out.read_text(encoding="utf-8"))
        for report in payload["reports"]:
            report.pop("wall_time", None)
            report["provenance"].pop("wall_time", None)
        payloads.append(payload)
    assert codes[0] == codes[1]
    assert payloads[0] == payloads[1]
    seeds = {r["params"]["seed"] for r in payloads[0]["reports"] if "seed" in r["params"]}
    assert seeds == {7}
