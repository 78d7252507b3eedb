#!/usr/bin/env python3
import argparse
import json
import sys

from rich.console import Console

from core.config_parser import LOG_LEVELS, OUTPUT_FORMATS, ConfigParser, parse_complex, parse_suites, \
    parse_tau_list, parse_tolerances
from core.errors import SignConventionError, UsageError
from core.logger import Logger
from core.operator_grid import Grid
from core.report import print_summary, render_json, write_reports
from core.system_check import SystemCheck
from core.tables import EVAL_FUNCTIONS, TABLE_FUNCTIONS, evaluate_function, parse_range, tabulate, write_table
from core.verifier import SUITE_NAMES, Verifier

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_IO = 3


def build_parser():
    parser = argparse.ArgumentParser(
        description="modular quantum dilogarithm 数值验证工具",
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    log_group = parser.add_argument_group('日志选项')
    log_group.add_argument("--log-level", choices=LOG_LEVELS, default=None,
                           help="日志级别，默认取配置文件中的 logging.level（INFO）")
    # 子命令之后也接受 --log-level；SUPPRESS 保证未给出时不覆盖主解析器的值
    common = argparse.ArgumentParser(add_help=False)
    common_group = common.add_argument_group('日志选项')
    common_group.add_argument("--log-level", choices=LOG_LEVELS, default=argparse.SUPPRESS,
                              help="日志级别，同主命令的 --log-level")
    sub = parser.add_subparsers(dest="command", required=True)

    # verify
    p_verify = sub.add_parser("verify", help="运行验证套件", parents=[common],
                              formatter_class=argparse.RawDescriptionHelpFormatter)
    run_group = p_verify.add_argument_group('验证选项')
    run_group.add_argument("--tau", help="逗号分隔的 τ 列表，例如 0.5,1,2 或 0.866+0.5i")
    run_group.add_argument("--suite", help=f"逗号分隔的套件名或 all，可选：{', '.join(SUITE_NAMES)}")
    run_group.add_argument("--grid", help="算子网格 NxL，例如 2048x24，默认按 τ 选取")
    run_group.add_argument("--tol", help="容差缩放：单个数字作用于全部套件，或 suite=scale,...")
    run_group.add_argument("--seed", type=int, help="随机样本点的种子，默认为0")
    run_group.add_argument("--workers", type=int, help="并发任务数，默认为4")
    out_group = p_verify.add_argument_group('输出选项')
    out_group.add_argument("--out", help="报告文件路径")
    out_group.add_argument("--format", choices=OUTPUT_FORMATS, help="报告文件格式，默认为 json")
    out_group.add_argument("--json", action="store_true", help="以 JSON 输出到标准输出，代替汇总表")
    config_group = p_verify.add_argument_group('配置选项')
    config_group.add_argument("--config", "-c", default="config.yaml",
                              help="配置文件路径，默认为当前目录下的config.yaml，命令行参数优先")
    p_verify.epilog = """
使用示例:
  γ 的性质:    python verify.py verify --tau 1 --suite gamma-properties
  算子五边形:  python verify.py verify --tau 1 --suite pentagon --grid 2048x24
  全部套件:    python verify.py verify --suite all --tau 0.5,1,2 --out report.json
    """

    # eval
    p_eval = sub.add_parser("eval", help="单点求值", parents=[common])
    p_eval.add_argument("function", choices=EVAL_FUNCTIONS, help="函数名")
    p_eval.add_argument("point", help="自变量，实数或 a+bi")
    p_eval.add_argument("--tau", default="1", help="模参数 τ，默认为1（仅 gamma、theta 使用）")
    p_eval.add_argument("--json", action="store_true", help="以 JSON 输出")
    p_eval.epilog = "使用示例:\n  python verify.py eval gamma 0 --tau 1\n  python verify.py eval R 2"
    p_eval.formatter_class = argparse.RawDescriptionHelpFormatter

    # table
    p_table = sub.add_parser("table", help="输出作图数据（CSV）", parents=[common])
    p_table.add_argument("function", choices=TABLE_FUNCTIONS, help="函数名")
    p_table.add_argument("--range", required=True, dest="range_spec",
                         help="start:stop:step，gamma/unitarity 为 z 的范围，rho 为 τ 的范围；起点为负时写成 --range=-3:3:0.05")
    p_table.add_argument("--tau", default="1", help="模参数 τ，默认为1")
    p_table.add_argument("--z", type=float, default=0.5, help="rho 表中固定的 z，默认为0.5")
    p_table.add_argument("--out", required=True, help="CSV 输出路径")
    p_table.epilog = "使用示例:\n  python verify.py table gamma --range=-3:3:0.05 --tau 1 --out gamma.csv"
    p_table.formatter_class = argparse.RawDescriptionHelpFormatter
    return parser


def resolve_run_config(args, logger):
    """
    配置文件 + 命令行参数（命令行优先）
    """
    config = ConfigParser(args.config, logger).get_config()
    grid = None
    if args.grid:
        try:
            grid = Grid.parse(args.grid)
        except ValueError as e:
            raise UsageError(str(e)) from e
    if args.workers is not None and args.workers < 1:
        raise UsageError(f"workers 至少为 1：{args.workers}")
    return config.override(
        tau_list=parse_tau_list(args.tau) if args.tau else None,
        suites=parse_suites(args.suite) if args.suite else None,
        grid=grid,
        tolerances=parse_tolerances(args.tol) if args.tol else None,
        output=args.out,
        format=args.format,
        seed=args.seed,
        workers=args.workers,
        log_level=args.log_level,
    )


def cmd_verify(args, log):
    logger = log.get_logger()
    config = resolve_run_config(args, logger)
    logger = log.reset(log_file=config.log_file, log_level=config.log_level,
                       console_output=config.console_output)

    logger.info("# modular quantum dilogarithm 数值验证")
    logger.info("-" * 60)
    SystemCheck(logger).run_all_checks()

    reports = Verifier(config, logger).run()

    if config.output:
        write_reports(reports, config.output, config.format)
        logger.info(f"报告已写入：{config.output}")
    if args.json:
        print(render_json(reports))
    else:
        print_summary(reports)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def cmd_eval(args, log):
    result = evaluate_function(args.function, parse_complex(args.point), parse_complex(args.tau),
                               log.get_logger())
    v = result.value
    if args.json:
        print(json.dumps({"function": args.function, "point": args.point, "tau": args.tau,
                          "value": [v.real, v.imag], "est_error": result.est_error}, sort_keys=True))
    else:
        Console().print(f"{args.function}({args.point}) = {v.real:.15g}{v.imag:+.15g}i  "
                        f"(估计误差 {result.est_error:.2e})")
    return EXIT_OK


def cmd_table(args, log):
    rows = tabulate(args.function, parse_range(args.range_spec), parse_complex(args.tau), args.z,
                    log.get_logger())
    write_table(rows, args.out)
    Console().print(f"已写出 {len(rows)} 行到 {args.out}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "eval": cmd_eval, "table": cmd_table}


def main(argv=None):
    """
    主入口函数，返回退出码
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    # eval/table 默认只输出警告以上，避免日志淹没结果
    default_level = "INFO" if args.command == "verify" else "WARNING"
    log = Logger(log_level=args.log_level or default_level,
                 log_file=None if args.command != "verify" else "logs/qdilog-verify.log")
    logger = log.get_logger()

    try:
        return COMMANDS[args.command](args, log)
    except UsageError as e:
        logger.error(f"用法错误：{e}")
        print(f"错误：{e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"读写文件失败：{e}", exc_info=True)
        print(f"错误：读写文件失败：{e}", file=sys.stderr)
        return EXIT_IO
    except (SignConventionError, ImportError) as e:
        logger.error(f"环境检查失败：{e}")
        print(f"错误：{e}", file=sys.stderr)
        return EXIT_FAILED
    except KeyboardInterrupt:
        logger.error("验证被用户中断")
        return EXIT_FAILED
    except (ValueError, ArithmeticError) as e:
        logger.error(f"计算失败：{e}", exc_info=args.command == "verify")
        print(f"错误：{e}", file=sys.stderr)
        return EXIT_FAILED
    except Exception as e:
        logger.error(f"执行失败：{e}", exc_info=True)
        print(f"错误：{e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
