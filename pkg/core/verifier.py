import math
import time
from concurrent.futures import ThreadPoolExecutor

from core import classical, osc_integrals, operator_grid, qdilog, weyl
from core.logger import Logger
from core.params import make_params, params_check
from core.report import Lcg, VerificationReport

FORMAL_Q = (0.3, 0.3 + 0.2j)
FORMAL_ORDER = 6
SAMPLE_COUNT = 10
FIVE_TERM_SAMPLES = 100
STATIONARY_SAMPLES = 20
KERNEL_POINT = (0.8, 0.3)
QUASICLASSICAL_Z = 0.5


def _worst(reports, samples, seed):
    """
    多个样本点上的同一检查只保留残差最大的一条
    """
    worst = max(reports, key=lambda r: r.residual if not math.isnan(r.residual) else math.inf)
    worst.params = dict(worst.params, samples=samples, seed=seed)
    worst.wall_time = sum(r.wall_time for r in reports)
    return worst


# ----------------------------------------------------------------------
# 各验证套件：(params, config, logger) -> 报告列表
# ----------------------------------------------------------------------
def run_params_suite(params, config, logger):
    return [params_check(params)]


def run_gamma_suite(params, config, logger):
    ev = qdilog.GammaEvaluator(params, logger=logger)
    reports = qdilog.property_suite(params, ev=ev)
    reports.append(qdilog.residue_check(params, ev))
    return reports


def run_theta_suite(params, config, logger):
    ev = qdilog.GammaEvaluator(params, logger=logger)
    reports = [qdilog.theta_relation_check(params, 0.5, ev)]
    if params.tau.imag > 0:
        reports.append(qdilog.theta_cross_check(params, ev=ev))
    else:
        logger.info(f"τ = {params.tau} 为实数，乘积形式发散，跳过 Θ 乘积互核")
    return reports


def run_formal_suite(params, config, logger):
    reports = []
    for q in FORMAL_Q:
        reports.append(weyl.schutzenberger_check(q, FORMAL_ORDER))
        reports.append(weyl.pentagon_formal_check(q, FORMAL_ORDER))
        reports.append(weyl.volkov_formal_check(q, FORMAL_ORDER, logger=logger))
        reports.append(weyl.y_relation_check(q))
        reports.append(weyl.y_periodicity_check(q))
    return reports


def run_classical_suite(params, config, logger):
    seed = config.seed
    reports = [classical.period_check(1000, seed)]

    rng = Lcg(seed)
    for form in classical.FIVE_TERM_FORMS:
        low, high = (0.01, 0.99) if form == "L-form" else (0.05, 20.0)
        samples = [classical.five_term_check(form, rng.uniform(low, high), rng.uniform(low, high))
                   for _ in range(FIVE_TERM_SAMPLES)]
        reports.append(_worst(samples, FIVE_TERM_SAMPLES, seed))

    samples = [classical.stationary_phase_check(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), logger=logger)
               for _ in range(STATIONARY_SAMPLES)]
    reports.append(_worst(samples, STATIONARY_SAMPLES, seed))

    reports.append(classical.action_invariance_check(STATIONARY_SAMPLES, seed))
    reports.append(classical.action_identity_check(STATIONARY_SAMPLES, seed))
    reports.append(classical.rogers_reflection_check(STATIONARY_SAMPLES, seed))
    reports.append(classical.quasiclassical_gamma_check(QUASICLASSICAL_Z, logger=logger))
    return reports


def _require_real(params, suite, logger):
    if params.is_real:
        return True
    logger.info(f"{suite} 套件要求实 τ > 0，τ = {params.tau} 跳过")
    return False


def run_integrals_suite(params, config, logger):
    if not _require_real(params, "integrals", logger):
        return []
    ev = qdilog.GammaEvaluator(params, logger=logger)
    spec = osc_integrals.OscillatorySpec()
    rng = Lcg(config.seed)
    window = abs(params.omega_dprime)
    reports = []
    for _ in range(SAMPLE_COUNT):
        x = rng.uniform(0.2, 2.0) * (1 if rng.uniform() < 0.5 else -1)
        reports.append(osc_integrals.ftd_check(x, params, spec, ev, logger=logger))
    for _ in range(SAMPLE_COUNT):
        x = rng.uniform(-2.0, 2.0)
        reports.append(osc_integrals.shc_check(x, params, spec, ev, logger=logger))
    for _ in range(SAMPLE_COUNT):
        x = rng.uniform(-1.0, 1.0)
        y = rng.uniform(0.1, 0.9) * window
        reports.append(osc_integrals.mir_check(x, y, params, spec, ev, logger=logger))
    reports.append(osc_integrals.tail_agreement_check("FTD", params, 0.7, spec=spec, ev=ev, logger=logger))
    reports.append(osc_integrals.tail_agreement_check("ShC", params, 0.5, spec=spec, ev=ev, logger=logger))
    reports.append(osc_integrals.tail_agreement_check("MIR", params, 0.3, 0.2, spec=spec, ev=ev, logger=logger))
    return reports


def run_kernel_suite(params, config, logger):
    if not _require_real(params, "kernel", logger):
        return []
    x, y = KERNEL_POINT
    ev = qdilog.GammaEvaluator(params, logger=logger)
    steps = osc_integrals.kernel_reduction_steps(x, y, params, ev=ev, logger=logger)
    return steps + [osc_integrals.pentagon_kernel_reduction(x, y, params, steps=steps)]


def run_pentagon_suite(params, config, logger):
    if not _require_real(params, "pentagon", logger):
        return []
    og = operator_grid
    grid = config.grid_for(params.tau)
    test_set = og.default_test_set(grid)
    kw = {"test_set": test_set, "logger": logger}
    s5 = og.s5_identity_check(params, grid, **kw)
    volkov = og.volkov_operator_check(params, grid, **kw)
    reports = [
        og.fourier_calibration_check(params, grid, logger=logger),
        og.unitarity_check(params, grid, **kw),
        og.g_cubed_check(params, grid, **kw),
        s5,
        volkov,
        og.intertwining_check(params, grid, **kw),
        og.theta_commutation_check(params, grid, **kw),
        og.y_relation_grid_check(params, grid, **kw),
    ]
    for i in range(1, 6):
        reports.append(og.conjugation_check(params, grid, i, with_relations=False, **kw))
    # 加密网格上的测试向量需重新采样，不能传入 test_set
    reports.append(og.refinement_study(og.fourier_calibration_check, params, grid, coarse=reports[0], logger=logger))
    reports.append(og.refinement_study(og.g_cubed_check, params, grid, coarse=reports[2], logger=logger))
    reports.append(og.refinement_study(og.s5_identity_check, params, grid, coarse=s5, logger=logger))
    reports.append(og.refinement_study(og.volkov_operator_check, params, grid, coarse=volkov, logger=logger))
    return reports


SUITES = {
    "params": (run_params_suite, False),
    "gamma-properties": (run_gamma_suite, False),
    "theta": (run_theta_suite, False),
    "formal": (run_formal_suite, True),
    "classical": (run_classical_suite, True),
    "integrals": (run_integrals_suite, False),
    "kernel": (run_kernel_suite, False),
    "pentagon": (run_pentagon_suite, False),
}
SUITE_NAMES = tuple(SUITES)


class Verifier:
    """
    按 (套件, τ) 并发执行验证，结果按提交顺序汇总
    """

    def __init__(self, config, logger=None):
        self.config = config
        self.logger = logger or Logger().get_logger()

    def jobs(self):
        """
        与 τ 无关的套件只运行一次
        """
        jobs = []
        for suite in self.config.suites:
            _, tau_independent = SUITES[suite]
            if tau_independent:
                jobs.append((suite, None))
            else:
                jobs.extend((suite, tau) for tau in self.config.tau_list)
        return jobs

    def run_job(self, job):
        suite, tau = job
        runner, _ = SUITES[suite]
        label = suite if tau is None else f"{suite} @ τ = {tau:g}"
        start = time.time()
        try:
            params = None if tau is None else make_params(tau)
            reports = runner(params, self.config, self.logger)
        except Exception as e:
            # 检查内部的异常记为失败报告，不中断其余套件
            self.logger.error(f"套件 {label} 执行异常：{e}", exc_info=True)
            reports = [VerificationReport(
                suite=suite,
                identity=f"{suite} suite error",
                params={} if tau is None else {"tau": tau},
                residual=math.inf,
                tolerance=0.0,
                provenance={"exception": type(e).__name__},
                details={"error": str(e)},
                wall_time=time.time() - start,
            )]

        scale = self.config.tolerance_scale(suite)
        for r in reports:
            r.tolerance *= scale
            if r.passed:
                self.logger.info(f"[{label}] {r.identity}：残差 {r.residual:.3e} ≤ {r.tolerance:.1e}")
            else:
                self.logger.warning(f"[{label}] {r.identity} 未通过：残差 {r.residual:.3e} > {r.tolerance:.1e}")
        self.logger.debug(f"套件 {label} 用时 {time.time() - start:.2f}s")
        return reports

    def run(self):
        """
        运行全部验证任务

        Returns:
            VerificationReport 列表
        """
        jobs = self.jobs()
        self.logger.info(f"## 开始验证：{len(jobs)} 个任务，并发数 {self.config.workers}")
        self.logger.info("-" * 60)

        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            results = list(executor.map(self.run_job, jobs))

        reports = [r for batch in results for r in batch]
        failed = sum(1 for r in reports if not r.passed)
        self.logger.info("-" * 60)
        self.logger.info(f"## 验证完成：共 {len(reports)} 项，失败 {failed} 项")
        return reports
