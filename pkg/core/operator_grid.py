import cmath
import math
import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft

from core.errors import AmplificationError, GridMismatchError
from core.logger import get_module_logger
from core.qdilog import GammaEvaluator, gamma, gamma_array
from core.report import VerificationReport

DEFAULT_N = 2048
DEFAULT_L = 24.0
# FFT 舍入噪声约 1e-14，频带只保留高出它两个量级的部分
SPECTRAL_FLOOR = 1e-12
AMPLIFICATION_LIMIT = 1e-3
# Eq. (27) 平移因子小于此值视为落在 γ 的零点或极点上
SINGULAR_RADIUS = 1e-8


@dataclass(frozen=True)
class Grid:
    """
    以0为中心的等距网格 z_j = −L/2 + jΔ，Δ = L/N
    """
    n_points: int = DEFAULT_N
    length: float = DEFAULT_L

    def __post_init__(self):
        n = int(self.n_points)
        if n < 2 or n & (n - 1):
            raise ValueError(f"网格点数必须是不小于2的2的幂：{self.n_points}")
        if not self.length > 0:
            raise ValueError(f"网格长度必须为正：{self.length}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "length", float(self.length))

    @property
    def half_width(self):
        return self.length / 2

    @property
    def spacing(self):
        return self.length / self.n_points

    @property
    def reciprocal_spacing(self):
        return 1.0 / (self.n_points * self.spacing)

    @property
    def points(self):
        return -self.half_width + self.spacing * np.arange(self.n_points)

    def refined(self):
        return Grid(2 * self.n_points, self.length)

    @classmethod
    def for_tau(cls, tau, n_points=DEFAULT_N, base_length=DEFAULT_L):
        """
        L ∝ max(1, √τ, 1/√τ)，使 z 空间与 k 空间的衰减平衡
        """
        r = abs(cmath.sqrt(complex(tau)))
        return cls(n_points, base_length * max(1.0, r, 1.0 / r))

    @classmethod
    def parse(cls, text):
        """
        解析 "NxL" 形式的网格描述
        """
        try:
            n, length = text.lower().split("x")
            return cls(int(n), float(length))
        except ValueError as e:
            raise ValueError(f"网格格式应为 NxL，例如 2048x24：{text}") from e


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise GridMismatchError(f"取值长度 {values.shape} 与网格点数 {self.grid.n_points} 不符")
        if not np.all(np.isfinite(values)):
            raise ValueError("网格函数含有非有限值")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid, func):
        return cls(grid, func(grid.points))

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridMismatchError(f"网格不一致：{self.grid} / {other.grid}")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def norm(self):
        return math.sqrt(self.grid.spacing * float(np.sum(np.abs(self.values) ** 2)))

    def inner(self, other):
        """
        ⟨self, other⟩ = Δ Σ conj(f) g
        """
        return complex(self.grid.spacing * np.vdot(self.values, self._other(other)))


# ----------------------------------------------------------------------
# 连续 Fourier 变换（Bluestein chirp-z，输入输出同一网格）
# ----------------------------------------------------------------------
def fourier(values, grid):
    """
    (F f)(z_m) = Δ Σ_j e^{−2πi z_m z_j} f_j

    z_m z_j = z0² + z0Δ(m + j) + Δ²mj，mj = (m² + j² − (m − j)²)/2，卷积部分用 FFT 计算
    """
    n = grid.n_points
    d = grid.spacing
    z0 = -grid.half_width
    idx = np.arange(n)
    a = d * d
    chirp = np.exp(-1j * np.pi * a * idx.astype(float) ** 2)
    pre = np.exp(-2j * np.pi * z0 * d * idx)
    x = np.asarray(values, dtype=complex) * pre * chirp
    m = fft.next_fast_len(2 * n - 1)
    kernel = np.zeros(m, dtype=complex)
    w = np.conj(chirp)
    kernel[:n] = w
    kernel[m - n + 1:] = w[1:][::-1]
    conv = fft.ifft(fft.fft(x, m) * fft.fft(kernel))[:n]
    return d * np.exp(-2j * np.pi * z0 * z0) * pre * chirp * conv


def inverse_fourier(values, grid):
    return np.conj(fourier(np.conj(np.asarray(values, dtype=complex)), grid))


# ----------------------------------------------------------------------
# γ 表缓存
# ----------------------------------------------------------------------
class GammaTableCache:
    """
    按 (N, L, τ) 缓存网格上的 γ(z) 与 γ(−z)，插入时加锁，读取无锁
    """

    def __init__(self):
        self._tables = {}
        self._lock = threading.Lock()

    def get(self, params, grid, logger=None):
        key = (grid.n_points, grid.length, params.tau)
        table = self._tables.get(key)
        if table is not None:
            return table
        with self._lock:
            table = self._tables.get(key)
            if table is None:
                logger = get_module_logger(logger)
                start = time.time()
                ev = GammaEvaluator(params, logger=logger)
                z = grid.points
                plus, _ = gamma_array(z, ev)
                minus, _ = gamma_array(-z, ev)
                plus.setflags(write=False)
                minus.setflags(write=False)
                table = (plus, minus)
                self._tables[key] = table
                logger.debug(f"γ 网格表 N = {grid.n_points} L = {grid.length} τ = {params.tau}："
                             f"耗时 {time.time() - start:.2f}s")
        return table

    def clear(self):
        with self._lock:
            self._tables.clear()

    def __len__(self):
        return len(self._tables)


GAMMA_TABLES = GammaTableCache()


# ----------------------------------------------------------------------
# 算子
# ----------------------------------------------------------------------
PRIMITIVES = ("U", "Uinv", "V", "Vinv", "K", "Kinv", "Khat", "Khatinv", "F", "Finv", "G", "S", "Sinv")
MULTIPLIERS = ("U", "Uinv", "K", "Kinv", "Khat", "Khatinv")
_INVERSE = {
    "U": "Uinv", "Uinv": "U", "V": "Vinv", "Vinv": "V", "K": "Kinv", "Kinv": "K",
    "Khat": "Khatinv", "Khatinv": "Khat", "F": "Finv", "Finv": "F", "S": "Sinv", "Sinv": "S",
}


@dataclass(frozen=True)
class OperatorHandle:
    """
    网格算子的符号表示

    kind 为基本算子名，或 "scalar" / "compose" / "sum" / "theta"。
    compose 的 factors 按算子记号书写，最右边的先作用；theta 的 target 取 "X1".."X5" 或 "X1inv".."X5inv"。
    """
    kind: str
    params: object = None
    factors: tuple = ()
    terms: tuple = ()
    value: complex = 1.0
    target: str = ""

    def __matmul__(self, other):
        return compose(self, other)

    def __add__(self, other):
        if not isinstance(other, OperatorHandle):
            other = scalar(other, self.params)
        return OperatorHandle("sum", self.params or other.params, terms=_terms(self) + _terms(other))

    __radd__ = __add__

    def __rmul__(self, c):
        return OperatorHandle("sum", self.params, terms=tuple((c * k, h) for k, h in _terms(self)))

    def __sub__(self, other):
        return self + (-1) * other

    def __pow__(self, n):
        base = self if n >= 0 else self.inverse()
        return compose(*([base] * abs(n))) if n else scalar(1.0, self.params)

    def inverse(self):
        if self.kind in _INVERSE:
            return OperatorHandle(_INVERSE[self.kind], self.params)
        if self.kind == "scalar":
            return scalar(1 / self.value, self.params)
        if self.kind == "compose":
            return compose(*[f.inverse() for f in reversed(self.factors)])
        raise ValueError(f"{self.kind} 类算子没有符号逆")


def _terms(h):
    if h.kind == "sum":
        return h.terms
    return ((1.0, h),)


def operator(kind, params):
    if kind not in PRIMITIVES:
        raise ValueError(f"未知的算子：{kind}，可选 {PRIMITIVES}")
    return OperatorHandle(kind, params)


def scalar(value, params=None):
    return OperatorHandle("scalar", params, value=complex(value))


def theta_of(target, params):
    return OperatorHandle("theta", params, target=target)


def compose(*ops):
    """
    复合并消去相邻的互逆基本算子（如 S·S⁻¹）
    """
    flat = []
    for op in ops:
        flat.extend(op.factors if op.kind == "compose" else [op])
    out = []
    for op in flat:
        if out and op.kind in _INVERSE and out[-1].kind == _INVERSE[op.kind]:
            out.pop()
            continue
        out.append(op)
    params = next((o.params for o in flat if o.params is not None), None)
    if not out:
        return scalar(1.0, params)
    if len(out) == 1:
        return out[0]
    return OperatorHandle("compose", params, factors=tuple(out))


def quantum_y_operators(params):
    """
    Eq. (19) 的 X₁..X₅，乘积顺序照原式
    """
    q = params.q
    U, V = operator("U", params), operator("V", params)
    Ui, Vi = operator("Uinv", params), operator("Vinv", params)
    one = scalar(1.0, params)
    return [
        U,
        V,
        Ui @ (one + q * V),
        Ui @ (scalar(1 / q, params) + U + V) @ Vi,
        (one + q * U) @ Vi,
    ]


def _expand_theta(h):
    """
    Θ(X_k) = S^{−(k−1)} Θ(X₁) S^{k−1}，Θ(X₁) = K，Θ(X₁⁻¹) = K̂
    """
    t = h.target
    inv = t.endswith("inv")
    k = int(t[1:-3] if inv else t[1:])
    if not 1 <= k <= 5:
        raise ValueError(f"Θ 的自变量只支持 X1..X5：{t}")
    p = h.params
    core = operator("Khat" if inv else "K", p)
    S = operator("S", p)
    return compose(S ** (-(k - 1)), core, S ** (k - 1)) if k > 1 else core


@dataclass(frozen=True, eq=False)
class _Term:
    """
    coeff · Π φ_kind(z + 2nω′) · (V^shift base)(z)
    """
    coeff: complex
    factors: tuple
    base: np.ndarray = field(repr=False)
    shift: int = 0

    def scaled(self, c):
        return replace(self, coeff=self.coeff * c)

    def times(self, kind):
        return replace(self, factors=self.factors + ((kind, 0),))

    def shifted(self, n):
        return replace(self, factors=tuple((k, m + n) for k, m in self.factors), shift=self.shift + n)


class GridApplier:
    """
    在给定网格上作用算子，γ 表来自共享缓存

    中间结果保存为若干项 c·Π φ(z + 2nω′)·(Vⁿb)(z)：乘法算子只记录符号，V 只平移符号的自变量，
    复平移落到 Fourier 空间的只有采样的基函数 b。F、G、S 等积分算子处才在网格上求值。
    """

    def __init__(self, params, grid, spectral_floor=SPECTRAL_FLOOR, amplification_limit=AMPLIFICATION_LIMIT,
                 cache=None, logger=None):
        self.params = params
        self.grid = grid
        self.spectral_floor = spectral_floor
        self.amplification_limit = amplification_limit
        self.cache = cache if cache is not None else GAMMA_TABLES
        self.logger = get_module_logger(logger)
        self.z = grid.points
        self._symbols = {}
        self._evaluator = None

    @property
    def gamma_tables(self):
        return self.cache.get(self.params, self.grid, self.logger)

    @property
    def evaluator(self):
        if self._evaluator is None:
            self._evaluator = GammaEvaluator(self.params, logger=self.logger)
        return self._evaluator

    # ------------------------------------------------------------------
    # 复平移 V
    # ------------------------------------------------------------------
    def shifted_spectrum(self, values, steps):
        """
        V^steps 在 Fourier 空间的像：乘 e^{4πi·steps·ω′k}，只保留峰值所在、高于 spectral_floor 的连通频带

        Raises:
            AmplificationError: 频带边缘的舍入噪声经乘子放大后超过 amplification_limit
        """
        spectrum = fourier(values, self.grid)
        magnitude = np.abs(spectrum)
        top = int(np.argmax(magnitude))
        peak = float(magnitude[top])
        if peak == 0:
            return np.zeros_like(spectrum)
        gaps = np.flatnonzero(magnitude < self.spectral_floor * peak)
        lo = int(gaps[gaps < top].max()) + 1 if np.any(gaps < top) else 0
        hi = int(gaps[gaps > top].min()) if np.any(gaps > top) else len(spectrum)
        kept = np.zeros(len(spectrum), dtype=bool)
        kept[lo:hi] = True
        multiplier = np.exp(steps * 4j * np.pi * self.params.omega_prime * self.z)
        shifted = np.where(kept, spectrum * multiplier, 0)
        noise = self.spectral_floor * peak * float(np.max(np.abs(multiplier[kept])))
        size = float(np.max(np.abs(shifted)))
        if noise > self.amplification_limit * size:
            raise AmplificationError(
                f"复平移放大噪声：估计 {noise:.3e}，结果量级 {size:.3e}，比值超过 {self.amplification_limit}"
            )
        return shifted

    def shift(self, values, steps):
        """
        V^steps f(z) = f(z + 2·steps·ω′)
        """
        if steps == 0:
            return np.asarray(values, dtype=complex)
        return inverse_fourier(self.shifted_spectrum(values, steps), self.grid)

    # ------------------------------------------------------------------
    # 乘法符号
    # ------------------------------------------------------------------
    def _gamma_shift(self, values, w, n):
        """
        由 γ(w) 按 Eq. (27) 逐步得到 γ(w + 2nω′)

        Returns:
            (values, zeros, poles)，后两者是落在 γ 零点或极点上的掩码
        """
        p = self.params
        out = np.array(values, dtype=complex)
        zeros = np.zeros(len(out), dtype=bool)
        poles = np.zeros(len(out), dtype=bool)
        for j in range(1, abs(n) + 1):
            step = (2 * j - 1) * p.omega_prime
            if n > 0:
                factor = 1 + np.exp(-1j * np.pi * (w + step) / p.omega)
                zeros |= np.abs(factor) < SINGULAR_RADIUS
                out = out * factor
            else:
                factor = 1 + np.exp(-1j * np.pi * (w - step) / p.omega)
                poles |= np.abs(factor) < SINGULAR_RADIUS
                out = out / np.where(poles, 1, factor)
        return out, zeros, poles

    def symbol(self, kind, n=0):
        """
        乘法算子 kind 的符号在 z + 2nω′ 处的取值；落在奇点上的点为 nan
        """
        key = (kind, n)
        cached = self._symbols.get(key)
        if cached is not None:
            return cached
        p = self.params
        w = self.z + 2 * n * p.omega_prime
        if kind in ("U", "Uinv"):
            sign = -1 if kind == "U" else 1
            values = np.exp(sign * 1j * np.pi * w / p.omega)
        elif kind == "chirp":
            values = np.exp(1j * np.pi * w * w)
        elif kind in ("K", "Kinv", "Khat", "Khatinv"):
            plus, minus = self.gamma_tables
            if kind.startswith("Khat"):
                # γ(−z − 2nω′) = γ(w′ + 2(−n)ω′)，w′ = −z
                g, zeros, poles = self._gamma_shift(minus, -self.z, -n)
            else:
                g, zeros, poles = self._gamma_shift(plus, self.z, n)
            if kind.endswith("inv"):
                values = np.where(zeros, np.nan, 1 / np.where(zeros, 1, g))
                values = np.where(poles, 0, values)
            else:
                values = np.where(poles, np.nan, g)
        else:
            raise ValueError(f"未知的乘法符号：{kind}")
        values.setflags(write=False)
        self._symbols[key] = values
        return values

    def _symbol_at(self, kind, point, n):
        p = self.params
        w = point + 2 * n * p.omega_prime
        if kind == "U":
            return cmath.exp(-1j * math.pi * w / p.omega)
        if kind == "Uinv":
            return cmath.exp(1j * math.pi * w / p.omega)
        if kind == "chirp":
            return cmath.exp(1j * math.pi * w * w)
        value = gamma(-w if kind.startswith("Khat") else w, self.evaluator).value
        return 1 / value if kind.endswith("inv") else value

    # ------------------------------------------------------------------
    # 求值
    # ------------------------------------------------------------------
    def _term_values(self, t, bases):
        key = (id(t.base), t.shift)
        if key not in bases:
            bases[key] = self.shift(t.base, t.shift)
        v = t.coeff * bases[key]
        for kind, n in t.factors:
            v = v * self.symbol(kind, n)
        return v

    def _base_at(self, t, point):
        spectrum = fourier(t.base, self.grid) if t.shift == 0 else self.shifted_spectrum(t.base, t.shift)
        return self.grid.spacing * complex(np.sum(np.exp(2j * np.pi * point * self.z) * spectrum))

    def _removable_limit(self, terms, point):
        """
        各项之和在奇点处的极限：取 point ± ε 两侧的平均
        """
        eps = 1e-3 * self.grid.spacing
        sides = []
        for zp in (point - eps, point + eps):
            total = 0j
            for t in terms:
                v = t.coeff * self._base_at(t, zp)
                for kind, n in t.factors:
                    v *= self._symbol_at(kind, zp, n)
                total += v
            sides.append(total)
        return 0.5 * (sides[0] + sides[1])

    def values(self, terms):
        bases = {}
        total = np.zeros(self.grid.n_points, dtype=complex)
        with np.errstate(invalid="ignore"):
            for t in terms:
                total = total + self._term_values(t, bases)
        bad = np.flatnonzero(~np.isfinite(total))
        for j in bad:
            total[j] = self._removable_limit(terms, float(self.z[j]))
        if len(bad):
            self.logger.debug(f"{len(bad)} 个网格点落在符号奇点上，按两侧极限取值")
        return total

    def _integral(self, kind, v):
        if kind == "F":
            return _Term(1.0, (), fourier(v, self.grid))
        if kind == "Finv":
            return _Term(1.0, (), inverse_fourier(v, self.grid))
        if kind == "G":
            return _Term(1.0, (("chirp", 0),), fourier(v, self.grid))
        if kind == "S":
            return _Term(1.0, (("K", 0),), fourier(v, self.grid))
        if kind == "Sinv":
            plus, _ = self.gamma_tables
            return _Term(1.0, (), inverse_fourier(v / plus, self.grid))
        raise ValueError(f"未知的算子：{kind}")

    def _apply(self, h, terms):
        if h.kind == "scalar":
            return [t.scaled(h.value) for t in terms]
        if h.kind == "compose":
            for f in reversed(h.factors):
                terms = self._apply(f, terms)
            return terms
        if h.kind == "sum":
            out = []
            for c, sub in h.terms:
                out.extend(t.scaled(c) for t in self._apply(sub, terms))
            return out
        if h.kind == "theta":
            return self._apply(_expand_theta(h), terms)
        if h.kind in MULTIPLIERS:
            return [t.times(h.kind) for t in terms]
        if h.kind in ("V", "Vinv"):
            n = 1 if h.kind == "V" else -1
            return [t.shifted(n) for t in terms]
        return [self._integral(h.kind, self.values(terms))]

    def apply(self, op, f):
        if f.grid != self.grid:
            raise GridMismatchError(f"网格函数不在算子网格上：{f.grid} / {self.grid}")
        terms = self._apply(op, [_Term(1.0, (), np.asarray(f.values))])
        return GridFunction(self.grid, self.values(terms))


def apply(op, f, logger=None):
    """
    把算子作用到网格函数上（参数取自算子本身）
    """
    if op.params is None:
        if op.kind != "scalar":
            raise ValueError("算子缺少模参数")
        return f * op.value
    return GridApplier(op.params, f.grid, logger=logger).apply(op, f)


# ----------------------------------------------------------------------
# 测试向量
# ----------------------------------------------------------------------
TEST_VECTORS = {
    "gaussian": lambda z: np.exp(-np.pi * z * z),
    "shifted_gaussian": lambda z: np.exp(-np.pi * (z - 1) ** 2),
    "modulated_gaussian": lambda z: np.exp(-np.pi * z * z + 2j * np.pi * 0.3 * z),
}


def default_test_set(grid, names=None):
    names = names or list(TEST_VECTORS)
    return {name: GridFunction.from_callable(grid, TEST_VECTORS[name]) for name in names}


def _relative(a, b):
    return (a - b).norm() / max(b.norm(), 1e-300)


def _report(identity, params, grid, residual, tolerance, start, details=None, suite="pentagon"):
    return VerificationReport(
        suite=suite,
        identity=identity,
        params=params.echo(),
        residual=residual,
        tolerance=tolerance,
        provenance={"grid": f"{grid.n_points}x{grid.length:g}", "fourier": "Bluestein chirp-z",
                    "spectral_floor": SPECTRAL_FLOOR, "complex_shift": "symbolic multipliers, spectral base"},
        details=details or {},
        wall_time=time.time() - start,
    )


def _wrap(phase):
    return (phase + math.pi) % (2 * math.pi) - math.pi


# ----------------------------------------------------------------------
# 检查
# ----------------------------------------------------------------------
def fourier_calibration_check(params, grid, tolerance=1e-10, logger=None):
    """
    Gaussian 自对偶、F⁴ = I、(F²f)(z) = f(−z)，其余算子检查之前必须先通过
    """
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    F = operator("F", params)
    g = GridFunction.from_callable(grid, TEST_VECTORS["gaussian"])
    selfdual = _relative(ap.apply(F, g), g)
    worst_f4 = 0.0
    worst_reflect = 0.0
    for name, f in default_test_set(grid).items():
        worst_f4 = max(worst_f4, _relative(ap.apply(F ** 4, f), f))
        reflected = GridFunction.from_callable(grid, lambda z, fn=TEST_VECTORS[name]: fn(-z))
        worst_reflect = max(worst_reflect, _relative(ap.apply(F ** 2, f), reflected))
    details = {"gaussian_self_dual": selfdual, "F4": worst_f4, "F2_reflection": worst_reflect}
    return _report("F^4 = I", params, grid, max(details.values()), tolerance, start, details)


def unitarity_check(params, grid, test_set=None, tolerance=1e-10, logger=None):
    """
    ‖Sf‖ = ‖f‖ 与 ‖Ff‖ = ‖f‖（实 τ 时 K 的符号模为1）
    """
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    worst = {"S": 0.0, "F": 0.0}
    for f in test_set.values():
        n = f.norm()
        for kind in worst:
            worst[kind] = max(worst[kind], abs(ap.apply(operator(kind, params), f).norm() - n) / n)
    return _report("unitarity of S and F", params, grid, max(worst.values()), tolerance, start, worst)


def s5_identity_check(params, grid, test_set=None, tolerance=1e-3, phase_tolerance=1e-4, logger=None):
    """
    Eq. (40)：S⁵ = e^{iα}I

    残差取 max ‖S⁵f − e^{iα}f‖/‖f‖ 与按 tolerance/phase_tolerance 换算的相位误差中较大者
    """
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    S5 = operator("S", params) ** 5
    target = cmath.exp(1j * params.alpha)
    per_vector = {}
    phases = {}
    for name, f in test_set.items():
        g = ap.apply(S5, f)
        per_vector[name] = (g - f * target).norm() / f.norm()
        phases[name] = cmath.phase(f.inner(g) / f.inner(f))
    phase_err = max(abs(_wrap(ph - params.alpha.real)) for ph in phases.values())
    residual = max(max(per_vector.values()), phase_err * tolerance / phase_tolerance)
    details = {"residuals": per_vector, "fitted_phase": phases, "alpha": params.alpha,
               "phase_error": phase_err, "alpha_readings": params.alpha_readings()}
    return _report("Eq. (40)", params, grid, residual, tolerance, start, details)


def intertwining_check(params, grid, test_set=None, tolerance=1e-6, logger=None):
    """
    UF = FV 与 VF = FU⁻¹
    """
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    U, V, F = (operator(k, params) for k in ("U", "V", "F"))
    Ui = operator("Uinv", params)
    worst = {"UF=FV": 0.0, "VF=FU^-1": 0.0}
    for f in test_set.values():
        worst["UF=FV"] = max(worst["UF=FV"], _relative(ap.apply(U @ F, f), ap.apply(F @ V, f)))
        worst["VF=FU^-1"] = max(worst["VF=FU^-1"], _relative(ap.apply(V @ F, f), ap.apply(F @ Ui, f)))
    return _report("UF = FV, VF = FU^-1", params, grid, max(worst.values()), tolerance, start, worst)


def theta_commutation_check(params, grid, test_set=None, tolerance=1e-6, logger=None):
    """
    VΘ(U) = Θ(U)(1 + q⁻¹U)V，Θ(U) 即乘 γ(z)
    """
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    V, U = operator("V", params), operator("U", params)
    theta_u = theta_of("X1", params)
    lhs_op = V @ theta_u
    rhs_op = theta_u @ (scalar(1.0, params) + (1 / params.q) * U) @ V
    worst = max(_relative(ap.apply(lhs_op, f), ap.apply(rhs_op, f)) for f in test_set.values())
    return _report("V Theta(U) = Theta(U)(1+q^-1 U)V", params, grid, worst, tolerance, start)


def conjugation_check(params, grid, i, test_set=None, tolerance=1e-6, with_relations=True, logger=None):
    """
    Eq. (38)：S⁻¹X_iS = X_{i+1}，X₆ = X₁
    """
    if not 1 <= i <= 5:
        raise ValueError(f"i 必须在 1..5 之间：{i}")
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    X = quantum_y_operators(params)
    S = operator("S", params)
    lhs_op = S.inverse() @ X[i - 1] @ S
    rhs_op = X[i % 5]
    per_vector = {name: _relative(ap.apply(lhs_op, f), ap.apply(rhs_op, f)) for name, f in test_set.items()}
    details = {"residuals": per_vector, "i": i}
    if with_relations:
        rel = intertwining_check(params, grid, test_set, logger=logger)
        com = theta_commutation_check(params, grid, test_set, logger=logger)
        details["intertwining"] = {"residual": rel.residual, "passed": rel.passed}
        details["theta_commutation"] = {"residual": com.residual, "passed": com.passed}
    return _report(f"Eq. (38) i={i}", params, grid, max(per_vector.values()), tolerance, start, details)


def y_relation_grid_check(params, grid, test_set=None, tolerance=1e-6, logger=None):
    """
    Eq. (17) 在网格上：(X_iX_{i+2} − (1 + qX_{i+1}))f，i = 1, 2, 3
    """
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    X = quantum_y_operators(params)
    one = scalar(1.0, params)
    worst = {}
    for i in range(3):
        lhs_op = X[i] @ X[i + 2]
        rhs_op = one + params.q * X[i + 1]
        worst[f"i={i + 1}"] = max(_relative(ap.apply(lhs_op, f), ap.apply(rhs_op, f)) for f in test_set.values())
    return _report("Eq. (17) on grid", params, grid, max(worst.values()), tolerance, start, worst)


def volkov_operator_check(params, grid, test_set=None, tolerance=1e-3, logger=None):
    """
    (a) G³ = e^{iπ/4}F²；(b) F⁻¹ = e^{−iα+3iβ}FG³；(c) Eq. (MR)：
    K S⁻¹K S = S⁻⁴K̂S⁴ · S⁻³K̂S³ · S⁻²K̂S²，即 Θ(X₁)Θ(X₂) = Θ(X₅⁻¹)Θ(X₄⁻¹)Θ(X₃⁻¹)
    """
    start = time.time()
    p = params
    ap = GridApplier(p, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    F, G = operator("F", p), operator("G", p)
    g3 = G ** 3
    lhs_a, rhs_a = g3, cmath.exp(0.25j * math.pi) * (F ** 2)
    lhs_b, rhs_b = operator("Finv", p), cmath.exp(-1j * p.alpha + 3j * p.beta) * (F @ g3)
    lhs_c = compose(theta_of("X1", p), theta_of("X2", p))
    rhs_c = compose(theta_of("X5inv", p), theta_of("X4inv", p), theta_of("X3inv", p))
    res = {"G3": 0.0, "Finv": 0.0, "MR": 0.0}
    for f in test_set.values():
        res["G3"] = max(res["G3"], _relative(ap.apply(lhs_a, f), ap.apply(rhs_a, f)))
        res["Finv"] = max(res["Finv"], _relative(ap.apply(lhs_b, f), ap.apply(rhs_b, f)))
        res["MR"] = max(res["MR"], _relative(ap.apply(_flatten_theta(lhs_c), f), ap.apply(_flatten_theta(rhs_c), f)))
    return _report("Eq. (49)", p, grid, max(res.values()), tolerance, start, res)


def _flatten_theta(h):
    """
    展开 Θ 并合并相邻的 S 幂
    """
    if h.kind == "theta":
        return _expand_theta(h)
    if h.kind == "compose":
        return compose(*[_flatten_theta(f) for f in h.factors])
    return h


def g_cubed_check(params, grid, test_set=None, tolerance=1e-8, logger=None):
    """
    Eq. (48)：G³ = e^{iπ/4}F²
    """
    start = time.time()
    ap = GridApplier(params, grid, logger=logger)
    test_set = test_set or default_test_set(grid)
    F, G = operator("F", params), operator("G", params)
    rhs = cmath.exp(0.25j * math.pi) * (F ** 2)
    worst = max(_relative(ap.apply(G ** 3, f), ap.apply(rhs, f)) for f in test_set.values())
    return _report("Eq. (48)", params, grid, worst, tolerance, start)


def refinement_study(check, params, grid, floor=1e-11, coarse=None, **kwargs):
    """
    同一检查在 N 与 2N 上的残差，要求加密后下降（或都已到精度下限）

    coarse 为已在 N 上算好的报告时不再重算
    """
    start = time.time()
    coarse = coarse or check(params, grid, **kwargs)
    fine = check(params, grid.refined(), **kwargs)
    ok = fine.residual < coarse.residual or max(fine.residual, coarse.residual) <= floor
    ratio = fine.residual / coarse.residual if coarse.residual > 0 else 0.0
    return _report(f"refinement: {coarse.identity}", params, grid, 0.0 if ok else math.inf, 1.0, start,
                   {"coarse": coarse.residual, "fine": fine.residual, "ratio": ratio,
                    "grids": [coarse.provenance["grid"], fine.provenance["grid"]]})
