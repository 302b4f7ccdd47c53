"""
精确问题的连续求解器
固定 N 的治愈问题 (投影梯度) 与姑息问题 (标量求根 + KKT 牛顿)，
以及 n ≤ 3 的穷举校验
"""

import math
from typing import Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import brentq

from config import get_settings
from pkpd import DrugPK
from utils import get_logger
from .errors import InfeasibleError
from .objective import DoseBounds, LogF1Operator, check_times, log_f1
from .closed_form import feasible_n_range_curative

logger = get_logger(__name__)

# Armijo 充分上升系数
_ARMIJO = 1e-4
# 回溯次数上限
_MAX_BACKTRACK = 60
# 穷举网格点数上限
MAX_GRID_POINTS = 10 ** 8


class SolverConfig(BaseModel):
    """求解器容差"""
    model_config = ConfigDict(frozen=True)

    optimality_tol: float = Field(default=1e-8, gt=0, description="最优性容差 (治愈: 投影梯度残差，姑息: 相对牛顿减量)")
    max_iterations: int = Field(default=5000, ge=1, description="最大迭代次数")
    feasibility_tol: float = Field(default=1e-10, gt=0, description="约束可行性容差")

    @classmethod
    def from_settings(cls) -> "SolverConfig":
        """由全局配置构造"""
        s = get_settings().solver
        return cls(
            optimality_tol=s.optimality_tol,
            max_iterations=s.max_iterations,
            feasibility_tol=s.feasibility_tol
        )


class SolveReport(BaseModel):
    """求解结果，不收敛时 converged = False 并附带说明"""
    model_config = ConfigDict(frozen=True)

    doses: Tuple[float, ...] = Field(..., description="各次剂量 (mg/m²)")
    objective: float = Field(..., description="目标值 (治愈: log f₁，姑息: Σd)")
    log_f1: float = Field(..., description="log f₁")
    total: float = Field(..., description="累计剂量")
    kkt_residual: float = Field(..., description="KKT 残差 (姑息问题取相对牛顿减量与约束残差的较大者)")
    iterations: int = Field(..., ge=0, description="迭代次数")
    converged: bool = Field(..., description="是否收敛")
    message: str = Field(default="", description="说明")

    @property
    def min_dose(self) -> float:
        return min(self.doses)

    @property
    def max_dose(self) -> float:
        return max(self.doses)


def grad_log_f1(
    pk: DrugPK,
    times: Sequence[float],
    horizon_T: float,
    doses: Sequence[float]
) -> np.ndarray:
    """
    log f₁ 对各次剂量的解析梯度

    Args:
        pk: 药物参数
        times: 给药时间
        horizon_T: 终止时间 T
        doses: 剂量 (允许 0)

    Returns:
        梯度向量
    """
    return LogF1Operator(pk, times, horizon_T).gradient(doses)


def project_simplex_box(
    v: Sequence[float],
    total: float,
    lo: float,
    hi: float
) -> np.ndarray:
    """
    欧氏投影到 {x: Σx = total, lo ≤ xᵢ ≤ hi}

    投影形如 clip(v - τ, lo, hi)。Σ clip(v - τ) 关于 τ 分段线性递减，
    在排序后的断点间线性插值求 τ，再在自由分量上修正残差。

    Args:
        v: 待投影向量
        total: 分量和
        lo: 下界
        hi: 上界

    Returns:
        投影点
    """
    x = np.asarray(v, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("v 必须是非空一维向量")
    n = x.size
    if lo > hi:
        raise ValueError(f"lo 不能大于 hi: {lo} > {hi}")
    slack = 1e-12 * max(1.0, abs(total))
    if total < n * lo - slack or total > n * hi + slack:
        raise ValueError(f"total = {total} 不在 [n·lo, n·hi] = [{n * lo}, {n * hi}] 内")
    if lo == hi:
        return np.full(n, lo)

    breakpoints = np.sort(np.concatenate([x - hi, x - lo]))
    sums = np.clip(x[None, :] - breakpoints[:, None], lo, hi).sum(axis=1)
    above = np.nonzero(sums >= total)[0]
    k = int(above[-1]) if above.size else 0
    if k >= breakpoints.size - 1:
        tau = breakpoints[-1]
    else:
        s0, s1 = sums[k], sums[k + 1]
        tau = breakpoints[k]
        if s0 > s1:
            tau += (s0 - total) / (s0 - s1) * (breakpoints[k + 1] - breakpoints[k])

    p = np.clip(x - tau, lo, hi)
    free = (p > lo) & (p < hi)
    if free.any():
        p[free] = np.clip(p[free] + (total - p.sum()) / free.sum(), lo, hi)
    return p


def _feasibility_gap(x: np.ndarray, lo: float, hi: float) -> float:
    return float(max(0.0, lo - x.min(), x.max() - hi))


def _report(
    op: LogF1Operator,
    x: np.ndarray,
    objective: float,
    kkt: float,
    iterations: int,
    converged: bool,
    message: str = ""
) -> SolveReport:
    return SolveReport(
        doses=tuple(float(d) for d in x),
        objective=objective,
        log_f1=op.value(x),
        total=math.fsum(x),
        kkt_residual=kkt,
        iterations=iterations,
        converged=converged,
        message=message
    )


def solve_curative_exact(
    pk: DrugPK,
    times: Sequence[float],
    horizon_T: float,
    bounds: DoseBounds,
    n: int,
    cfg: Optional[SolverConfig] = None
) -> SolveReport:
    """
    在 {Σd = D, d_min ≤ dᵢ ≤ d_max} 上最大化 log f₁

    从等剂量点出发做投影梯度上升，步长取 Barzilai-Borwein 并 Armijo 回溯。
    停止准则: ‖P(x + ∇) - x‖∞ ≤ optimality_tol。

    Args:
        pk: 药物参数
        times: 给药时间 (长度 n)
        horizon_T: 终止时间 T
        bounds: 剂量约束 (需含 D)
        n: 给药次数
        cfg: 求解器容差，默认取全局配置

    Returns:
        求解结果
    """
    cfg = cfg or SolverConfig.from_settings()
    total = bounds.require_cumulative()
    t = check_times(times, horizon_T)
    if t.size != n:
        raise ValueError(f"times 长度应为 {n}，实际为 {t.size}")
    feasible = feasible_n_range_curative(bounds)
    if not feasible.contains(n):
        raise InfeasibleError(
            f"N = {n} 不在可行范围 [{feasible.first}, {feasible.last}] 内",
            condition="d_max" if n < feasible.first else "d_min"
        )

    lo, hi = bounds.d_min, bounds.d_max
    op = LogF1Operator(pk, t, horizon_T)

    def project(v: np.ndarray) -> np.ndarray:
        return project_simplex_box(v, total, lo, hi)

    x = project(np.full(n, total / n))
    f = op.value(x)
    g = op.gradient(x)
    alpha = (total / n + pk.k2_tilde) ** 2
    kkt = float(np.max(np.abs(project(x + g) - x)))
    iterations = 0
    logger.debug(f"治愈求解开始: N = {n}, 初始 log f₁ = {f:.10g}")

    while kkt > cfg.optimality_tol and iterations < cfg.max_iterations:
        iterations += 1
        noise = 1e-15 * max(1.0, abs(f))
        step = alpha
        for _ in range(_MAX_BACKTRACK):
            x_new = project(x + step * g)
            f_new = op.value(x_new)
            if f_new >= f + _ARMIJO * float(g @ (x_new - x)) - noise:
                break
            step /= 2
        g_new = op.gradient(x_new)
        s, y = x_new - x, g_new - g
        curvature = -float(s @ y)
        alpha = float(s @ s) / curvature if curvature > 0 else 2 * step
        alpha = min(max(alpha, 1e-8), 1e12)
        x, f, g = x_new, f_new, g_new
        kkt = float(np.max(np.abs(project(x + g) - x)))

    feasible_sum = abs(math.fsum(x) - total) <= cfg.feasibility_tol * max(1.0, total)
    feasible_box = _feasibility_gap(x, lo, hi) <= cfg.feasibility_tol * max(1.0, hi)
    converged = kkt <= cfg.optimality_tol and feasible_sum and feasible_box
    message = "" if converged else f"未收敛: KKT 残差 {kkt:.3e}，迭代 {iterations} 次"
    if converged:
        logger.debug(f"治愈求解完成: N = {n}, 迭代 {iterations} 次, log f₁ = {f:.12g}")
    else:
        logger.warning(f"治愈求解 N = {n} {message}")
    return _report(op, x, f, kkt, iterations, converged, message)


class _NewtonState(NamedTuple):
    """姑息问题在 (x, μ) 处的牛顿步"""
    residual: float
    c: float
    dx: np.ndarray
    dmu: float


def _palliative_newton(
    op: LogF1Operator,
    x: np.ndarray,
    mu: float,
    tau: float,
    lo: float,
    hi: float
) -> _NewtonState:
    """
    姑息问题的牛顿步与停止量

    处于下界且 1 - μ·gᵢ ≥ 0、处于上界且 ≤ 0 的分量固定，其余为自由分量，
    在自由分量上解 [-μH, -g; gᵀ, 0]·(Δx, Δμ) = -(1 - μg, c)。
    停止量取 |c| 与相对牛顿减量 ½·Δxᵀ(-μH)Δx / Σx 的较大者，
    即再走一步牛顿所能减少的相对剂量。

    Raises:
        np.linalg.LinAlgError: KKT 矩阵奇异
    """
    g = op.gradient(x)
    c = op.value(x) - tau
    nu = 1.0 - mu * g
    at_lo = (x <= lo) & (nu >= 0)
    at_hi = (x >= hi) & (nu <= 0)
    idx = np.nonzero(~(at_lo | at_hi))[0]
    dx = np.zeros_like(x)
    if idx.size == 0:
        return _NewtonState(abs(c), c, dx, 0.0)
    h = -mu * op.hessian(x)[np.ix_(idx, idx)]
    gf = g[idx]
    k = idx.size
    kkt_matrix = np.zeros((k + 1, k + 1))
    kkt_matrix[:k, :k] = h
    kkt_matrix[:k, k] = -gf
    kkt_matrix[k, :k] = gf
    sol = np.linalg.solve(kkt_matrix, -np.append(nu[idx], c))
    dx[idx] = sol[:k]
    decrement = 0.5 * abs(float(sol[:k] @ h @ sol[:k])) / max(1.0, math.fsum(x))
    return _NewtonState(max(abs(c), decrement), c, dx, float(sol[k]))


def solve_palliative_exact(
    pk: DrugPK,
    times: Sequence[float],
    horizon_T: float,
    bounds: DoseBounds,
    t_r_tilde: float,
    n: int,
    cfg: Optional[SolverConfig] = None
) -> SolveReport:
    """
    在 log f₁ ≥ T̃_R 与盒约束下最小化 Σd

    1) 对等剂量 δ 求根 log f₁(δ,…,δ) = T̃_R
    2) 在自由分量上对 [-μH, -g; gᵀ, 0] 做阻尼牛顿迭代，越界分量固定在边界，
       乘子符号错误时释放；相对牛顿减量不超过 optimality_tol 时停止。
       等剂量根附近最优解很平坦，若减量已足够小则直接返回等剂量根

    Args:
        pk: 药物参数
        times: 给药时间 (长度 n)
        horizon_T: 终止时间 T
        bounds: 剂量约束
        t_r_tilde: T̃_R
        n: 给药次数
        cfg: 求解器容差，默认取全局配置

    Returns:
        求解结果；该 N 不可行时 converged = False
    """
    cfg = cfg or SolverConfig.from_settings()
    t = check_times(times, horizon_T)
    if t.size != n:
        raise ValueError(f"times 长度应为 {n}，实际为 {t.size}")
    lo, hi = bounds.d_min, bounds.d_max
    op = LogF1Operator(pk, t, horizon_T)
    feas = cfg.feasibility_tol

    def equal(delta: float) -> np.ndarray:
        return np.full(n, delta)

    x_hi = equal(hi)
    f_hi = op.value(x_hi)
    if f_hi - t_r_tilde < -feas:
        message = f"N = {n} 不可行: 全部取 d_max 仍不满足 log f₁ ≥ T̃_R"
        logger.warning(message)
        return _report(op, x_hi, math.fsum(x_hi), math.inf, 0, False, message)

    x_lo = equal(lo)
    if op.value(x_lo) >= t_r_tilde:
        return _report(op, x_lo, math.fsum(x_lo), 0.0, 0, True, "约束不起作用，全部取 d_min")

    if f_hi <= t_r_tilde:
        delta = hi
    else:
        delta = brentq(
            lambda d: op.value(equal(d)) - t_r_tilde, lo, hi,
            xtol=1e-13, rtol=4 * np.finfo(float).eps
        )
    x = equal(delta)
    mu = 1.0 / float(np.mean(op.gradient(x)))
    logger.debug(f"姑息求解: N = {n}, 等剂量起点 δ = {delta:.10g}")

    def newton(x: np.ndarray, mu: float) -> Optional[_NewtonState]:
        try:
            return _palliative_newton(op, x, mu, t_r_tilde, lo, hi)
        except np.linalg.LinAlgError:
            return None

    state = newton(x, mu)
    iterations = 0
    message = ""
    while state is not None and state.residual > cfg.optimality_tol:
        if iterations >= cfg.max_iterations:
            break
        if not state.dx.any() and state.dmu == 0.0:
            message = "所有剂量都处于边界"
            break
        iterations += 1
        step = 1.0
        for _ in range(_MAX_BACKTRACK):
            x_new = np.clip(x + step * state.dx, lo, hi)
            mu_new = mu + step * state.dmu
            trial = newton(x_new, mu_new)
            if trial is not None and trial.residual < (1.0 - _ARMIJO * step) * state.residual:
                break
            step /= 2
        x, mu, state = x_new, mu_new, trial
    if state is None:
        message = "KKT 矩阵奇异"

    # 恢复可行性: 沿未到上界的分量均匀上调
    for _ in range(5):
        c = op.value(x) - t_r_tilde
        if c >= 0:
            break
        idx = np.nonzero(x < hi)[0]
        if idx.size == 0:
            break
        g = op.gradient(x)
        x[idx] = np.clip(x[idx] - c / float(g[idx].sum()) * (1 + 1e-9), lo, hi)

    final = newton(x, mu)
    res = math.inf if final is None else final.residual
    c = op.value(x) - t_r_tilde
    converged = (
        res <= cfg.optimality_tol
        and c >= -feas
        and _feasibility_gap(x, lo, hi) <= feas * max(1.0, hi)
    )
    if not converged and not message:
        message = f"未收敛: KKT 残差 {res:.3e}，迭代 {iterations} 次"
    if converged:
        logger.debug(f"姑息求解完成: N = {n}, 迭代 {iterations} 次, Σd = {math.fsum(x):.8f}")
    else:
        logger.warning(f"姑息求解 N = {n} {message}")
    return _report(op, x, math.fsum(x), res, iterations, converged, message)


class OracleProblem(BaseModel):
    """穷举校验的问题描述 (n ≤ 3)"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["curative", "palliative"] = Field(..., description="问题类型")
    objective: Literal["exact", "approx"] = Field(default="exact", description="log f₁ 或 log f̂₁")
    pk: DrugPK = Field(..., description="药物参数")
    times: Tuple[float, ...] = Field(..., description="给药时间")
    horizon_T: float = Field(..., gt=0, description="终止时间 T")
    bounds: DoseBounds = Field(..., description="剂量约束")
    t_r_tilde: Optional[float] = Field(default=None, description="姑息问题的 T̃_R")

    @model_validator(mode="after")
    def _check(self) -> "OracleProblem":
        if not 1 <= len(self.times) <= 3:
            raise ValueError(f"穷举只支持 1 ≤ n ≤ 3，实际 n = {len(self.times)}")
        check_times(self.times, self.horizon_T)
        if self.kind == "curative":
            self.bounds.require_cumulative()
        elif self.t_r_tilde is None:
            raise ValueError("姑息问题需要 t_r_tilde")
        return self

    @property
    def n(self) -> int:
        return len(self.times)


class OracleResult(BaseModel):
    """穷举最优网格点"""
    doses: Tuple[float, ...] = Field(..., description="网格最优点")
    objective: float = Field(..., description="目标值 (治愈: log f₁ 或 log f̂₁，姑息: Σd)")
    grid_points: int = Field(..., description="评估的网格点数")
    cell: float = Field(..., description="网格步长 (mg/m²)")


def _batch_objective(problem: OracleProblem, op: LogF1Operator, dm: np.ndarray) -> np.ndarray:
    if problem.objective == "approx":
        return np.sum(np.log1p(dm / problem.pk.k2_tilde), axis=1)
    return op.value_batch(dm)


def _grid_heads(n: int, lo: float, hi: float, resolution: int):
    """前 n-1 个分量的笛卡尔网格"""
    if n == 1:
        return np.zeros((1, 0)), 0.0
    axis = np.linspace(lo, hi, resolution) if hi > lo else np.array([lo])
    cell = (hi - lo) / (resolution - 1) if hi > lo else 0.0
    mesh = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), cell


def brute_force_oracle(problem: OracleProblem, resolution: int) -> OracleResult:
    """
    在离散化可行集上穷举求最优

    治愈: 前 n-1 个分量取网格，最后一个由 Σd = D 确定
    姑息: 前 n-1 个分量取网格，最后一个用二分求使约束成立的最小值

    Args:
        problem: 问题描述
        resolution: 每个维度的网格点数

    Returns:
        网格最优点
    """
    n = problem.n
    if resolution < 2:
        raise ValueError(f"resolution 至少为 2: {resolution}")
    if resolution ** (n - 1) > MAX_GRID_POINTS:
        raise ValueError(f"网格点数 {resolution}^{n - 1} 超过上限 {MAX_GRID_POINTS}")

    lo, hi = problem.bounds.d_min, problem.bounds.d_max
    op = LogF1Operator(problem.pk, problem.times, problem.horizon_T)

    if problem.kind == "curative":
        total = problem.bounds.require_cumulative()
        a = max(lo, total - (n - 1) * hi)
        b = min(hi, total - (n - 1) * lo)
        if a > b + 1e-12:
            raise InfeasibleError(f"n = {n} 时可行集为空", condition="H1")
        heads, cell = _grid_heads(n, a, max(a, b), resolution)
        last = total - heads.sum(axis=1)
        tol = 1e-9 * max(1.0, hi)
        mask = (last >= lo - tol) & (last <= hi + tol)
        dm = np.column_stack([heads, np.clip(last, lo, hi)])[mask]
        values = _batch_objective(problem, op, dm)
        best = int(np.argmax(values))
        doses = dm[best]
        objective = float(values[best])
        check = log_f1(problem.pk, problem.times, problem.horizon_T, doses)
        if problem.objective == "exact" and not math.isclose(check, objective, rel_tol=1e-10):
            raise RuntimeError(f"批量与逐点 log f₁ 不一致: {objective} vs {check}")
        return OracleResult(
            doses=tuple(float(d) for d in doses),
            objective=objective,
            grid_points=int(dm.shape[0]),
            cell=cell
        )

    tau = float(problem.t_r_tilde)
    heads, cell = _grid_heads(n, lo, hi, resolution)
    m = heads.shape[0]

    def with_last(values: np.ndarray) -> np.ndarray:
        return np.column_stack([heads, values])

    top = _batch_objective(problem, op, with_last(np.full(m, hi)))
    ok = top >= tau
    if not ok.any():
        raise InfeasibleError(f"n = {n} 时约束不可满足", condition="d_max")
    left = np.full(m, lo)
    right = np.full(m, hi)
    done = _batch_objective(problem, op, with_last(left)) >= tau
    right[done] = lo
    for _ in range(80):
        mid = 0.5 * (left + right)
        hit = _batch_objective(problem, op, with_last(mid)) >= tau
        right = np.where(hit, mid, right)
        left = np.where(hit, left, mid)
    dm = with_last(right)[ok]
    totals = dm.sum(axis=1)
    best = int(np.argmin(totals))
    return OracleResult(
        doses=tuple(float(d) for d in dm[best]),
        objective=float(totals[best]),
        grid_points=int(dm.shape[0]),
        cell=cell
    )
