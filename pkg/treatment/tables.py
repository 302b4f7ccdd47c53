"""
治疗方案报表
治愈/姑息问题的逐 N 报表、d_min 扫描、常规方案与轨迹曲线数据
"""

import concurrent.futures
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from config import get_settings
from optim import (
    curative_fixed_n,
    curative_optimal,
    feasible_n_range_curative,
    final_tumor_ratio,
    log_f1,
    palliative_fixed_n,
    palliative_n_bounds,
    palliative_optimal,
    solve_curative_exact,
    solve_palliative_exact,
)
from pkpd import DoseSchedule, sample_trajectory, tumor_ratio
from scheduler import Pattern, capacity, dose_intensity, expand_pattern, parse_pattern
from utils import get_logger
from .run_config import RunConfig

logger = get_logger(__name__)

ItemT = TypeVar("ItemT")

TABLE_IDS = (2, 3, 4, 5)
FIGURE_IDS = (1, 2)

# d_min 扫描及对应的给药模式
CURATIVE_SWEEP = ((150.0, "7/14d"), (100.0, "21/28d"), (75.0, "21/28d"), (50.0, "28/28d"))
PALLIATIVE_SWEEP = CURATIVE_SWEEP

# 常规方案: 5/28d 共 6 个周期，首周期 150，其后 200
UT_PATTERN = "5/28d"
UT_CYCLES = 6
UT_FIRST_DOSE = 150.0
UT_LATER_DOSE = 200.0

# 输出时各列保留的小数位
CURATIVE_PRECISION = {
    "dose": 2, "ratio_l0": 2, "d_bar_min": 2, "d_bar_max": 2, "ratio_l0_exact": 2,
}
CURATIVE_SWEEP_PRECISION = {"d_min": 0, "dose": 2, "ratio_l0": 2, "dose_intensity": 2}
PALLIATIVE_PRECISION = {
    "dose_hat": 2, "total_hat": 2, "ratio_hat": 5, "slack_hat": 6,
    "d_bar_min": 5, "d_bar_max": 5, "total_exact": 2, "ratio_exact": 5, "slack_exact": 6,
}
PALLIATIVE_SWEEP_PRECISION = {
    "d_min": 0, "dose": 2, "total": 2, "ratio_theta": 5, "dose_intensity": 2,
}


class TableResult(BaseModel):
    """一张报表: 按行排列的 DataFrame 与最优行标记"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    title: str = Field(..., description="标题")
    frame: pd.DataFrame = Field(..., description="报表数据，label 列为行键")
    optimal_label: Optional[str] = Field(default=None, description="最优行的 label")
    precision: Dict[str, int] = Field(default_factory=dict, description="各列显示精度")

    @property
    def all_converged(self) -> bool:
        """所有求解器行均收敛"""
        if "converged" not in self.frame.columns:
            return True
        return bool(self.frame["converged"].fillna(True).astype(bool).all())

    def rounded(self) -> pd.DataFrame:
        """按显示精度取整后的副本"""
        return self.frame.round(self.precision)

    def display_rows(self) -> List[List[str]]:
        """转换为字符串行，供表格打印"""
        rows = []
        for _, row in self.frame.iterrows():
            cells = []
            for col in self.frame.columns:
                value = row[col]
                if pd.isna(value):
                    cells.append("")
                elif col in self.precision and isinstance(value, float):
                    cells.append(f"{value:.{self.precision[col]}f}")
                else:
                    cells.append(str(value))
            rows.append(cells)
        return rows

    def optimal_position(self) -> Optional[int]:
        """最优行在 frame 中的位置"""
        if self.optimal_label is None:
            return None
        hits = [i for i, label in enumerate(self.frame["label"]) if label == self.optimal_label]
        return hits[0] if hits else None


class FigureResult(BaseModel):
    """曲线数据: day 列加每个方案一列 L(t)/θ"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame: pd.DataFrame = Field(..., description="宽表")
    unconverged: Tuple[str, ...] = Field(default=(), description="求解器未收敛的方案列")

    @property
    def all_converged(self) -> bool:
        return not self.unconverged


def _workers(workers: Optional[int]) -> int:
    return workers or get_settings().reproduce.workers


def run_rows(func: Callable[..., Dict], items: Sequence[ItemT], workers: Optional[int] = None) -> List[Dict]:
    """
    并行计算各行，按输入顺序返回

    Args:
        func: 单行计算函数
        items: 每行的输入
        workers: 线程数，默认取配置

    Returns:
        行字典列表
    """
    results: Dict[int, Dict] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=_workers(workers)) as executor:
        future_to_index = {executor.submit(func, item): i for i, item in enumerate(items)}
        for future in concurrent.futures.as_completed(future_to_index):
            results[future_to_index[future]] = future.result()
    return [results[i] for i in range(len(items))]


def pattern_times(pattern: Pattern, n: int, start_day: int) -> List[float]:
    """模式下前 n 个给药日 (浮点天)"""
    return [float(day) for day in expand_pattern(pattern, n, start_day)]


def usual_treatment_schedule(horizon_T: float, start_day: int = 0) -> DoseSchedule:
    """常规方案 (UT): 5/28d 共 30 次，首周期 150 mg/m²，其后 200 mg/m²"""
    pattern = parse_pattern(UT_PATTERN)
    n = UT_CYCLES * pattern.days_on
    doses = [UT_FIRST_DOSE] * pattern.days_on + [UT_LATER_DOSE] * (n - pattern.days_on)
    return DoseSchedule(
        times=tuple(pattern_times(pattern, n, start_day)),
        doses=tuple(doses),
        horizon_T=horizon_T
    )


def curative_report(
    cfg: RunConfig,
    exact: bool = False,
    optimal_only: bool = False,
    workers: Optional[int] = None
) -> TableResult:
    """
    治愈问题逐 N 报表

    每行给出等剂量 D/N 及其 L(T)/L₀；exact 时附加精确求解器的
    d̄_min、d̄_max 与 L(T)/L₀。N 的范围受给药模式容量限制。

    Args:
        cfg: 运行配置 (需含 D)
        exact: 是否运行精确求解器
        optimal_only: 只输出最优行
        workers: 线程数

    Returns:
        报表
    """
    pk, tm, bounds = cfg.drug(), cfg.tumor(), cfg.bounds()
    pattern = cfg.schedule_pattern()
    horizon_T = cfg.horizon_T
    n_cap = capacity(pattern, horizon_T, cfg.start_day)
    best = curative_optimal(bounds, pk.k2_tilde, n_cap)
    ns = [best.n] if optimal_only else list(feasible_n_range_curative(bounds).cap(n_cap).values())
    solver = cfg.solver_config()
    logger.info(f"治愈报表: N ∈ [{ns[0]}, {ns[-1]}], 模式 {pattern.label}, 最优 N = {best.n}")

    def row(n: int) -> Dict:
        plan = curative_fixed_n(bounds, n, pk.k2_tilde)
        times = pattern_times(pattern, n, cfg.start_day)
        sched = DoseSchedule.equal_doses(times, plan.dose, horizon_T)
        out = {
            "label": str(n),
            "n": n,
            "dose": plan.dose,
            "ratio_l0": tumor_ratio(tm, pk, sched, horizon_T) / tm.l0_rel,
        }
        if exact:
            rep = solve_curative_exact(pk, times, horizon_T, bounds, n, solver)
            out.update(
                d_bar_min=rep.min_dose,
                d_bar_max=rep.max_dose,
                ratio_l0_exact=final_tumor_ratio(tm, pk, horizon_T, rep.log_f1) / tm.l0_rel,
                converged=rep.converged,
            )
        return out

    return TableResult(
        title=f"治愈方案 D = {bounds.cumulative_D:g}, d_min = {bounds.d_min:g}, {pattern.label}",
        frame=pd.DataFrame(run_rows(row, ns, workers)),
        optimal_label=str(best.n),
        precision=CURATIVE_PRECISION
    )


def usual_treatment_row(cfg: RunConfig) -> Dict:
    """常规方案在治愈报表中的一行"""
    tm, pk = cfg.tumor(), cfg.drug()
    sched = usual_treatment_schedule(cfg.horizon_T, cfg.start_day)
    return {
        "label": "UT",
        "n": sched.n,
        "d_bar_min": min(sched.doses),
        "d_bar_max": max(sched.doses),
        "ratio_l0_exact": tumor_ratio(tm, pk, sched, cfg.horizon_T) / tm.l0_rel,
        "converged": True,
    }


def palliative_report(
    cfg: RunConfig,
    exact: bool = False,
    optimal_only: bool = False,
    workers: Optional[int] = None
) -> TableResult:
    """
    姑息问题逐 N 报表

    N ∈ [N_min, N_max - 1] (受容量限制) 时给出固定 N 的近似等剂量解；
    最优解为情形 b 或平凡解时追加该行。每行包含精确模型下的 L(T)/θ 与
    约束裕量 log f₁ - T̃_R。

    Args:
        cfg: 运行配置 (需含 l_star_rel)
        exact: 是否运行精确求解器
        optimal_only: 只输出最优行
        workers: 线程数

    Returns:
        报表
    """
    pk, tm, bounds = cfg.drug(), cfg.tumor(), cfg.bounds()
    pattern = cfg.schedule_pattern()
    horizon_T = cfg.horizon_T
    target = cfg.target()
    k2t = pk.k2_tilde
    n_cap = capacity(pattern, horizon_T, cfg.start_day)
    best = palliative_optimal(target.t_r_tilde, k2t, bounds, n_cap)
    solver = cfg.solver_config()

    plans = {}
    if not optimal_only and best.case_tag != "trivial":
        n_min, n_max = palliative_n_bounds(target.t_r_tilde, k2t, bounds)
        for n in range(n_min, min(n_max - 1, n_cap) + 1):
            plans[n] = palliative_fixed_n(target.t_r_tilde, k2t, n, bounds)
    plans[best.n] = best
    ns = sorted(plans)
    logger.info(
        f"姑息报表: T̃_R = {target.t_r_tilde:.4f}, N ∈ [{ns[0]}, {ns[-1]}], "
        f"最优 N = {best.n} (情形 {best.case_tag})"
    )

    def row(n: int) -> Dict:
        plan = plans[n]
        times = pattern_times(pattern, n, cfg.start_day)
        value = log_f1(pk, times, horizon_T, [plan.dose] * n)
        out = {
            "label": str(n),
            "n": n,
            "dose_hat": plan.dose,
            "total_hat": plan.total,
            "ratio_hat": final_tumor_ratio(tm, pk, horizon_T, value),
            "slack_hat": value - target.t_r_tilde,
            "case": plan.case_tag,
        }
        if exact:
            rep = solve_palliative_exact(
                pk, times, horizon_T, bounds, target.t_r_tilde, n, solver
            )
            out.update(
                d_bar_min=rep.min_dose,
                d_bar_max=rep.max_dose,
                total_exact=rep.total,
                ratio_exact=final_tumor_ratio(tm, pk, horizon_T, rep.log_f1),
                slack_exact=rep.log_f1 - target.t_r_tilde,
                converged=rep.converged,
            )
        return out

    return TableResult(
        title=(
            f"姑息方案 L*/θ = {target.l_star_rel:g}, d_min = {bounds.d_min:g}, {pattern.label}"
        ),
        frame=pd.DataFrame(run_rows(row, ns, workers)),
        optimal_label=str(best.n),
        precision=PALLIATIVE_PRECISION
    )


def _sweep_label(d_min: float) -> str:
    return f"{d_min:g}"


def curative_selection_row(cfg: RunConfig) -> Dict:
    """
    单个 d_min 下的治愈最优方案，按配置的给药模式排程

    Returns:
        d_min、N̂、D/N̂、模式、L(T)/L₀ 与剂量强度
    """
    pk, tm, bounds = cfg.drug(), cfg.tumor(), cfg.bounds()
    pattern = cfg.schedule_pattern()
    n_cap = capacity(pattern, cfg.horizon_T, cfg.start_day)
    plan = curative_optimal(bounds, pk.k2_tilde, n_cap)
    times = pattern_times(pattern, plan.n, cfg.start_day)
    sched = DoseSchedule.equal_doses(times, plan.dose, cfg.horizon_T)
    return {
        "label": _sweep_label(bounds.d_min),
        "d_min": bounds.d_min,
        "n": plan.n,
        "dose": plan.dose,
        "pattern": pattern.label,
        "ratio_l0": tumor_ratio(tm, pk, sched, cfg.horizon_T) / tm.l0_rel,
        "dose_intensity": dose_intensity(plan.total, times),
    }


def palliative_selection_row(cfg: RunConfig) -> Dict:
    """
    单个 d_min 下的姑息最优方案 (含情形标记)，按配置的给药模式排程
    """
    pk, tm, bounds = cfg.drug(), cfg.tumor(), cfg.bounds()
    pattern = cfg.schedule_pattern()
    target = cfg.target()
    n_cap = capacity(pattern, cfg.horizon_T, cfg.start_day)
    plan = palliative_optimal(target.t_r_tilde, pk.k2_tilde, bounds, n_cap)
    times = pattern_times(pattern, plan.n, cfg.start_day)
    sched = DoseSchedule.equal_doses(times, plan.dose, cfg.horizon_T)
    return {
        "label": _sweep_label(bounds.d_min),
        "d_min": bounds.d_min,
        "n": plan.n,
        "dose": plan.dose,
        "total": plan.total,
        "pattern": pattern.label,
        "ratio_theta": tumor_ratio(tm, pk, sched, cfg.horizon_T),
        "dose_intensity": dose_intensity(plan.total, times),
        "case": plan.case_tag,
    }


def _sweep_configs(cfg: RunConfig, sweep) -> List[RunConfig]:
    return [cfg.with_overrides(d_min=d_min, pattern=label) for d_min, label in sweep]


def build_table(
    table_id: int,
    cfg: Optional[RunConfig] = None,
    workers: Optional[int] = None
) -> TableResult:
    """
    重新计算参考表格

    2: 治愈逐 N 报表 (含精确解) + 常规方案
    3: 治愈 d_min 扫描
    4: 姑息逐 N 报表 (含精确解)
    5: 姑息 d_min 扫描

    Args:
        table_id: 表格编号
        cfg: 运行配置，默认为替莫唑胺参考配置
        workers: 线程数

    Returns:
        报表
    """
    cfg = cfg or RunConfig.temozolomide()
    logger.info(f"重建表格 {table_id}")
    if table_id == 2:
        result = curative_report(cfg, exact=True, workers=workers)
        frame = pd.concat(
            [result.frame, pd.DataFrame([usual_treatment_row(cfg)])], ignore_index=True
        )
        return result.model_copy(update={"frame": frame})
    if table_id == 3:
        rows = run_rows(curative_selection_row, _sweep_configs(cfg, CURATIVE_SWEEP), workers)
        best = min(rows, key=lambda r: r["ratio_l0"])
        return TableResult(
            title=f"治愈方案 d_min 扫描 D = {cfg.cumulative_D:g}",
            frame=pd.DataFrame(rows),
            optimal_label=best["label"],
            precision=CURATIVE_SWEEP_PRECISION
        )
    if table_id == 4:
        return palliative_report(cfg, exact=True, workers=workers)
    if table_id == 5:
        rows = run_rows(palliative_selection_row, _sweep_configs(cfg, PALLIATIVE_SWEEP), workers)
        best = min(rows, key=lambda r: r["total"])
        return TableResult(
            title=f"姑息方案 d_min 扫描 L*/θ = {cfg.l_star_rel:g}",
            frame=pd.DataFrame(rows),
            optimal_label=best["label"],
            precision=PALLIATIVE_SWEEP_PRECISION
        )
    raise ValueError(f"未知表格编号: {table_id} (可选 {', '.join(map(str, TABLE_IDS))})")


def _trajectory_column(cfg: RunConfig, sched: Optional[DoseSchedule], step: float) -> List[float]:
    traj = sample_trajectory(cfg.tumor(), cfg.drug(), sched, step, horizon_T=cfg.horizon_T)
    return list(traj.tumor_ratio)


def _equal_schedule(cfg: RunConfig, pattern_label: str, n: int, dose: float) -> DoseSchedule:
    times = pattern_times(parse_pattern(pattern_label), n, cfg.start_day)
    return DoseSchedule.equal_doses(times, dose, cfg.horizon_T)


def figure_data(
    figure_id: int,
    cfg: Optional[RunConfig] = None,
    step: Optional[float] = None
) -> FigureResult:
    """
    轨迹曲线数据: day 列加每个方案一列 L(t)/θ

    1: 治愈 N ∈ {29, 35, 40}、常规方案、精确姑息 N ∈ {33, 36, 40} (5/28d)
    2: 治愈与姑息 d_min 扫描得到的方案

    Args:
        figure_id: 曲线编号
        cfg: 运行配置，默认为替莫唑胺参考配置
        step: 采样步长，默认取配置

    Returns:
        宽表与未收敛的方案列
    """
    cfg = cfg or RunConfig.temozolomide()
    step = step or get_settings().reproduce.trajectory_step
    columns: Dict[str, Optional[DoseSchedule]] = {"untreated": None}
    unconverged: List[str] = []

    if figure_id == 1:
        pk, bounds = cfg.drug(), cfg.bounds()
        for n in (29, 35, 40):
            plan = curative_fixed_n(bounds, n, pk.k2_tilde)
            columns[f"curative_n{n}"] = _equal_schedule(cfg, cfg.pattern, n, plan.dose)
        columns["ut"] = usual_treatment_schedule(cfg.horizon_T, cfg.start_day)
        target = cfg.target()
        solver = cfg.solver_config()
        pattern = cfg.schedule_pattern()
        for n in (33, 36, 40):
            times = pattern_times(pattern, n, cfg.start_day)
            rep = solve_palliative_exact(
                pk, times, cfg.horizon_T, bounds, target.t_r_tilde, n, solver
            )
            if not rep.converged:
                logger.warning(f"曲线 {figure_id}: 姑息求解 N = {n} 未收敛 ({rep.message})")
                unconverged.append(f"palliative_n{n}")
            columns[f"palliative_n{n}"] = DoseSchedule(
                times=tuple(times), doses=rep.doses, horizon_T=cfg.horizon_T
            )
    elif figure_id == 2:
        for sub in _sweep_configs(cfg, CURATIVE_SWEEP):
            row = curative_selection_row(sub)
            columns[f"curative_dmin{row['label']}"] = _equal_schedule(
                sub, row["pattern"], row["n"], row["dose"]
            )
        for sub in _sweep_configs(cfg, PALLIATIVE_SWEEP):
            row = palliative_selection_row(sub)
            columns[f"palliative_dmin{row['label']}"] = _equal_schedule(
                sub, row["pattern"], row["n"], row["dose"]
            )
    else:
        raise ValueError(f"未知曲线编号: {figure_id} (可选 {', '.join(map(str, FIGURE_IDS))})")

    traj = sample_trajectory(cfg.tumor(), cfg.drug(), None, step, horizon_T=cfg.horizon_T)
    data = {"day": list(traj.sample_times)}
    for name, sched in columns.items():
        data[name] = _trajectory_column(cfg, sched, step)
    logger.info(f"曲线 {figure_id}: {len(columns)} 条轨迹, {len(data['day'])} 个采样点")
    return FigureResult(frame=pd.DataFrame(data), unconverged=tuple(unconverged))
