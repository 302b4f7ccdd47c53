"""
闭式求值
浓度、Emax 效应、累积效应与肿瘤轨迹
"""

import math
import sys
from typing import Optional

import numpy as np

from .models import DrugPK, TumorModel, DoseSchedule, Trajectory


def _check_time(sched: Optional[DoseSchedule], t: float) -> None:
    """检查 0 ≤ t ≤ T"""
    if t < 0:
        raise ValueError(f"t 不能为负: {t}")
    if sched is not None and t > sched.horizon_T:
        raise ValueError(f"t 超出 horizon_T: {t} > {sched.horizon_T}")


def concentration(pk: DrugPK, sched: DoseSchedule, t: float) -> float:
    """
    给药后的药物浓度 c(t) = σ·Σ_{t_j ≤ t} d_j·e^{-λ(t - t_j)}

    给药时刻取右极限 (t = t_i 时包含第 i 次剂量)。

    Args:
        pk: 药物参数
        sched: 给药方案
        t: 时间 (天)

    Returns:
        浓度 (mg/l)
    """
    _check_time(sched, t)
    times = np.asarray(sched.times)
    doses = np.asarray(sched.doses)
    active = times <= t
    if not active.any():
        return 0.0
    decay = np.exp(-pk.lambda_ * (t - times[active]))
    return pk.sigma * float(np.sum(doses[active] * decay))


def emax_effect(pk: DrugPK, c: float) -> float:
    """
    Emax 药效 ρ = k₁·c/(k₂ + c)

    Args:
        pk: 药物参数
        c: 浓度 (mg/l)
    """
    if c < 0:
        raise ValueError(f"浓度不能为负: {c}")
    return pk.k1 * c / (pk.k2 + c)


def cumulative_effect(pk: DrugPK, sched: DoseSchedule, t: float) -> float:
    """
    累积效应 ∫₀ᵗ ρ(s) ds 的闭式解

    逐段积分: 在 [t_i, t'] 上剂量水平从 A_i + d_i 指数衰减到 B_i(t')，
    该段贡献 (k₁/λ)·log((A_i + d_i + k̃₂)/(B_i(t') + k̃₂))。

    Args:
        pk: 药物参数
        sched: 给药方案
        t: 积分上限 (天)

    Returns:
        累积效应 (天)
    """
    _check_time(sched, t)
    k2t = pk.k2_tilde
    times = sched.times
    n = sched.n
    total = 0.0
    carry = 0.0  # 上一段末端残留水平，即 A_i
    for i in range(n):
        t_i = times[i]
        if t_i >= t:
            break
        right = times[i + 1] if i + 1 < n else sched.horizon_T
        right = min(right, t)
        start_level = carry + sched.doses[i]
        end_level = start_level * math.exp(-pk.lambda_ * (right - t_i))
        total += math.log1p((start_level - end_level) / (end_level + k2t))
        carry = end_level
    return pk.k1 / pk.lambda_ * total


# 比率下溢时的下限 (最小正规格化浮点数) 与上限
_RATIO_FLOOR = sys.float_info.min
_RATIO_CEIL = math.nextafter(1.0, 0.0)


def log_ratio_from_effect(tm: TumorModel, t: float, effect: float) -> float:
    """log(L(t)/θ) = log(L₀/θ)·exp(-ξ(t - ∫ρ))，指数上溢时为 -inf"""
    try:
        return math.log(tm.l0_rel) * math.exp(-tm.xi * (t - effect))
    except OverflowError:
        return -math.inf


def ratio_from_log(log_ratio: float) -> float:
    """由 log(L/θ) 还原 L/θ，截断在 (0, 1) 内"""
    return min(max(math.exp(log_ratio), _RATIO_FLOOR), _RATIO_CEIL)


def log_tumor_ratio(
    tm: TumorModel,
    pk: DrugPK,
    sched: Optional[DoseSchedule],
    t: float
) -> float:
    """
    log(L(t)/θ)

    强效治疗下 L(t)/θ 会下溢为 0，对数形式仍然有意义，比较疗效时应使用它。

    Args:
        tm: 肿瘤模型
        pk: 药物参数
        sched: 给药方案，None 表示未治疗
        t: 时间 (天)

    Returns:
        log(L(t)/θ) ≤ 0，可能为 -inf
    """
    _check_time(sched, t)
    effect = 0.0 if sched is None else cumulative_effect(pk, sched, t)
    return log_ratio_from_effect(tm, t, effect)


def tumor_ratio(
    tm: TumorModel,
    pk: DrugPK,
    sched: Optional[DoseSchedule],
    t: float
) -> float:
    """
    Norton-Simon 修正的 Gompertz 闭式解 L(t)/θ

    Args:
        tm: 肿瘤模型
        pk: 药物参数
        sched: 给药方案，None 表示未治疗
        t: 时间 (天)

    Returns:
        L(t)/θ，位于 (0, 1)；下溢时取最小正规格化浮点数
    """
    return ratio_from_log(log_tumor_ratio(tm, pk, sched, t))


def gompertz_rate(tm: TumorModel, l_rel: float) -> float:
    """
    未治疗增长速率 ξ·x·log(1/x)，x = L/θ

    Args:
        tm: 肿瘤模型
        l_rel: 相对大小 L/θ
    """
    if not 0.0 < l_rel < 1.0:
        raise ValueError(f"l_rel 必须位于 (0, 1): {l_rel}")
    return -tm.xi * l_rel * math.log(l_rel)


def sample_grid(horizon_T: float, step: float) -> np.ndarray:
    """0, step, 2·step, …，并确保包含 T"""
    if step <= 0:
        raise ValueError(f"step 必须为正: {step}")
    count = int(math.floor(horizon_T / step + 1e-9))
    grid = np.arange(count + 1) * step
    if grid[-1] < horizon_T - 1e-12:
        grid = np.append(grid, horizon_T)
    else:
        grid[-1] = horizon_T
    return grid


def sample_trajectory(
    tm: TumorModel,
    pk: DrugPK,
    sched: Optional[DoseSchedule],
    step: float,
    horizon_T: Optional[float] = None
) -> Trajectory:
    """
    按固定步长采样闭式轨迹

    Args:
        tm: 肿瘤模型
        pk: 药物参数
        sched: 给药方案，None 表示未治疗 (此时需给出 horizon_T)
        step: 采样步长 (天)
        horizon_T: 未治疗时的终止时间

    Returns:
        轨迹
    """
    if sched is not None:
        horizon_T = sched.horizon_T
    if horizon_T is None:
        raise ValueError("未治疗轨迹需要 horizon_T")
    grid = sample_grid(horizon_T, step)
    ratios = []
    concs = []
    for t in grid:
        t = float(t)
        ratios.append(tumor_ratio(tm, pk, sched, t))
        concs.append(0.0 if sched is None else concentration(pk, sched, t))
    return Trajectory(
        sample_times=tuple(float(t) for t in grid),
        tumor_ratio=tuple(ratios),
        concentration=tuple(concs)
    )
