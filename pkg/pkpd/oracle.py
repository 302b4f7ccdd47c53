"""
ODE 数值校验
对比率方程 x' = ξ·x·log(1/x)·(1 - ρ(t)) 做定步长 RK4 积分，独立于闭式解。
状态取 u = log x，方程为 u' = -ξ·u·(1 - ρ(t))，强效治疗下 x 下溢也不会越出定义域
"""

import math
from typing import Callable, List, Optional

from utils import get_logger
from .core import concentration, ratio_from_log
from .models import DrugPK, TumorModel, DoseSchedule, Trajectory

logger = get_logger(__name__)

# 浓度低于 k₂ 的该倍数视为药物已清除
_CLEARED = 1e-9


def _segment_knots(sched: Optional[DoseSchedule], horizon_T: float) -> List[float]:
    """积分分段点: 0、各给药时间与 T (ρ 只在给药时刻跳变)"""
    knots = {0.0, float(horizon_T)}
    if sched is not None:
        knots.update(float(t) for t in sched.times)
    return sorted(knots)


def _rk4_segment(
    rhs: Callable[[float, float], float],
    t0: float,
    x0: float,
    h: float,
    steps: int,
    out_t: List[float],
    out_x: List[float]
) -> float:
    """在单个光滑段上执行 steps 步 RK4，返回段末状态"""
    t, x = t0, x0
    for _ in range(steps):
        k1 = h * rhs(t, x)
        k2 = h * rhs(t + h / 2, x + k1 / 2)
        k3 = h * rhs(t + h / 2, x + k2 / 2)
        k4 = h * rhs(t + h, x + k3)
        x = x + (k1 + 2 * k2 + 2 * k3 + k4) / 6
        t = t + h
        out_t.append(t)
        out_x.append(x)
    return x


def simulate_ode_oracle(
    tm: TumorModel,
    pk: DrugPK,
    sched: Optional[DoseSchedule],
    step: float,
    horizon_T: Optional[float] = None,
    coarse_step: Optional[float] = None
) -> Trajectory:
    """
    RK4 积分肿瘤比率方程

    每个给药区间被等分为 ceil(长度/step) 步，步长不跨越给药时刻。
    给出 coarse_step 时，区间内浓度降到 k₂·1e-9 以下的部分改用该步长。

    Args:
        tm: 肿瘤模型
        pk: 药物参数
        sched: 给药方案，None 表示未治疗
        step: 最大步长 (天)
        horizon_T: 未治疗时的终止时间
        coarse_step: 药物清除后的最大步长 (天)，None 表示全程使用 step

    Returns:
        各积分步末端的采样轨迹
    """
    if step <= 0:
        raise ValueError(f"step 必须为正: {step}")
    if coarse_step is not None and coarse_step <= 0:
        raise ValueError(f"coarse_step 必须为正: {coarse_step}")
    if sched is not None:
        horizon_T = sched.horizon_T
    if horizon_T is None:
        raise ValueError("未治疗轨迹需要 horizon_T")

    xi = tm.xi
    lam = pk.lambda_
    k1, k2 = pk.k1, pk.k2

    out_t: List[float] = [0.0]
    out_u: List[float] = [math.log(tm.l0_rel)]
    out_c: List[float] = [0.0 if sched is None else concentration(pk, sched, 0.0)]

    knots = _segment_knots(sched, horizon_T)
    u = out_u[0]
    for a, b in zip(knots, knots[1:]):
        c_a = 0.0 if sched is None else concentration(pk, sched, a)

        def rhs(t: float, y: float, c_a=c_a, a=a) -> float:
            c = c_a * math.exp(-lam * (t - a))
            rho = k1 * c / (k2 + c)
            return -xi * y * (1.0 - rho)

        pieces = [(a, b, step)]
        if coarse_step is not None:
            settle = a
            if c_a > k2 * _CLEARED:
                settle = a + math.log(c_a / (k2 * _CLEARED)) / lam
            if settle < b:
                pieces = [(a, b, coarse_step)] if settle <= a else [(a, settle, step), (settle, b, coarse_step)]

        first = len(out_t)
        for p, q, h_max in pieces:
            steps = max(1, math.ceil((q - p) / h_max - 1e-9))
            u = _rk4_segment(rhs, p, u, (q - p) / steps, steps, out_t, out_u)
            out_t[-1] = q
        # 段末浓度取左极限; 下一段起点的剂量由下一段的 c_a 体现
        out_c.extend(c_a * math.exp(-lam * (t - a)) for t in out_t[first:])

    logger.debug(f"RK4 完成: {len(out_t) - 1} 步, log x(T) = {u:.8g}")
    return Trajectory(
        sample_times=tuple(out_t),
        tumor_ratio=tuple(ratio_from_log(v) for v in out_u),
        concentration=tuple(out_c)
    )
