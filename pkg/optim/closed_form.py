"""
近似问题的解析最优解
近似治愈/姑息问题 (含固定 N 的子问题)，N 的可行范围，辅助函数 φ₁、φ₂
"""

import math
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils import get_logger
from .errors import InfeasibleError
from .objective import DoseBounds

logger = get_logger(__name__)

# 整除边界上的舍入误差
_ROUND_EPS = 1e-9


def _floor(x: float) -> int:
    return math.floor(x + _ROUND_EPS * max(1.0, abs(x)))


def _ceil(x: float) -> int:
    return math.ceil(x - _ROUND_EPS * max(1.0, abs(x)))


class IntRange(BaseModel):
    """闭整数区间 [first, last]，first > last 表示空集"""
    model_config = ConfigDict(frozen=True)

    first: int = Field(..., description="下端")
    last: int = Field(..., description="上端")

    @property
    def is_empty(self) -> bool:
        return self.first > self.last

    def values(self) -> range:
        """区间内全部整数"""
        return range(self.first, self.last + 1)

    def contains(self, n: int) -> bool:
        return self.first <= n <= self.last

    def cap(self, n_cap: Optional[int]) -> "IntRange":
        """与 [.., n_cap] 取交"""
        if n_cap is None:
            return self
        return IntRange(first=self.first, last=min(self.last, n_cap))


class CurativePlan(BaseModel):
    """治愈问题的等剂量方案"""
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="给药次数 N")
    dose: float = Field(..., gt=0, description="单次剂量 D/N")
    total: float = Field(..., gt=0, description="累计剂量")
    objective_log_f1_hat: float = Field(..., description="log f̂₁")


class PalliativePlan(BaseModel):
    """姑息问题的等剂量方案"""
    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="给药次数 N")
    dose: float = Field(..., gt=0, description="单次剂量")
    total: float = Field(..., gt=0, description="累计剂量 f₂")
    case_tag: Literal["a", "b", "fixed_n", "trivial"] = Field(..., description="最优性情形")

    @model_validator(mode="after")
    def _check_total(self) -> "PalliativePlan":
        if not math.isclose(self.total, self.n * self.dose, rel_tol=1e-12):
            raise ValueError("total 必须等于 n·dose")
        return self


def feasible_n_range_curative(bounds: DoseBounds) -> IntRange:
    """
    治愈问题中 N 的可行范围 {⌈D/d_max⌉, …, ⌊D/d_min⌋}

    空区间表示 (H1) 不成立，不抛异常。
    """
    total = bounds.require_cumulative()
    return IntRange(first=_ceil(total / bounds.d_max), last=_floor(total / bounds.d_min))


def curative_fixed_n(bounds: DoseBounds, n: int, k2_tilde: float) -> CurativePlan:
    """
    固定 N 的近似治愈问题: 唯一最优解为等剂量 D/N

    Args:
        bounds: 剂量约束 (需含 D)
        n: 给药次数
        k2_tilde: k̃₂

    Returns:
        治愈方案
    """
    total = bounds.require_cumulative()
    feasible = feasible_n_range_curative(bounds)
    if n < feasible.first:
        raise InfeasibleError(
            f"N = {n} 时 D/N 超过 d_max (需要 N ≥ {feasible.first})", condition="d_max"
        )
    if n > feasible.last:
        raise InfeasibleError(
            f"N = {n} 时 D/N 低于 d_min (需要 N ≤ {feasible.last})", condition="d_min"
        )
    dose = total / n
    return CurativePlan(
        n=n,
        dose=dose,
        total=total,
        objective_log_f1_hat=n * math.log1p(dose / k2_tilde)
    )


def curative_optimal(
    bounds: DoseBounds,
    k2_tilde: float,
    n_cap: Optional[int] = None
) -> CurativePlan:
    """
    近似治愈问题的最优解: N̂ = ⌊D/d_min⌋ (可选给药容量上限)，等剂量

    Args:
        bounds: 剂量约束 (需含 D)
        k2_tilde: k̃₂
        n_cap: 方案容量上限

    Returns:
        最优治愈方案
    """
    feasible = feasible_n_range_curative(bounds)
    if feasible.is_empty:
        raise InfeasibleError(
            f"(H1) 不成立: [D/d_max, D/d_min] 中没有整数 "
            f"({feasible.first} > {feasible.last})",
            condition="H1"
        )
    capped = feasible.cap(n_cap)
    if capped.is_empty:
        raise InfeasibleError(
            f"给药容量 {n_cap} 小于最少给药次数 {feasible.first}", condition="capacity"
        )
    plan = curative_fixed_n(bounds, capped.last, k2_tilde)
    logger.debug(f"治愈最优: N = {plan.n}, d = {plan.dose:.4f}")
    return plan


def phi1(x: float) -> float:
    """φ₁(x) = (1/x + 1)^x，在 (0, ∞) 上严格递增"""
    if x <= 0:
        raise ValueError(f"x 必须为正: {x}")
    return math.exp(x * math.log1p(1.0 / x))


def phi2(x: float) -> float:
    """φ₂(x) = x·(e^{1/x} - 1)，在 (0, ∞) 上严格递减"""
    if x <= 0:
        raise ValueError(f"x 必须为正: {x}")
    return x * math.expm1(1.0 / x)


def palliative_n_bounds(
    t_r_tilde: float,
    k2_tilde: float,
    bounds: DoseBounds
) -> Tuple[int, int]:
    """
    姑息问题的 N_min = ⌈T̃_R/log(d_max/k̃₂+1)⌉ 与 N_max = ⌈T̃_R/log(d_min/k̃₂+1)⌉

    Args:
        t_r_tilde: T̃_R (> 0)
        k2_tilde: k̃₂
        bounds: 剂量约束

    Returns:
        (n_min, n_max)
    """
    if t_r_tilde <= 0:
        raise ValueError(f"t_r_tilde 必须为正: {t_r_tilde}")
    n_min = max(1, _ceil(t_r_tilde / math.log1p(bounds.d_max / k2_tilde)))
    n_max = max(1, _ceil(t_r_tilde / math.log1p(bounds.d_min / k2_tilde)))
    if n_min > n_max:
        raise InfeasibleError(
            f"(H2) 不成立: N_min = {n_min} > N_max = {n_max}", condition="H2"
        )
    return n_min, n_max


def _threshold_dose(t_r_tilde: float, k2_tilde: float, n: int) -> float:
    """使约束取等号的等剂量 k̃₂(e^{T̃_R/N} - 1)"""
    return k2_tilde * math.expm1(t_r_tilde / n)


def palliative_fixed_n(
    t_r_tilde: float,
    k2_tilde: float,
    n: int,
    bounds: DoseBounds
) -> PalliativePlan:
    """
    固定 N 的近似姑息问题: 唯一解 d̂ᵢ = k̃₂(e^{T̃_R/N} - 1)，N ∈ [N_min, N_max - 1]

    Args:
        t_r_tilde: T̃_R
        k2_tilde: k̃₂
        n: 给药次数
        bounds: 剂量约束

    Returns:
        姑息方案
    """
    n_min, n_max = palliative_n_bounds(t_r_tilde, k2_tilde, bounds)
    if n < n_min:
        raise InfeasibleError(
            f"N = {n} 时所需剂量超过 d_max (需要 N ≥ {n_min})", condition="d_max"
        )
    if n > n_max - 1:
        raise InfeasibleError(
            f"N = {n} 时剂量低于 d_min (需要 N ≤ {n_max - 1})", condition="d_min"
        )
    dose = _threshold_dose(t_r_tilde, k2_tilde, n)
    return PalliativePlan(n=n, dose=dose, total=n * dose, case_tag="fixed_n")


def palliative_optimal(
    t_r_tilde: float,
    k2_tilde: float,
    bounds: DoseBounds,
    n_cap: Optional[int] = None
) -> PalliativePlan:
    """
    近似姑息问题的全局最优解

    a) N̂ = N_max - 1，剂量 d*，当 (N_max - 1)·d* ≤ N_max·d_min (相等时也取 a)
    b) N̂ = N_max，剂量 d_min，其他情况

    T̃_R ≤ 0 时约束恒成立，返回 (1, d_min)。

    Args:
        t_r_tilde: T̃_R
        k2_tilde: k̃₂
        bounds: 剂量约束
        n_cap: 方案容量上限

    Returns:
        最优姑息方案
    """
    if t_r_tilde <= 0:
        return PalliativePlan(n=1, dose=bounds.d_min, total=bounds.d_min, case_tag="trivial")

    n_min, n_max = palliative_n_bounds(t_r_tilde, k2_tilde, bounds)

    if n_cap is not None and n_cap < n_max:
        # 容量截断后 f₂ 在 N 上递减，取最大可行 N
        if n_cap < n_min:
            raise InfeasibleError(
                f"给药容量 {n_cap} 小于 N_min = {n_min}", condition="capacity"
            )
        plan = palliative_fixed_n(t_r_tilde, k2_tilde, n_cap, bounds)
        logger.debug(f"姑息最优 (容量截断): N = {plan.n}, d = {plan.dose:.4f}")
        return plan

    case_b = PalliativePlan(
        n=n_max, dose=bounds.d_min, total=n_max * bounds.d_min, case_tag="b"
    )
    if n_max - 1 < n_min:
        return case_b

    d_star = _threshold_dose(t_r_tilde, k2_tilde, n_max - 1)
    if (n_max - 1) * d_star <= n_max * bounds.d_min:
        plan = PalliativePlan(
            n=n_max - 1, dose=d_star, total=(n_max - 1) * d_star, case_tag="a"
        )
    else:
        plan = case_b
    logger.debug(f"姑息最优: 情形 {plan.case_tag}, N = {plan.n}, d = {plan.dose:.4f}")
    return plan


def curative_value_approx(d_min: float, cumulative_D: float, k2_tilde: float) -> float:
    """
    最优 log f̂₁ 关于 d_min 的近似 (D/k̃₂)·log φ₁(k̃₂/d_min)

    d_min 越小取值越大。
    """
    return cumulative_D / k2_tilde * math.log(phi1(k2_tilde / d_min))


def palliative_total_approx(t_r_tilde: float, k2_tilde: float, d_min: float) -> float:
    """
    最优累计剂量关于 d_min 的近似 T̃_R·k̃₂·φ₂(1/log(d_min/k̃₂ + 1) - 1/T̃_R)

    d_min 越小取值越小。
    """
    x = 1.0 / math.log1p(d_min / k2_tilde) - 1.0 / t_r_tilde
    return t_r_tilde * k2_tilde * phi2(x)
