"""
目标函数与约束
精确 log f₁、近似 log f̂₁、主假设诊断与姑息阈值变换
"""

import math
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import get_settings
from pkpd import DrugPK, TumorModel, DoseSchedule, log_ratio_from_effect, ratio_from_log


class DoseBounds(BaseModel):
    """单次剂量上下界与 (治愈问题的) 累计剂量"""
    model_config = ConfigDict(frozen=True)

    d_min: float = Field(..., gt=0, description="单次剂量下界 (有效性)")
    d_max: float = Field(..., gt=0, description="单次剂量上界 (毒性)")
    cumulative_D: Optional[float] = Field(default=None, gt=0, description="累计剂量 D")

    @model_validator(mode="after")
    def _check_order(self) -> "DoseBounds":
        # d_min = d_max 作为退化区间保留 (单行 N = D/d_min)
        if self.d_min > self.d_max:
            raise ValueError(f"d_min 不能大于 d_max: {self.d_min} > {self.d_max}")
        return self

    def require_cumulative(self) -> float:
        """返回累计剂量 D，缺失时报错"""
        if self.cumulative_D is None:
            raise ValueError("治愈问题需要累计剂量 D (cumulative_D)")
        return self.cumulative_D


class PalliativeTarget(BaseModel):
    """姑息阈值 L*/θ 及其时间变换 T_R、T̃_R"""
    model_config = ConfigDict(frozen=True)

    l_star_rel: float = Field(..., gt=0, lt=1, description="阈值 L*/θ")
    t_r: float = Field(..., description="时间变换 T_R (天)")
    t_r_tilde: float = Field(..., description="缩放阈值 T̃_R = (λ/k₁)(T + T_R)")

    @classmethod
    def build(
        cls,
        tm: TumorModel,
        pk: DrugPK,
        horizon_T: float,
        l_star_rel: float
    ) -> "PalliativeTarget":
        """由模型参数构造阈值"""
        t_r = rest_time(tm, l_star_rel)
        return cls(
            l_star_rel=l_star_rel,
            t_r=t_r,
            t_r_tilde=t_r_tilde(pk, horizon_T, t_r)
        )


class MainHypothesisReport(BaseModel):
    """主假设 d_max·e^{-λs} ≪ k̃₂ 的诊断结果"""
    lhs: float = Field(..., description="d_max·e^{-λs}")
    k2_tilde: float = Field(..., description="k̃₂ (mg/m²)")
    ratio: float = Field(..., description="lhs/k̃₂")
    min_gap: float = Field(..., description="所用的最小间隔 s (天)")
    threshold: float = Field(..., description="警告阈值")

    @property
    def passed(self) -> bool:
        """ratio 不超过阈值"""
        return self.ratio <= self.threshold


class FeasibilityCheck(BaseModel):
    """姑息约束 log f₁ ≥ T̃_R 的检查结果"""
    feasible: bool = Field(..., description="是否满足约束")
    slack: float = Field(..., description="log f₁ - T̃_R (对数空间)")


def check_times(times: Sequence[float], horizon_T: float) -> np.ndarray:
    """检查给药时间: 非空、非负、严格递增且早于 T"""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times 不能为空")
    if t[0] < 0:
        raise ValueError(f"times[0] 不能为负: {t[0]}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times 必须严格递增")
    if not t[-1] < horizon_T:
        raise ValueError(f"最后给药时间必须早于 horizon_T: {t[-1]} >= {horizon_T}")
    return t


def check_doses(doses: Sequence[float], n: Optional[int] = None) -> np.ndarray:
    """检查剂量非负 (允许 0，用于极限与梯度求值)"""
    d = np.asarray(doses, dtype=float)
    if d.ndim != 1:
        raise ValueError("doses 必须是一维")
    if n is not None and d.size != n:
        raise ValueError(f"doses 长度应为 {n}，实际为 {d.size}")
    if np.any(d < 0):
        raise ValueError("doses 不能为负")
    return d


class LogF1Operator:
    """
    固定 (times, T) 下的 log f₁(d)

    log f₁ = Σᵢ log(aᵢ·d + k̃₂) - Σᵢ log(bᵢ·d + k̃₂)，
    其中 aᵢⱼ = e^{λ(tⱼ - tᵢ)}、bᵢⱼ = e^{λ(tⱼ - tᵢ₊₁)} (j ≤ i)，所有因子 ≤ 1。
    """

    def __init__(self, pk: DrugPK, times: Sequence[float], horizon_T: float):
        """
        Args:
            pk: 药物参数
            times: 给药时间
            horizon_T: 终止时间 T
        """
        t = check_times(times, horizon_T)
        n = t.size
        nxt = np.append(t[1:], horizon_T)
        lower = np.tril(np.ones((n, n), dtype=bool))
        # 上三角的指数被截断为 0 再屏蔽，避免溢出
        num_exp = np.minimum(t[None, :] - t[:, None], 0.0)
        den_exp = np.minimum(t[None, :] - nxt[:, None], 0.0)
        self.n = n
        self.k2_tilde = pk.k2_tilde
        self.numerator = np.where(lower, np.exp(pk.lambda_ * num_exp), 0.0)
        self.denominator = np.where(lower, np.exp(pk.lambda_ * den_exp), 0.0)

    def _levels(self, d: np.ndarray):
        return self.numerator @ d + self.k2_tilde, self.denominator @ d + self.k2_tilde

    def value(self, doses: Sequence[float]) -> float:
        """log f₁(d)"""
        d = check_doses(doses, self.n)
        num, den = self._levels(d)
        return float(np.sum(np.log(num)) - np.sum(np.log(den)))

    def gradient(self, doses: Sequence[float]) -> np.ndarray:
        """∂ log f₁ / ∂d"""
        d = check_doses(doses, self.n)
        num, den = self._levels(d)
        return self.numerator.T @ (1.0 / num) - self.denominator.T @ (1.0 / den)

    def hessian(self, doses: Sequence[float]) -> np.ndarray:
        """∂² log f₁ / ∂d²"""
        d = check_doses(doses, self.n)
        num, den = self._levels(d)
        a = self.numerator / num[:, None]
        b = self.denominator / den[:, None]
        return b.T @ b - a.T @ a

    def value_batch(self, dose_matrix: np.ndarray) -> np.ndarray:
        """对每一行剂量向量求 log f₁"""
        dm = np.atleast_2d(np.asarray(dose_matrix, dtype=float))
        num = dm @ self.numerator.T + self.k2_tilde
        den = dm @ self.denominator.T + self.k2_tilde
        return np.sum(np.log(num), axis=1) - np.sum(np.log(den), axis=1)


def log_f1(
    pk: DrugPK,
    times: Sequence[float],
    horizon_T: float,
    doses: Sequence[float]
) -> float:
    """
    精确目标 log f₁(N, d) = (λ/k₁)·∫₀ᵀ ρ(s) ds

    Args:
        pk: 药物参数
        times: 给药时间
        horizon_T: 终止时间 T
        doses: 剂量

    Returns:
        log f₁
    """
    return LogF1Operator(pk, times, horizon_T).value(doses)


def log_f1_hat(k2_tilde: float, doses: Sequence[float]) -> float:
    """
    主假设下的近似目标 log f̂₁ = Σᵢ log(dᵢ/k̃₂ + 1)，与给药时间无关

    Args:
        k2_tilde: k̃₂
        doses: 剂量
    """
    d = check_doses(doses)
    return float(np.sum(np.log1p(d / k2_tilde)))


def check_main_hypothesis(
    pk: DrugPK,
    sched: DoseSchedule,
    d_max: float,
    threshold: Optional[float] = None
) -> MainHypothesisReport:
    """
    计算主假设诊断量 d_max·e^{-λs}，s 为最小给药间隔

    只做诊断，是否接受由调用方决定。

    Args:
        pk: 药物参数
        sched: 给药方案
        d_max: 单次剂量上界
        threshold: 警告阈值，默认取配置 diagnostics.warn_ratio

    Returns:
        诊断报告
    """
    if threshold is None:
        threshold = get_settings().diagnostics.warn_ratio
    s = sched.min_gap
    lhs = d_max * math.exp(-pk.lambda_ * s)
    return MainHypothesisReport(
        lhs=lhs,
        k2_tilde=pk.k2_tilde,
        ratio=lhs / pk.k2_tilde,
        min_gap=s,
        threshold=threshold
    )


def rest_time(tm: TumorModel, l_star_rel: float) -> float:
    """
    T_R = (1/ξ)·log(log(L*/θ)/log(L₀/θ))

    阈值高于初始大小时 T_R 为负。

    Args:
        tm: 肿瘤模型
        l_star_rel: 阈值 L*/θ
    """
    if not 0.0 < l_star_rel < 1.0:
        raise ValueError(f"l_star_rel 必须位于 (0, 1): {l_star_rel}")
    return math.log(math.log(l_star_rel) / math.log(tm.l0_rel)) / tm.xi


def t_r_tilde(pk: DrugPK, horizon_T: float, t_r: float) -> float:
    """T̃_R = (λ/k₁)·(T + T_R)"""
    if horizon_T <= 0:
        raise ValueError(f"horizon_T 必须为正: {horizon_T}")
    return pk.lambda_ / pk.k1 * (horizon_T + t_r)


def palliative_feasible(
    pk: DrugPK,
    sched: DoseSchedule,
    target: PalliativeTarget
) -> FeasibilityCheck:
    """
    检查 L(T) ≤ L*，即 log f₁ ≥ T̃_R

    Args:
        pk: 药物参数
        sched: 给药方案
        target: 姑息阈值
    """
    slack = log_f1(pk, sched.times, sched.horizon_T, sched.doses) - target.t_r_tilde
    return FeasibilityCheck(feasible=slack >= 0.0, slack=slack)


def final_tumor_ratio(
    tm: TumorModel,
    pk: DrugPK,
    horizon_T: float,
    log_f1_value: float
) -> float:
    """
    由 log f₁ 直接得到 L(T)/θ

    Args:
        tm: 肿瘤模型
        pk: 药物参数
        horizon_T: 终止时间 T
        log_f1_value: log f₁
    """
    effect = pk.k1 / pk.lambda_ * log_f1_value
    return ratio_from_log(log_ratio_from_effect(tm, horizon_T, effect))
