"""
PK/PD 数据模型
药物、肿瘤、给药方案与轨迹
"""

import math
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DrugPK(BaseModel):
    """药物 PK/PD 参数 (单室模型 + Emax 效应)"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(..., alias="lambda", gt=0, description="清除率 λ (1/day)")
    sigma: float = Field(..., gt=0, description="剂量-浓度换算系数 σ (m²/l)")
    k1: float = Field(..., gt=0, description="最大效应系数 k₁")
    k2: float = Field(..., gt=0, description="半效应浓度 k₂ (mg/l)")

    @property
    def k2_tilde(self) -> float:
        """以剂量单位表示的半效应水平 k̃₂ = k₂/σ (mg/m²)"""
        return self.k2 / self.sigma

    @property
    def half_life(self) -> float:
        """消除半衰期 (天)"""
        return math.log(2.0) / self.lambda_

    @classmethod
    def from_half_life(cls, half_life: float, sigma: float, k1: float, k2: float) -> "DrugPK":
        """
        由半衰期构造

        Args:
            half_life: 消除半衰期 (天)
            sigma: 剂量-浓度换算系数
            k1: 最大效应系数
            k2: 半效应浓度

        Returns:
            DrugPK 实例
        """
        if half_life <= 0:
            raise ValueError(f"half_life 必须为正: {half_life}")
        return cls(lambda_=math.log(2.0) / half_life, sigma=sigma, k1=k1, k2=k2)

    @staticmethod
    def sigma_from_patient(body_surface: float, volume_distribution: float, weight: float) -> float:
        """
        σ = α / (V_D·β)

        Args:
            body_surface: 体表面积 α (m²)
            volume_distribution: 分布容积 V_D (l/kg)
            weight: 体重 β (kg)
        """
        for name, value in (
            ("body_surface", body_surface),
            ("volume_distribution", volume_distribution),
            ("weight", weight),
        ):
            if value <= 0:
                raise ValueError(f"{name} 必须为正: {value}")
        return body_surface / (volume_distribution * weight)

    @classmethod
    def temozolomide(cls) -> "DrugPK":
        """替莫唑胺 (TMZ) 参考参数"""
        return cls(lambda_=9.242, sigma=4e-3, k1=60.0, k2=0.36)


class TumorModel(BaseModel):
    """Gompertz 肿瘤模型，只保存相对量 (不存储 θ)"""
    model_config = ConfigDict(frozen=True)

    xi: float = Field(..., gt=0, description="Gompertz 增长率 ξ (1/day)")
    l0_rel: float = Field(..., gt=0, lt=1, description="初始相对大小 L₀/θ")

    @classmethod
    def high_grade_glioma(cls) -> "TumorModel":
        """高级别胶质瘤参考参数 (倍增时间约 126 天，初始 25% 容量)"""
        return cls(xi=5.51e-3, l0_rel=0.25)


class DoseSchedule(BaseModel):
    """给药方案: 给药时间、剂量与终止时间 T"""
    model_config = ConfigDict(frozen=True)

    times: Tuple[float, ...] = Field(..., description="给药时间 t_i (天)")
    doses: Tuple[float, ...] = Field(..., description="单次剂量 d_i (mg/m²)")
    horizon_T: float = Field(..., description="终止时间 T (天)")

    @model_validator(mode="after")
    def _check_invariants(self) -> "DoseSchedule":
        n = len(self.times)
        if n == 0:
            raise ValueError("times 不能为空")
        if len(self.doses) != n:
            raise ValueError(f"times 与 doses 长度不一致: {n} != {len(self.doses)}")
        if self.times[0] < 0:
            raise ValueError(f"times[0] 不能为负: {self.times[0]}")
        for a, b in zip(self.times, self.times[1:]):
            if not b > a:
                raise ValueError(f"times 必须严格递增: {a} >= {b}")
        if not self.times[-1] < self.horizon_T:
            raise ValueError(f"最后给药时间必须早于 horizon_T: {self.times[-1]} >= {self.horizon_T}")
        for d in self.doses:
            if not d > 0:
                raise ValueError(f"doses 必须为正: {d}")
        return self

    @property
    def n(self) -> int:
        """给药次数 N"""
        return len(self.times)

    @property
    def total_dose(self) -> float:
        """累计剂量"""
        return math.fsum(self.doses)

    @property
    def min_gap(self) -> float:
        """最小给药间隔 s (N = 1 时取 T - t₁)"""
        if self.n == 1:
            return self.horizon_T - self.times[0]
        return min(b - a for a, b in zip(self.times, self.times[1:]))

    @property
    def min_gap_with_horizon(self) -> float:
        """包含末段 t_N → T 的最小间隔"""
        return min(self.min_gap, self.horizon_T - self.times[-1])

    @classmethod
    def equal_doses(cls, times: List[float], dose: float, horizon_T: float) -> "DoseSchedule":
        """所有时间点使用同一剂量"""
        return cls(times=tuple(times), doses=(dose,) * len(times), horizon_T=horizon_T)


class Trajectory(BaseModel):
    """采样轨迹: L(t)/θ 与 c(t)"""
    model_config = ConfigDict(frozen=True)

    sample_times: Tuple[float, ...] = Field(..., description="采样时间 (天)")
    tumor_ratio: Tuple[float, ...] = Field(..., description="L(t)/θ")
    concentration: Tuple[float, ...] = Field(..., description="c(t) (mg/l)")

    @model_validator(mode="after")
    def _check_ranges(self) -> "Trajectory":
        if not (len(self.sample_times) == len(self.tumor_ratio) == len(self.concentration)):
            raise ValueError("轨迹各列长度不一致")
        if any(not 0.0 < x < 1.0 for x in self.tumor_ratio):
            raise ValueError("tumor_ratio 必须位于 (0, 1)")
        if any(c < 0.0 for c in self.concentration):
            raise ValueError("concentration 不能为负")
        return self

    @property
    def final_ratio(self) -> float:
        """末端 L(T)/θ"""
        return self.tumor_ratio[-1]

    def to_rows(self) -> List[Tuple[float, float, float]]:
        """转换为 (day, tumor_ratio, concentration) 行"""
        return list(zip(self.sample_times, self.tumor_ratio, self.concentration))
