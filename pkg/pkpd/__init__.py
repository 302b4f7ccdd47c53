"""
PK/PD 模块
提供药物浓度、Emax 效应与 Gompertz/Norton-Simon 肿瘤轨迹
"""

from .models import DrugPK, TumorModel, DoseSchedule, Trajectory
from .core import (
    concentration,
    emax_effect,
    cumulative_effect,
    log_tumor_ratio,
    tumor_ratio,
    log_ratio_from_effect,
    ratio_from_log,
    gompertz_rate,
    sample_trajectory,
)
from .oracle import simulate_ode_oracle

__all__ = [
    "DrugPK",
    "TumorModel",
    "DoseSchedule",
    "Trajectory",
    "concentration",
    "emax_effect",
    "cumulative_effect",
    "log_tumor_ratio",
    "tumor_ratio",
    "log_ratio_from_effect",
    "ratio_from_log",
    "gompertz_rate",
    "sample_trajectory",
    "simulate_ode_oracle",
]
