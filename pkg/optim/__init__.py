"""
优化模块
治愈/姑息问题的目标函数、解析最优解与精确求解器
"""

from .errors import InfeasibleError
from .objective import (
    DoseBounds,
    PalliativeTarget,
    MainHypothesisReport,
    FeasibilityCheck,
    LogF1Operator,
    log_f1,
    log_f1_hat,
    check_main_hypothesis,
    rest_time,
    t_r_tilde,
    palliative_feasible,
    final_tumor_ratio,
)
from .closed_form import (
    IntRange,
    CurativePlan,
    PalliativePlan,
    feasible_n_range_curative,
    curative_fixed_n,
    curative_optimal,
    phi1,
    phi2,
    palliative_n_bounds,
    palliative_fixed_n,
    palliative_optimal,
    curative_value_approx,
    palliative_total_approx,
)
from .nlp import (
    SolverConfig,
    SolveReport,
    OracleProblem,
    OracleResult,
    grad_log_f1,
    project_simplex_box,
    solve_curative_exact,
    solve_palliative_exact,
    brute_force_oracle,
)

__all__ = [
    "InfeasibleError",
    "DoseBounds",
    "PalliativeTarget",
    "MainHypothesisReport",
    "FeasibilityCheck",
    "LogF1Operator",
    "log_f1",
    "log_f1_hat",
    "check_main_hypothesis",
    "rest_time",
    "t_r_tilde",
    "palliative_feasible",
    "final_tumor_ratio",
    "IntRange",
    "CurativePlan",
    "PalliativePlan",
    "feasible_n_range_curative",
    "curative_fixed_n",
    "curative_optimal",
    "phi1",
    "phi2",
    "palliative_n_bounds",
    "palliative_fixed_n",
    "palliative_optimal",
    "curative_value_approx",
    "palliative_total_approx",
    "SolverConfig",
    "SolveReport",
    "OracleProblem",
    "OracleResult",
    "grad_log_f1",
    "project_simplex_box",
    "solve_curative_exact",
    "solve_palliative_exact",
    "brute_force_oracle",
]
