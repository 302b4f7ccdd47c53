"""
参考表格比对
读取随仓库发布的期望值 CSV，逐单元格按列容差比较
"""

import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from utils import get_logger
from .tables import TableResult

logger = get_logger(__name__)

EXPECTED_DIR = Path(__file__).parent / "expected"


class ColumnCheck(BaseModel):
    """
    单列比较规则

    abs: |actual - expected| ≤ tol
    max: actual ≤ tol (期望值只作展示)
    exact: 完全相等 (整数与文本列)
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["abs", "max", "exact"] = Field(default="abs")
    tol: float = Field(default=0.0, ge=0)
    solver: bool = Field(default=False, description="该列来自精确求解器")


TOLERANCES: Dict[int, Dict[str, ColumnCheck]] = {
    2: {
        "dose": ColumnCheck(tol=0.005),
        "ratio_l0": ColumnCheck(tol=0.005),
        "d_bar_min": ColumnCheck(tol=0.05, solver=True),
        "d_bar_max": ColumnCheck(tol=0.05, solver=True),
        "ratio_l0_exact": ColumnCheck(tol=0.005, solver=True),
    },
    3: {
        "n": ColumnCheck(kind="exact"),
        "dose": ColumnCheck(tol=0.005),
        "pattern": ColumnCheck(kind="exact"),
        "ratio_l0": ColumnCheck(tol=0.005),
        "dose_intensity": ColumnCheck(tol=0.01),
    },
    4: {
        "dose_hat": ColumnCheck(tol=0.005),
        "total_hat": ColumnCheck(tol=0.01),
        "ratio_hat": ColumnCheck(tol=1.5e-5),
        "d_bar_min": ColumnCheck(tol=0.005, solver=True),
        "d_bar_max": ColumnCheck(tol=0.005, solver=True),
        "total_exact": ColumnCheck(tol=0.5, solver=True),
        "ratio_exact": ColumnCheck(kind="max", tol=0.18135, solver=True),
    },
    5: {
        "n": ColumnCheck(kind="exact"),
        "dose": ColumnCheck(tol=0.01),
        "total": ColumnCheck(tol=0.01),
        "pattern": ColumnCheck(kind="exact"),
        "ratio_theta": ColumnCheck(tol=1.5e-5),
        "dose_intensity": ColumnCheck(tol=0.01),
        "case": ColumnCheck(kind="exact"),
    },
}


class CellCheck(BaseModel):
    """单元格比较结果"""
    label: str
    column: str
    expected: Union[float, str]
    actual: Optional[Union[float, str]] = None
    deviation: Optional[float] = None
    passed: bool
    note: str = ""


class ReproductionReport(BaseModel):
    """整表比较结果"""
    table_id: int
    cells: List[CellCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(cell.passed for cell in self.cells)

    @property
    def failures(self) -> List[CellCheck]:
        return [cell for cell in self.cells if not cell.passed]

    @property
    def max_deviation(self) -> float:
        """数值列 (abs 规则) 的最大偏差"""
        devs = [cell.deviation for cell in self.cells if cell.deviation is not None]
        return max(devs) if devs else 0.0


def expected_path(table_id: int) -> Path:
    return EXPECTED_DIR / f"table{table_id}.csv"


def load_expected(table_id: int) -> pd.DataFrame:
    """
    读取期望值表

    Args:
        table_id: 表格编号

    Returns:
        以 label 为行键的 DataFrame
    """
    if table_id not in TOLERANCES:
        raise ValueError(f"未知表格编号: {table_id}")
    path = expected_path(table_id)
    return pd.read_csv(path, comment="#", dtype={"label": str, "pattern": str, "case": str})


def _check_cell(
    label: str,
    column: str,
    rule: ColumnCheck,
    expected,
    actual,
    converged: bool
) -> CellCheck:
    base = {"label": label, "column": column, "expected": expected}
    if actual is None or (isinstance(actual, float) and math.isnan(actual)):
        return CellCheck(**base, passed=False, note="缺少计算值")
    if rule.solver and not converged:
        return CellCheck(**base, actual=actual, passed=False, note="求解器未收敛")
    if rule.kind == "exact":
        if isinstance(expected, str) or isinstance(actual, str):
            ok = str(actual) == str(expected)
        else:
            ok = float(actual) == float(expected)
        return CellCheck(**base, actual=actual, passed=ok)
    value = float(actual)
    if rule.kind == "max":
        return CellCheck(
            **base, actual=value, passed=value <= rule.tol, note=f"要求 ≤ {rule.tol:g}"
        )
    deviation = abs(value - float(expected))
    return CellCheck(
        **base, actual=value, deviation=deviation, passed=deviation <= rule.tol
    )


def compare_table(
    table_id: int,
    result: TableResult,
    expected: Optional[pd.DataFrame] = None
) -> ReproductionReport:
    """
    将重建的表与期望值逐单元格比较

    期望表中为空的单元格不比较；行按 label 匹配，缺失行的单元格记为失败。

    Args:
        table_id: 表格编号
        result: 重建结果
        expected: 期望值，默认读取内置 CSV

    Returns:
        比较报告
    """
    rules = TOLERANCES.get(table_id)
    if rules is None:
        raise ValueError(f"未知表格编号: {table_id}")
    if expected is None:
        expected = load_expected(table_id)

    actual_rows = {str(row["label"]): row for _, row in result.frame.iterrows()}
    report = ReproductionReport(table_id=table_id)
    for _, exp_row in expected.iterrows():
        label = str(exp_row["label"])
        act_row = actual_rows.get(label)
        converged = True
        if act_row is not None and "converged" in act_row.index and not pd.isna(act_row["converged"]):
            converged = bool(act_row["converged"])
        for column, rule in rules.items():
            if column not in exp_row.index or pd.isna(exp_row[column]):
                continue
            expected_value = exp_row[column]
            if not isinstance(expected_value, str):
                expected_value = float(expected_value)
            actual_value = None
            if act_row is not None and column in act_row.index and not pd.isna(act_row[column]):
                actual_value = act_row[column]
                if not isinstance(actual_value, str):
                    actual_value = float(actual_value)
            report.cells.append(
                _check_cell(label, column, rule, expected_value, actual_value, converged)
            )

    if report.passed:
        logger.info(f"表格 {table_id}: {len(report.cells)} 个单元格全部通过")
    else:
        logger.warning(f"表格 {table_id}: {len(report.failures)}/{len(report.cells)} 个单元格未通过")
    return report


def write_frame(frame: pd.DataFrame, path: Union[str, Path, None] = None) -> str:
    """
    以固定格式写出 CSV，path 为空时返回文本

    Args:
        frame: 数据
        path: 输出路径
    """
    text = frame.to_csv(index=False, lineterminator="\n")
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info(f"已写入 {path}")
    return text
