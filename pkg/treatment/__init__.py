"""
治疗方案模块
运行参数、逐 N 报表、参考表格重建与比对
"""

from .run_config import RunConfig, load_run_config, parse_run_config
from .tables import (
    TableResult,
    FigureResult,
    TABLE_IDS,
    FIGURE_IDS,
    build_table,
    curative_report,
    palliative_report,
    curative_selection_row,
    palliative_selection_row,
    usual_treatment_schedule,
    figure_data,
    pattern_times,
    run_rows,
)
from .reproduce import (
    ColumnCheck,
    CellCheck,
    ReproductionReport,
    TOLERANCES,
    load_expected,
    compare_table,
    write_frame,
)

__all__ = [
    "RunConfig",
    "load_run_config",
    "parse_run_config",
    "TableResult",
    "FigureResult",
    "TABLE_IDS",
    "FIGURE_IDS",
    "build_table",
    "curative_report",
    "palliative_report",
    "curative_selection_row",
    "palliative_selection_row",
    "usual_treatment_schedule",
    "figure_data",
    "pattern_times",
    "run_rows",
    "ColumnCheck",
    "CellCheck",
    "ReproductionReport",
    "TOLERANCES",
    "load_expected",
    "compare_table",
    "write_frame",
]
