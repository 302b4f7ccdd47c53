"""
报表、参考表格重建与比对测试
"""

import time

import pandas as pd
import pytest

from treatment import (
    ColumnCheck,
    TableResult,
    build_table,
    compare_table,
    curative_report,
    figure_data,
    load_expected,
    palliative_report,
    run_rows,
    write_frame,
)


def test_run_rows_keeps_input_order():
    def slow_square(x):
        time.sleep(0.01 * (5 - x))
        return {"x": x, "sq": x * x}

    rows = run_rows(slow_square, [0, 1, 2, 3, 4], workers=4)
    assert [r["x"] for r in rows] == [0, 1, 2, 3, 4]


class TestCurativeReport:
    def test_rows_and_optimum(self, run_cfg):
        result = curative_report(run_cfg, workers=2)
        assert list(result.frame["label"]) == [str(n) for n in range(29, 41)]
        assert result.optimal_label == "40"
        assert result.optimal_position() == 11
        assert result.all_converged
        best = result.frame.iloc[result.optimal_position()]
        assert best["dose"] == pytest.approx(143.75)
        assert best["ratio_l0"] == pytest.approx(0.73, abs=0.005)
        # 等剂量方案下 L(T) 随 N 单调减小
        ratios = list(result.frame["ratio_l0"])
        assert all(b < a for a, b in zip(ratios, ratios[1:]))

    def test_optimal_only(self, run_cfg):
        result = curative_report(run_cfg.with_overrides(pattern="21/28d"), optimal_only=True)
        assert list(result.frame["n"]) == [57]

    def test_display(self, run_cfg):
        result = curative_report(run_cfg, optimal_only=True)
        assert result.display_rows() == [["40", "40", "143.75", "0.73"]]


class TestPalliativeReport:
    def test_rows(self, run_cfg):
        result = palliative_report(run_cfg, workers=2)
        assert list(result.frame["n"]) == list(range(33, 41))
        assert result.optimal_label == "40"
        # 近似解都略微超出阈值
        assert (result.frame["slack_hat"] < 0).all()
        assert (result.frame["ratio_hat"] - 0.1813).abs().max() < 1e-4

    def test_optimal_row_carries_case(self, run_cfg):
        cfg = run_cfg.with_overrides(pattern="21/28d")
        result = palliative_report(cfg)
        assert list(result.frame["n"]) == list(range(33, 52))
        best = result.frame.iloc[result.optimal_position()]
        assert (best["n"], best["case"]) == (51, "a")
        assert (result.frame["case"].iloc[:-1] == "fixed_n").all()

    def test_case_b_row_appended(self, run_cfg):
        cfg = run_cfg.with_overrides(d_min=75.0, pattern="21/28d")
        result = palliative_report(cfg)
        last = result.frame.iloc[-1]
        assert (last["n"], last["case"], last["dose_hat"]) == (63, "b", 75.0)
        assert result.optimal_position() == len(result.frame) - 1

    def test_trivial_threshold(self, run_cfg):
        result = palliative_report(run_cfg.with_overrides(l_star_rel=0.7))
        assert list(result.frame["case"]) == ["trivial"]
        assert result.frame["slack_hat"].iloc[0] > 0


class TestReproduce:
    @pytest.mark.parametrize("table_id", [3, 5])
    def test_sweep_tables_match(self, table_id):
        result = build_table(table_id, workers=2)
        report = compare_table(table_id, result)
        assert report.passed, [c.model_dump() for c in report.failures]

    @pytest.mark.slow
    @pytest.mark.parametrize("table_id", [2, 4])
    def test_solver_tables_match(self, table_id):
        result = build_table(table_id)
        assert result.all_converged
        report = compare_table(table_id, result)
        assert report.passed, [c.model_dump() for c in report.failures]

    def test_table3_optimum_is_smallest_d_min(self):
        result = build_table(3)
        assert result.optimal_label == "50"

    def test_table5_cases(self):
        result = build_table(5)
        assert list(result.frame["case"]) == ["b", "a", "b", "a"]
        assert result.optimal_label == "50"

    def test_unknown_table(self):
        with pytest.raises(ValueError):
            build_table(7)
        with pytest.raises(ValueError):
            load_expected(1)

    def test_perturbed_cell_fails(self):
        result = build_table(3)
        frame = result.frame.copy()
        frame.loc[frame["label"] == "150", "dose"] += 0.1
        report = compare_table(3, result.model_copy(update={"frame": frame}))
        assert not report.passed
        assert [(c.label, c.column) for c in report.failures] == [("150", "dose")]
        assert report.max_deviation == pytest.approx(0.1, abs=0.006)

    def test_table5_tolerance_is_one_printed_unit(self):
        expected = pd.DataFrame({"label": ["100"], "total": [5112.64]})
        ok = pd.DataFrame({"label": ["100"], "total": [5112.648]})
        bad = pd.DataFrame({"label": ["100"], "total": [5112.652]})
        assert compare_table(5, TableResult(title="t", frame=ok), expected).passed
        assert not compare_table(5, TableResult(title="t", frame=bad), expected).passed

    def test_missing_row_fails(self):
        result = build_table(5)
        frame = result.frame[result.frame["label"] != "75"]
        report = compare_table(5, result.model_copy(update={"frame": frame}))
        assert {c.label for c in report.failures} == {"75"}
        assert all(c.note for c in report.failures)

    def test_unconverged_solver_column_fails(self):
        expected = pd.DataFrame({"label": ["40"], "d_bar_min": [143.74]})
        frame = pd.DataFrame({"label": ["40"], "d_bar_min": [143.75], "converged": [False]})
        report = compare_table(2, TableResult(title="t", frame=frame), expected)
        assert not report.passed
        assert report.failures[0].note == "求解器未收敛"
        frame["converged"] = True
        assert compare_table(2, TableResult(title="t", frame=frame), expected).passed

    def test_upper_bound_column(self):
        expected = pd.DataFrame({"label": ["40"], "ratio_exact": [0.1813]})
        ok = pd.DataFrame({"label": ["40"], "ratio_exact": [0.18131]})
        bad = pd.DataFrame({"label": ["40"], "ratio_exact": [0.1814]})
        assert compare_table(4, TableResult(title="t", frame=ok), expected).passed
        assert not compare_table(4, TableResult(title="t", frame=bad), expected).passed

    def test_exact_rule(self):
        assert ColumnCheck(kind="exact").tol == 0.0


class TestOutput:
    def test_csv_is_deterministic(self, tmp_path):
        result = build_table(5)
        text = write_frame(result.rounded())
        assert text == write_frame(build_table(5).rounded())
        assert text.splitlines()[0].startswith("label,d_min,n,dose,total,pattern")
        path = tmp_path / "out" / "table5.csv"
        write_frame(result.rounded(), path)
        assert path.read_text(encoding="utf-8") == text

    def test_rounding_keeps_raw_frame(self):
        result = build_table(5)
        assert result.rounded()["dose"].iloc[1] == 100.25
        assert result.frame["dose"].iloc[1] != 100.25


class TestFigures:
    def test_figure_one_columns(self, run_cfg):
        fig = figure_data(1, run_cfg, step=1.0)
        assert fig.all_converged
        frame = fig.frame
        assert list(frame.columns) == [
            "day", "untreated", "curative_n29", "curative_n35", "curative_n40",
            "ut", "palliative_n33", "palliative_n36", "palliative_n40",
        ]
        assert len(frame) == 211
        assert frame["day"].iloc[-1] == 210.0
        assert frame["palliative_n40"].iloc[-1] <= 0.18135
        assert frame["untreated"].iloc[-1] > frame["ut"].iloc[-1]

    def test_figure_two_columns(self, run_cfg):
        frame = figure_data(2, run_cfg, step=2.0).frame
        names = [f"curative_dmin{d}" for d in ("150", "100", "75", "50")]
        names += [f"palliative_dmin{d}" for d in ("150", "100", "75", "50")]
        assert list(frame.columns) == ["day", "untreated"] + names

    def test_unknown_figure(self, run_cfg):
        with pytest.raises(ValueError):
            figure_data(3, run_cfg, step=1.0)

    def test_unconverged_solver_is_reported(self, run_cfg):
        cfg = run_cfg.with_overrides(optimality_tol=1e-300, max_iterations=1)
        fig = figure_data(1, cfg, step=10.0)
        assert not fig.all_converged
        assert fig.unconverged == ("palliative_n33", "palliative_n36", "palliative_n40")
        assert len(fig.frame.columns) == 9
