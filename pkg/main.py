#!/usr/bin/env python3
"""
节拍化疗给药优化 - 主入口
提供轨迹模拟、治愈/姑息方案求解、主假设诊断与参考表格重建
"""

import sys
import argparse
from pathlib import Path
from typing import List, Optional

# 确保项目根目录在 Python 路径中
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

import pandas as pd

from config import get_settings
from utils import (
    setup_logging,
    get_logger,
    print_info,
    print_success,
    print_warning,
    print_error,
    print_table,
)

logger = get_logger(__name__)


def _float_list(text: str) -> List[float]:
    """解析逗号分隔的数字列表"""
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析数字列表: '{text}'")


def _load_config(args):
    """读取 --config (缺省为替莫唑胺参考配置)，再应用 --pattern 覆盖"""
    from treatment import RunConfig, load_run_config

    cfg = load_run_config(args.config) if args.config else RunConfig.temozolomide()
    if getattr(args, "pattern", None):
        cfg = cfg.with_overrides(pattern=args.pattern)
    return cfg


def _emit_csv(frame: pd.DataFrame, out: Optional[str]) -> None:
    """写入 --out，未指定时输出到 stdout"""
    from treatment import write_frame

    text = write_frame(frame, out)
    if out is None:
        sys.stdout.write(text)


def _show(result) -> None:
    position = result.optimal_position()
    rows = result.display_rows()
    highlight = [i == position for i in range(len(rows))]
    print_table(result.title, list(result.frame.columns), rows, highlight)


def _build_schedule(args, cfg):
    """由命令行参数得到给药方案，None 表示未治疗"""
    from pkpd import DoseSchedule
    from scheduler import capacity
    from treatment import pattern_times, usual_treatment_schedule

    chosen = [
        name for name, on in (
            ("--untreated", args.untreated),
            ("--ut", args.ut),
            ("--dose", args.dose is not None),
            ("--doses/--times", args.doses is not None or args.times is not None),
        ) if on
    ]
    if len(chosen) > 1:
        raise ValueError(f"给药方案来源只能指定一种，实际为 {' 与 '.join(chosen)}")
    if args.n is not None and args.dose is None:
        raise ValueError("--n 需要配合 --dose")

    if args.untreated:
        return None
    if args.ut:
        return usual_treatment_schedule(cfg.horizon_T, cfg.start_day)

    pattern = cfg.schedule_pattern()
    if args.times is not None:
        if args.doses is None:
            raise ValueError("--times 需要配合 --doses")
        times, doses = args.times, args.doses
    elif args.doses is not None:
        doses = args.doses
        times = pattern_times(pattern, len(doses), cfg.start_day)
    elif args.dose is not None:
        n = args.n or capacity(pattern, cfg.horizon_T, cfg.start_day)
        times = pattern_times(pattern, n, cfg.start_day)
        doses = [args.dose] * n
    else:
        raise ValueError("需要指定给药方案: --ut、--untreated、--dose、--doses 或 --times")
    return DoseSchedule(times=tuple(times), doses=tuple(doses), horizon_T=cfg.horizon_T)


def cmd_simulate(args) -> int:
    """模拟肿瘤轨迹"""
    from pkpd import sample_trajectory, simulate_ode_oracle

    cfg = _load_config(args)
    sched = _build_schedule(args, cfg)
    step = args.step or get_settings().reproduce.trajectory_step
    tm, pk = cfg.tumor(), cfg.drug()

    if args.oracle:
        traj = simulate_ode_oracle(tm, pk, sched, step, horizon_T=cfg.horizon_T)
    else:
        traj = sample_trajectory(tm, pk, sched, step, horizon_T=cfg.horizon_T)

    frame = pd.DataFrame(traj.to_rows(), columns=["day", "tumor_ratio", "concentration"])
    _emit_csv(frame, args.out)
    source = "未治疗" if sched is None else f"{sched.n} 次给药, 累计 {sched.total_dose:.2f} mg/m²"
    print_success(
        f"{source}: L(T)/θ = {traj.final_ratio:.5f}, "
        f"L(T)/L₀ = {traj.final_ratio / tm.l0_rel:.4f}"
    )
    return 0


def cmd_curative(args) -> int:
    """治愈问题: 固定累计剂量，最小化 L(T)"""
    from treatment import curative_report

    cfg = _load_config(args)
    result = curative_report(cfg, exact=args.exact, optimal_only=args.optimal_only)
    _show(result)
    if args.out:
        _emit_csv(result.rounded(), args.out)

    best = result.frame.iloc[result.optimal_position()]
    print_success(
        f"最优方案: N = {best['n']}, 每次 {best['dose']:.2f} mg/m², 模式 {cfg.pattern}, "
        f"L(T)/L₀ = {best['ratio_l0']:.4f}"
    )
    if not result.all_converged:
        print_error("部分精确求解未收敛")
        return 1
    return 0


def cmd_palliative(args) -> int:
    """姑息问题: 保持 L(T) ≤ L*，最小化累计剂量"""
    from treatment import palliative_report

    cfg = _load_config(args)
    result = palliative_report(cfg, exact=args.exact, optimal_only=args.optimal_only)
    _show(result)
    if args.out:
        _emit_csv(result.rounded(), args.out)

    best = result.frame.iloc[result.optimal_position()]
    print_success(
        f"最优方案 (情形 {best['case']}): N = {best['n']}, 每次 {best['dose_hat']:.2f} mg/m², "
        f"累计 {best['total_hat']:.2f} mg/m², L(T)/θ = {best['ratio_hat']:.5f}"
    )
    if not result.all_converged:
        print_error("部分精确求解未收敛")
        return 1
    return 0


def cmd_check_mh(args) -> int:
    """主假设诊断 d_max·e^{-λs} ≪ k̃₂"""
    from optim import check_main_hypothesis
    from pkpd import DoseSchedule
    from scheduler import capacity
    from treatment import pattern_times

    cfg = _load_config(args)
    pk = cfg.drug()
    if args.gap is not None:
        sched = DoseSchedule.equal_doses([0.0, args.gap], cfg.d_max, args.gap + 1.0)
    else:
        pattern = cfg.schedule_pattern()
        n = capacity(pattern, cfg.horizon_T, cfg.start_day)
        sched = DoseSchedule.equal_doses(
            pattern_times(pattern, n, cfg.start_day), cfg.d_max, cfg.horizon_T
        )
    report = check_main_hypothesis(pk, sched, cfg.d_max)

    print_info(f"s = {report.min_gap:g} 天")
    print_info(f"d_max·e^(-λs) = {report.lhs:.5g}")
    print_info(f"k̃₂ = {report.k2_tilde:.6g} mg/m²")
    print_info(f"比值 = {report.ratio:.3e} (阈值 {report.threshold:g})")
    if report.passed:
        print_success("PASS: 主假设成立")
    else:
        print_warning("WARN: 主假设不成立，近似解可能不可靠")
    return 0


def cmd_reproduce(args) -> int:
    """重建参考表格或曲线数据"""
    from treatment import build_table, compare_table, figure_data

    if args.figure is not None:
        fig = figure_data(args.figure, step=args.step)
        _emit_csv(fig.frame, args.out)
        summary = f"曲线 {args.figure}: {len(fig.frame.columns) - 1} 条轨迹"
        if fig.all_converged:
            print_success(summary)
            return 0
        print_error(f"{summary}，求解器未收敛: {', '.join(fig.unconverged)}")
        return 1

    result = build_table(args.table)
    _show(result)
    report = compare_table(args.table, result)
    for cell in report.failures:
        print_error(
            f"行 {cell.label} 列 {cell.column}: 期望 {cell.expected}，实际 {cell.actual}"
            + (f" ({cell.note})" if cell.note else "")
        )
    _emit_csv(result.rounded(), args.out)

    summary = (
        f"表格 {args.table}: {len(report.cells) - len(report.failures)}/{len(report.cells)} "
        f"个单元格通过，最大偏差 {report.max_deviation:.3g}"
    )
    if report.passed and result.all_converged:
        print_success(summary)
        return 0
    print_error(summary)
    return 1


def build_parser() -> argparse.ArgumentParser:
    """构造命令行解析器"""
    parser = argparse.ArgumentParser(
        description="节拍化疗给药优化 - Gompertz/Norton-Simon 模型下的治愈与姑息方案",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  # 常规方案的肿瘤轨迹
  python main.py simulate --ut --out ut.csv

  # 治愈问题 (含精确求解)
  python main.py curative --config configs/temozolomide.conf --exact

  # 姑息问题，改用 21/28d 模式
  python main.py palliative --pattern 21/28d

  # 主假设诊断
  python main.py check-mh

  # 重建参考表格
  python main.py reproduce --table 4
"""
    )
    parser.add_argument("--debug", action="store_true", help="输出调试日志")
    subparsers = parser.add_subparsers(dest="command", help="可用命令")

    def common(sub, out_help: str = "CSV 输出路径"):
        sub.add_argument("--config", help="参数文件 (key = value)")
        sub.add_argument("--pattern", help="给药模式，如 5/28d")
        sub.add_argument("--out", help=out_help)

    # 模拟命令
    sim = subparsers.add_parser("simulate", help="模拟肿瘤轨迹")
    common(sim, "CSV 输出路径 (缺省为 stdout)")
    sim.add_argument("--step", type=float, help="采样步长 (天)")
    sim.add_argument("--oracle", action="store_true", help="使用 RK4 数值积分")
    source = sim.add_mutually_exclusive_group()
    source.add_argument("--ut", action="store_true", help="常规方案 (UT)")
    source.add_argument("--untreated", action="store_true", help="未治疗")
    source.add_argument("--dose", type=float, help="按模式给予等剂量")
    sim.add_argument("--n", type=int, help="配合 --dose 的给药次数 (缺省为模式容量)")
    sim.add_argument("--doses", type=_float_list, help="逗号分隔的剂量")
    sim.add_argument("--times", type=_float_list, help="逗号分隔的给药时间 (配合 --doses)")

    # 治愈命令
    cur = subparsers.add_parser("curative", help="治愈问题")
    common(cur)
    cur.add_argument("--exact", action="store_true", help="同时运行精确求解器")
    cur.add_argument("--optimal-only", action="store_true", help="只输出最优行")

    # 姑息命令
    pal = subparsers.add_parser("palliative", help="姑息问题")
    common(pal)
    pal.add_argument("--exact", action="store_true", help="同时运行精确求解器")
    pal.add_argument("--optimal-only", action="store_true", help="只输出最优行")

    # 主假设诊断
    mh = subparsers.add_parser("check-mh", help="主假设诊断")
    mh.add_argument("--config", help="参数文件 (key = value)")
    mh.add_argument("--pattern", help="给药模式，如 5/28d")
    mh.add_argument("--gap", type=float, help="直接指定最小给药间隔 s (天)")

    # 重建命令
    rep = subparsers.add_parser("reproduce", help="重建参考表格或曲线数据")
    target = rep.add_mutually_exclusive_group(required=True)
    target.add_argument("--table", type=int, choices=[2, 3, 4, 5], help="表格编号")
    target.add_argument("--figure", type=int, choices=[1, 2], help="曲线编号")
    rep.add_argument("--out", help="CSV 输出路径 (缺省为 stdout)")
    rep.add_argument("--step", type=float, help="曲线采样步长 (天)")

    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "curative": cmd_curative,
    "palliative": cmd_palliative,
    "check-mh": cmd_check_mh,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[List[str]] = None) -> int:
    """主函数，返回退出码"""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging("DEBUG" if args.debug else None)

    handler = COMMANDS.get(args.command)
    if handler is None:
        parser.print_help()
        return 2

    try:
        return handler(args)
    except ValueError as e:
        condition = getattr(e, "condition", None)
        prefix = f"[{condition}] " if condition else ""
        print_error(f"{prefix}{e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
