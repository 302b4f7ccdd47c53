"""
闭式轨迹与 RK4 数值积分的一致性
"""

import math
import sys

import numpy as np
import pytest

from pkpd import (
    DoseSchedule,
    DrugPK,
    TumorModel,
    concentration,
    log_tumor_ratio,
    simulate_ode_oracle,
    tumor_ratio,
)


def _random_instance(rng):
    pk = DrugPK(
        lambda_=rng.uniform(1.0, 20.0),
        sigma=4e-3,
        k1=rng.uniform(0.5, 2.0),
        k2=rng.uniform(0.2, 0.6),
    )
    tm = TumorModel(xi=rng.uniform(1e-3, 0.1), l0_rel=rng.uniform(0.1, 0.9))
    n = int(rng.integers(1, 13))
    start = rng.uniform(0.0, 0.5)
    times = start + np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 0.8, size=n - 1))])
    horizon = float(times[-1] + rng.uniform(0.1, 0.8))
    sched = DoseSchedule(
        times=tuple(float(t) for t in times),
        doses=tuple(float(d) for d in rng.uniform(50.0, 250.0, size=n)),
        horizon_T=horizon,
    )
    return tm, pk, sched


@pytest.mark.slow
def test_closed_form_matches_rk4_randomized():
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(200):
        tm, pk, sched = _random_instance(rng)
        step = min(1.0 / 64, 0.02 / pk.lambda_)
        traj = simulate_ode_oracle(tm, pk, sched, step)
        exact = tumor_ratio(tm, pk, sched, sched.horizon_T)
        rel = abs(traj.final_ratio - exact) / exact
        worst = max(worst, rel)
    assert worst <= 1e-6


def _daily_instance(rng):
    """按天给药、最多 40 次、k₁ 取到参考药物量级"""
    pk = DrugPK(
        lambda_=rng.uniform(1.0, 20.0),
        sigma=4e-3,
        k1=rng.uniform(1.0, 60.0),
        k2=rng.uniform(0.2, 0.6),
    )
    tm = TumorModel(xi=rng.uniform(1e-3, 0.1), l0_rel=rng.uniform(0.1, 0.9))
    n = int(rng.integers(1, 41))
    start = int(rng.integers(0, 7))
    days = start + np.concatenate([[0], np.cumsum(rng.integers(1, 8, size=n - 1))])
    horizon = float(days[-1] + rng.integers(1, 15))
    sched = DoseSchedule(
        times=tuple(float(d) for d in days),
        doses=tuple(float(d) for d in rng.uniform(50.0, 250.0, size=n)),
        horizon_T=horizon,
    )
    return tm, pk, sched


@pytest.mark.slow
def test_closed_form_matches_rk4_daily_schedules():
    rng = np.random.default_rng(20240612)
    compared = 0
    for _ in range(40):
        tm, pk, sched = _daily_instance(rng)
        step = 0.01 / max(pk.lambda_, tm.xi * pk.k1)
        traj = simulate_ode_oracle(tm, pk, sched, step, coarse_step=1.0 / 16)
        exact_log = log_tumor_ratio(tm, pk, sched, sched.horizon_T)
        if exact_log < -800.0:
            # 闭式解已下溢，数值解也应落在下限
            assert traj.final_ratio == sys.float_info.min
        elif exact_log > -700.0:
            got = math.log(traj.final_ratio)
            assert abs(got - exact_log) <= 1e-6 * max(1.0, abs(exact_log))
            compared += 1
    assert compared >= 10


def test_coarse_step_agrees_with_fine(tm, pk):
    sched = DoseSchedule(times=(0.0, 1.0, 8.0), doses=(150.0, 150.0, 200.0), horizon_T=30.0)
    fine = simulate_ode_oracle(tm, pk, sched, 1.0 / 512)
    coarse = simulate_ode_oracle(tm, pk, sched, 1.0 / 512, coarse_step=0.25)
    assert len(coarse.sample_times) < len(fine.sample_times)
    assert coarse.final_ratio == pytest.approx(fine.final_ratio, rel=1e-9)
    with pytest.raises(ValueError):
        simulate_ode_oracle(tm, pk, sched, 0.1, coarse_step=0.0)


@pytest.mark.slow
def test_usual_treatment_rk4(tm, pk):
    from treatment import usual_treatment_schedule

    sched = usual_treatment_schedule(210.0)
    traj = simulate_ode_oracle(tm, pk, sched, 1.0 / 256)
    assert traj.final_ratio == pytest.approx(tumor_ratio(tm, pk, sched, 210.0), rel=1e-6)


def test_untreated_rk4(tm, pk):
    traj = simulate_ode_oracle(tm, pk, None, 0.5, horizon_T=210.0)
    assert traj.final_ratio == pytest.approx(tumor_ratio(tm, pk, None, 210.0), rel=1e-9)
    assert set(traj.concentration) == {0.0}


def test_steps_do_not_cross_doses(tm, pk):
    sched = DoseSchedule(times=(0.3, 1.1), doses=(100.0, 100.0), horizon_T=2.0)
    traj = simulate_ode_oracle(tm, pk, sched, 0.25)
    for t in (0.3, 1.1, 2.0):
        assert t in traj.sample_times
    # 给药时刻的采样取左极限
    i = traj.sample_times.index(1.1)
    assert traj.concentration[i] == pytest.approx(
        concentration(pk, sched, 0.3) * np.exp(-pk.lambda_ * 0.8), rel=1e-12
    )


def test_invalid_step(tm, pk):
    with pytest.raises(ValueError):
        simulate_ode_oracle(tm, pk, None, 0.0, horizon_T=1.0)
